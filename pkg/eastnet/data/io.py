"""The "MMT1" dataset file.

    magic "MMT1" | u32 version | u32 T | u32 N | u32 C | u32 v | u32 slot_minutes
    | values (T, N, C) float64 LE row-major | covariates (T, v) float64 LE

Reads validate the header and the exact payload size before building
anything, so a bad file never yields a partial tensor.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from eastnet.data.calendar import TemporalCovariates, covariate_width, slots_per_day
from eastnet.data.mobility import MobilityTensor
from eastnet.exceptions import ContractError, FormatError, ShapeError
from eastnet.services._constants import DATASET_MAGIC, DATASET_VERSION

_HEADER = struct.Struct("<4sIIIIII")


def write_dataset(path: str | Path, tensor: MobilityTensor, covariates: TemporalCovariates) -> None:
	T, N, C = tensor.values.shape
	if covariates.values.shape[0] != T:
		raise ShapeError("write_dataset", tensor.values.shape, covariates.values.shape, detail="slot counts")
	header = _HEADER.pack(DATASET_MAGIC, DATASET_VERSION, T, N, C, covariates.width, tensor.slot_minutes)
	try:
		with open(path, "wb") as fh:
			fh.write(header)
			fh.write(tensor.values.astype("<f8").tobytes())
			fh.write(covariates.values.astype("<f8").tobytes())
	except OSError as exc:
		raise FormatError(f"cannot write dataset: {exc}", path=str(path))


def read_dataset(path: str | Path, expected_v: int | None = None) -> tuple[MobilityTensor, TemporalCovariates]:
	name = str(path)
	try:
		blob = Path(path).read_bytes()
	except OSError as exc:
		raise FormatError(f"cannot read dataset: {exc}", path=name)
	if len(blob) < _HEADER.size:
		raise FormatError("dataset header truncated", path=name, offset=len(blob))
	magic, version, T, N, C, v, slot_minutes = _HEADER.unpack_from(blob, 0)
	if magic != DATASET_MAGIC:
		raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}", path=name, offset=0)
	if version != DATASET_VERSION:
		raise FormatError(f"unsupported dataset version {version}", path=name, offset=4)
	try:
		width = covariate_width(slot_minutes)
	except ContractError as exc:
		raise FormatError(str(exc), path=name, offset=24)
	if v != width:
		raise FormatError(f"header v={v} does not match the calendar width {width}", path=name, offset=20)
	if expected_v is not None and v != expected_v:
		raise FormatError(f"header v={v}, expected {expected_v}", path=name, offset=20)
	n_values, n_cov = T * N * C, T * v
	expected = _HEADER.size + 8 * (n_values + n_cov)
	if len(blob) < expected:
		raise FormatError(f"dataset truncated: {len(blob)} of {expected} bytes", path=name, offset=len(blob))
	if len(blob) > expected:
		raise FormatError("trailing bytes after dataset payload", path=name, offset=expected)
	values = np.frombuffer(blob, dtype="<f8", count=n_values, offset=_HEADER.size).astype(np.float64)
	cov = np.frombuffer(blob, dtype="<f8", count=n_cov, offset=_HEADER.size + 8 * n_values).astype(np.float64)
	return (
		MobilityTensor(values.reshape(T, N, C), slot_minutes),
		TemporalCovariates(cov.reshape(T, v), slots_per_day(slot_minutes)),
	)
