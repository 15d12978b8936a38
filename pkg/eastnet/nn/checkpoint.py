"""Model checkpoints ("EANW").

Layout, all integers little-endian u32:

    magic "EANW" | version | spec length | spec JSON (utf-8, sorted keys)
    | parameter count | one trainable flag byte per parameter
    | parameter values, registry order, float64 row-major
    | memory blob length | embedded "EAMB" snapshot (empty without a bank)

Shapes are not stored: they follow from rebuilding the variant from the
spec, which also reproduces the registry order.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np

from eastnet.exceptions import FormatError
from eastnet.nn.memory import MemorySnapshot, memory_from_bytes, memory_to_bytes
from eastnet.nn.models import NowcastModel, VariantSpec, build_variant
from eastnet.services._constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION

logger = logging.getLogger(__name__)

_U32 = struct.Struct("<I")


def checkpoint_bytes(model: NowcastModel) -> bytes:
	spec = json.dumps(model.spec.to_dict(), sort_keys=True).encode()
	params = list(model.registry.items())
	parts = [
		CHECKPOINT_MAGIC,
		_U32.pack(CHECKPOINT_VERSION),
		_U32.pack(len(spec)),
		spec,
		_U32.pack(len(params)),
		bytes(int(p.requires_grad) for _, p in params),
	]
	parts.extend(p.data.astype("<f8").tobytes() for _, p in params)
	memory = memory_to_bytes(model.memory) if model.memory is not None else b""
	parts += [_U32.pack(len(memory)), memory]
	return b"".join(parts)


def save_checkpoint(model: NowcastModel, path: str | Path) -> None:
	try:
		Path(path).write_bytes(checkpoint_bytes(model))
	except OSError as exc:
		raise FormatError(f"cannot write checkpoint: {exc}", path=str(path))
	logger.info("wrote %s checkpoint to %s", model.kind.value, path)


class _Reader:
	def __init__(self, blob: bytes, path: str | None):
		self.blob = blob
		self.path = path
		self.offset = 0

	def take(self, size: int, what: str) -> bytes:
		end = self.offset + size
		if end > len(self.blob):
			raise FormatError(f"checkpoint truncated while reading {what}", path=self.path, offset=len(self.blob))
		chunk = self.blob[self.offset : end]
		self.offset = end
		return chunk

	def u32(self, what: str) -> int:
		return _U32.unpack(self.take(4, what))[0]


def _parse(blob: bytes, path: str | None) -> tuple[NowcastModel, bytes]:
	reader = _Reader(blob, path)
	magic = reader.take(4, "magic")
	if magic != CHECKPOINT_MAGIC:
		raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}", path=path, offset=0)
	version = reader.u32("version")
	if version != CHECKPOINT_VERSION:
		raise FormatError(f"unsupported checkpoint version {version}", path=path, offset=4)
	spec_offset = reader.offset
	try:
		spec = VariantSpec.from_dict(json.loads(reader.take(reader.u32("spec length"), "spec")))
		model = build_variant(spec)
	except (ValueError, TypeError) as exc:
		raise FormatError(f"unreadable variant spec: {exc}", path=path, offset=spec_offset)
	count = reader.u32("parameter count")
	if count != len(model.registry):
		raise FormatError(
			f"checkpoint holds {count} parameters, {spec.kind.value} has {len(model.registry)}",
			path=path,
			offset=reader.offset - 4,
		)
	flags = reader.take(count, "trainable flags")
	values = {}
	for name, param in model.registry.items():
		raw = reader.take(8 * param.size, name)
		values[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(param.shape)
	memory = reader.take(reader.u32("memory length"), "memory snapshot")
	if reader.offset != len(blob):
		raise FormatError("trailing bytes after checkpoint", path=path, offset=reader.offset)
	model.registry.load_state(values)
	for flag, (_, param) in zip(flags, model.registry.items(), strict=True):
		param.requires_grad = bool(flag)
	return model, memory


def load_checkpoint(path: str | Path) -> NowcastModel:
	try:
		blob = Path(path).read_bytes()
	except OSError as exc:
		raise FormatError(f"cannot read checkpoint: {exc}", path=str(path))
	model, _ = _parse(blob, str(path))
	return model


def checkpoint_memory(path: str | Path) -> MemorySnapshot:
	"""The memory snapshot embedded in a checkpoint."""
	try:
		blob = Path(path).read_bytes()
	except OSError as exc:
		raise FormatError(f"cannot read checkpoint: {exc}", path=str(path))
	_, memory = _parse(blob, str(path))
	if not memory:
		raise FormatError("checkpoint has no memory bank", path=str(path))
	return memory_from_bytes(memory, str(path))
