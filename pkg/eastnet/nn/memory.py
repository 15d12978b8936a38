"""External memory attention and the memory-augmented filter generator.

``memory_query`` projects flattened node embeddings to a query, scores it
against every record of the bank and returns the attention-weighted record
mix. The step-memory variant adds a value projection (``memory_value``);
the filter generator feeds the raw mix through

    Θ = proj2_g(FN_g(proj1(V)))

with one normalization and one output head per kernel group (a decoder
layer of one branch). Only graph-convolution kernels are generated; gate
biases stay static parameters of the cells.

Memory snapshots ("EAMB") let a trained bank be loaded into another model
either frozen or as an initialization for further training.
"""

from __future__ import annotations

import logging
import math
import struct
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from eastnet.core import ops
from eastnet.core.tensor import Tensor
from eastnet.exceptions import ContractError, FormatError, IncompatibleMemoryError, ShapeError
from eastnet.nn.graph import ConvKernel
from eastnet.nn.params import ParamRegistry
from eastnet.services._constants import FN_EPS, MEMORY_MAGIC, MEMORY_VERSION

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<4sIIII")

ImportMode = Literal["freeze", "retrain"]


class MemoryBank:
	"""``m`` learnable records of width ``D`` plus the query projection."""

	def __init__(
		self,
		registry: ParamRegistry,
		name: str,
		slots: int,
		dim: int,
		query_dim: int,
		value_dim: int | None = None,
	):
		if slots < 1 or dim < 1 or query_dim < 1:
			raise ContractError(f"memory bank needs positive m, D, d_flat, got {slots}, {dim}, {query_dim}")
		self.name = name
		self.M = registry.uniform(f"{name}.M", (slots, dim), 1.0 / math.sqrt(dim))
		self.W_Q = registry.glorot(f"{name}.W_Q", (query_dim, dim))
		self.b_Q = registry.zeros(f"{name}.b_Q", (dim,))
		self.W_V: Tensor | None = None
		self.b_V: Tensor | None = None
		if value_dim is not None:
			self.W_V = registry.glorot(f"{name}.W_V", (dim, value_dim))
			self.b_V = registry.zeros(f"{name}.b_V", (value_dim,))

	@property
	def slots(self) -> int:
		return self.M.shape[0]

	@property
	def dim(self) -> int:
		return self.M.shape[1]

	@property
	def query_dim(self) -> int:
		return self.W_Q.shape[0]

	def snapshot_tensors(self) -> dict[str, Tensor]:
		return {"M": self.M, "W_Q": self.W_Q, "b_Q": self.b_Q}


def memory_query(bank: MemoryBank, features: Tensor, batched: bool | None = None) -> tuple[Tensor, Tensor]:
	"""Return ``(V, phi)``: the attention-weighted record mix and the scores.

	``features`` is either one query (any shape with ``d_flat`` elements)
	or a batch whose leading axis indexes sequences. Pass ``batched`` when a
	batch of one would otherwise be read as a single query.
	"""
	unbatched = features.size == bank.query_dim if batched is None else not batched
	if unbatched and features.size != bank.query_dim:
		raise ShapeError("memory_query", features.shape, (bank.query_dim,), detail="flattened query width")
	batch = 1 if unbatched else features.shape[0]
	if unbatched:
		flat = ops.reshape(features, (1, bank.query_dim))
	else:
		if features.size != batch * bank.query_dim:
			raise ShapeError("memory_query", features.shape, (batch, bank.query_dim), detail="flattened query width")
		flat = ops.reshape(features, (batch, bank.query_dim))
	query = ops.add(ops.matmul(flat, bank.W_Q), ops.expand(bank.b_Q, (batch, bank.dim)))
	phi = ops.softmax_rows(ops.matmul(query, ops.transpose2d(bank.M)))
	value = ops.matmul(phi, bank.M)
	if unbatched:
		return ops.reshape(value, (bank.dim,)), ops.reshape(phi, (bank.slots,))
	return value, phi


def memory_value(bank: MemoryBank, value: Tensor) -> Tensor:
	"""Value projection ``V W_V + b_V`` of the step-memory variant."""
	if bank.W_V is None or bank.b_V is None:
		raise ContractError(f"{bank.name} was built without a value projection")
	out = ops.matmul(value if value.ndim == 2 else ops.reshape(value, (1, bank.dim)), bank.W_V)
	return ops.add(out, ops.expand(bank.b_V, out.shape))


def filter_normalize(v: Tensor, gain, shift, eps: float = FN_EPS) -> Tensor:
	"""Standardize along the last axis, then ``* gain + shift``.

	A constant vector has zero variance; ``eps`` keeps the denominator
	positive and the result is exactly ``shift``.
	"""
	width = v.shape[-1]
	if width < 2:
		raise ContractError(f"filter normalization needs at least 2 elements, got {width}")
	centered = ops.sub(v, ops.expand(ops.mean(v, axis=-1, keepdims=True), v.shape))
	variance = ops.mean(ops.square(centered), axis=-1, keepdims=True)
	scale = ops.expand(ops.sqrt(ops.add(variance, eps)), v.shape)
	return ops.add(ops.mul(ops.div(centered, scale), gain), shift)


@dataclass(frozen=True)
class _Slot:
	gate: str
	shape: tuple[int, int, int]
	offset: int

	@property
	def size(self) -> int:
		k1, p, q = self.shape
		return k1 * p * q


class FilterGenerator:
	"""Maps a prototype vector to kernels for every target group.

	``groups`` maps a group name to ``{gate: (K+1, p, q)}``.
	"""

	def __init__(
		self,
		registry: ParamRegistry,
		name: str,
		dim: int,
		groups: Mapping[str, Mapping[str, tuple[int, int, int]]],
		hidden: int | None = None,
	):
		hidden = hidden or dim
		self.name = name
		self.hidden = hidden
		self.W1 = registry.glorot(f"{name}.proj1.W", (dim, hidden))
		self.b1 = registry.zeros(f"{name}.proj1.b", (hidden,))
		self.layout: dict[str, list[_Slot]] = {}
		self.gain: dict[str, Tensor] = {}
		self.shift: dict[str, Tensor] = {}
		self.W2: dict[str, Tensor] = {}
		self.b2: dict[str, Tensor] = {}
		for group, gates in groups.items():
			slots, offset = [], 0
			for gate, shape in gates.items():
				slots.append(_Slot(gate, tuple(shape), offset))
				offset += slots[-1].size
			self.layout[group] = slots
			_, p, q = slots[0].shape
			# Element variance of a generated kernel matches a Glorot-initialized static one.
			bound = math.sqrt(6.0 / (p + q)) / math.sqrt(hidden)
			self.gain[group] = registry.constant(f"{name}.{group}.fn_gain", (), 1.0)
			self.shift[group] = registry.zeros(f"{name}.{group}.fn_shift", ())
			self.W2[group] = registry.uniform(f"{name}.{group}.proj2.W", (hidden, offset), bound)
			self.b2[group] = registry.zeros(f"{name}.{group}.proj2.b", (offset,))

	def group_size(self, group: str) -> int:
		return sum(slot.size for slot in self.layout[group])


def generate_filters(gen: FilterGenerator, value: Tensor) -> dict[str, dict[str, ConvKernel]]:
	"""Per-sequence kernels ``{group: {gate: ConvKernel(B, K+1, p, q)}}``."""
	if value.ndim == 1:
		value = ops.reshape(value, (1, value.shape[0]))
	if value.shape[-1] != gen.W1.shape[0]:
		raise ShapeError("generate_filters", value.shape, gen.W1.shape)
	batch = value.shape[0]
	hidden = ops.add(ops.matmul(value, gen.W1), ops.expand(gen.b1, (batch, gen.hidden)))
	kernels: dict[str, dict[str, ConvKernel]] = {}
	for group, slots in gen.layout.items():
		normed = filter_normalize(hidden, gen.gain[group], gen.shift[group])
		theta = ops.matmul(normed, gen.W2[group])
		theta = ops.add(theta, ops.expand(gen.b2[group], theta.shape))
		kernels[group] = {
			slot.gate: ConvKernel(
				ops.reshape(theta[:, slot.offset : slot.offset + slot.size], (batch, *slot.shape))
			)
			for slot in slots
		}
	return kernels


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


@dataclass
class MemorySnapshot:
	M: np.ndarray
	W_Q: np.ndarray
	b_Q: np.ndarray

	@property
	def slots(self) -> int:
		return self.M.shape[0]

	@property
	def dim(self) -> int:
		return self.M.shape[1]

	@property
	def query_dim(self) -> int:
		return self.W_Q.shape[0]


def memory_to_bytes(bank: MemoryBank) -> bytes:
	header = _HEADER.pack(MEMORY_MAGIC, MEMORY_VERSION, bank.slots, bank.dim, bank.query_dim)
	body = b"".join(t.data.astype("<f8").tobytes() for t in (bank.M, bank.W_Q, bank.b_Q))
	return header + body


def memory_from_bytes(blob: bytes, path: str | None = None) -> MemorySnapshot:
	if len(blob) < _HEADER.size:
		raise FormatError("memory snapshot header truncated", path=path, offset=len(blob))
	magic, version, slots, dim, query_dim = _HEADER.unpack_from(blob, 0)
	if magic != MEMORY_MAGIC:
		raise FormatError(f"bad magic {magic!r}, expected {MEMORY_MAGIC!r}", path=path, offset=0)
	if version != MEMORY_VERSION:
		raise FormatError(f"unsupported memory snapshot version {version}", path=path, offset=4)
	counts = (slots * dim, query_dim * dim, dim)
	expected = _HEADER.size + 8 * sum(counts)
	if len(blob) != expected:
		raise FormatError(
			f"memory snapshot holds {len(blob)} bytes, header implies {expected}",
			path=path,
			offset=min(len(blob), expected),
		)
	offset = _HEADER.size
	arrays = []
	for count in counts:
		arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64))
		offset += 8 * count
	return MemorySnapshot(arrays[0].reshape(slots, dim), arrays[1].reshape(query_dim, dim), arrays[2])


def export_memory(bank: MemoryBank, path: str | Path) -> None:
	try:
		Path(path).write_bytes(memory_to_bytes(bank))
	except OSError as exc:
		raise FormatError(f"cannot write memory snapshot: {exc}", path=str(path))


def load_snapshot(bank: MemoryBank, snapshot: MemorySnapshot, mode: ImportMode, path: str | None = None) -> None:
	"""Copy ``snapshot`` into ``bank``; all-or-nothing on the (m, D) check.

	A snapshot taken from a model with a different query width (another
	region count) still transfers its records; the bank then keeps its own
	query projection.
	"""
	if mode not in ("freeze", "retrain"):
		raise ContractError(f"import mode must be 'freeze' or 'retrain', got {mode!r}")
	if (snapshot.slots, snapshot.dim) != (bank.slots, bank.dim):
		raise IncompatibleMemoryError((snapshot.slots, snapshot.dim), (bank.slots, bank.dim), path=path)
	loaded = [bank.M]
	bank.M.data = snapshot.M.copy()
	if snapshot.query_dim == bank.query_dim:
		bank.W_Q.data = snapshot.W_Q.copy()
		bank.b_Q.data = snapshot.b_Q.copy()
		loaded += [bank.W_Q, bank.b_Q]
	else:
		logger.warning(
			"memory snapshot query width %d differs from target %d; loaded records only",
			snapshot.query_dim,
			bank.query_dim,
		)
	for tensor in loaded:
		tensor.requires_grad = mode == "retrain"


def read_memory(path: str | Path) -> MemorySnapshot:
	try:
		blob = Path(path).read_bytes()
	except OSError as exc:
		raise FormatError(f"cannot read memory snapshot: {exc}", path=str(path))
	return memory_from_bytes(blob, str(path))


def import_memory(bank: MemoryBank, path: str | Path, mode: ImportMode) -> None:
	load_snapshot(bank, read_memory(path), mode, str(path))
