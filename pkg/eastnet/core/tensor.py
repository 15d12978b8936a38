"""Dense float64 tensors and the define-by-run differentiation tape.

A ``Tensor`` is a value: every operation returns a new tensor and never
writes into its operands. While a ``Tape`` is active (``with tape: ...``)
each operation appends a node holding the indices of its inputs and a
closure over the values it saved; ``Tape.backward`` walks the nodes in
exact reverse creation order and sums the gradient contributions that
arrive at each node.

Tensors flagged ``requires_grad`` (model parameters) are registered as
leaves the first time an operation reads them, so a leaf always precedes
its consumers. Other inputs are treated as constants unless explicitly
``watch``-ed.

The active tape is thread-local: one tape is driven by one thread, and
independent models may run on independent threads.
"""

from __future__ import annotations

import logging
import os
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from eastnet.exceptions import ContractError, NumericError

logger = logging.getLogger(__name__)

# Checks every forward result for NaN/Inf when set (EASTNET_DEBUG=1).
DEBUG = os.environ.get("EASTNET_DEBUG", "") not in ("", "0")

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_local = threading.local()


def _tape_stack() -> list[Tape]:
	stack = getattr(_local, "stack", None)
	if stack is None:
		stack = _local.stack = []
	return stack


def active_tape() -> Tape | None:
	stack = _tape_stack()
	return stack[-1] if stack else None


class Tensor:
	"""N-dimensional float64 array that can participate in a tape."""

	__slots__ = ("data", "name", "node_id", "requires_grad", "tape")

	def __init__(self, data, *, requires_grad: bool = False, name: str | None = None):
		self.data: np.ndarray = np.array(data, dtype=np.float64)
		self.requires_grad = requires_grad
		self.name = name
		self.node_id: int | None = None
		self.tape: Tape | None = None

	@classmethod
	def _wrap(cls, array: np.ndarray) -> Tensor:
		out = cls.__new__(cls)
		out.data = array
		out.requires_grad = False
		out.name = None
		out.node_id = None
		out.tape = None
		return out

	@property
	def shape(self) -> tuple[int, ...]:
		return self.data.shape

	@property
	def ndim(self) -> int:
		return self.data.ndim

	@property
	def size(self) -> int:
		return int(self.data.size)

	def item(self) -> float:
		return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

	def numpy(self) -> np.ndarray:
		return self.data.copy()

	def detach(self) -> Tensor:
		return Tensor._wrap(self.data.copy())

	def __len__(self) -> int:
		return self.data.shape[0]

	def __repr__(self) -> str:
		label = f" name={self.name!r}" if self.name else ""
		return f"Tensor(shape={self.shape}{label})"

	# Arithmetic sugar; the rules live in ``eastnet.core.ops``.
	def __add__(self, other):
		return ops.add(self, other)

	def __radd__(self, other):
		return ops.add(other, self)

	def __sub__(self, other):
		return ops.sub(self, other)

	def __rsub__(self, other):
		return ops.sub(other, self)

	def __mul__(self, other):
		return ops.mul(self, other)

	def __rmul__(self, other):
		return ops.mul(other, self)

	def __truediv__(self, other):
		return ops.div(self, other)

	def __neg__(self):
		return ops.neg(self)

	def __matmul__(self, other):
		return ops.matmul(self, other)

	def __getitem__(self, index):
		return ops.take(self, index)


@dataclass
class Node:
	kind: str
	inputs: tuple[int | None, ...]
	backward: BackwardFn | None
	shape: tuple[int, ...]


class Tape:
	"""Append-only record of the operations of one forward pass."""

	def __init__(self) -> None:
		self.nodes: list[Node] = []
		self.gradients: dict[int, Tensor] = {}
		self._leaf_ids: dict[int, int] = {}
		# Keeps watched tensors alive so their id() cannot be reused.
		self._leaves: list[Tensor] = []

	def __enter__(self) -> Tape:
		_tape_stack().append(self)
		return self

	def __exit__(self, *exc) -> None:
		stack = _tape_stack()
		if stack and stack[-1] is self:
			stack.pop()

	def __len__(self) -> int:
		return len(self.nodes)

	def watch(self, tensor: Tensor) -> int:
		"""Register ``tensor`` as a leaf and return its node id."""
		if tensor.tape is self and tensor.node_id is not None:
			return tensor.node_id
		key = id(tensor)
		if key in self._leaf_ids:
			return self._leaf_ids[key]
		node_id = len(self.nodes)
		self.nodes.append(Node("leaf", (), None, tensor.shape))
		self._leaf_ids[key] = node_id
		self._leaves.append(tensor)
		return node_id

	def node_of(self, tensor: Tensor) -> int | None:
		if tensor.tape is self:
			return tensor.node_id
		node_id = self._leaf_ids.get(id(tensor))
		if node_id is not None:
			return node_id
		if tensor.requires_grad:
			return self.watch(tensor)
		return None

	def record(self, kind: str, inputs: Sequence[Tensor], out: np.ndarray, backward: BackwardFn) -> Tensor:
		ids = tuple(self.node_of(t) for t in inputs)
		result = Tensor._wrap(out)
		if all(i is None for i in ids):
			return result
		result.node_id = len(self.nodes)
		result.tape = self
		self.nodes.append(Node(kind, ids, backward, out.shape))
		return result

	def backward(self, loss: Tensor) -> dict[int, Tensor]:
		"""Populate ``gradients`` for every leaf reachable from ``loss``."""
		if loss.size != 1:
			raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
		if loss.tape is not self or loss.node_id is None:
			raise ContractError("loss was not recorded on this tape")
		pending: dict[int, np.ndarray] = {loss.node_id: np.ones(loss.shape)}
		for node_id in range(loss.node_id, -1, -1):
			grad = pending.pop(node_id, None)
			if grad is None:
				continue
			node = self.nodes[node_id]
			if node.backward is None:
				previous = self.gradients.get(node_id)
				self.gradients[node_id] = Tensor._wrap(grad if previous is None else previous.data + grad)
				continue
			for input_id, input_grad in zip(node.inputs, node.backward(grad), strict=True):
				if input_id is None or input_grad is None:
					continue
				if input_id in pending:
					pending[input_id] = pending[input_id] + input_grad
				else:
					pending[input_id] = input_grad
		return self.gradients

	def gradient(self, tensor: Tensor) -> Tensor:
		"""Gradient of the last ``backward`` wrt ``tensor``; zeros if unreachable."""
		node_id = self._leaf_ids.get(id(tensor))
		if node_id is None and tensor.tape is self:
			node_id = tensor.node_id
		grad = self.gradients.get(node_id) if node_id is not None else None
		if grad is None:
			return Tensor._wrap(np.zeros(tensor.shape))
		return grad

	def clear(self) -> None:
		self.nodes.clear()
		self.gradients.clear()
		self._leaf_ids.clear()
		self._leaves.clear()


def record(kind: str, inputs: Sequence[Tensor], out: np.ndarray, backward: BackwardFn) -> Tensor:
	"""Wrap ``out`` and, when a tape is active, append its node."""
	if DEBUG and not np.all(np.isfinite(out)):
		raise NumericError(f"{kind} produced non-finite values")
	tape = active_tape()
	if tape is None:
		return Tensor._wrap(out)
	return tape.record(kind, inputs, out, backward)


from eastnet.core import ops  # noqa: E402
