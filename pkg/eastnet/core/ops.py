"""Differentiable operations over ``Tensor``.

Broadcasting rules are deliberately narrow: binary elementwise ops accept
equal shapes, or a 0-d scalar against any shape. Anything wider goes
through the explicit ``expand`` op, whose gradient sums back down.
``matmul`` follows numpy's batched matmul, so a 2-D operand can be applied
to a stack of matrices; its gradient is summed over the batch.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from eastnet.core.tensor import Tensor, record
from eastnet.exceptions import ContractError, ShapeError

Operand = Tensor | float | int | np.ndarray


def as_tensor(value: Operand) -> Tensor:
	if isinstance(value, Tensor):
		return value
	return Tensor(value)


def zeros(shape: Sequence[int]) -> Tensor:
	return Tensor._wrap(np.zeros(tuple(shape)))


def ones(shape: Sequence[int]) -> Tensor:
	return Tensor._wrap(np.ones(tuple(shape)))


def _sum_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
	"""Undo numpy broadcasting of ``shape`` up to ``grad.shape``."""
	if grad.shape == shape:
		return grad
	while grad.ndim > len(shape):
		grad = grad.sum(axis=0)
	for axis, size in enumerate(shape):
		if size == 1 and grad.shape[axis] != 1:
			grad = grad.sum(axis=axis, keepdims=True)
	return grad.reshape(shape)


def _binary(op: str, a: Operand, b: Operand) -> tuple[Tensor, Tensor]:
	a, b = as_tensor(a), as_tensor(b)
	if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
		raise ShapeError(op, a.shape, b.shape, detail="only scalar broadcasting is supported")
	return a, b


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
	a, b = _binary("add", a, b)
	sa, sb = a.shape, b.shape
	return record("add", (a, b), a.data + b.data, lambda g: (_sum_to(g, sa), _sum_to(g, sb)))


def sub(a: Operand, b: Operand) -> Tensor:
	a, b = _binary("sub", a, b)
	sa, sb = a.shape, b.shape
	return record("sub", (a, b), a.data - b.data, lambda g: (_sum_to(g, sa), _sum_to(-g, sb)))


def mul(a: Operand, b: Operand) -> Tensor:
	a, b = _binary("mul", a, b)
	x, y = a.data, b.data
	return record("mul", (a, b), x * y, lambda g: (_sum_to(g * y, x.shape), _sum_to(g * x, y.shape)))


def div(a: Operand, b: Operand) -> Tensor:
	a, b = _binary("div", a, b)
	x, y = a.data, b.data
	return record(
		"div",
		(a, b),
		x / y,
		lambda g: (_sum_to(g / y, x.shape), _sum_to(-g * x / (y * y), y.shape)),
	)


def scale(x: Operand, factor: float) -> Tensor:
	x = as_tensor(x)
	factor = float(factor)
	return record("scale", (x,), x.data * factor, lambda g: (g * factor,))


def neg(x: Operand) -> Tensor:
	return scale(x, -1.0)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
	out = np.empty_like(x)
	pos = x >= 0
	out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
	e = np.exp(x[~pos])
	out[~pos] = e / (1.0 + e)
	return out


def sigmoid(x: Operand) -> Tensor:
	x = as_tensor(x)
	s = _stable_sigmoid(x.data)
	return record("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def tanh(x: Operand) -> Tensor:
	x = as_tensor(x)
	t = np.tanh(x.data)
	return record("tanh", (x,), t, lambda g: (g * (1.0 - t * t),))


def relu(x: Operand) -> Tensor:
	x = as_tensor(x)
	# relu'(0) is 0
	mask = x.data > 0
	return record("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


def abs_(x: Operand) -> Tensor:
	x = as_tensor(x)
	sign = np.sign(x.data)
	return record("abs", (x,), np.abs(x.data), lambda g: (g * sign,))


def square(x: Operand) -> Tensor:
	x = as_tensor(x)
	v = x.data
	return record("square", (x,), v * v, lambda g: (2.0 * v * g,))


def sqrt(x: Operand) -> Tensor:
	x = as_tensor(x)
	r = np.sqrt(x.data)
	return record("sqrt", (x,), r, lambda g: (0.5 * g / r,))


_UNARY: dict[str, Callable[[Operand], Tensor]] = {
	"sigmoid": sigmoid,
	"tanh": tanh,
	"relu": relu,
	"abs": abs_,
	"square": square,
	"sqrt": sqrt,
	"neg": neg,
}
_BINARY: dict[str, Callable[[Operand, Operand], Tensor]] = {
	"add": add,
	"sub": sub,
	"mul": mul,
	"div": div,
}


def elementwise(kind: str, *inputs: Operand, factor: float | None = None) -> Tensor:
	"""Dispatch an elementwise op by name (``scale`` takes ``factor``)."""
	if kind == "scale":
		if len(inputs) != 1 or factor is None:
			raise ContractError("scale takes one input and a factor")
		return scale(inputs[0], factor)
	if kind in _UNARY:
		if len(inputs) != 1:
			raise ContractError(f"{kind} takes one input, got {len(inputs)}")
		return _UNARY[kind](inputs[0])
	if kind in _BINARY:
		if len(inputs) != 2:
			raise ContractError(f"{kind} takes two inputs, got {len(inputs)}")
		return _BINARY[kind](*inputs)
	raise ContractError(f"unknown elementwise kind {kind!r}")


def activate(x: Tensor, activation: str | None) -> Tensor:
	if activation in (None, "identity"):
		return x
	return elementwise(activation, x)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Operand, b: Operand) -> Tensor:
	a, b = as_tensor(a), as_tensor(b)
	if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
		raise ShapeError("matmul", a.shape, b.shape)
	try:
		out = np.matmul(a.data, b.data)
	except ValueError:
		raise ShapeError("matmul", a.shape, b.shape, detail="batch dimensions disagree")
	x, y = a.data, b.data

	def backward(g: np.ndarray):
		ga = np.matmul(g, np.swapaxes(y, -1, -2))
		gb = np.matmul(np.swapaxes(x, -1, -2), g)
		return _sum_to(ga, x.shape), _sum_to(gb, y.shape)

	return record("matmul", (a, b), out, backward)


def softmax_rows(x: Operand) -> Tensor:
	"""Softmax over the last axis, computed with max subtraction."""
	x = as_tensor(x)
	if x.ndim == 0 or x.shape[-1] < 1:
		raise ShapeError("softmax_rows", x.shape, detail="need at least one column")
	z = x.data - x.data.max(axis=-1, keepdims=True)
	e = np.exp(z)
	s = e / e.sum(axis=-1, keepdims=True)
	return record("softmax", (x,), s, lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),))


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def sum_(x: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:
	x = as_tensor(x)
	shape = x.shape
	out = np.asarray(x.data.sum(axis=axis, keepdims=keepdims), dtype=np.float64)

	def backward(g: np.ndarray):
		if axis is not None and not keepdims:
			g = np.expand_dims(g, axis)
		return (np.broadcast_to(g, shape).copy(),)

	return record("sum", (x,), out, backward)


def mean(x: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:
	x = as_tensor(x)
	count = x.size if axis is None else x.shape[axis]
	return scale(sum_(x, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# Rearrangement
# ---------------------------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
	if not tensors:
		raise ContractError("concat needs at least one tensor")
	tensors = [as_tensor(t) for t in tensors]
	ndim = tensors[0].ndim
	axis = axis % ndim
	for t in tensors[1:]:
		if t.ndim != ndim or any(
			t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
		):
			raise ShapeError("concat", tensors[0].shape, t.shape, detail=f"axis={axis}")
	sizes = [t.shape[axis] for t in tensors]
	bounds = np.cumsum(sizes)[:-1]
	out = np.concatenate([t.data for t in tensors], axis=axis)
	return record("concat", tensors, out, lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
	if not tensors:
		raise ContractError("stack needs at least one tensor")
	tensors = [as_tensor(t) for t in tensors]
	for t in tensors[1:]:
		if t.shape != tensors[0].shape:
			raise ShapeError("stack", tensors[0].shape, t.shape)
	out = np.stack([t.data for t in tensors], axis=axis)
	count = len(tensors)
	return record(
		"stack",
		tensors,
		out,
		lambda g: tuple(np.take(g, i, axis=axis) for i in range(count)),
	)


def take(x: Operand, index) -> Tensor:
	"""Basic (non-fancy) indexing: ints, slices, ellipsis."""
	x = as_tensor(x)
	shape = x.shape
	try:
		out = np.array(x.data[index], dtype=np.float64)
	except IndexError as exc:
		raise ShapeError("take", shape, detail=str(exc))

	def backward(g: np.ndarray):
		full = np.zeros(shape)
		full[index] += g
		return (full,)

	return record("take", (x,), out, backward)


def transpose2d(x: Operand) -> Tensor:
	"""Swap the last two axes (a plain transpose for matrices)."""
	x = as_tensor(x)
	if x.ndim < 2:
		raise ShapeError("transpose2d", x.shape, detail="need at least two axes")
	out = np.ascontiguousarray(np.swapaxes(x.data, -1, -2))
	return record("transpose", (x,), out, lambda g: (np.swapaxes(g, -1, -2),))


def reshape(x: Operand, shape: Sequence[int]) -> Tensor:
	x = as_tensor(x)
	shape = tuple(int(s) for s in shape)
	if -1 in shape:
		known = int(np.prod([s for s in shape if s != -1]))
		if known == 0 or x.size % known:
			raise ShapeError("reshape", x.shape, shape)
		shape = tuple(x.size // known if s == -1 else s for s in shape)
	if int(np.prod(shape)) != x.size:
		raise ShapeError("reshape", x.shape, shape, detail="element count must be preserved")
	source = x.shape
	return record("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(source),))


def expand(x: Operand, shape: Sequence[int]) -> Tensor:
	"""Explicit numpy-style broadcast of ``x`` to ``shape``."""
	x = as_tensor(x)
	shape = tuple(int(s) for s in shape)
	try:
		out = np.broadcast_to(x.data, shape).copy()
	except ValueError:
		raise ShapeError("expand", x.shape, shape)
	source = x.shape
	return record("expand", (x,), out, lambda g: (_sum_to(g, source),))
