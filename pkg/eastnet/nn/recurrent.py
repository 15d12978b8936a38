"""GCRU cells, stacked encoder/decoder layers and pyramidal merging.

A GCRU cell is a GRU whose affine maps are K-order graph convolutions:

    u = sigmoid(gc([X, H]; Θ_u) + b_u)
    r = sigmoid(gc([X, H]; Θ_r) + b_r)
    C = tanh(gc([X, r * H]; Θ_C) + b_C)
    H' = u * H + (1 - u) * C

Encoders may shorten the sequence between layers by concatenating groups
of ``pyramid_factor`` adjacent hidden states; decoders never merge. Cells
built with ``dynamic=True`` own only their biases and must be driven with
generated kernels.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from eastnet.core import ops
from eastnet.core.tensor import Tensor
from eastnet.exceptions import ContractError, ShapeError
from eastnet.nn.graph import ConvKernel, convolve, diffuse
from eastnet.nn.params import ParamRegistry

GATES: tuple[str, ...] = ("u", "r", "c")

KernelOverrides = Mapping[str, ConvKernel]


@dataclass(frozen=True)
class StackConfig:
	layers: int = 2
	pyramid_factor: int = 1
	hidden: int = 32

	def __post_init__(self):
		if self.layers < 1 or self.hidden < 1:
			raise ContractError(f"stack needs layers >= 1 and hidden >= 1, got {self.layers}, {self.hidden}")
		if self.pyramid_factor not in (1, 2):
			raise ContractError(f"pyramid_factor must be 1 or 2, got {self.pyramid_factor}")

	@property
	def min_divisor(self) -> int:
		return self.pyramid_factor ** (self.layers - 1)


class GcruCell:
	def __init__(
		self,
		registry: ParamRegistry,
		name: str,
		in_dim: int,
		hidden: int,
		order: int,
		dynamic: bool = False,
	):
		self.name = name
		self.in_dim = in_dim
		self.hidden = hidden
		self.order = order
		self.dynamic = dynamic
		p = in_dim + hidden
		self.kernels: dict[str, ConvKernel] = {}
		if not dynamic:
			for gate in GATES:
				self.kernels[gate] = ConvKernel.create(registry, f"{name}.theta_{gate}", order, p, hidden)
		self.bias: dict[str, Tensor] = {gate: registry.zeros(f"{name}.b_{gate}", (hidden,)) for gate in GATES}

	def kernel_shape(self) -> tuple[int, int, int]:
		return (self.order + 1, self.in_dim + self.hidden, self.hidden)

	def kernel_size(self) -> int:
		k1, p, q = self.kernel_shape()
		return len(GATES) * k1 * p * q


def gcru_step(
	cell: GcruCell,
	x: Tensor,
	h_prev: Tensor,
	topo: Tensor,
	override_kernels: KernelOverrides | None = None,
) -> Tensor:
	"""One GCRU update; ``override_kernels`` replaces Θ_u, Θ_r, Θ_C for this step."""
	if x.shape[-1] != cell.in_dim:
		raise ShapeError("gcru_step", x.shape, (cell.in_dim,), detail=f"{cell.name} input features")
	if h_prev.shape[-1] != cell.hidden or h_prev.shape[:-1] != x.shape[:-1]:
		raise ShapeError("gcru_step", x.shape, h_prev.shape, detail=f"{cell.name} hidden state")
	kernels = override_kernels if override_kernels is not None else cell.kernels
	if not kernels:
		raise ContractError(f"{cell.name} has no static kernels; generated kernels are required")

	terms = diffuse(ops.concat([x, h_prev], axis=-1), topo, cell.order)
	u = convolve(terms, kernels["u"], "sigmoid", cell.bias["u"])
	r = convolve(terms, kernels["r"], "sigmoid", cell.bias["r"])
	gated = ops.concat([x, ops.mul(r, h_prev)], axis=-1)
	c = convolve(diffuse(gated, topo, cell.order), kernels["c"], "tanh", cell.bias["c"])
	return ops.add(ops.mul(u, h_prev), ops.mul(ops.sub(1.0, u), c))


def pyramid_merge(sequence: Sequence[Tensor] | Tensor, factor: int = 2) -> list[Tensor] | Tensor:
	"""Concatenate groups of ``factor`` adjacent steps on the feature axis.

	A list of per-step tensors yields a list; a tensor with time on axis 0
	yields a tensor.
	"""
	as_tensor = isinstance(sequence, Tensor)
	steps = [sequence[i] for i in range(sequence.shape[0])] if as_tensor else list(sequence)
	length = len(steps)
	if factor == 1:
		merged = steps
	elif length % factor:
		raise ContractError(
			f"cannot merge a sequence of length {length} by {factor}; "
			"the observation length alpha must be divisible by factor^(L-1)"
		)
	else:
		merged = [ops.concat(steps[i : i + factor], axis=-1) for i in range(0, length, factor)]
	return ops.stack(merged, axis=0) if as_tensor else merged


class Encoding(NamedTuple):
	finals: list[Tensor]
	top: Tensor


class GcruStack:
	"""``layers`` GCRU cells; layer l > 0 reads layer l-1's (merged) outputs."""

	def __init__(
		self,
		registry: ParamRegistry,
		name: str,
		in_dim: int,
		config: StackConfig,
		order: int,
		dynamic: bool = False,
	):
		self.name = name
		self.config = config
		self.cells: list[GcruCell] = []
		width = in_dim
		for layer in range(config.layers):
			self.cells.append(GcruCell(registry, f"{name}.{layer}", width, config.hidden, order, dynamic))
			width = config.hidden * config.pyramid_factor

	def kernel_shapes(self) -> list[tuple[int, int, int]]:
		return [cell.kernel_shape() for cell in self.cells]


def _layer_overrides(overrides: Sequence[KernelOverrides] | None, layer: int) -> KernelOverrides | None:
	return overrides[layer] if overrides is not None else None


def encode(
	stack: GcruStack,
	inputs: Sequence[Tensor],
	topo: Tensor,
	override_kernels: Sequence[KernelOverrides] | None = None,
) -> Encoding:
	"""Run every layer over the whole sequence, starting from zero hidden states."""
	config = stack.config
	if not inputs:
		raise ContractError("encode needs a non-empty sequence")
	if len(inputs) % config.min_divisor:
		raise ContractError(
			f"sequence length {len(inputs)} is not divisible by "
			f"{config.pyramid_factor}^{config.layers - 1}"
		)
	sequence = list(inputs)
	finals: list[Tensor] = []
	for layer, cell in enumerate(stack.cells):
		if layer > 0:
			sequence = pyramid_merge(sequence, config.pyramid_factor)
		h = ops.zeros((*sequence[0].shape[:-1], cell.hidden))
		outputs = []
		for x in sequence:
			h = gcru_step(cell, x, h, topo, _layer_overrides(override_kernels, layer))
			outputs.append(h)
		finals.append(h)
		sequence = outputs
	return Encoding(finals, finals[-1])


def decode_step(
	stack: GcruStack,
	x: Tensor,
	states: Sequence[Tensor],
	topo: Tensor,
	override_kernels: Sequence[KernelOverrides] | None = None,
) -> tuple[Tensor, list[Tensor]]:
	"""One multi-layer step; returns the top hidden state and the new per-layer states."""
	if len(states) != len(stack.cells):
		raise ContractError(f"{stack.name}: expected {len(stack.cells)} layer states, got {len(states)}")
	new_states: list[Tensor] = []
	inp = x
	for layer, (cell, h_prev) in enumerate(zip(stack.cells, states, strict=True)):
		inp = gcru_step(cell, inp, h_prev, topo, _layer_overrides(override_kernels, layer))
		new_states.append(inp)
	return inp, new_states
