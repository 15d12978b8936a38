"""Adaptive graph topology and K-order graph convolution.

The topology of each node set is learned from a pair of node embeddings,
``softmax(relu(E F^T))``, which makes every row a probability vector. No
self-loops are forced: the k=0 term of the convolution already carries
each node's own features.

``graph_conv`` computes ``act(sum_k P^k X W_k)``. The powers are applied
iteratively (``P^k X = P (P^(k-1) X)``) and the K+1 products are fused
into a single matmul by stacking ``[X, PX, ..., P^K X]`` along features
against the kernel reshaped to ``((K+1) p, q)``.
"""

from __future__ import annotations

import math
import weakref

from eastnet.core import ops
from eastnet.core.tensor import Tensor, active_tape
from eastnet.exceptions import ShapeError
from eastnet.nn.params import ParamRegistry


class AdaptiveEdges:
	"""Learnable node-embedding pair ``(E, F)`` for one node set."""

	def __init__(self, registry: ParamRegistry, name: str, n_nodes: int, embed_dim: int):
		bound = 1.0 / math.sqrt(embed_dim)
		self.name = name
		self.E = registry.uniform(f"{name}.E", (n_nodes, embed_dim), bound)
		self.F = registry.uniform(f"{name}.F", (n_nodes, embed_dim), bound)
		self._cache: tuple | None = None

	@property
	def n_nodes(self) -> int:
		return self.E.shape[0]

	def topology(self) -> Tensor:
		return adaptive_topology(self)


def adaptive_topology(edges: AdaptiveEdges) -> Tensor:
	"""Row-stochastic ``softmax(relu(E F^T))``, cached until E, F or the tape change."""
	E, F = edges.E, edges.F
	if E.ndim != 2 or E.shape != F.shape:
		raise ShapeError("adaptive_topology", E.shape, F.shape, detail="E and F must share n and mu")
	tape = active_tape()
	cached = edges._cache
	if cached is not None:
		e_data, f_data, tape_ref, topo = cached
		cached_tape = tape_ref() if tape_ref is not None else None
		if e_data is E.data and f_data is F.data and cached_tape is tape:
			return topo
	topo = ops.softmax_rows(ops.relu(ops.matmul(E, ops.transpose2d(F))))
	edges._cache = (E.data, F.data, weakref.ref(tape) if tape is not None else None, topo)
	return topo


class ConvKernel:
	"""Graph-convolution kernel Θ of shape ``(K+1, p, q)``.

	Generated kernels carry a leading batch axis, ``(B, K+1, p, q)``, one
	kernel per sequence.
	"""

	def __init__(self, theta: Tensor):
		if theta.ndim not in (3, 4):
			raise ShapeError("ConvKernel", theta.shape, detail="expected (K+1, p, q) or (B, K+1, p, q)")
		self.theta = theta

	@classmethod
	def create(cls, registry: ParamRegistry, name: str, order: int, p: int, q: int) -> ConvKernel:
		return cls(registry.glorot(name, (order + 1, p, q)))

	@property
	def order(self) -> int:
		return self.theta.shape[-3] - 1

	@property
	def in_dim(self) -> int:
		return self.theta.shape[-2]

	@property
	def out_dim(self) -> int:
		return self.theta.shape[-1]

	@property
	def batched(self) -> bool:
		return self.theta.ndim == 4

	def stacked(self) -> Tensor:
		k1, p, q = self.theta.shape[-3:]
		if self.batched:
			return ops.reshape(self.theta, (self.theta.shape[0], k1 * p, q))
		return ops.reshape(self.theta, (k1 * p, q))


def _check_topology(x: Tensor, topo: Tensor) -> None:
	if topo.ndim != 2 or topo.shape[0] != topo.shape[1] or x.ndim < 2 or topo.shape[1] != x.shape[-2]:
		raise ShapeError("graph_conv", x.shape, topo.shape, detail="topology must be n x n over the node axis")


def diffuse(x: Tensor, topo: Tensor, order: int) -> list[Tensor]:
	"""``[X, P X, ..., P^order X]`` computed iteratively."""
	_check_topology(x, topo)
	terms = [x]
	for _ in range(order):
		terms.append(ops.matmul(topo, terms[-1]))
	return terms


def convolve(
	terms: list[Tensor],
	kernel: ConvKernel,
	activation: str | None = None,
	bias: Tensor | None = None,
) -> Tensor:
	"""Apply ``kernel`` to precomputed diffusion terms (see ``diffuse``)."""
	if len(terms) != kernel.order + 1:
		raise ShapeError("graph_conv", (len(terms),), (kernel.order + 1,), detail="diffusion order vs kernel order")
	if terms[0].shape[-1] != kernel.in_dim:
		raise ShapeError("graph_conv", terms[0].shape, kernel.theta.shape, detail="feature dim vs kernel p")
	features = terms[0] if len(terms) == 1 else ops.concat(terms, axis=-1)
	out = ops.matmul(features, kernel.stacked())
	if bias is not None:
		out = ops.add(out, ops.expand(bias, out.shape))
	return ops.activate(out, activation)


def graph_conv(
	x: Tensor,
	topo: Tensor,
	kernel: ConvKernel,
	activation: str | None = None,
	bias: Tensor | None = None,
) -> Tensor:
	"""``act(sum_k P^k X W_k (+ b))`` with ``P^0 = I``."""
	if x.shape[-1] != kernel.in_dim:
		raise ShapeError("graph_conv", x.shape, kernel.theta.shape, detail="feature dim vs kernel p")
	return convolve(diffuse(x, topo, kernel.order), kernel, activation, bias)
