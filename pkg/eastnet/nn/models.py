"""The five-variant nowcasting ladder.

=========  ==================================================================
STNet      spatial GCRU encoder/decoder, dense ``q x C`` output head
STNetTcov  STNet with calendar covariates fused into every node row
STNetMem   STNet with a per-step memory read concatenated onto the hidden
HMINet     spatial branch over regions plus modal branch over channels,
           fused per step by bilinear link prediction ``H_sp W H_mo^T``
EASTNet    HMINet with pyramidal encoders and decoder kernels generated
           from a memory read over both encoder summaries
=========  ==================================================================

Inputs are batched: ``x`` is ``(B, alpha, N, C)`` and ``t_cov`` is
``(B, alpha + beta, v)``; unbatched inputs are accepted and squeezed back
on output. Decoding starts from a zero observation and feeds back its own
previous prediction at every later step.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from eastnet.core import ops
from eastnet.core.tensor import Tensor
from eastnet.data.mobility import ChannelStats, denormalize
from eastnet.exceptions import ContractError, NumericError, ShapeError
from eastnet.nn.graph import AdaptiveEdges
from eastnet.nn.memory import (
	FilterGenerator,
	MemoryBank,
	generate_filters,
	memory_query,
	memory_value,
)
from eastnet.nn.params import ParamRegistry
from eastnet.nn.recurrent import GATES, GcruStack, StackConfig, decode_step, encode

logger = logging.getLogger(__name__)


class VariantKind(str, enum.Enum):
	STNet = "STNet"
	STNetTcov = "STNetTcov"
	STNetMem = "STNetMem"
	HMINet = "HMINet"
	EASTNet = "EASTNet"

	@property
	def uses_tcov(self) -> bool:
		return self in (VariantKind.STNetTcov, VariantKind.HMINet, VariantKind.EASTNet)

	@property
	def two_branch(self) -> bool:
		return self in (VariantKind.HMINet, VariantKind.EASTNet)


LADDER: tuple[VariantKind, ...] = tuple(VariantKind)


@dataclass
class VariantSpec:
	kind: VariantKind
	n_regions: int
	n_channels: int
	n_covariates: int
	alpha: int = 8
	beta: int = 8
	hidden: int = 32
	order: int = 3
	layers: int = 2
	memory_slots: int = 8
	memory_dim: int = 16
	mu_sp: int = 20
	mu_mo: int = 3
	tcov_dim: int = 2
	seed: int = 0
	# None picks 2 for EASTNet and 1 for every other variant.
	pyramid_factor: int | None = None
	# HMINet only: replace the modal branch by I_C (the STNet special case).
	modal_identity: bool = False

	def __post_init__(self):
		self.kind = VariantKind(self.kind)

	@property
	def pyramid(self) -> int:
		if self.pyramid_factor is not None:
			return self.pyramid_factor
		return 2 if self.kind is VariantKind.EASTNet else 1

	def validate(self) -> VariantSpec:
		dims = {
			"n_regions": self.n_regions,
			"n_channels": self.n_channels,
			"n_covariates": self.n_covariates,
			"alpha": self.alpha,
			"beta": self.beta,
			"hidden": self.hidden,
			"layers": self.layers,
			"memory_slots": self.memory_slots,
			"memory_dim": self.memory_dim,
			"mu_sp": self.mu_sp,
			"mu_mo": self.mu_mo,
			"tcov_dim": self.tcov_dim,
		}
		bad = [f"{key}={value}" for key, value in dims.items() if value < 1]
		if self.order < 0:
			bad.append(f"order={self.order}")
		if bad:
			raise ContractError(f"invalid variant dimensions: {', '.join(bad)}")
		divisor = self.pyramid ** (self.layers - 1)
		if self.alpha % divisor:
			raise ContractError(
				f"alpha={self.alpha} must be divisible by {self.pyramid}^{self.layers - 1} for pyramidal encoding"
			)
		if self.kind is VariantKind.EASTNet and self.memory_dim < 2:
			raise ContractError("EASTNet filter normalization needs memory_dim >= 2")
		if self.modal_identity and self.kind is not VariantKind.HMINet:
			raise ContractError("modal_identity only applies to HMINet")
		return self

	def to_dict(self) -> dict[str, Any]:
		out = asdict(self)
		out["kind"] = self.kind.value
		return out

	@classmethod
	def from_dict(cls, values: dict[str, Any]) -> VariantSpec:
		return cls(**values)


@dataclass
class Forecast:
	"""Normalized predictions ``(B, beta, N, C)`` plus memory scores when the variant has a bank."""

	values: Tensor
	attention: Tensor | None = None
	batched: bool = True

	def numpy(self) -> np.ndarray:
		return self.values.data if self.batched else self.values.data[0]

	def denormalize(self, stats: ChannelStats) -> np.ndarray:
		return denormalize(self.numpy(), stats)


@dataclass
class Branch:
	name: str
	edges: AdaptiveEdges
	encoder: GcruStack
	decoder: GcruStack


@dataclass
class NowcastModel:
	spec: VariantSpec
	registry: ParamRegistry
	branches: dict[str, Branch] = field(default_factory=dict)
	tcov_W: Tensor | None = None
	out_W: Tensor | None = None
	memory: MemoryBank | None = None
	generator: FilterGenerator | None = None

	@property
	def kind(self) -> VariantKind:
		return self.spec.kind

	def parameter_count(self, trainable_only: bool = False) -> int:
		return self.registry.count(trainable_only)


def _build_branch(
	registry: ParamRegistry, name: str, n_nodes: int, in_dim: int, embed_dim: int, spec: VariantSpec, dynamic: bool
) -> Branch:
	edges = AdaptiveEdges(registry, f"{name}.edges", n_nodes, embed_dim)
	encoder = GcruStack(
		registry, f"{name}.enc", in_dim, StackConfig(spec.layers, spec.pyramid, spec.hidden), spec.order
	)
	# Decoders emit one step at a time and never merge.
	decoder = GcruStack(
		registry, f"{name}.dec", in_dim, StackConfig(spec.layers, 1, spec.hidden), spec.order, dynamic=dynamic
	)
	return Branch(name, edges, encoder, decoder)


def build_variant(spec: VariantSpec) -> NowcastModel:
	"""Register every parameter of ``spec`` in a fixed order from ``spec.seed``."""
	spec.validate()
	registry = ParamRegistry(spec.seed)
	model = NowcastModel(spec, registry)
	kind = spec.kind
	N, C, q = spec.n_regions, spec.n_channels, spec.hidden
	extra = spec.tcov_dim if kind.uses_tcov else 0
	if kind.uses_tcov:
		model.tcov_W = registry.glorot("tcov.W", (spec.n_covariates, spec.tcov_dim))

	dynamic = kind is VariantKind.EASTNet
	model.branches["sp"] = _build_branch(registry, "sp", N, C + extra, spec.mu_sp, spec, dynamic)
	two_branch = kind.two_branch and not spec.modal_identity
	if two_branch:
		model.branches["mo"] = _build_branch(registry, "mo", C, N + extra, spec.mu_mo, spec, dynamic)

	if kind is VariantKind.STNetMem:
		model.memory = MemoryBank(registry, "mem", spec.memory_slots, spec.memory_dim, N * q, value_dim=N * q)
	elif kind is VariantKind.EASTNet:
		model.memory = MemoryBank(registry, "mem", spec.memory_slots, spec.memory_dim, (N + C) * q)
		groups = {}
		for name, branch in model.branches.items():
			for layer, shape in enumerate(branch.decoder.kernel_shapes()):
				groups[f"{name}.dec.{layer}"] = {gate: shape for gate in GATES}
		model.generator = FilterGenerator(registry, "mdfg", spec.memory_dim, groups)

	if two_branch:
		model.out_W = registry.glorot("out.W", (q, q))
	else:
		model.out_W = registry.glorot("out.W", (2 * q if kind is VariantKind.STNetMem else q, C))
	logger.debug("built %s with %d parameters", kind.value, registry.count())
	return model


def embed_tcov(t_cov: Tensor, proj: Tensor) -> Tensor:
	"""Per-step covariate embeddings ``T_cov W``, shape ``(..., alpha + beta, v')``."""
	if t_cov.shape[-1] != proj.shape[0]:
		raise ShapeError("embed_tcov", t_cov.shape, proj.shape, detail="calendar width v")
	return ops.matmul(t_cov, proj)


def fuse_links(h_sp: Tensor, weight: Tensor, h_mo: Tensor) -> Tensor:
	"""Region-to-channel link scores ``H_sp W H_mo^T`` (identity activation)."""
	return ops.matmul(ops.matmul(h_sp, weight), ops.transpose2d(h_mo))


def _node_rows(obs: Tensor, embedding: Tensor | None) -> Tensor:
	"""Append the step's covariate embedding ``(B, v')`` to every node row of ``obs``."""
	if embedding is None:
		return obs
	batch, nodes, _ = obs.shape
	width = embedding.shape[-1]
	tiled = ops.expand(ops.reshape(embedding, (batch, 1, width)), (batch, nodes, width))
	return ops.concat([obs, tiled], axis=-1)


def _branch_inputs(model: NowcastModel, obs: Tensor, embedding: Tensor | None) -> dict[str, Tensor]:
	rows = {"sp": _node_rows(obs, embedding)}
	if "mo" in model.branches:
		rows["mo"] = _node_rows(ops.transpose2d(obs), embedding)
	return rows


def _as_batched(x, t_cov) -> tuple[Tensor, Tensor, bool]:
	x = ops.as_tensor(x)
	t_cov = ops.as_tensor(t_cov)
	if x.ndim == 3:
		return ops.reshape(x, (1, *x.shape)), ops.reshape(t_cov, (1, *t_cov.shape)), False
	return x, t_cov, True


def forward(model: NowcastModel, x, t_cov) -> Forecast:
	spec = model.spec
	x, t_cov, batched = _as_batched(x, t_cov)
	batch = x.shape[0]
	N, C = spec.n_regions, spec.n_channels
	if x.shape[1:] != (spec.alpha, N, C):
		raise ShapeError("forward", x.shape, (batch, spec.alpha, N, C), detail="observation window")
	if t_cov.shape != (batch, spec.alpha + spec.beta, spec.n_covariates):
		raise ShapeError(
			"forward", t_cov.shape, (batch, spec.alpha + spec.beta, spec.n_covariates), detail="covariate span"
		)

	embedded = embed_tcov(t_cov, model.tcov_W) if model.tcov_W is not None else None

	def step_embedding(index: int) -> Tensor | None:
		return None if embedded is None else embedded[:, index, :]

	topo = {name: branch.edges.topology() for name, branch in model.branches.items()}
	sequences: dict[str, list[Tensor]] = {name: [] for name in model.branches}
	for t in range(spec.alpha):
		for name, rows in _branch_inputs(model, x[:, t], step_embedding(t)).items():
			sequences[name].append(rows)
	encoded = {name: encode(branch.encoder, sequences[name], topo[name]) for name, branch in model.branches.items()}

	overrides: dict[str, list | None] = {name: None for name in model.branches}
	attention = None
	if model.kind is VariantKind.EASTNet:
		summary = ops.concat(
			[ops.reshape(encoded[name].top, (batch, -1)) for name in ("sp", "mo")],
			axis=1,
		)
		value, attention = memory_query(model.memory, summary, batched=True)
		kernels = generate_filters(model.generator, value)
		for name in model.branches:
			overrides[name] = [kernels[f"{name}.dec.{layer}"] for layer in range(spec.layers)]

	states = {name: list(encoded[name].finals) for name in model.branches}
	prediction = ops.zeros((batch, N, C))
	outputs, step_scores = [], []
	identity = ops.as_tensor(np.eye(C)) if spec.modal_identity else None
	for step in range(spec.beta):
		rows = _branch_inputs(model, prediction, step_embedding(spec.alpha + step))
		tops = {}
		for name, branch in model.branches.items():
			tops[name], states[name] = decode_step(branch.decoder, rows[name], states[name], topo[name], overrides[name])
		if "mo" in tops:
			prediction = fuse_links(tops["sp"], model.out_W, tops["mo"])
		elif identity is not None:
			prediction = fuse_links(tops["sp"], model.out_W, identity)
		elif model.kind is VariantKind.STNetMem:
			value, scores = memory_query(model.memory, tops["sp"], batched=True)
			recalled = ops.reshape(memory_value(model.memory, value), (batch, N, spec.hidden))
			prediction = ops.matmul(ops.concat([tops["sp"], recalled], axis=-1), model.out_W)
			step_scores.append(scores)
		else:
			prediction = ops.matmul(tops["sp"], model.out_W)
		if not np.all(np.isfinite(prediction.data)):
			raise NumericError(f"{model.kind.value} produced non-finite predictions", step=step + 1)
		outputs.append(prediction)

	if step_scores:
		attention = ops.mean(ops.stack(step_scores, axis=1), axis=1)
	return Forecast(ops.stack(outputs, axis=1), attention, batched)
