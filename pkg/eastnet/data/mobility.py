"""Mobility tensors, chronological splits, windows and normalization."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from eastnet.data.calendar import TemporalCovariates
from eastnet.exceptions import ContractError, ShapeError
from eastnet.services._constants import MIN_SPLIT_LENGTH, SPLIT_RATIOS, STD_FLOOR

logger = logging.getLogger(__name__)


@dataclass
class MobilityTensor:
	"""Raw trip counts ``(T, N, C)`` per slot, region and channel."""

	values: np.ndarray
	slot_minutes: int

	def __post_init__(self):
		self.values = np.asarray(self.values, dtype=np.float64)
		if self.values.ndim != 3:
			raise ShapeError("MobilityTensor", self.values.shape, detail="expected (T, N, C)")

	@property
	def n_slots(self) -> int:
		return self.values.shape[0]

	@property
	def n_regions(self) -> int:
		return self.values.shape[1]

	@property
	def n_channels(self) -> int:
		return self.values.shape[2]


class ChannelStats(NamedTuple):
	mean: np.ndarray
	std: np.ndarray


def channel_stats(values: np.ndarray, span: range) -> ChannelStats:
	"""Per-channel mean and std over ``span`` (the training range only)."""
	part = values[span.start : span.stop].reshape(-1, values.shape[-1])
	return ChannelStats(part.mean(axis=0), np.maximum(part.std(axis=0), STD_FLOOR))


def normalize(values: np.ndarray, stats: ChannelStats) -> np.ndarray:
	return (values - stats.mean) / stats.std


def denormalize(values: np.ndarray, stats: ChannelStats) -> np.ndarray:
	return values * stats.std + stats.mean


class SplitRanges(NamedTuple):
	train: range
	val: range
	test: range


def split_chrono(n_slots: int) -> SplitRanges:
	if n_slots < MIN_SPLIT_LENGTH:
		raise ContractError(f"need at least {MIN_SPLIT_LENGTH} slots to split, got {n_slots}")
	n_train = int(n_slots * SPLIT_RATIOS[0])
	n_val = int(n_slots * SPLIT_RATIOS[1])
	return SplitRanges(
		range(0, n_train),
		range(n_train, n_train + n_val),
		range(n_train + n_val, n_slots),
	)


class Window(NamedTuple):
	inputs: range
	targets: range
	covariates: range


def make_windows(span: range, alpha: int, beta: int) -> list[Window]:
	"""Stride-1 windows lying entirely inside ``span``."""
	if alpha < 1 or beta < 1:
		raise ContractError(f"alpha and beta must be >= 1, got {alpha}, {beta}")
	count = len(span) - alpha - beta + 1
	if count < 1:
		logger.warning("range %s is shorter than alpha+beta=%d; no windows", span, alpha + beta)
		return []
	windows = []
	for start in range(span.start, span.start + count):
		mid = start + alpha
		windows.append(Window(range(start, mid), range(mid, mid + beta), range(start, mid + beta)))
	return windows


class Batch(NamedTuple):
	x: np.ndarray
	t_cov: np.ndarray
	y: np.ndarray


class WindowDataset:
	"""A split, normalized mobility tensor served as window batches."""

	def __init__(self, tensor: MobilityTensor, covariates: TemporalCovariates, alpha: int, beta: int):
		if len(covariates) != tensor.n_slots:
			raise ShapeError("WindowDataset", tensor.values.shape, covariates.values.shape, detail="slot counts")
		self.tensor = tensor
		self.covariates = covariates
		self.alpha = alpha
		self.beta = beta
		self.splits = split_chrono(tensor.n_slots)
		self.stats = channel_stats(tensor.values, self.splits.train)
		self.normalized = normalize(tensor.values, self.stats)
		self.windows = {name: make_windows(span, alpha, beta) for name, span in self.splits._asdict().items()}

	@property
	def raw(self) -> np.ndarray:
		return self.tensor.values

	def batch(self, windows: Sequence[Window]) -> Batch:
		idx_in = np.array([w.inputs.start for w in windows])[:, None] + np.arange(self.alpha)
		idx_out = np.array([w.targets.start for w in windows])[:, None] + np.arange(self.beta)
		idx_cov = np.array([w.covariates.start for w in windows])[:, None] + np.arange(self.alpha + self.beta)
		return Batch(self.normalized[idx_in], self.covariates.values[idx_cov], self.normalized[idx_out])

	def raw_targets(self, windows: Sequence[Window]) -> np.ndarray:
		idx_out = np.array([w.targets.start for w in windows])[:, None] + np.arange(self.beta)
		return self.raw[idx_out]
