"""Minibatch Adam on MAE with early stopping on validation MAE.

Each epoch shuffles the training windows with the run seed (the last
partial batch is kept), records one tape per batch and steps every
trainable parameter. Validation MAE is measured in raw units; the
parameters of the best validation epoch are restored before the test
windows are scored.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import TypedDict

import numpy as np

from eastnet.core.optim import AdamState, adam_step
from eastnet.core.tensor import Tape
from eastnet.data.mobility import Window, WindowDataset
from eastnet.exceptions import ContractError, NumericError
from eastnet.nn.models import NowcastModel, forward
from eastnet.services.metrics import MetricReport, mae_loss, metrics

logger = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
	batch_size: int = 32
	lr: float = 5e-4
	max_epochs: int = 100
	patience: int = 10
	seed: int = 0

	def __post_init__(self):
		if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
			raise ContractError("batch_size, max_epochs and patience must be >= 1")
		if self.lr < 0 or not math.isfinite(self.lr):
			raise ContractError(f"learning rate must be finite and >= 0, got {self.lr}")
		if self.patience > self.max_epochs:
			raise ContractError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")


class EarlyStopper:
	"""Counts epochs without a strict improvement of the monitored value."""

	def __init__(self, patience: int = 10, delta: float = 0.0):
		self.patience = patience
		self.delta = delta
		self.counter = 0
		self.best_score: float | None = None
		self.best_epoch: int | None = None
		self.early_stop = False

	def __call__(self, score: float, epoch: int) -> bool:
		"""Returns True when ``score`` is the new best."""
		if self.best_score is None or score < self.best_score - self.delta:
			self.best_score = score
			self.best_epoch = epoch
			self.counter = 0
			return True
		self.counter += 1
		if self.counter >= self.patience:
			self.early_stop = True
		return False


class EpochRecord(TypedDict):
	epoch: int
	train_mae: float
	val_mae: float


@dataclass
class Evaluation:
	"""Raw-unit predictions and targets ``(windows, beta, N, C)``."""

	windows: list[Window]
	predictions: np.ndarray
	targets: np.ndarray
	attention: np.ndarray | None = None


@dataclass
class TrainResult:
	report: MetricReport
	test: Evaluation
	best_epoch: int
	best_val_mae: float
	curve: list[EpochRecord] = field(default_factory=list)
	seconds: float = 0.0


def evaluate(
	model: NowcastModel,
	dataset: WindowDataset,
	windows: list[Window] | str,
	batch_size: int = EVAL_BATCH,
) -> Evaluation:
	"""Forward ``windows`` (or a split name) without recording a tape."""
	if isinstance(windows, str):
		windows = dataset.windows[windows]
	spec = model.spec
	if not windows:
		empty = np.zeros((0, spec.beta, spec.n_regions, spec.n_channels))
		return Evaluation([], empty, empty.copy(), None)
	preds, scores = [], []
	for start in range(0, len(windows), batch_size):
		chunk = windows[start : start + batch_size]
		batch = dataset.batch(chunk)
		forecast = forward(model, batch.x, batch.t_cov)
		preds.append(forecast.denormalize(dataset.stats))
		if forecast.attention is not None:
			scores.append(forecast.attention.data)
	return Evaluation(
		list(windows),
		np.concatenate(preds),
		dataset.raw_targets(windows),
		np.concatenate(scores) if scores else None,
	)


def _train_epoch(
	model: NowcastModel,
	dataset: WindowDataset,
	config: TrainConfig,
	state: AdamState,
	rng: np.random.Generator,
	epoch: int,
) -> float:
	windows = dataset.windows["train"]
	order = rng.permutation(len(windows))
	total, seen = 0.0, 0
	for index, start in enumerate(range(0, len(order), config.batch_size)):
		chunk = [windows[i] for i in order[start : start + config.batch_size]]
		batch = dataset.batch(chunk)
		tape = Tape()
		with tape:
			forecast = forward(model, batch.x, batch.t_cov)
			loss = mae_loss(forecast.values, batch.y)
		value = loss.item()
		if not math.isfinite(value):
			raise NumericError("training loss is not finite", epoch=epoch, batch=index)
		tape.backward(loss)
		params = model.registry.trainable()
		adam_step(state, params, {name: tape.gradient(p) for name, p in params.items()})
		total += value * len(chunk)
		seen += len(chunk)
	return total / seen


def train(
	model: NowcastModel,
	dataset: WindowDataset,
	config: TrainConfig,
	log: logging.Logger | None = None,
) -> TrainResult:
	log = log or logger
	if not dataset.windows["train"]:
		raise ContractError("no training windows; the training range is shorter than alpha+beta")
	has_val = bool(dataset.windows["val"])
	if not has_val:
		log.warning("no validation windows; early stopping monitors the training loss")
	started = time.perf_counter()
	rng = np.random.default_rng(config.seed)
	state = AdamState(lr=config.lr)
	stopper = EarlyStopper(config.patience)
	best_state = model.registry.state()
	curve: list[EpochRecord] = []

	for epoch in range(1, config.max_epochs + 1):
		train_mae = _train_epoch(model, dataset, config, state, rng, epoch)
		if has_val:
			val = evaluate(model, dataset, "val")
			val_mae = metrics(val.predictions, val.targets)["mae"]
		else:
			val_mae = train_mae
		curve.append(EpochRecord(epoch=epoch, train_mae=train_mae, val_mae=val_mae))
		log.info("%s epoch=%d train_mae=%.6f val_mae=%.6f", model.kind.value, epoch, train_mae, val_mae)
		if stopper(val_mae, epoch):
			best_state = model.registry.state()
		elif stopper.early_stop:
			log.info("early stop after epoch %d; best epoch %d", epoch, stopper.best_epoch)
			break

	model.registry.load_state(best_state)
	test = evaluate(model, dataset, "test")
	if test.windows:
		report = metrics(test.predictions, test.targets)
	else:
		log.warning("no test windows; metrics are empty")
		report = MetricReport(rmse=float("nan"), mae=float("nan"), mape=None)
	return TrainResult(
		report=report,
		test=test,
		best_epoch=stopper.best_epoch,
		best_val_mae=stopper.best_score,
		curve=curve,
		seconds=time.perf_counter() - started,
	)
