"""Training loss and evaluation metrics.

Metrics are computed on denormalized (raw count) predictions with every
horizon step pooled. MAPE skips targets whose magnitude is below
``MAPE_MASK_EPS`` and is reported as ``None`` when nothing is left.
"""

from __future__ import annotations

import logging
import math
from typing import TypedDict

import numpy as np

from eastnet.core import ops
from eastnet.core.tensor import Tensor
from eastnet.exceptions import ShapeError
from eastnet.services._constants import MAPE_MASK_EPS

logger = logging.getLogger(__name__)


class MetricReport(TypedDict):
	rmse: float
	mae: float
	mape: float | None


def mae_loss(pred: Tensor, target) -> Tensor:
	"""Mean absolute error; the subgradient at a zero residual is 0."""
	target = ops.as_tensor(target)
	if pred.shape != target.shape:
		raise ShapeError("mae_loss", pred.shape, target.shape)
	return ops.mean(ops.abs_(ops.sub(pred, target)))


def metrics(pred: np.ndarray, target: np.ndarray, mape_mask_eps: float = MAPE_MASK_EPS) -> MetricReport:
	pred = np.asarray(pred, dtype=np.float64)
	target = np.asarray(target, dtype=np.float64)
	if pred.shape != target.shape:
		raise ShapeError("metrics", pred.shape, target.shape)
	err = pred - target
	mask = np.abs(target) >= mape_mask_eps
	mape = None
	if mask.any():
		mape = float(np.mean(np.abs(err[mask] / target[mask])) * 100.0)
	else:
		logger.warning("MAPE not applicable: no target reaches %g", mape_mask_eps)
	return MetricReport(
		rmse=float(math.sqrt(np.mean(err * err))),
		mae=float(np.mean(np.abs(err))),
		mape=mape,
	)


def horizon_metrics(pred: np.ndarray, target: np.ndarray) -> list[MetricReport]:
	"""One report per horizon step; arrays are ``(windows, beta, N, C)``."""
	return [metrics(pred[:, step], target[:, step]) for step in range(pred.shape[1])]


def event_metrics(pred: np.ndarray, target: np.ndarray, in_event: np.ndarray) -> dict[str, MetricReport | None]:
	"""Metrics over windows whose target span touches an event, and over the rest."""
	in_event = np.asarray(in_event, dtype=bool)
	return {
		"event": metrics(pred[in_event], target[in_event]) if in_event.any() else None,
		"normal": metrics(pred[~in_event], target[~in_event]) if (~in_event).any() else None,
	}


def format_mape(value: float | None) -> str:
	return "n/a" if value is None else f"{value:.6f}"
