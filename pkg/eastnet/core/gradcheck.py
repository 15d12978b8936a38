"""Central finite-difference check of tape gradients."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping

import numpy as np

from eastnet.core.tensor import Tape, Tensor
from eastnet.exceptions import ContractError, NumericError
from eastnet.services._constants import GRADCHECK_H_RANGE

logger = logging.getLogger(__name__)


def _evaluate(loss_fn: Callable[[], Tensor], coordinate: tuple[str, int] | None = None) -> float:
	value = loss_fn().item()
	if not math.isfinite(value):
		raise NumericError("loss is not finite during gradient check", coordinate=coordinate)
	return value


def grad_check(
	loss_fn: Callable[[], Tensor],
	params: Mapping[str, Tensor],
	n_probes: int = 16,
	h: float = 1e-5,
	seed: int = 0,
) -> float:
	"""Max of ``|analytic - central_fd| / max(1, |analytic|)`` over sampled coordinates.

	``loss_fn`` must rebuild the loss from the current parameter values on
	every call. Coordinates are drawn uniformly over all elements of all
	trainable parameters in ``params``.
	"""
	low, high = GRADCHECK_H_RANGE
	if not low <= h <= high:
		raise ContractError(f"finite-difference step h={h} outside [{low}, {high}]")
	if n_probes < 1:
		raise ContractError("n_probes must be at least 1")
	trainable = {name: p for name, p in params.items() if p.requires_grad}
	if not trainable:
		raise ContractError("no trainable parameters to probe")

	tape = Tape()
	with tape:
		loss = loss_fn()
	if not math.isfinite(loss.item()):
		raise NumericError("loss is not finite at the unperturbed point")
	tape.backward(loss)
	analytic = {name: tape.gradient(p).data for name, p in trainable.items()}

	names = list(trainable)
	sizes = np.array([trainable[n].size for n in names])
	offsets = np.concatenate([[0], np.cumsum(sizes)])
	rng = np.random.default_rng(seed)
	worst = 0.0
	for flat in rng.integers(0, int(offsets[-1]), size=n_probes):
		slot = int(np.searchsorted(offsets, flat, side="right") - 1)
		name = names[slot]
		index = int(flat - offsets[slot])
		param = trainable[name]
		original = param.data
		try:
			bumped = original.copy()
			bumped.flat[index] += h
			param.data = bumped
			plus = _evaluate(loss_fn, (name, index))
			bumped = original.copy()
			bumped.flat[index] -= h
			param.data = bumped
			minus = _evaluate(loss_fn, (name, index))
		finally:
			param.data = original
		numeric = (plus - minus) / (2.0 * h)
		exact = float(analytic[name].flat[index])
		error = abs(exact - numeric) / max(1.0, abs(exact))
		logger.debug("gradcheck %s[%d]: analytic=%.10g numeric=%.10g err=%.3g", name, index, exact, numeric, error)
		worst = max(worst, error)
	return worst
