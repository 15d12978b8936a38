"""Historical-average and naive-repeat forecasters.

Both work in raw units on ``(T, N, C)`` arrays and return forecasts shaped
``(windows, beta, N, C)``.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from eastnet.data.calendar import slots_per_day
from eastnet.data.mobility import Window
from eastnet.exceptions import ContractError

logger = logging.getLogger(__name__)


def slot_of_week(slots: np.ndarray, slot_minutes: int) -> np.ndarray:
	"""Position within the week, counted from slot 0."""
	return np.asarray(slots) % (7 * slots_per_day(slot_minutes))


def historical_table(values: np.ndarray, train: range, slot_minutes: int) -> np.ndarray:
	"""``(slots_per_week, N, C)`` means of the training slots at each week position.

	Positions the training range never visits fall back to the global
	per-channel training mean.
	"""
	week = 7 * slots_per_day(slot_minutes)
	slots = np.arange(train.start, train.stop)
	positions = slot_of_week(slots, slot_minutes)
	data = values[train.start : train.stop]
	sums = np.zeros((week, *values.shape[1:]))
	np.add.at(sums, positions, data)
	counts = np.bincount(positions, minlength=week)
	table = np.empty_like(sums)
	seen = counts > 0
	table[seen] = sums[seen] / counts[seen][:, None, None]
	if not seen.all():
		logger.info("HA: %d of %d week positions unseen; using channel means", int((~seen).sum()), week)
		table[~seen] = data.reshape(-1, values.shape[-1]).mean(axis=0)
	return table


def baseline_ha(
	values: np.ndarray,
	train: range,
	windows: Sequence[Window],
	slot_minutes: int,
) -> np.ndarray:
	if len(train) == 0:
		raise ContractError("historical average needs a non-empty training range")
	table = historical_table(values, train, slot_minutes)
	targets = np.array([list(w.targets) for w in windows], dtype=np.int64)
	return table[slot_of_week(targets, slot_minutes)]


def baseline_nf(values: np.ndarray, windows: Sequence[Window]) -> np.ndarray:
	"""Repeat the last observation ``X_t`` for every horizon step."""
	if not windows:
		return np.zeros((0, 0, *values.shape[1:]))
	beta = len(windows[0].targets)
	if any(len(w.inputs) < 1 for w in windows):
		raise ContractError("naive forecast needs alpha >= 1")
	last = values[[w.inputs.stop - 1 for w in windows]]
	return np.repeat(last[:, None], beta, axis=1)
