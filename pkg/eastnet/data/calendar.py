"""One-hot calendar covariates.

Each slot row is ``[time-of-day | day-of-week | month | holiday]`` with
widths ``slots_per_day``, 7, 12 and 1. Day-of-week starts on Monday.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from eastnet.exceptions import ContractError

DEFAULT_START = "2015-10-24T00:00"
MINUTES_PER_DAY = 1440


def slots_per_day(slot_minutes: int) -> int:
	if slot_minutes < 1 or MINUTES_PER_DAY % slot_minutes:
		raise ContractError(f"slot_minutes={slot_minutes} must divide a day ({MINUTES_PER_DAY} minutes)")
	return MINUTES_PER_DAY // slot_minutes


def covariate_width(slot_minutes: int) -> int:
	return slots_per_day(slot_minutes) + 7 + 12 + 1


def slot_times(n_slots: int, slot_minutes: int, start: str = DEFAULT_START) -> np.ndarray:
	return np.datetime64(start, "m") + np.arange(n_slots) * np.timedelta64(slot_minutes, "m")


def slot_dates(n_slots: int, slot_minutes: int, start: str = DEFAULT_START) -> np.ndarray:
	return slot_times(n_slots, slot_minutes, start).astype("datetime64[D]")


def holiday_flags(n_slots: int, slot_minutes: int, holidays: Iterable[str], start: str = DEFAULT_START) -> np.ndarray:
	days = np.array(sorted(holidays), dtype="datetime64[D]")
	return np.isin(slot_dates(n_slots, slot_minutes, start), days)


@dataclass
class TemporalCovariates:
	values: np.ndarray
	slots_per_day: int

	@property
	def width(self) -> int:
		return self.values.shape[1]

	def __len__(self) -> int:
		return self.values.shape[0]

	def block(self, name: str) -> np.ndarray:
		spd = self.slots_per_day
		bounds = {
			"time_of_day": (0, spd),
			"day_of_week": (spd, spd + 7),
			"month": (spd + 7, spd + 19),
			"holiday": (spd + 19, spd + 20),
		}
		low, high = bounds[name]
		return self.values[:, low:high]


def encode_calendar(
	n_slots: int,
	slot_minutes: int,
	start: str = DEFAULT_START,
	holidays: np.ndarray | None = None,
) -> TemporalCovariates:
	"""Covariate rows for ``n_slots`` consecutive slots; ``holidays`` is a bool flag per slot."""
	spd = slots_per_day(slot_minutes)
	times = slot_times(n_slots, slot_minutes, start)
	days = times.astype("datetime64[D]")
	minute_of_day = (times - days).astype(np.int64)
	# 1970-01-01 was a Thursday.
	weekday = (days.astype(np.int64) + 3) % 7
	month = times.astype("datetime64[M]").astype(np.int64) % 12

	rows = np.arange(n_slots)
	out = np.zeros((n_slots, spd + 20))
	out[rows, minute_of_day // slot_minutes] = 1.0
	out[rows, spd + weekday] = 1.0
	out[rows, spd + 7 + month] = 1.0
	if holidays is not None:
		out[:, spd + 19] = np.asarray(holidays, dtype=np.float64)
	return TemporalCovariates(out, spd)
