"""Synthetic multimodal mobility with scripted events.

Every (region, mode) pair gets a base level and a weekly profile built from
daily and weekly harmonics; the profile is computed for one week and tiled,
so an event-free, noise-free series is exactly weekly-periodic. Events and
holidays scale the clean signal, then Poisson-like Gaussian noise with
standard deviation ``noise * sqrt(signal)`` is added and the result is
floored at 0.

Two channel layouts exist. ``supply-demand`` models ``M = C / 2`` transport
modes with channel ``2m`` the demand and ``2m + 1`` the supply of mode
``m``; supply follows demand with a lag. ``purpose`` models ``C``
independent travel purposes.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from eastnet.data.calendar import (
	DEFAULT_START,
	TemporalCovariates,
	encode_calendar,
	holiday_flags,
	slots_per_day,
)
from eastnet.data.events import Event, EventScript
from eastnet.data.mobility import MobilityTensor
from eastnet.exceptions import ConfigError, ContractError

logger = logging.getLogger(__name__)

LAYOUTS = ("supply-demand", "purpose")

# Holiday demand factor applied to every channel.
HOLIDAY_FACTOR = 0.7


@dataclass
class GeneratorConfig:
	n_slots: int
	n_regions: int
	n_channels: int
	slot_minutes: int = 30
	seed: int = 0
	script: EventScript = field(default_factory=EventScript)
	start: str = DEFAULT_START
	holidays: tuple[str, ...] = ()
	layout: str = "supply-demand"
	noise: float = 1.0
	supply_lag: int = 1

	def validate(self) -> None:
		if min(self.n_slots, self.n_regions, self.n_channels) < 1:
			raise ContractError("generator needs T, N, C >= 1")
		if self.layout not in LAYOUTS:
			raise ContractError(f"unknown channel layout {self.layout!r}")
		if self.layout == "supply-demand" and self.n_channels % 2:
			raise ContractError(f"supply-demand layout needs an even channel count, got {self.n_channels}")
		if self.noise < 0 or self.supply_lag < 0:
			raise ContractError("noise and supply_lag must be >= 0")
		slots_per_day(self.slot_minutes)
		self.script.validate(self.n_slots, self.n_channels)


def _weekly_profile(rng: np.random.Generator, n_regions: int, n_modes: int, slot_minutes: int) -> np.ndarray:
	"""``(slots_per_week, N, M)`` clean base signal."""
	spd = slots_per_day(slot_minutes)
	week = 7 * spd
	hour = (np.arange(week) % spd) * slot_minutes / 60.0
	day = np.arange(week) / spd
	shape = (n_regions, n_modes)
	level = rng.uniform(20.0, 120.0, size=shape)
	a1, a2 = rng.uniform(0.3, 0.6, size=shape), rng.uniform(0.1, 0.3, size=shape)
	p1, p2 = rng.uniform(6.0, 10.0, size=shape), rng.uniform(0.0, 12.0, size=shape)
	b = rng.uniform(0.05, 0.2, size=shape)
	daily = (
		a1 * np.cos(2 * np.pi * (hour[:, None, None] - p1) / 24.0)
		+ a2 * np.cos(4 * np.pi * (hour[:, None, None] - p2) / 24.0)
	)
	weekly = b * np.cos(2 * np.pi * (day[:, None, None] - 2.0) / 7.0)
	return level * np.maximum(1.0 + daily + weekly, 0.05)


def generate_synthetic(config: GeneratorConfig) -> tuple[MobilityTensor, TemporalCovariates]:
	config.validate()
	T, N, C = config.n_slots, config.n_regions, config.n_channels
	rng = np.random.default_rng(config.seed)
	paired = config.layout == "supply-demand"
	n_modes = C // 2 if paired else C
	profile = _weekly_profile(rng, N, n_modes, config.slot_minutes)
	week = profile.shape[0]
	slots = np.arange(T)

	holidays = holiday_flags(T, config.slot_minutes, config.holidays, config.start)
	holidays |= config.script.holiday_slots(T)
	factor = config.script.multiplier(T, C) * np.where(holidays, HOLIDAY_FACTOR, 1.0)[:, None]

	clean = np.empty((T, N, C))
	if paired:
		ratio = rng.uniform(0.8, 1.0, size=(N, n_modes))
		lag = config.supply_lag
		lagged = np.maximum(slots - lag, 0)
		for m in range(n_modes):
			clean[:, :, 2 * m] = profile[slots % week, :, m] * factor[:, None, 2 * m]
			clean[:, :, 2 * m + 1] = (
				ratio[:, m] * profile[(slots - lag) % week, :, m] * factor[lagged][:, None, 2 * m + 1]
			)
	else:
		clean = profile[slots % week] * factor[:, None, :]

	noise = rng.standard_normal(size=clean.shape) * config.noise * np.sqrt(clean)
	values = np.maximum(clean + noise, 0.0)
	covariates = encode_calendar(T, config.slot_minutes, config.start, holidays)
	logger.info(
		"generated T=%d N=%d C=%d (%s, %d events, %d holiday slots)",
		T, N, C, config.layout, len(config.script), int(holidays.sum()),
	)
	return MobilityTensor(values, config.slot_minutes), covariates


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


def slot_index(date: str, start: str, slot_minutes: int) -> int:
	delta = np.datetime64(date, "m") - np.datetime64(start, "m")
	return int(delta.astype(np.int64) // slot_minutes)


def _days(n_days: int, slot_minutes: int) -> int:
	return n_days * slots_per_day(slot_minutes)


def _blizzard(start: str, slot_minutes: int, severities: Sequence[float]) -> Event:
	return Event(
		kind="blizzard",
		start=slot_index("2016-01-22", start, slot_minutes),
		duration=_days(3, slot_minutes),
		severities=tuple(severities),
		recovery="exponential",
		recovery_slots=_days(3, slot_minutes),
		label="jonas",
	)


def _pandemic(start: str, slot_minutes: int, n_slots: int, severities: Sequence[float], waves: int) -> Event:
	begin = slot_index("2020-03-20", start, slot_minutes)
	return Event(
		kind="pandemic",
		start=begin,
		duration=n_slots - begin,
		severities=tuple(severities),
		recovery="linear",
		waves=waves,
		label="covid",
	)


_JONAS_HOLIDAYS = ("2015-11-26", "2015-12-25", "2016-01-01", "2016-01-18")


def _jonas_nyc() -> GeneratorConfig:
	start, minutes = "2015-10-24T00:00", 30
	# taxi demand, taxi supply, bike demand, bike supply
	script = EventScript([_blizzard(start, minutes, (0.15, 0.2, 0.02, 0.05))])
	return GeneratorConfig(_days(100, minutes), 12, 4, minutes, 0, script, start, _JONAS_HOLIDAYS)


def _jonas_dc() -> GeneratorConfig:
	start, minutes = "2015-10-24T00:00", 60
	script = EventScript([_blizzard(start, minutes, (0.1, 0.15, 0.0, 0.02))])
	return GeneratorConfig(_days(100, minutes), 9, 4, minutes, 0, script, start, _JONAS_HOLIDAYS)


def _covid_chi() -> GeneratorConfig:
	start, minutes = "2019-07-01T00:00", 120
	n_slots = _days(550, minutes)
	# taxi, bike and scooter demand/supply pairs
	script = EventScript([_pandemic(start, minutes, n_slots, (0.2, 0.25, 0.5, 0.55, 0.3, 0.3), waves=3)])
	holidays = (
		"2019-07-04", "2019-09-02", "2019-11-28", "2019-12-25", "2020-01-01",
		"2020-05-25", "2020-07-03", "2020-09-07", "2020-11-26", "2020-12-25",
	)
	return GeneratorConfig(n_slots, 8, 6, minutes, 0, script, start, holidays)


def _covid_us() -> GeneratorConfig:
	start, minutes = "2019-11-14T00:00", 60
	n_slots = _days(200, minutes)
	# grocery, retailer, transportation, office, school, healthcare,
	# entertainment, hotel, restaurant, service
	sev = (0.9, 0.5, 0.3, 0.35, 0.1, 0.6, 0.15, 0.2, 0.4, 0.5)
	script = EventScript([_pandemic(start, minutes, n_slots, sev, waves=1)])
	holidays = ("2019-11-28", "2019-12-25", "2020-01-01", "2020-01-20", "2020-02-17", "2020-05-25")
	return GeneratorConfig(n_slots, 10, 10, minutes, 0, script, start, holidays, layout="purpose")


PRESETS = {
	"jonas-nyc": _jonas_nyc,
	"jonas-dc": _jonas_dc,
	"covid-chi": _covid_chi,
	"covid-us": _covid_us,
}


def preset_config(name: str) -> GeneratorConfig:
	try:
		return PRESETS[name]()
	except KeyError:
		raise ConfigError(f"unknown dataset preset {name!r}; expected one of {', '.join(PRESETS)}")

