"""Scripted societal events and their multiplicative effect on mobility.

An event scales every channel by its own severity for ``duration`` slots
and then recovers to normal over ``recovery_slots`` following one of three
shapes. Pandemics split their span into ``waves`` dips of decaying depth;
each dip starts at full depth and eases back to normal by the end of its
segment. Holidays also raise the holiday covariate flag.

Config entries read ``kind start duration sev1,sev2,... recovery
[recovery_slots [waves]]``, e.g. ``blizzard 4320 144 0.1,0.2,0,0 exponential 144``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from eastnet.exceptions import ConfigError, ContractError

KINDS = ("blizzard", "pandemic", "holiday")
RECOVERIES = ("step", "linear", "exponential")

# Depth ratio between consecutive pandemic waves.
WAVE_DECAY = 0.6


@dataclass(frozen=True)
class Event:
	kind: str
	start: int
	duration: int
	severities: tuple[float, ...]
	recovery: str = "step"
	recovery_slots: int = 0
	waves: int = 1
	label: str = ""

	def __post_init__(self):
		if self.kind not in KINDS:
			raise ContractError(f"unknown event kind {self.kind!r}; expected one of {', '.join(KINDS)}")
		if self.recovery not in RECOVERIES:
			raise ContractError(f"unknown recovery {self.recovery!r}; expected one of {', '.join(RECOVERIES)}")
		if self.duration < 1 or self.start < 0 or self.recovery_slots < 0 or self.waves < 1:
			raise ContractError(f"event {self.label or self.kind}: start, duration, recovery and waves out of range")
		if any(s < 0 or not math.isfinite(s) for s in self.severities) or not self.severities:
			raise ContractError(f"event {self.label or self.kind}: severities must be finite and >= 0")

	@property
	def end(self) -> int:
		return self.start + self.duration

	def severity_vector(self, n_channels: int) -> np.ndarray:
		if len(self.severities) == 1:
			return np.full(n_channels, self.severities[0])
		if len(self.severities) != n_channels:
			raise ContractError(
				f"event {self.label or self.kind} lists {len(self.severities)} severities for {n_channels} channels"
			)
		return np.asarray(self.severities, dtype=np.float64)

	def profile(self, n_slots: int, n_channels: int) -> np.ndarray:
		"""Multiplier ``(n_slots, n_channels)``: 1 outside the event and its recovery."""
		out = np.ones((n_slots, n_channels))
		sev = self.severity_vector(n_channels)
		span = np.arange(self.start, min(self.end, n_slots))
		if self.kind == "pandemic":
			segment = self.duration / self.waves
			local = np.arange(self.duration)
			wave = np.minimum((local // segment).astype(int), self.waves - 1)
			phase = (local - wave * segment) / segment
			depth = (1.0 - sev)[None, :] * (WAVE_DECAY ** wave)[:, None]
			during = 1.0 - depth * (0.5 + 0.5 * np.cos(np.pi * phase))[:, None]
		else:
			during = np.broadcast_to(sev, (self.duration, n_channels))
		out[span] = during[: len(span)]
		if self.recovery_slots and self.recovery != "step" and self.end < n_slots:
			level = during[-1]
			k = np.arange(min(self.recovery_slots, n_slots - self.end))[:, None]
			R = self.recovery_slots
			if self.recovery == "linear":
				ramp = level + (1.0 - level) * (k + 1) / R
			else:
				ramp = 1.0 - (1.0 - level) * np.exp(-3.0 * k / R)
			out[self.end : self.end + len(k)] = ramp
		return out

	def touched(self, n_slots: int) -> np.ndarray:
		mask = np.zeros(n_slots, dtype=bool)
		tail = self.recovery_slots if self.recovery != "step" else 0
		mask[self.start : min(self.end + tail, n_slots)] = True
		return mask


@dataclass
class EventScript:
	events: list[Event] = field(default_factory=list)

	def __iter__(self):
		return iter(self.events)

	def __len__(self) -> int:
		return len(self.events)

	def validate(self, n_slots: int, n_channels: int) -> None:
		for event in self.events:
			if event.end > n_slots:
				raise ContractError(
					f"event {event.label or event.kind} spans [{event.start}, {event.end}) outside [0, {n_slots})"
				)
			event.severity_vector(n_channels)

	def multiplier(self, n_slots: int, n_channels: int) -> np.ndarray:
		out = np.ones((n_slots, n_channels))
		for event in self.events:
			out *= event.profile(n_slots, n_channels)
		return out

	def holiday_slots(self, n_slots: int) -> np.ndarray:
		mask = np.zeros(n_slots, dtype=bool)
		for event in self.events:
			if event.kind == "holiday":
				mask |= event.touched(n_slots)
		return mask


def event_mask(script: EventScript, n_slots: int) -> np.ndarray:
	"""Slots inside a blizzard or pandemic, including their recovery."""
	mask = np.zeros(n_slots, dtype=bool)
	for event in script:
		if event.kind != "holiday":
			mask |= event.touched(n_slots)
	return mask


def parse_event(text: str, label: str = "") -> Event:
	parts = text.split()
	if not 5 <= len(parts) <= 7:
		raise ConfigError(
			f"event {label!r}: expected 'kind start duration sev1,sev2,... recovery [slots [waves]]', got {text!r}"
		)
	try:
		return Event(
			kind=parts[0],
			start=int(parts[1]),
			duration=int(parts[2]),
			severities=tuple(float(s) for s in parts[3].split(",")),
			recovery=parts[4],
			recovery_slots=int(parts[5]) if len(parts) > 5 else 0,
			waves=int(parts[6]) if len(parts) > 6 else 1,
			label=label,
		)
	except (ValueError, ContractError) as exc:
		raise ConfigError(f"event {label!r}: {exc}")


def format_event(event: Event) -> str:
	sev = ",".join(f"{s:g}" for s in event.severities)
	return f"{event.kind} {event.start} {event.duration} {sev} {event.recovery} {event.recovery_slots} {event.waves}"


def script_from_entries(entries: Iterable[tuple[str, str]]) -> EventScript:
	return EventScript([parse_event(text, label) for label, text in entries])
