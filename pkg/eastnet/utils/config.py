"""key=value run configuration.

Files hold one ``key = value`` per line; ``#`` starts a comment. Keys are
dotted (``data.*``, ``model.*``, ``train.*``, ``paths.*``) and must appear
in ``SCHEMA``; ``event.<label>`` entries are repeatable and describe the
generator's event script. ``--set key=value`` overrides are applied on top
of the file with the same rules.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from eastnet.data.events import EventScript, format_event, parse_event
from eastnet.data.synthetic import GeneratorConfig, preset_config
from eastnet.exceptions import ConfigError, ContractError
from eastnet.nn.models import VariantKind, VariantSpec
from eastnet.services.training import TrainConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Key:
	type: type
	default: Any
	help: str = ""


SCHEMA: dict[str, Key] = {
	"data.preset": Key(str, "", "jonas-nyc, jonas-dc, covid-chi or covid-us"),
	"data.T": Key(int, 4800, "number of slots"),
	"data.N": Key(int, 12, "regions"),
	"data.C": Key(int, 4, "channels"),
	"data.slot_minutes": Key(int, 30),
	"data.start": Key(str, "2015-10-24T00:00", "timestamp of slot 0"),
	"data.holidays": Key(str, "", "comma-separated ISO dates"),
	"data.layout": Key(str, "supply-demand", "supply-demand or purpose"),
	"data.noise": Key(float, 1.0),
	"data.supply_lag": Key(int, 1),
	"data.seed": Key(int, 0),
	"model.variant": Key(str, "EASTNet"),
	"model.alpha": Key(int, 8),
	"model.beta": Key(int, 8),
	"model.q": Key(int, 32, "hidden width"),
	"model.K": Key(int, 3, "graph convolution order"),
	"model.L": Key(int, 2, "GCRU layers"),
	"model.m": Key(int, 8, "memory records"),
	"model.D": Key(int, 16, "memory record width"),
	"model.mu_sp": Key(int, 20),
	"model.mu_mo": Key(int, 3),
	"model.v_prime": Key(int, 2, "covariate embedding width"),
	"model.pyramid": Key(int, 0, "encoder merge factor; 0 picks the variant default"),
	"train.batch": Key(int, 32),
	"train.lr": Key(float, 5e-4),
	"train.epochs": Key(int, 100),
	"train.patience": Key(int, 10),
	"train.seed": Key(int, 0),
	"paths.dataset": Key(str, ""),
	"paths.checkpoint": Key(str, ""),
	"paths.memory": Key(str, ""),
	"paths.out": Key(str, "out"),
}

_DATA_FIELDS = {
	"data.T": "n_slots",
	"data.N": "n_regions",
	"data.C": "n_channels",
	"data.slot_minutes": "slot_minutes",
	"data.start": "start",
	"data.layout": "layout",
	"data.noise": "noise",
	"data.supply_lag": "supply_lag",
	"data.seed": "seed",
}


def _coerce(key: str, raw: str) -> Any:
	spec = SCHEMA[key]
	try:
		if spec.type is int:
			return int(raw)
		if spec.type is float:
			return float(raw)
	except ValueError:
		raise ConfigError(f"{key}: expected {spec.type.__name__}, got {raw!r}")
	return raw


class RunConfig:
	def __init__(self):
		self.values: dict[str, Any] = {key: spec.default for key, spec in SCHEMA.items()}
		self.explicit: set[str] = set()
		self.events: dict[str, str] = {}

	@classmethod
	def load(cls, path: str | Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
		config = cls()
		if path is not None:
			try:
				text = Path(path).read_text(encoding="utf-8")
			except OSError as exc:
				raise ConfigError(f"cannot read config {path}: {exc}")
			config.update_from_text(text, source=str(path))
		for item in overrides:
			config.set_pair(item, source="--set")
		return config

	def update_from_text(self, text: str, source: str = "<text>") -> None:
		for lineno, line in enumerate(text.splitlines(), 1):
			line = line.split("#", 1)[0].strip()
			if line:
				self.set_pair(line, source=f"{source}:{lineno}")

	def set_pair(self, pair: str, source: str = "") -> None:
		if "=" not in pair:
			raise ConfigError(f"{source}: expected key=value, got {pair!r}")
		key, raw = (part.strip() for part in pair.split("=", 1))
		self.set(key, raw, source)

	def set(self, key: str, raw: str, source: str = "") -> None:
		if key.startswith("event."):
			label = key[len("event.") :]
			if not label:
				raise ConfigError(f"{source}: event entries need a label (event.<label>)")
			parse_event(raw, label)
			self.events[label] = raw
			return
		if key not in SCHEMA:
			raise ConfigError(f"{source}: unknown key {key!r}")
		self.values[key] = _coerce(key, raw)
		self.explicit.add(key)

	def __getitem__(self, key: str) -> Any:
		return self.values[key]

	def require(self, *keys: str) -> None:
		missing = [key for key in keys if self.values.get(key) in ("", None)]
		if missing:
			raise ConfigError(f"missing required config keys: {', '.join(missing)}")

	def as_dict(self) -> dict[str, Any]:
		out = dict(sorted(self.values.items()))
		out.update({f"event.{label}": text for label, text in sorted(self.events.items())})
		return out

	# -----------------------------------------------------------------------

	def generator_config(self) -> GeneratorConfig:
		"""Preset (if any) with explicitly set ``data.*`` keys and events applied."""
		base = preset_config(self["data.preset"]) if self["data.preset"] else None
		if base is None:
			base = GeneratorConfig(n_slots=self["data.T"], n_regions=self["data.N"], n_channels=self["data.C"])
			keys = _DATA_FIELDS
		else:
			keys = {key: attr for key, attr in _DATA_FIELDS.items() if key in self.explicit}
		for key, attr in keys.items():
			setattr(base, attr, self[key])
		if not self["data.preset"] or "data.holidays" in self.explicit:
			base.holidays = tuple(d.strip() for d in self["data.holidays"].split(",") if d.strip())
		if self.events or not self["data.preset"]:
			base.script = EventScript([parse_event(text, label) for label, text in sorted(self.events.items())])
		return base

	def train_config(self) -> TrainConfig:
		try:
			return TrainConfig(
				batch_size=self["train.batch"],
				lr=self["train.lr"],
				max_epochs=self["train.epochs"],
				patience=self["train.patience"],
				seed=self["train.seed"],
			)
		except ContractError as exc:
			raise ConfigError(str(exc))

	def variant(self) -> VariantKind:
		try:
			return VariantKind(self["model.variant"])
		except ValueError:
			names = ", ".join(kind.value for kind in VariantKind)
			raise ConfigError(f"unknown variant {self['model.variant']!r}; expected one of {names}")

	def variant_spec(
		self, kind: VariantKind, n_regions: int, n_channels: int, n_covariates: int
	) -> VariantSpec:
		spec = VariantSpec(
			kind=kind,
			n_regions=n_regions,
			n_channels=n_channels,
			n_covariates=n_covariates,
			alpha=self["model.alpha"],
			beta=self["model.beta"],
			hidden=self["model.q"],
			order=self["model.K"],
			layers=self["model.L"],
			memory_slots=self["model.m"],
			memory_dim=self["model.D"],
			mu_sp=self["model.mu_sp"],
			mu_mo=self["model.mu_mo"],
			tcov_dim=self["model.v_prime"],
			seed=self["train.seed"],
			pyramid_factor=self["model.pyramid"] or None,
		)
		try:
			return spec.validate()
		except ContractError as exc:
			raise ConfigError(str(exc))


def describe_events(script: EventScript) -> dict[str, str]:
	return {event.label or f"event{i}": format_event(event) for i, event in enumerate(script)}
