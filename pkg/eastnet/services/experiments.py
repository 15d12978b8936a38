"""Variant runs, the ablation ladder, memory transfer and the attention probe.

``ablate`` trains every variant on the same dataset and seed. Variants are
independent models, so they may train on a thread pool (each thread drives
its own tapes); results are merged in variant-name order regardless of
completion order.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, TypedDict

import numpy as np

from eastnet.data.mobility import Window, WindowDataset
from eastnet.exceptions import ConfigError
from eastnet.nn.memory import ImportMode, MemorySnapshot, load_snapshot
from eastnet.nn.models import LADDER, NowcastModel, VariantKind, VariantSpec, build_variant
from eastnet.services.baselines import baseline_ha, baseline_nf
from eastnet.services.metrics import MetricReport, event_metrics, horizon_metrics, metrics
from eastnet.services.training import Evaluation, TrainConfig, TrainResult, train

logger = logging.getLogger(__name__)

SpecFactory = Callable[[VariantKind], VariantSpec]


class ProbeReport(TypedDict):
	event_windows: int
	normal_windows: int
	event_mean: list[float] | None
	normal_mean: list[float] | None
	l1_distance: float | None


@dataclass
class VariantRun:
	name: str
	model: NowcastModel
	result: TrainResult


def worker_count() -> int:
	raw = os.environ.get("EASTNET_THREADS", "1")
	try:
		count = int(raw)
	except ValueError:
		raise ConfigError(f"EASTNET_THREADS must be an integer, got {raw!r}")
	return max(1, count)


def window_event_flags(windows: Sequence[Window], mask: np.ndarray | None) -> np.ndarray:
	"""True for windows whose target span overlaps a masked slot."""
	if mask is None:
		return np.zeros(len(windows), dtype=bool)
	return np.array([bool(mask[w.targets.start : w.targets.stop].any()) for w in windows], dtype=bool)


def attention_probe(scores: np.ndarray, in_event: np.ndarray) -> ProbeReport:
	"""Mean memory scores over event and normal windows, and their L1 distance."""
	in_event = np.asarray(in_event, dtype=bool)
	event = scores[in_event].mean(axis=0) if in_event.any() else None
	normal = scores[~in_event].mean(axis=0) if (~in_event).any() else None
	distance = None
	if event is not None and normal is not None:
		distance = float(np.abs(event - normal).sum())
	return ProbeReport(
		event_windows=int(in_event.sum()),
		normal_windows=int((~in_event).sum()),
		event_mean=None if event is None else event.tolist(),
		normal_mean=None if normal is None else normal.tolist(),
		l1_distance=distance,
	)


def run_variant(
	spec: VariantSpec,
	dataset: WindowDataset,
	config: TrainConfig,
	log: logging.Logger | None = None,
	prepare: Callable[[NowcastModel], None] | None = None,
) -> VariantRun:
	model = build_variant(spec)
	if prepare is not None:
		prepare(model)
	(log or logger).info(
		"training %s: %d parameters (%d trainable)",
		spec.kind.value,
		model.parameter_count(),
		model.parameter_count(trainable_only=True),
	)
	return VariantRun(spec.kind.value, model, train(model, dataset, config, log))


def baseline_reports(dataset: WindowDataset) -> dict[str, Evaluation]:
	windows = dataset.windows["test"]
	targets = dataset.raw_targets(windows) if windows else np.zeros((0,))
	ha = baseline_ha(dataset.raw, dataset.splits.train, windows, dataset.tensor.slot_minutes)
	nf = baseline_nf(dataset.raw, windows)
	return {"HA": Evaluation(windows, ha, targets), "NF": Evaluation(windows, nf, targets)}


def ablate(
	dataset: WindowDataset,
	make_spec: SpecFactory,
	config: TrainConfig,
	kinds: Sequence[VariantKind] = LADDER,
	workers: int | None = None,
	log: logging.Logger | None = None,
) -> dict[str, VariantRun]:
	log = log or logger
	workers = workers or worker_count()
	specs = [make_spec(kind) for kind in kinds]
	log.info("ablation over %d variants with %d worker(s)", len(specs), workers)
	if workers == 1:
		runs = [run_variant(spec, dataset, config, log) for spec in specs]
	else:
		with ThreadPoolExecutor(max_workers=workers) as pool:
			runs = list(pool.map(lambda spec: run_variant(spec, dataset, config, log), specs))
	return {run.name: run for run in sorted(runs, key=lambda r: r.name)}


def transfer(
	snapshot: MemorySnapshot,
	spec: VariantSpec,
	dataset: WindowDataset,
	config: TrainConfig,
	modes: Sequence[ImportMode] = ("freeze", "retrain"),
	log: logging.Logger | None = None,
) -> dict[str, VariantRun]:
	"""Train ``spec`` once per mode with the snapshot's memory loaded first."""
	runs = {}
	for mode in modes:

		def prepare(model: NowcastModel, mode: ImportMode = mode) -> None:
			if model.memory is None:
				raise ConfigError(f"{model.kind.value} has no memory bank to transfer into")
			load_snapshot(model.memory, snapshot, mode)

		run = run_variant(spec, dataset, config, log, prepare)
		runs[mode] = replace(run, name=f"{spec.kind.value}-{mode}")
	return runs


def summarize(evaluation: Evaluation, in_event: np.ndarray) -> dict[str, Any]:
	"""run.json section for one evaluated model or baseline."""
	if not evaluation.windows:
		return {"horizons": [], "events": {"event": None, "normal": None}}
	out: dict[str, Any] = {
		"horizons": horizon_metrics(evaluation.predictions, evaluation.targets),
		"events": event_metrics(evaluation.predictions, evaluation.targets, in_event),
	}
	if evaluation.attention is not None:
		out["attention_probe"] = attention_probe(evaluation.attention, in_event)
	return out


def evaluation_report(evaluation: Evaluation) -> MetricReport:
	return metrics(evaluation.predictions, evaluation.targets)
