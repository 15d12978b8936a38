"""Experiment outputs: metrics.csv, run.json, timings.json and SVG charts.

``metrics.csv`` and ``run.json`` only hold seeded, deterministic values so
that repeated runs are byte-identical; wall-clock seconds go to
``timings.json``.
"""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from eastnet.exceptions import FormatError
from eastnet.services._constants import METRICS_HEADER
from eastnet.services.metrics import MetricReport, format_mape
from eastnet.utils.svg import PALETTE, SVG

logger = logging.getLogger(__name__)

WIDTH, HEIGHT, MARGIN = 900, 320, 48


def ensure_dir(out_dir: str | Path) -> Path:
	path = Path(out_dir)
	try:
		path.mkdir(parents=True, exist_ok=True)
	except OSError as exc:
		raise FormatError(f"cannot create output directory: {exc}", path=str(path))
	return path


def _write_text(path: Path, text: str) -> Path:
	try:
		path.write_text(text, encoding="utf-8")
	except OSError as exc:
		raise FormatError(f"cannot write report file: {exc}", path=str(path))
	logger.info("wrote %s", path)
	return path


def write_metrics_csv(rows: Mapping[str, MetricReport], out_dir: str | Path) -> Path:
	"""One row per variant or baseline, sorted by name."""
	path = ensure_dir(out_dir) / "metrics.csv"
	try:
		with open(path, "w", newline="", encoding="utf-8") as fh:
			writer = csv.writer(fh, lineterminator="\n")
			writer.writerow(METRICS_HEADER)
			for name in sorted(rows):
				report = rows[name]
				writer.writerow([name, f"{report['rmse']:.6f}", f"{report['mae']:.6f}", format_mape(report["mape"])])
	except OSError as exc:
		raise FormatError(f"cannot write metrics: {exc}", path=str(path))
	logger.info("wrote %s", path)
	return path


def _jsonable(value: Any) -> Any:
	if isinstance(value, Mapping):
		return {str(k): _jsonable(v) for k, v in value.items()}
	if isinstance(value, (list, tuple)):
		return [_jsonable(v) for v in value]
	if isinstance(value, np.ndarray):
		return _jsonable(value.tolist())
	if isinstance(value, (np.floating, float)):
		value = float(value)
		return round(value, 10) if np.isfinite(value) else None
	if isinstance(value, np.integer):
		return int(value)
	return value


def write_json(payload: Mapping[str, Any], out_dir: str | Path, name: str) -> Path:
	path = ensure_dir(out_dir) / name
	return _write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------


def _scale(values: np.ndarray, low: float, high: float, out_low: float, out_high: float) -> np.ndarray:
	span = high - low if high > low else 1.0
	return out_low + (values - low) / span * (out_high - out_low)


def _frame(svg: SVG, title: str, panel: int = 0) -> tuple[float, float]:
	top = panel * HEIGHT
	svg.text(MARGIN, top + 20, title, size=13)
	svg.line(MARGIN, top + HEIGHT - MARGIN, WIDTH - 10, top + HEIGHT - MARGIN)
	svg.line(MARGIN, top + 30, MARGIN, top + HEIGHT - MARGIN)
	return top + 30, top + HEIGHT - MARGIN


def timeseries_svg(truth: np.ndarray, predictions: Mapping[str, np.ndarray], channels: Sequence[str]) -> str:
	"""One panel per channel; citywide sums ``(time, C)`` of truth and each prediction."""
	n_channels = truth.shape[1]
	svg = SVG(WIDTH, HEIGHT * n_channels)
	xs = _scale(np.arange(truth.shape[0]), 0, max(truth.shape[0] - 1, 1), MARGIN, WIDTH - 10)
	for c in range(n_channels):
		series = {"truth": truth[:, c], **{name: pred[:, c] for name, pred in predictions.items()}}
		low = min(float(s.min()) for s in series.values())
		high = max(float(s.max()) for s in series.values())
		top, bottom = _frame(svg, f"citywide {channels[c]}", c)
		svg.group_start(title=channels[c], id=f"channel-{c}")
		for i, (name, values) in enumerate(series.items()):
			ys = _scale(values, low, high, bottom, top)
			svg.polyline(zip(xs, ys, strict=True), PALETTE[i % len(PALETTE)], **{"data-series": name})
			svg.text(WIDTH - 150, top + 14 * (i + 1), name, size=10)
		svg.group_end()
	return svg.render()


def attention_svg(scores: np.ndarray, in_event: np.ndarray | None = None) -> str:
	"""Heatmap of memory scores, records on rows and windows on columns."""
	n_windows, slots = scores.shape
	svg = SVG(WIDTH, HEIGHT)
	top, bottom = _frame(svg, "memory attention per window")
	cell_w = (WIDTH - 10 - MARGIN) / max(n_windows, 1)
	cell_h = (bottom - top) / slots
	svg.group_start(id="attention")
	for t in range(n_windows):
		for j in range(slots):
			shade = int(round(255 * (1.0 - float(np.clip(scores[t, j], 0.0, 1.0)))))
			fill = f"#{shade:02x}{shade:02x}ff"
			svg.rect(MARGIN + t * cell_w, top + j * cell_h, cell_w, cell_h, fill, **{"data-phi": f"{scores[t, j]:.6f}"})
	svg.group_end()
	if in_event is not None and np.any(in_event):
		svg.group_start(id="events")
		for t in np.flatnonzero(in_event):
			svg.rect(MARGIN + t * cell_w, bottom + 4, cell_w, 6, "#d62728")
		svg.group_end()
	for j in range(slots):
		svg.text(MARGIN - 6, top + (j + 0.7) * cell_h, f"m{j}", size=9, anchor="end")
	return svg.render()


def channels_svg(truth: np.ndarray, channels: Sequence[str]) -> str:
	"""Stacked areas of citywide per-channel volume ``(time, C)``."""
	n_steps, n_channels = truth.shape
	svg = SVG(WIDTH, HEIGHT)
	top, bottom = _frame(svg, "citywide volume by channel")
	stacked = np.cumsum(np.maximum(truth, 0.0), axis=1)
	high = float(stacked[:, -1].max()) if n_steps else 1.0
	xs = _scale(np.arange(n_steps), 0, max(n_steps - 1, 1), MARGIN, WIDTH - 10)
	lower = np.zeros(n_steps)
	for c in range(n_channels):
		upper = stacked[:, c]
		y_up = _scale(upper, 0.0, high, bottom, top)
		y_low = _scale(lower, 0.0, high, bottom, top)
		points = list(zip(xs, y_up, strict=True)) + list(zip(xs[::-1], y_low[::-1], strict=True))
		svg.polygon(points, PALETTE[c % len(PALETTE)], **{"data-series": channels[c], "fill-opacity": "0.8"})
		lower = upper
	return svg.render()


def write_svg(text: str, out_dir: str | Path, name: str) -> Path:
	return _write_text(ensure_dir(out_dir) / name, text)


def channel_names(n_channels: int, layout: str = "supply-demand") -> list[str]:
	if layout == "supply-demand" and n_channels % 2 == 0:
		return [f"mode{c // 2}-{'demand' if c % 2 == 0 else 'supply'}" for c in range(n_channels)]
	return [f"purpose{c}" for c in range(n_channels)]
