import click
import numpy as np

from eastnet.commands._options import dataset_spec, exit_on_error, load_dataset, log, out_dir, run_options
from eastnet.nn.checkpoint import load_checkpoint
from eastnet.services.experiments import (
	ablate,
	baseline_reports,
	evaluation_report,
	summarize,
	window_event_flags,
)
from eastnet.services.reporting import (
	attention_svg,
	channel_names,
	channels_svg,
	timeseries_svg,
	write_json,
	write_metrics_csv,
	write_svg,
)
from eastnet.services.training import Evaluation, evaluate
from eastnet.utils.config import RunConfig


def _citywide(values: np.ndarray) -> np.ndarray:
	"""Horizon-1 values summed over regions, ``(windows, C)``."""
	return values[:, 0].sum(axis=1)


def _write_charts(config: RunConfig, evaluations: dict[str, Evaluation], in_event: np.ndarray) -> None:
	target = out_dir(config)
	first = next(iter(evaluations.values()))
	if not first.windows:
		log.warning("no test windows; skipping charts")
		return
	names = channel_names(first.targets.shape[-1], config.generator_config().layout)
	truth = _citywide(first.targets)
	predictions = {name: _citywide(e.predictions) for name, e in evaluations.items()}
	write_svg(timeseries_svg(truth, predictions, names), target, "timeseries.svg")
	write_svg(channels_svg(truth, names), target, "channels.svg")
	scored = [e for e in evaluations.values() if e.attention is not None]
	if scored:
		write_svg(attention_svg(scored[0].attention, in_event), target, "attention.svg")


@click.command("report")
@exit_on_error
@run_options
def report(config: RunConfig):
	"""Evaluate paths.checkpoint and draw timeseries.svg, channels.svg and attention.svg."""
	config.require("paths.checkpoint")
	model = load_checkpoint(config["paths.checkpoint"])
	dataset, mask = load_dataset(config)
	evaluation = evaluate(model, dataset, "test")
	in_event = window_event_flags(evaluation.windows, mask)
	_write_charts(config, {model.kind.value: evaluation}, in_event)
	payload = {"config": config.as_dict(), "variant": model.kind.value, "breakdown": summarize(evaluation, in_event)}
	write_json(payload, out_dir(config), "report.json")
	click.echo(str(out_dir(config)))


@click.command("ablate")
@exit_on_error
@run_options
def ablate_variants(config: RunConfig):
	"""Train every variant and the HA/NF baselines on one dataset; one metrics.csv row each."""
	dataset, mask = load_dataset(config)
	runs = ablate(
		dataset,
		lambda kind: dataset_spec(config, dataset, kind),
		config.train_config(),
		log=log,
	)
	baselines = baseline_reports(dataset)
	evaluations = {**baselines, **{name: run.result.test for name, run in runs.items()}}
	rows = {name: run.result.report for name, run in runs.items()}
	rows.update({name: evaluation_report(e) for name, e in baselines.items() if e.windows})

	target = out_dir(config)
	write_metrics_csv(rows, target)
	in_event = window_event_flags(dataset.windows["test"], mask)
	payload = {
		"config": config.as_dict(),
		"runs": {
			name: {
				"parameters": run.model.parameter_count(),
				"best_epoch": run.result.best_epoch,
				"best_val_mae": run.result.best_val_mae,
				"curve": run.result.curve,
				"test": run.result.report,
				"breakdown": summarize(run.result.test, in_event),
			}
			for name, run in runs.items()
		},
		"baselines": {name: summarize(e, in_event) for name, e in baselines.items()},
	}
	write_json(payload, target, "run.json")
	write_json({name: run.result.seconds for name, run in runs.items()}, target, "timings.json")
	_write_charts(config, evaluations, in_event)
	for name in sorted(rows):
		click.echo(f"{name}: mae={rows[name]['mae']:.6f} rmse={rows[name]['rmse']:.6f}")


commands = [report, ablate_variants]
