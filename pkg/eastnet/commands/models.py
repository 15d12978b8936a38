import click
import numpy as np

from eastnet.commands._options import dataset_spec, exit_on_error, load_dataset, log, out_dir, run_options
from eastnet.core import ops
from eastnet.core.gradcheck import grad_check
from eastnet.data.calendar import encode_calendar
from eastnet.exceptions import ConfigError, NumericError
from eastnet.nn.checkpoint import checkpoint_memory, load_checkpoint, save_checkpoint
from eastnet.nn.memory import MemorySnapshot, export_memory, read_memory
from eastnet.nn.models import LADDER, VariantKind, build_variant, forward
from eastnet.services._constants import GRADCHECK_TOLERANCE
from eastnet.services.experiments import VariantRun, run_variant, summarize, transfer, window_event_flags
from eastnet.services.metrics import metrics
from eastnet.services.reporting import write_json, write_metrics_csv
from eastnet.services.training import evaluate
from eastnet.utils.config import RunConfig


def _run_payload(run: VariantRun, in_event: np.ndarray) -> dict:
	return {
		"variant": run.name,
		"spec": run.model.spec.to_dict(),
		"parameters": run.model.parameter_count(),
		"trainable_parameters": run.model.parameter_count(trainable_only=True),
		"best_epoch": run.result.best_epoch,
		"best_val_mae": run.result.best_val_mae,
		"curve": run.result.curve,
		"test": run.result.report,
		"breakdown": summarize(run.result.test, in_event),
	}


@click.command("train")
@exit_on_error
@run_options
def train(config: RunConfig):
	"""Train model.variant and write a checkpoint, metrics.csv, run.json and timings.json."""
	dataset, mask = load_dataset(config)
	spec = dataset_spec(config, dataset)
	run = run_variant(spec, dataset, config.train_config(), log)
	target = out_dir(config)
	checkpoint = config["paths.checkpoint"] or str(target / f"{run.name}.eanw")
	write_metrics_csv({run.name: run.result.report}, target)
	in_event = window_event_flags(run.result.test.windows, mask)
	write_json({"config": config.as_dict(), "runs": [_run_payload(run, in_event)]}, target, "run.json")
	write_json({run.name: run.result.seconds}, target, "timings.json")
	save_checkpoint(run.model, checkpoint)
	if run.model.memory is not None:
		export_memory(run.model.memory, config["paths.memory"] or target / f"{run.name}.eamb")
	click.echo(f"{run.name}: mae={run.result.report['mae']:.6f} rmse={run.result.report['rmse']:.6f}")


@click.command("eval")
@exit_on_error
@run_options
def evaluate_checkpoint(config: RunConfig):
	"""Score paths.checkpoint on the test windows of the configured dataset."""
	config.require("paths.checkpoint")
	model = load_checkpoint(config["paths.checkpoint"])
	dataset, mask = load_dataset(config)
	evaluation = evaluate(model, dataset, "test")
	report = metrics(evaluation.predictions, evaluation.targets)
	name = model.kind.value
	target = out_dir(config)
	write_metrics_csv({name: report}, target)
	in_event = window_event_flags(evaluation.windows, mask)
	write_json(
		{"config": config.as_dict(), "variant": name, "test": report, "breakdown": summarize(evaluation, in_event)},
		target,
		"run.json",
	)
	click.echo(f"{name}: mae={report['mae']:.6f} rmse={report['rmse']:.6f}")


def _gradcheck_variant(config: RunConfig, kind: VariantKind, probes: int, h: float) -> float:
	shape = config.generator_config()
	n_regions, n_channels = shape.n_regions, shape.n_channels
	calendar = encode_calendar(config["model.alpha"] + config["model.beta"], shape.slot_minutes, shape.start)
	spec = config.variant_spec(kind, n_regions, n_channels, calendar.width)
	model = build_variant(spec)
	rng = np.random.default_rng(spec.seed)
	batch = 2
	x = rng.standard_normal((batch, spec.alpha, n_regions, n_channels))
	y = rng.standard_normal((batch, spec.beta, n_regions, n_channels))
	t_cov = np.repeat(calendar.values[None], batch, axis=0)

	# Squared error keeps the probe away from the kinks of |x|.
	def loss():
		residual = ops.sub(forward(model, x, t_cov).values, y)
		return ops.mean(ops.square(residual))

	return grad_check(loss, model.registry.trainable(), n_probes=probes, h=h, seed=spec.seed)


@click.command("gradcheck")
@click.option(
	"--variant",
	type=click.Choice([kind.value for kind in LADDER] + ["all"]),
	default="all",
	show_default=True,
)
@click.option("--probes", type=click.IntRange(min=1), default=16, show_default=True)
@click.option("--h", "step", type=float, default=1e-5, show_default=True)
@exit_on_error
@run_options
def gradcheck(config: RunConfig, variant: str, probes: int, step: float):
	"""Compare tape gradients with central differences; exit 4 above the tolerance."""
	kinds = LADDER if variant == "all" else (VariantKind(variant),)
	failed = []
	for kind in kinds:
		error = _gradcheck_variant(config, kind, probes, step)
		status = "ok" if error <= GRADCHECK_TOLERANCE else "FAIL"
		click.echo(f"{kind.value}: max_rel_err={error:.3e} {status}")
		if error > GRADCHECK_TOLERANCE:
			failed.append(kind.value)
	if failed:
		raise NumericError(f"gradient check above {GRADCHECK_TOLERANCE:g} for {', '.join(failed)}")


def _source_memory(config: RunConfig) -> tuple[MemorySnapshot, str]:
	if config["paths.memory"]:
		return read_memory(config["paths.memory"]), config["paths.memory"]
	if config["paths.checkpoint"]:
		return checkpoint_memory(config["paths.checkpoint"]), config["paths.checkpoint"]
	raise ConfigError("transfer needs paths.memory or paths.checkpoint")


@click.command("transfer")
@exit_on_error
@run_options
def transfer_memory(config: RunConfig):
	"""Train model.variant with a memory bank taken from paths.memory, or else paths.checkpoint.

	The variant is trained twice: once with the imported records frozen and
	once with them trainable.
	"""
	snapshot, source = _source_memory(config)
	dataset, mask = load_dataset(config)
	kind = config.variant()
	if kind not in (VariantKind.STNetMem, VariantKind.EASTNet):
		raise ConfigError(f"{kind.value} has no memory bank; use STNetMem or EASTNet")
	spec = dataset_spec(config, dataset, kind)
	runs = transfer(snapshot, spec, dataset, config.train_config(), log=log)
	target = out_dir(config)
	write_metrics_csv({run.name: run.result.report for run in runs.values()}, target)
	payloads = []
	for run in runs.values():
		payloads.append(_run_payload(run, window_event_flags(run.result.test.windows, mask)))
	write_json({"config": config.as_dict(), "source": source, "runs": payloads}, target, "run.json")
	write_json({run.name: run.result.seconds for run in runs.values()}, target, "timings.json")
	for run in runs.values():
		click.echo(f"{run.name}: mae={run.result.report['mae']:.6f}")


commands = [train, evaluate_checkpoint, gradcheck, transfer_memory]
