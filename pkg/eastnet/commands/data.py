import click

from eastnet.commands._options import exit_on_error, log, out_dir, run_options
from eastnet.data.io import write_dataset
from eastnet.data.synthetic import generate_synthetic
from eastnet.services.reporting import ensure_dir, write_json
from eastnet.utils.config import RunConfig, describe_events


@click.command("generate")
@exit_on_error
@run_options
def generate(config: RunConfig):
	"""Generate a synthetic MMT1 dataset from the data.* and event.* keys."""
	generator = config.generator_config()
	tensor, covariates = generate_synthetic(generator)
	target = config["paths.dataset"] or str(out_dir(config) / "dataset.mmt")
	ensure_dir(out_dir(config))
	write_dataset(target, tensor, covariates)
	write_json(
		{
			"config": config.as_dict(),
			"shape": list(tensor.values.shape),
			"covariate_width": covariates.width,
			"events": describe_events(generator.script),
		},
		out_dir(config),
		"dataset.json",
	)
	log.info("wrote %s", target)
	click.echo(target)


commands = [generate]
