import logging

import click

click.disable_unicode_literals_warning = True


def get_commands():
	# prevent circular imports
	from .data import commands as data_commands
	from .experiments import commands as experiment_commands
	from .models import commands as model_commands

	all_commands = data_commands + model_commands + experiment_commands

	for command in all_commands:
		if not command.help:
			command.help = f"eastnet {command.name}"

	return all_commands


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG instead of INFO")
def main(verbose: bool):
	"""Event-aware multimodal mobility nowcasting."""
	logging.basicConfig(
		level=logging.DEBUG if verbose else logging.INFO,
		format="%(asctime)s %(levelname)s %(name)s: %(message)s",
	)


for _command in get_commands():
	main.add_command(_command)
