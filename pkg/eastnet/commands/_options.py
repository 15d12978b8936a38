"""Options and plumbing shared by every subcommand."""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np

from eastnet.data.events import event_mask
from eastnet.data.io import read_dataset
from eastnet.data.mobility import WindowDataset
from eastnet.data.synthetic import generate_synthetic
from eastnet.exceptions import EastNetError
from eastnet.nn.models import VariantKind, VariantSpec
from eastnet.utils.config import RunConfig

log = logging.getLogger("eastnet.commands")


def run_options(func):
	"""``--config``, ``--set``, ``--out`` and ``--seed``; passes a loaded ``RunConfig``."""

	@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="key=value config file")
	@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one config key")
	@click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory (paths.out)")
	@click.option("--seed", type=click.IntRange(min=0), help="Seed for data generation and training")
	@functools.wraps(func)
	def wrapper(config_path, overrides, out_dir, seed, **kwargs):
		config = RunConfig.load(config_path, overrides)
		if out_dir is not None:
			config.set("paths.out", out_dir, "--out")
		if seed is not None:
			config.set("data.seed", str(seed), "--seed")
			config.set("train.seed", str(seed), "--seed")
		return func(config, **kwargs)

	return wrapper


def exit_on_error(func):
	"""Map ``EastNetError`` to its exit code (2 config, 3 IO, 4 numeric)."""

	@functools.wraps(func)
	def wrapper(*args, **kwargs):
		try:
			return func(*args, **kwargs)
		except EastNetError as exc:
			click.echo(f"error: {exc}", err=True)
			sys.exit(exc.exit_code)

	return wrapper


def load_dataset(config: RunConfig) -> tuple[WindowDataset, np.ndarray | None]:
	"""Dataset from ``paths.dataset``, or generated from the config; plus the event mask."""
	alpha, beta = config["model.alpha"], config["model.beta"]
	generator = config.generator_config()
	if config["paths.dataset"]:
		tensor, covariates = read_dataset(config["paths.dataset"])
		log.info("loaded %s: T=%d N=%d C=%d", config["paths.dataset"], *tensor.values.shape)
	else:
		tensor, covariates = generate_synthetic(generator)
	mask = None
	if len(generator.script) and generator.n_slots == tensor.n_slots:
		mask = event_mask(generator.script, tensor.n_slots)
	return WindowDataset(tensor, covariates, alpha, beta), mask


def out_dir(config: RunConfig) -> Path:
	return Path(config["paths.out"])


def dataset_spec(config: RunConfig, dataset: WindowDataset, kind: VariantKind | None = None) -> VariantSpec:
	"""Variant spec sized to ``dataset`` (defaults to ``model.variant``)."""
	tensor = dataset.tensor
	return config.variant_spec(kind or config.variant(), tensor.n_regions, tensor.n_channels, dataset.covariates.width)
