"""Exception family shared by every eastnet layer.

Services raise these; only ``eastnet.commands`` turns them into process
exit codes (0 ok, 2 config error, 3 IO error, 4 numeric failure).
"""

from __future__ import annotations


class EastNetError(Exception):
	exit_code: int = 1


class ShapeError(EastNetError, ValueError):
	"""Dimension mismatch between operands. The message names both shapes."""

	exit_code = 2

	def __init__(self, op: str, *shapes: tuple[int, ...], detail: str = ""):
		self.op = op
		self.shapes = shapes
		listed = " vs ".join(str(tuple(s)) for s in shapes)
		msg = f"{op}: incompatible shapes {listed}"
		if detail:
			msg = f"{msg} ({detail})"
		super().__init__(msg)


class ContractError(EastNetError, ValueError):
	"""A documented precondition does not hold."""

	exit_code = 2


class NumericError(EastNetError, ArithmeticError):
	"""NaN/Inf in a forward pass, divergence, or a failed gradient check."""

	exit_code = 4

	def __init__(
		self,
		message: str,
		*,
		step: int | None = None,
		epoch: int | None = None,
		batch: int | None = None,
		coordinate: tuple | None = None,
	):
		self.step = step
		self.epoch = epoch
		self.batch = batch
		self.coordinate = coordinate
		context = [
			f"{key}={value}"
			for key, value in (("step", step), ("epoch", epoch), ("batch", batch), ("coordinate", coordinate))
			if value is not None
		]
		if context:
			message = f"{message} [{', '.join(context)}]"
		super().__init__(message)


class ConfigError(EastNetError):
	exit_code = 2


class FormatError(EastNetError):
	"""Unreadable, truncated or mismatched binary file."""

	exit_code = 3

	def __init__(self, message: str, *, path: str | None = None, offset: int | None = None):
		self.path = path
		self.offset = offset
		if offset is not None:
			message = f"{message} at byte offset {offset}"
		if path:
			message = f"{path}: {message}"
		super().__init__(message)


class IncompatibleMemoryError(FormatError):
	"""Memory snapshot (m, D) does not match the target bank."""

	def __init__(self, snapshot: tuple[int, int], target: tuple[int, int], *, path: str | None = None):
		self.snapshot = snapshot
		self.target = target
		super().__init__(
			f"memory snapshot (m, D)={snapshot} is incompatible with target bank (m, D)={target}",
			path=path,
		)
