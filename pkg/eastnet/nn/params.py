"""Ordered parameter registry with seeded initialization.

Registration order is the checkpoint order, so models must create their
parameters deterministically. All random draws come from the registry's
own generator; two registries with the same seed and the same sequence of
registrations hold bitwise-identical values.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence

import numpy as np

from eastnet.core.tensor import Tensor
from eastnet.exceptions import ContractError, ShapeError


class ParamRegistry:
	def __init__(self, seed: int = 0):
		self.seed = seed
		self.rng = np.random.default_rng(seed)
		self._params: dict[str, Tensor] = {}

	def _register(self, name: str, values: np.ndarray) -> Tensor:
		if name in self._params:
			raise ContractError(f"parameter {name!r} registered twice")
		param = Tensor(values, requires_grad=True, name=name)
		self._params[name] = param
		return param

	def uniform(self, name: str, shape: Sequence[int], bound: float) -> Tensor:
		return self._register(name, self.rng.uniform(-bound, bound, size=tuple(shape)))

	def glorot(self, name: str, shape: Sequence[int]) -> Tensor:
		"""Glorot-uniform over the last two axes (leading axes are stacked matrices)."""
		fan_in, fan_out = (shape[-2], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
		return self.uniform(name, shape, math.sqrt(6.0 / (fan_in + fan_out)))

	def zeros(self, name: str, shape: Sequence[int]) -> Tensor:
		return self._register(name, np.zeros(tuple(shape)))

	def constant(self, name: str, shape: Sequence[int], value: float) -> Tensor:
		return self._register(name, np.full(tuple(shape), float(value)))

	def __getitem__(self, name: str) -> Tensor:
		return self._params[name]

	def __contains__(self, name: str) -> bool:
		return name in self._params

	def __iter__(self) -> Iterator[str]:
		return iter(self._params)

	def __len__(self) -> int:
		return len(self._params)

	def items(self):
		return self._params.items()

	def names(self) -> list[str]:
		return list(self._params)

	def trainable(self) -> dict[str, Tensor]:
		return {name: p for name, p in self._params.items() if p.requires_grad}

	def count(self, trainable_only: bool = False) -> int:
		return sum(p.size for p in self._params.values() if p.requires_grad or not trainable_only)

	def set_trainable(self, prefix: str, trainable: bool) -> list[str]:
		"""Flip ``requires_grad`` on every parameter under ``prefix``; returns the names touched."""
		touched = [name for name in self._params if name == prefix or name.startswith(prefix + ".")]
		for name in touched:
			self._params[name].requires_grad = trainable
		return touched

	def state(self) -> dict[str, np.ndarray]:
		return {name: p.data.copy() for name, p in self._params.items()}

	def load_state(self, state: dict[str, np.ndarray]) -> None:
		for name, values in state.items():
			param = self._params[name]
			if param.shape != values.shape:
				raise ShapeError("load_state", param.shape, values.shape, detail=name)
			param.data = np.array(values, dtype=np.float64)
