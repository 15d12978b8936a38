"""Bias-corrected Adam over named parameters."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from eastnet.core.tensor import Tensor
from eastnet.exceptions import ShapeError


@dataclass
class AdamState:
	lr: float = 5e-4
	beta1: float = 0.9
	beta2: float = 0.999
	eps: float = 1e-8
	t: int = 0
	m: dict[str, np.ndarray] = field(default_factory=dict)
	v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Mapping[str, Tensor], grads: Mapping[str, Tensor]) -> None:
	"""Apply one update to every parameter that has a gradient.

	Parameters are rebound to fresh arrays rather than written in place, so
	tensors derived from the old values keep their contents. Parameters with
	``requires_grad=False`` are left untouched.
	"""
	state.t += 1
	t = state.t
	b1, b2 = state.beta1, state.beta2
	correction1 = 1.0 - b1**t
	correction2 = 1.0 - b2**t
	for name, param in params.items():
		grad = grads.get(name)
		if grad is None or not param.requires_grad:
			continue
		g = grad.data if isinstance(grad, Tensor) else np.asarray(grad, dtype=np.float64)
		if g.shape != param.shape:
			raise ShapeError("adam_step", param.shape, g.shape, detail=name)
		m = state.m.get(name)
		v = state.v.get(name)
		if m is None:
			m = np.zeros(param.shape)
			v = np.zeros(param.shape)
		m = b1 * m + (1.0 - b1) * g
		v = b2 * v + (1.0 - b2) * g * g
		state.m[name] = m
		state.v[name] = v
		m_hat = m / correction1
		v_hat = v / correction2
		param.data = param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
