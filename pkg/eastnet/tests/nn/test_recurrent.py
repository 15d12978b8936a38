"""GCRU cells against a plain numpy GRU whose affine maps are graph power series."""

import unittest

import numpy as np

from eastnet.core import ops
from eastnet.core.gradcheck import grad_check
from eastnet.core.tensor import Tensor
from eastnet.exceptions import ContractError, ShapeError
from eastnet.nn.graph import ConvKernel
from eastnet.nn.params import ParamRegistry
from eastnet.nn.recurrent import GcruCell, GcruStack, StackConfig, decode_step, encode, gcru_step, pyramid_merge

N_NODES = 4
IN_DIM = 3
HIDDEN = 5
ORDER = 2
PYRAMID = StackConfig(layers=3, pyramid_factor=2, hidden=HIDDEN)


def _sigmoid(x):
	return 1.0 / (1.0 + np.exp(-x))


def _gc(P, X, theta):
	out = np.zeros((X.shape[0], theta.shape[-1]))
	power = np.eye(P.shape[0])
	for k in range(theta.shape[0]):
		out += power @ X @ theta[k]
		power = power @ P
	return out


def _gru_gates(cell: GcruCell, P, X, H, thetas=None):
	thetas = thetas or {gate: cell.kernels[gate].theta.data for gate in "urc"}
	b = {gate: cell.bias[gate].data for gate in "urc"}
	XH = np.concatenate([X, H], axis=1)
	u = _sigmoid(_gc(P, XH, thetas["u"]) + b["u"])
	r = _sigmoid(_gc(P, XH, thetas["r"]) + b["r"])
	c = np.tanh(_gc(P, np.concatenate([X, r * H], axis=1), thetas["c"]) + b["c"])
	return u, r, c


def _gru_reference(cell: GcruCell, P, X, H, thetas=None):
	u, _, c = _gru_gates(cell, P, X, H, thetas)
	return u * H + (1.0 - u) * c


class GcruCellTests(unittest.TestCase):
	@classmethod
	def setUpClass(cls):
		rng = np.random.default_rng(23)
		raw = rng.uniform(size=(N_NODES, N_NODES))
		cls.P = raw / raw.sum(axis=1, keepdims=True)
		cls.X = rng.standard_normal((N_NODES, IN_DIM))
		cls.H = rng.standard_normal((N_NODES, HIDDEN)) * 0.5
		cls.rng = rng

	def _cell(self, seed=0, dynamic=False):
		registry = ParamRegistry(seed=seed)
		cell = GcruCell(registry, "cell", IN_DIM, HIDDEN, ORDER, dynamic=dynamic)
		for gate in "urc":
			cell.bias[gate].data = registry.rng.uniform(-0.3, 0.3, size=HIDDEN)
		return registry, cell

	def test_matches_reference_gru(self):
		_, cell = self._cell()
		out = gcru_step(cell, Tensor(self.X), Tensor(self.H), Tensor(self.P)).data
		np.testing.assert_allclose(out, _gru_reference(cell, self.P, self.X, self.H), atol=1e-12)

	def test_override_kernels_replace_static_ones(self):
		_, cell = self._cell()
		thetas = {gate: self.rng.standard_normal(cell.kernel_shape()) * 0.2 for gate in "urc"}
		overrides = {gate: ConvKernel(Tensor(theta)) for gate, theta in thetas.items()}
		out = gcru_step(cell, Tensor(self.X), Tensor(self.H), Tensor(self.P), overrides).data
		np.testing.assert_allclose(out, _gru_reference(cell, self.P, self.X, self.H, thetas), atol=1e-12)

	def test_dynamic_cell_needs_generated_kernels(self):
		registry, cell = self._cell(dynamic=True)
		self.assertEqual(cell.kernels, {})
		self.assertEqual(sorted(registry.names()), ["cell.b_c", "cell.b_r", "cell.b_u"])
		with self.assertRaises(ContractError):
			gcru_step(cell, Tensor(self.X), Tensor(self.H), Tensor(self.P))

	def test_saturated_update_gate_keeps_state(self):
		_, cell = self._cell()
		cell.bias["u"].data = np.full(HIDDEN, 50.0)
		out = gcru_step(cell, Tensor(self.X), Tensor(self.H), Tensor(self.P)).data
		np.testing.assert_allclose(out, self.H, atol=1e-12)

	def test_gradients(self):
		registry, cell = self._cell(seed=9)
		X, H, P = Tensor(self.X), Tensor(self.H), Tensor(self.P)

		def loss():
			return ops.mean(ops.square(gcru_step(cell, X, H, P)))

		self.assertLess(grad_check(loss, registry.trainable(), n_probes=48, h=1e-6), 1e-6)

	def test_shape_errors(self):
		_, cell = self._cell()
		with self.assertRaises(ShapeError):
			gcru_step(cell, Tensor(np.ones((N_NODES, IN_DIM + 1))), Tensor(self.H), Tensor(self.P))
		with self.assertRaises(ShapeError):
			gcru_step(cell, Tensor(self.X), Tensor(np.ones((N_NODES, HIDDEN + 1))), Tensor(self.P))


class PyramidTests(unittest.TestCase):
	def test_merges_adjacent_pairs(self):
		steps = [Tensor(np.full((2, 3), float(i))) for i in range(4)]
		merged = pyramid_merge(steps, 2)
		self.assertEqual(len(merged), 2)
		self.assertEqual(merged[0].shape, (2, 6))
		np.testing.assert_array_equal(merged[1].data[0], [2, 2, 2, 3, 3, 3])

	def test_tensor_input(self):
		seq = Tensor(np.arange(24, dtype=float).reshape(4, 2, 3))
		merged = pyramid_merge(seq, 2)
		self.assertEqual(merged.shape, (2, 2, 6))
		np.testing.assert_array_equal(merged.data[0, 0], [0, 1, 2, 6, 7, 8])

	def test_factor_one_is_identity(self):
		steps = [Tensor(np.ones((2, 3))) for _ in range(3)]
		self.assertEqual(len(pyramid_merge(steps, 1)), 3)

	def test_odd_length_is_rejected(self):
		with self.assertRaises(ContractError):
			pyramid_merge([Tensor(np.ones((2, 3))) for _ in range(3)], 2)


class StackTests(unittest.TestCase):
	@classmethod
	def setUpClass(cls):
		rng = np.random.default_rng(31)
		raw = rng.uniform(size=(N_NODES, N_NODES))
		cls.P = Tensor(raw / raw.sum(axis=1, keepdims=True))
		cls.inputs = [Tensor(rng.standard_normal((2, N_NODES, IN_DIM))) for _ in range(8)]

	def test_pyramid_encoder_shapes(self):
		stack = GcruStack(ParamRegistry(seed=0), "enc", IN_DIM, PYRAMID, ORDER)
		self.assertEqual([s[1] for s in stack.kernel_shapes()], [IN_DIM + HIDDEN, 3 * HIDDEN, 3 * HIDDEN])
		encoding = encode(stack, self.inputs, self.P)
		self.assertEqual(len(encoding.finals), 3)
		self.assertEqual(encoding.top.shape, (2, N_NODES, HIDDEN))

	def test_pyramid_needs_divisible_length(self):
		stack = GcruStack(ParamRegistry(seed=0), "enc", IN_DIM, PYRAMID, ORDER)
		with self.assertRaises(ContractError):
			encode(stack, self.inputs[:6], self.P)

	def test_single_layer_encoder_equals_cell_loop(self):
		registry = ParamRegistry(seed=2)
		stack = GcruStack(registry, "enc", IN_DIM, StackConfig(layers=1, hidden=HIDDEN), ORDER)
		h = ops.zeros((2, N_NODES, HIDDEN))
		for x in self.inputs:
			h = gcru_step(stack.cells[0], x, h, self.P)
		np.testing.assert_allclose(encode(stack, self.inputs, self.P).top.data, h.data, atol=1e-12)

	def test_two_layer_encoder_equals_nested_loop(self):
		registry = ParamRegistry(seed=3)
		stack = GcruStack(registry, "enc", IN_DIM, StackConfig(layers=2, pyramid_factor=1, hidden=HIDDEN), ORDER)
		lower, upper = stack.cells
		h0 = ops.zeros((2, N_NODES, HIDDEN))
		h1 = ops.zeros((2, N_NODES, HIDDEN))
		for x in self.inputs:
			h0 = gcru_step(lower, x, h0, self.P)
			h1 = gcru_step(upper, h0, h1, self.P)
		encoding = encode(stack, self.inputs, self.P)
		np.testing.assert_allclose(encoding.finals[0].data, h0.data, atol=1e-12)
		np.testing.assert_allclose(encoding.top.data, h1.data, atol=1e-12)

	def test_decode_step_threads_layer_states(self):
		stack = GcruStack(ParamRegistry(seed=0), "dec", IN_DIM, StackConfig(layers=2, hidden=HIDDEN), ORDER)
		states = [ops.zeros((2, N_NODES, HIDDEN)) for _ in range(2)]
		top, new_states = decode_step(stack, self.inputs[0], states, self.P)
		self.assertEqual(len(new_states), 2)
		self.assertIs(top, new_states[-1])
		with self.assertRaises(ContractError):
			decode_step(stack, self.inputs[0], states[:1], self.P)

	def test_invalid_stack_config(self):
		with self.assertRaises(ContractError):
			StackConfig(layers=2, pyramid_factor=3)
		with self.assertRaises(ContractError):
			StackConfig(layers=0)


class WorkedExampleTests(unittest.TestCase):
	def _zeroed(self, registry: ParamRegistry):
		for _, param in registry.items():
			param.data = np.zeros(param.shape)

	def test_zero_weights_halve_the_state(self):
		registry = ParamRegistry(seed=0)
		cell = GcruCell(registry, "cell", IN_DIM, HIDDEN, ORDER)
		self._zeroed(registry)
		H = np.random.default_rng(1).standard_normal((N_NODES, HIDDEN))
		P = Tensor(np.full((N_NODES, N_NODES), 1.0 / N_NODES))
		out = gcru_step(cell, Tensor(np.ones((N_NODES, IN_DIM))), Tensor(H), P).data
		np.testing.assert_allclose(out, 0.5 * H, atol=1e-12)

	def test_zero_weight_decoder_decays_geometrically(self):
		registry = ParamRegistry(seed=0)
		stack = GcruStack(registry, "dec", IN_DIM, StackConfig(layers=1, hidden=HIDDEN), ORDER)
		self._zeroed(registry)
		P = Tensor(np.eye(N_NODES))
		H0 = np.random.default_rng(2).standard_normal((N_NODES, HIDDEN))
		states = [Tensor(H0)]
		for step in range(1, 5):
			top, states = decode_step(stack, ops.zeros((N_NODES, IN_DIM)), states, P)
			np.testing.assert_allclose(top.data, H0 * 0.5**step, atol=1e-12)

	def test_hidden_state_is_bounded(self):
		registry = ParamRegistry(seed=4)
		cell = GcruCell(registry, "cell", IN_DIM, HIDDEN, ORDER)
		rng = np.random.default_rng(4)
		P = Tensor(np.eye(N_NODES))
		x = Tensor(rng.standard_normal((N_NODES, IN_DIM)) * 10)
		h = Tensor(np.zeros((N_NODES, HIDDEN)))
		for _ in range(5):
			h = gcru_step(cell, x, h, P)
			self.assertTrue(np.all(np.abs(h.data) <= 1.0))

	def test_gates_and_convex_update(self):
		for seed in range(100):
			with self.subTest(seed=seed):
				rng = np.random.default_rng(seed)
				cell = GcruCell(ParamRegistry(seed=seed), "cell", IN_DIM, HIDDEN, ORDER)
				raw = rng.uniform(size=(N_NODES, N_NODES))
				P = raw / raw.sum(axis=1, keepdims=True)
				X = rng.standard_normal((N_NODES, IN_DIM))
				H = rng.uniform(-1.0, 1.0, size=(N_NODES, HIDDEN))
				u, r, c = _gru_gates(cell, P, X, H)
				for gate in (u, r):
					self.assertTrue(np.all((gate > 0.0) & (gate < 1.0)))
				out = gcru_step(cell, Tensor(X), Tensor(H), Tensor(P)).data
				np.testing.assert_allclose(out, u * H + (1.0 - u) * c, atol=1e-12)
				self.assertTrue(np.all(out >= np.minimum(H, c) - 1e-12))
				self.assertTrue(np.all(out <= np.maximum(H, c) + 1e-12))

	def test_encoder_is_deterministic(self):
		rng = np.random.default_rng(6)
		inputs = [Tensor(rng.standard_normal((N_NODES, IN_DIM))) for _ in range(8)]
		P = Tensor(np.eye(N_NODES))
		runs = []
		for _ in range(2):
			stack = GcruStack(ParamRegistry(seed=6), "enc", IN_DIM, PYRAMID, ORDER)
			runs.append(encode(stack, inputs, P).top.data)
		np.testing.assert_array_equal(runs[0], runs[1])


if __name__ == "__main__":
	unittest.main()
