"""Tape gradients of the core operations against central differences.

Each case builds a scalar loss from a handful of leaf tensors and asks
``grad_check`` to probe every coordinate. The oracle never looks at the
backward closures, only at loss values.
"""

import unittest

import numpy as np

from eastnet.core import ops
from eastnet.core.gradcheck import grad_check
from eastnet.core.tensor import Tape, Tensor, active_tape
from eastnet.exceptions import ContractError, ShapeError

TOLERANCE = 1e-6


def _leaf(rng: np.random.Generator, *shape: int, low: float = -1.0, high: float = 1.0) -> Tensor:
	return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


class ElementwiseGradientTests(unittest.TestCase):
	def setUp(self):
		self.rng = np.random.default_rng(7)

	def _check(self, params: dict[str, Tensor], loss_fn):
		probes = sum(p.size for p in params.values())
		error = grad_check(loss_fn, params, n_probes=probes, h=1e-6)
		self.assertLess(error, TOLERANCE)

	def test_binary_ops(self):
		a = _leaf(self.rng, 3, 4)
		b = _leaf(self.rng, 3, 4, low=0.5, high=2.0)
		for kind in ("add", "sub", "mul", "div"):
			with self.subTest(kind=kind):
				self._check({"a": a, "b": b}, lambda kind=kind: ops.sum_(ops.elementwise(kind, a, b)))

	def test_scalar_broadcast(self):
		a = _leaf(self.rng, 2, 5)
		s = _leaf(self.rng)
		self._check({"a": a, "s": s}, lambda: ops.sum_(ops.square(ops.mul(a, s))))

	def test_unary_ops(self):
		x = _leaf(self.rng, 6, low=0.2, high=1.5)
		for kind in ("sigmoid", "tanh", "relu", "abs", "square", "sqrt", "neg"):
			with self.subTest(kind=kind):
				self._check({"x": x}, lambda kind=kind: ops.sum_(ops.elementwise(kind, x)))

	def test_scale(self):
		x = _leaf(self.rng, 4)
		self._check({"x": x}, lambda: ops.sum_(ops.square(ops.elementwise("scale", x, factor=-2.5))))

	def test_shared_input_sums_contributions(self):
		x = Tensor([1.5, -2.0], requires_grad=True)
		tape = Tape()
		with tape:
			loss = ops.sum_(ops.mul(x, x))
		tape.backward(loss)
		np.testing.assert_allclose(tape.gradient(x).data, [3.0, -4.0])

	def test_unreachable_leaf_has_zero_gradient(self):
		x = Tensor([1.0, 2.0], requires_grad=True)
		unused = Tensor(np.ones((2, 2)), requires_grad=True)
		tape = Tape()
		with tape:
			ops.sum_(unused)
			loss = ops.sum_(x)
		tape.backward(loss)
		np.testing.assert_array_equal(tape.gradient(unused).data, np.zeros((2, 2)))


class StructuralGradientTests(unittest.TestCase):
	def setUp(self):
		self.rng = np.random.default_rng(11)

	def _check(self, params, loss_fn):
		probes = sum(p.size for p in params.values())
		self.assertLess(grad_check(loss_fn, params, n_probes=probes, h=1e-6), TOLERANCE)

	def test_batched_matmul(self):
		a = _leaf(self.rng, 2, 3, 4)
		w = _leaf(self.rng, 4, 5)
		self._check({"a": a, "w": w}, lambda: ops.sum_(ops.tanh(ops.matmul(a, w))))

	def test_softmax_rows(self):
		x = _leaf(self.rng, 3, 5)
		target = self.rng.uniform(size=(3, 5))
		self._check({"x": x}, lambda: ops.sum_(ops.mul(ops.softmax_rows(x), target)))

	def test_reductions(self):
		x = _leaf(self.rng, 3, 4)
		self._check({"x": x}, lambda: ops.sum_(ops.square(ops.mean(x, axis=1))))
		self._check({"x": x}, lambda: ops.sum_(ops.square(ops.sum_(x, axis=0, keepdims=True))))

	def test_rearrangement(self):
		a = _leaf(self.rng, 2, 3)
		b = _leaf(self.rng, 2, 2)
		weights = self.rng.uniform(size=(2, 5))

		def loss():
			joined = ops.concat([a, b], axis=1)
			stacked = ops.stack([joined, ops.scale(joined, 2.0)], axis=0)
			picked = ops.take(stacked, (1, slice(None), slice(1, 4)))
			flat = ops.reshape(ops.transpose2d(picked), (-1,))
			return ops.add(ops.sum_(ops.mul(joined, weights)), ops.sum_(ops.square(flat)))

		self._check({"a": a, "b": b}, loss)

	def test_expand(self):
		row = _leaf(self.rng, 1, 4)
		weights = self.rng.uniform(size=(3, 4))
		self._check({"row": row}, lambda: ops.sum_(ops.square(ops.mul(ops.expand(row, (3, 4)), weights))))


def _away_from_zero(rng: np.random.Generator, *shape: int) -> Tensor:
	magnitude = rng.uniform(0.2, 1.5, size=shape)
	return Tensor(magnitude * rng.choice([-1.0, 1.0], size=shape), requires_grad=True)


def _op_cases(rng: np.random.Generator) -> dict:
	"""One (params, loss) pair per op, each loss a random linear readout of the op."""
	a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 3)
	positive = _leaf(rng, 2, 3, low=0.5, high=2.0)
	signed = _away_from_zero(rng, 2, 3)
	m, w = _leaf(rng, 2, 3, 4), _leaf(rng, 4, 2)
	row = _leaf(rng, 1, 3)

	def case(params, build):
		readout = Tensor(rng.uniform(-1.0, 1.0, size=build().shape))
		return params, lambda: ops.sum_(ops.mul(build(), readout))

	return {
		"add": case({"a": a, "b": b}, lambda: ops.add(a, b)),
		"sub": case({"a": a, "b": b}, lambda: ops.sub(a, b)),
		"mul": case({"a": a, "b": b}, lambda: ops.mul(a, b)),
		"div": case({"a": a, "p": positive}, lambda: ops.div(a, positive)),
		"scale": case({"a": a}, lambda: ops.scale(a, -1.7)),
		"neg": case({"a": a}, lambda: ops.neg(a)),
		"sigmoid": case({"a": a}, lambda: ops.sigmoid(a)),
		"tanh": case({"a": a}, lambda: ops.tanh(a)),
		"relu": case({"s": signed}, lambda: ops.relu(signed)),
		"abs": case({"s": signed}, lambda: ops.abs_(signed)),
		"square": case({"a": a}, lambda: ops.square(a)),
		"sqrt": case({"p": positive}, lambda: ops.sqrt(positive)),
		"matmul": case({"m": m, "w": w}, lambda: ops.matmul(m, w)),
		"softmax_rows": case({"a": a}, lambda: ops.softmax_rows(a)),
		"sum": case({"m": m}, lambda: ops.sum_(m, axis=1)),
		"mean": case({"m": m}, lambda: ops.mean(m, axis=-1, keepdims=True)),
		"concat": case({"a": a, "b": b}, lambda: ops.concat([a, b], axis=1)),
		"stack": case({"a": a, "b": b}, lambda: ops.stack([a, b], axis=0)),
		"take": case({"m": m}, lambda: ops.take(m, (1, slice(0, 2)))),
		"transpose2d": case({"a": a}, lambda: ops.transpose2d(a)),
		"reshape": case({"m": m}, lambda: ops.reshape(m, (6, 4))),
		"expand": case({"row": row}, lambda: ops.expand(row, (4, 3))),
	}


class RandomizedGradientTests(unittest.TestCase):
	def test_every_op_over_many_seeds(self):
		for seed in range(100):
			rng = np.random.default_rng(1000 + seed)
			for name, (params, loss) in _op_cases(rng).items():
				with self.subTest(seed=seed, op=name):
					probes = sum(p.size for p in params.values())
					error = grad_check(loss, params, n_probes=probes, h=1e-5, seed=seed)
					self.assertLess(error, 1e-5)


class SoftmaxInvariantTests(unittest.TestCase):
	def test_rows_sum_to_one_and_ignore_shifts(self):
		rng = np.random.default_rng(5)
		for _ in range(100):
			x = rng.standard_normal((4, 7)) * 10.0
			out = ops.softmax_rows(Tensor(x)).data
			np.testing.assert_allclose(out.sum(axis=1), np.ones(4), rtol=0, atol=1e-12)
			shift = rng.uniform(-50.0, 50.0, size=(4, 1))
			shifted = ops.softmax_rows(Tensor(x + shift)).data
			np.testing.assert_allclose(shifted, out, rtol=0, atol=1e-12)

	def test_batched_rows(self):
		x = np.random.default_rng(6).standard_normal((2, 3, 5))
		out = ops.softmax_rows(Tensor(x)).data
		np.testing.assert_allclose(out.sum(axis=-1), np.ones((2, 3)), rtol=0, atol=1e-12)


class TapeContractTests(unittest.TestCase):
	def test_backward_needs_scalar(self):
		x = Tensor(np.ones(3), requires_grad=True)
		tape = Tape()
		with tape:
			y = ops.scale(x, 2.0)
		with self.assertRaises(ContractError):
			tape.backward(y)

	def test_no_tape_records_nothing(self):
		self.assertIsNone(active_tape())
		y = ops.add(Tensor(np.ones(2), requires_grad=True), 1.0)
		self.assertIsNone(y.tape)

	def test_constants_are_not_recorded(self):
		tape = Tape()
		with tape:
			ops.add(Tensor(np.ones(2)), Tensor(np.ones(2)))
		self.assertEqual(len(tape), 0)

	def test_tape_is_popped_on_exit(self):
		with Tape() as tape:
			self.assertIs(active_tape(), tape)
		self.assertIsNone(active_tape())

	def test_shape_mismatch(self):
		with self.assertRaises(ShapeError):
			ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
		with self.assertRaises(ShapeError):
			ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
		with self.assertRaises(ShapeError):
			ops.reshape(Tensor(np.ones(6)), (4, 2))

	def test_shape_error_is_a_value_error(self):
		with self.assertRaises(ValueError):
			ops.concat([Tensor(np.ones((2, 2))), Tensor(np.ones((3, 3)))], axis=0)

	def test_unknown_elementwise_kind(self):
		with self.assertRaises(ContractError):
			ops.elementwise("cube", Tensor(1.0))


class NumericStabilityTests(unittest.TestCase):
	def test_sigmoid_extremes(self):
		out = ops.sigmoid(Tensor([-1000.0, 0.0, 1000.0])).data
		np.testing.assert_allclose(out, [0.0, 0.5, 1.0])
		self.assertTrue(np.all(np.isfinite(out)))

	def test_softmax_rows_large_values(self):
		out = ops.softmax_rows(Tensor([[1000.0, 1000.0], [-1000.0, 0.0]])).data
		np.testing.assert_allclose(out.sum(axis=1), [1.0, 1.0])
		np.testing.assert_allclose(out[0], [0.5, 0.5])

	def test_relu_gradient_at_zero(self):
		x = Tensor([0.0, 1.0], requires_grad=True)
		tape = Tape()
		with tape:
			loss = ops.sum_(ops.relu(x))
		tape.backward(loss)
		np.testing.assert_array_equal(tape.gradient(x).data, [0.0, 1.0])


class GradCheckContractTests(unittest.TestCase):
	def test_step_outside_range(self):
		x = Tensor([1.0], requires_grad=True)
		with self.assertRaises(ContractError):
			grad_check(lambda: ops.sum_(x), {"x": x}, h=1e-2)

	def test_no_trainable_parameters(self):
		x = Tensor([1.0])
		with self.assertRaises(ContractError):
			grad_check(lambda: ops.sum_(x), {"x": x})

	def test_parameters_are_restored(self):
		x = Tensor([0.3, -0.7], requires_grad=True)
		before = x.data.copy()
		grad_check(lambda: ops.sum_(ops.tanh(x)), {"x": x}, n_probes=4)
		np.testing.assert_array_equal(x.data, before)


class WorkedExampleTests(unittest.TestCase):
	def test_matmul_cases(self):
		m = Tensor([[1.0, 2.0], [3.0, 4.0]])
		np.testing.assert_array_equal(ops.matmul(Tensor(np.eye(2)), m).data, m.data)
		out = ops.matmul(Tensor([[1.0, 0.0], [0.0, 0.0]]), Tensor([[5.0], [7.0]])).data
		np.testing.assert_array_equal(out, [[5.0], [0.0]])

	def test_matmul_gradient_closed_form(self):
		A = Tensor(np.random.default_rng(0).standard_normal((2, 3)), requires_grad=True)
		B = Tensor(np.random.default_rng(1).standard_normal((3, 4)))
		tape = Tape()
		with tape:
			loss = ops.sum_(ops.matmul(A, B))
		tape.backward(loss)
		np.testing.assert_allclose(tape.gradient(A).data, np.ones((2, 4)) @ B.data.T, atol=1e-12)

	def test_pointwise_values(self):
		self.assertEqual(ops.sigmoid(Tensor(0.0)).item(), 0.5)
		np.testing.assert_array_equal(ops.relu(Tensor([-3.0, 3.0])).data, [0.0, 3.0])

	def test_tanh_derivative(self):
		x = Tensor(0.7, requires_grad=True)
		tape = Tape()
		with tape:
			y = ops.tanh(x)
		tape.backward(y)
		h = 1e-5
		numeric = (np.tanh(0.7 + h) - np.tanh(0.7 - h)) / (2 * h)
		self.assertAlmostEqual(tape.gradient(x).item(), numeric, delta=1e-8)

	def test_softmax_uniform_and_saturated(self):
		np.testing.assert_allclose(ops.softmax_rows(Tensor([[0.0, 0.0, 0.0]])).data, [[1 / 3, 1 / 3, 1 / 3]])
		np.testing.assert_allclose(ops.softmax_rows(Tensor([[1000.0, 0.0]])).data, [[1.0, 0.0]], atol=1e-12)

	def test_rearrangement_shapes(self):
		joined = ops.concat([Tensor(np.ones((2, 3))), Tensor(np.ones((2, 5)))], axis=1)
		self.assertEqual(joined.shape, (2, 8))
		x = Tensor(np.arange(12.0).reshape(4, 3))
		self.assertEqual(ops.transpose2d(x).shape, (3, 4))
		np.testing.assert_array_equal(ops.transpose2d(ops.transpose2d(x)).data, x.data)

	def test_sum_gradient_is_ones(self):
		W = Tensor(np.zeros((2, 3)), requires_grad=True)
		tape = Tape()
		with tape:
			loss = ops.sum_(W)
		tape.backward(loss)
		np.testing.assert_array_equal(tape.gradient(W).data, np.ones((2, 3)))

	def test_least_squares_gradient(self):
		rng = np.random.default_rng(3)
		W = Tensor(rng.standard_normal((1, 4)), requires_grad=True)
		x = rng.standard_normal((4, 5))
		y = rng.standard_normal((1, 5))
		tape = Tape()
		with tape:
			loss = ops.mean(ops.square(ops.sub(ops.matmul(W, x), y)))
		tape.backward(loss)
		expected = 2.0 * (W.data @ x - y) @ x.T / 5
		np.testing.assert_allclose(tape.gradient(W).data, expected, atol=1e-12)

	def test_linear_model_gradcheck(self):
		W = Tensor(np.random.default_rng(4).standard_normal((3, 2)), requires_grad=True)
		x = np.random.default_rng(5).standard_normal((4, 3))
		error = grad_check(lambda: ops.sum_(ops.matmul(x, W)), {"W": W}, n_probes=6)
		self.assertLess(error, 1e-10)


if __name__ == "__main__":
	unittest.main()
