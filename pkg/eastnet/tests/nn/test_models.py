"""Shapes, structure and special cases of the five variants at toy sizes."""

import unittest

import numpy as np

from eastnet.core import ops
from eastnet.core.gradcheck import grad_check
from eastnet.exceptions import ContractError, ShapeError
from eastnet.nn.models import LADDER, VariantKind, VariantSpec, build_variant, forward

N_REGIONS = 3
N_CHANNELS = 2
N_COV = 5
ALPHA = 4
BETA = 3
BATCH = 2


def _spec(kind: VariantKind, **overrides) -> VariantSpec:
	values = dict(
		kind=kind,
		n_regions=N_REGIONS,
		n_channels=N_CHANNELS,
		n_covariates=N_COV,
		alpha=ALPHA,
		beta=BETA,
		hidden=4,
		order=2,
		layers=2,
		memory_slots=3,
		memory_dim=4,
		mu_sp=3,
		mu_mo=2,
		tcov_dim=2,
		seed=1,
	)
	values.update(overrides)
	return VariantSpec(**values)


def _inputs(seed: int = 0, batch: int = BATCH):
	rng = np.random.default_rng(seed)
	x = rng.standard_normal((batch, ALPHA, N_REGIONS, N_CHANNELS))
	t_cov = rng.integers(0, 2, size=(batch, ALPHA + BETA, N_COV)).astype(float)
	return x, t_cov


class VariantShapeTests(unittest.TestCase):
	@classmethod
	def setUpClass(cls):
		cls.x, cls.t_cov = _inputs()
		cls.models = {kind: build_variant(_spec(kind)) for kind in LADDER}

	def test_output_shapes(self):
		for kind, model in self.models.items():
			with self.subTest(kind=kind.value):
				forecast = forward(model, self.x, self.t_cov)
				self.assertEqual(forecast.values.shape, (BATCH, BETA, N_REGIONS, N_CHANNELS))
				self.assertTrue(np.all(np.isfinite(forecast.numpy())))

	def test_attention_only_for_memory_variants(self):
		for kind, model in self.models.items():
			with self.subTest(kind=kind.value):
				attention = forward(model, self.x, self.t_cov).attention
				if kind in (VariantKind.STNetMem, VariantKind.EASTNet):
					self.assertEqual(attention.shape, (BATCH, 3))
					np.testing.assert_allclose(attention.data.sum(axis=1), np.ones(BATCH), atol=1e-12)
				else:
					self.assertIsNone(attention)

	def test_unbatched_input(self):
		model = self.models[VariantKind.EASTNet]
		single = forward(model, self.x[0], self.t_cov[0])
		self.assertFalse(single.batched)
		self.assertEqual(single.numpy().shape, (BETA, N_REGIONS, N_CHANNELS))

	def test_batch_rows_are_independent(self):
		for kind, model in self.models.items():
			with self.subTest(kind=kind.value):
				batched = forward(model, self.x, self.t_cov).numpy()
				for b in range(BATCH):
					single = forward(model, self.x[b], self.t_cov[b]).numpy()
					np.testing.assert_allclose(batched[b], single, atol=1e-10)

	def test_wrong_window_shape(self):
		model = self.models[VariantKind.STNet]
		with self.assertRaises(ShapeError):
			forward(model, self.x[:, :-1], self.t_cov)
		with self.assertRaises(ShapeError):
			forward(model, self.x, self.t_cov[:, :-1])


class VariantStructureTests(unittest.TestCase):
	def test_parameter_counts_grow_along_the_ladder(self):
		counts = {kind: build_variant(_spec(kind)).parameter_count() for kind in LADDER}
		self.assertLess(counts[VariantKind.STNet], counts[VariantKind.STNetTcov])
		self.assertLess(counts[VariantKind.STNet], counts[VariantKind.STNetMem])
		self.assertLess(counts[VariantKind.STNetTcov], counts[VariantKind.HMINet])

	def test_eastnet_decoders_have_no_static_kernels(self):
		names = build_variant(_spec(VariantKind.EASTNet)).registry.names()
		self.assertFalse([n for n in names if ".dec." in n and ".theta_" in n])
		self.assertTrue([n for n in names if ".enc." in n and ".theta_" in n])
		self.assertIn("mdfg.sp.dec.1.proj2.W", names)
		self.assertIn("mdfg.mo.dec.0.fn_gain", names)

	def test_eastnet_encoders_are_pyramidal(self):
		model = build_variant(_spec(VariantKind.EASTNet))
		self.assertEqual(model.branches["sp"].encoder.config.pyramid_factor, 2)
		self.assertEqual(model.branches["sp"].decoder.config.pyramid_factor, 1)

	def test_seeded_build_is_deterministic(self):
		first = build_variant(_spec(VariantKind.EASTNet)).registry.state()
		second = build_variant(_spec(VariantKind.EASTNet)).registry.state()
		self.assertEqual(list(first), list(second))
		for name in first:
			np.testing.assert_array_equal(first[name], second[name])

	def test_pyramid_needs_divisible_alpha(self):
		with self.assertRaises(ContractError):
			build_variant(_spec(VariantKind.EASTNet, alpha=3))
		build_variant(_spec(VariantKind.STNet, alpha=3))

	def test_modal_identity_only_for_hminet(self):
		with self.assertRaises(ContractError):
			build_variant(_spec(VariantKind.EASTNet, modal_identity=True))

	def test_spec_round_trip(self):
		spec = _spec(VariantKind.HMINet, pyramid_factor=2)
		restored = VariantSpec.from_dict(spec.to_dict())
		self.assertEqual(restored, spec)
		self.assertIs(restored.kind, VariantKind.HMINet)


class VariantBehaviourTests(unittest.TestCase):
	@classmethod
	def setUpClass(cls):
		cls.x, cls.t_cov = _inputs(seed=3)

	def test_hminet_with_identity_modal_branch_is_stnet_tcov(self):
		reference = build_variant(_spec(VariantKind.STNetTcov))
		special = build_variant(_spec(VariantKind.HMINet, modal_identity=True, seed=9))
		self.assertEqual(reference.registry.names(), special.registry.names())
		special.registry.load_state(reference.registry.state())
		np.testing.assert_allclose(
			forward(special, self.x, self.t_cov).numpy(),
			forward(reference, self.x, self.t_cov).numpy(),
			atol=1e-12,
		)

	def test_hminet_without_covariates_is_stnet(self):
		reference = build_variant(_spec(VariantKind.STNet))
		special = build_variant(_spec(VariantKind.HMINet, modal_identity=True, seed=9))
		rng = np.random.default_rng(4)
		state = {"tcov.W": np.zeros((N_COV, 2))}
		for name, values in reference.registry.state().items():
			target = special.registry[name].shape
			if target != values.shape:
				# Rows fed by the (zero) covariate embedding sit after the C observed channels.
				extra = rng.standard_normal((values.shape[0], target[1] - values.shape[1], values.shape[2]))
				values = np.concatenate([values[:, :N_CHANNELS], extra, values[:, N_CHANNELS:]], axis=1)
			state[name] = values
		self.assertEqual(sorted(state), sorted(special.registry.names()))
		special.registry.load_state(state)
		np.testing.assert_allclose(
			forward(special, self.x, self.t_cov).numpy(),
			forward(reference, self.x, self.t_cov).numpy(),
			atol=1e-12,
		)

	def test_covariates_reach_the_output(self):
		other = self.t_cov.copy()
		other[:, ALPHA:] = 1.0 - other[:, ALPHA:]
		for kind in LADDER:
			with self.subTest(kind=kind.value):
				model = build_variant(_spec(kind))
				a = forward(model, self.x, self.t_cov).numpy()
				b = forward(model, self.x, other).numpy()
				if kind.uses_tcov:
					self.assertFalse(np.allclose(a, b))
				else:
					np.testing.assert_array_equal(a, b)

	def test_region_permutation_equivariance(self):
		perm = np.array([2, 0, 1])
		for kind in (VariantKind.STNet, VariantKind.STNetTcov):
			with self.subTest(kind=kind.value):
				model = build_variant(_spec(kind))
				base = forward(model, self.x, self.t_cov).numpy()
				edges = model.branches["sp"].edges
				edges.E.data = edges.E.data[perm]
				edges.F.data = edges.F.data[perm]
				permuted = forward(model, self.x[:, :, perm], self.t_cov).numpy()
				np.testing.assert_allclose(permuted, base[:, :, perm], atol=1e-10)

	def test_gradients(self):
		y = np.random.default_rng(5).standard_normal((BATCH, BETA, N_REGIONS, N_CHANNELS))
		for kind in LADDER:
			with self.subTest(kind=kind.value):
				model = build_variant(_spec(kind, hidden=3))

				def loss(model=model):
					return ops.mean(ops.square(ops.sub(forward(model, self.x, self.t_cov).values, y)))

				error = grad_check(loss, model.registry.trainable(), n_probes=24, h=1e-6)
				self.assertLess(error, 1e-4)


if __name__ == "__main__":
	unittest.main()
