import tempfile
import unittest
from pathlib import Path

import numpy as np

from eastnet.exceptions import FormatError
from eastnet.nn.checkpoint import checkpoint_bytes, checkpoint_memory, load_checkpoint, save_checkpoint
from eastnet.nn.memory import export_memory, load_snapshot
from eastnet.nn.models import VariantKind, VariantSpec, build_variant, forward

SPEC = dict(
	n_regions=3,
	n_channels=2,
	n_covariates=4,
	alpha=4,
	beta=2,
	hidden=3,
	order=1,
	layers=2,
	memory_slots=3,
	memory_dim=4,
	mu_sp=2,
	mu_mo=2,
	seed=4,
)


class CheckpointTests(unittest.TestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.dir = Path(self.tmp.name)
		rng = np.random.default_rng(0)
		self.x = rng.standard_normal((2, 4, 3, 2))
		self.t_cov = rng.integers(0, 2, size=(2, 6, 4)).astype(float)

	def tearDown(self):
		self.tmp.cleanup()

	def _trained_like(self, kind: VariantKind):
		model = build_variant(VariantSpec(kind=kind, **SPEC))
		rng = np.random.default_rng(1)
		for _, param in model.registry.items():
			param.data = param.data + rng.normal(scale=0.01, size=param.shape)
		return model

	def test_round_trip_reproduces_predictions(self):
		for kind in (VariantKind.STNet, VariantKind.EASTNet):
			with self.subTest(kind=kind.value):
				model = self._trained_like(kind)
				path = self.dir / f"{kind.value}.eanw"
				save_checkpoint(model, path)
				restored = load_checkpoint(path)
				self.assertEqual(restored.spec, model.spec)
				np.testing.assert_array_equal(
					forward(restored, self.x, self.t_cov).numpy(),
					forward(model, self.x, self.t_cov).numpy(),
				)

	def test_trainable_flags_survive(self):
		model = self._trained_like(VariantKind.EASTNet)
		model.registry.set_trainable("mem", False)
		path = self.dir / "frozen.eanw"
		save_checkpoint(model, path)
		restored = load_checkpoint(path)
		self.assertFalse(restored.registry["mem.M"].requires_grad)
		self.assertTrue(restored.registry["out.W"].requires_grad)

	def test_embedded_memory(self):
		model = self._trained_like(VariantKind.EASTNet)
		path = self.dir / "east.eanw"
		save_checkpoint(model, path)
		snapshot = checkpoint_memory(path)
		np.testing.assert_array_equal(snapshot.M, model.memory.M.data)
		target = build_variant(VariantSpec(kind=VariantKind.STNetMem, **SPEC))
		# The step-memory bank reads N*q features, the two-branch one (N+C)*q.
		with self.assertLogs("eastnet.nn.memory", level="WARNING"):
			load_snapshot(target.memory, snapshot, "retrain")
		np.testing.assert_array_equal(target.memory.M.data, model.memory.M.data)

	def test_no_memory(self):
		path = self.dir / "plain.eanw"
		save_checkpoint(self._trained_like(VariantKind.HMINet), path)
		with self.assertRaises(FormatError):
			checkpoint_memory(path)

	def test_corrupt_files(self):
		blob = checkpoint_bytes(self._trained_like(VariantKind.STNetTcov))
		cases = {
			"magic": b"NOPE" + blob[4:],
			"truncated": blob[:-3],
			"trailing": blob + b"\0",
		}
		for label, data in cases.items():
			with self.subTest(case=label):
				path = self.dir / f"{label}.eanw"
				path.write_bytes(data)
				with self.assertRaises(FormatError) as ctx:
					load_checkpoint(path)
				self.assertEqual(ctx.exception.exit_code, 3)

	def test_invalid_variant_dimensions(self):
		blob = checkpoint_bytes(self._trained_like(VariantKind.STNet))
		self.assertIn(b'"alpha": 4', blob)
		path = self.dir / "alpha0.eanw"
		path.write_bytes(blob.replace(b'"alpha": 4', b'"alpha": 0', 1))
		with self.assertRaises(FormatError) as ctx:
			load_checkpoint(path)
		self.assertEqual(ctx.exception.exit_code, 3)
		self.assertEqual(ctx.exception.offset, 8)

	def test_missing_file(self):
		with self.assertRaises(FormatError):
			load_checkpoint(self.dir / "absent.eanw")

	def test_unwritable_destination(self):
		model = self._trained_like(VariantKind.EASTNet)
		with self.assertRaises(FormatError) as ctx:
			save_checkpoint(model, self.dir / "absent" / "east.eanw")
		self.assertEqual(ctx.exception.exit_code, 3)
		with self.assertRaises(FormatError):
			export_memory(model.memory, self.dir / "absent" / "east.eamb")


if __name__ == "__main__":
	unittest.main()
