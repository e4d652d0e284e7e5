import math

from absl.testing import absltest
from absl.testing import parameterized
import jax.numpy as jnp
import numpy as np

from seqrand import losses


class LossSpecTest(parameterized.TestCase):
    def test_pointwise(self):
        np.testing.assert_allclose(losses.square().pointwise(1.0, -0.5), 2.25)
        np.testing.assert_allclose(losses.absolute().pointwise(1.0, -0.5), 1.5)
        np.testing.assert_allclose(losses.lq(3.0).pointwise(1.0, 0.0), 1.0)
        np.testing.assert_allclose(losses.zero_one().pointwise(1.0, 1.0), 0.0)
        np.testing.assert_allclose(losses.entropy().pointwise(0.5, 0.5), 0.0, atol=1e-15)

    def test_eval_loss_entropy_mismatch_is_infinite(self):
        self.assertEqual(losses.eval_loss(losses.entropy(), 1.0, 0.0), math.inf)

    def test_eval_loss_rejects_out_of_range_prediction(self):
        with self.assertRaises(ValueError):
            losses.eval_loss(losses.square(B=1.0), 0.0, 1.5)
        with self.assertRaises(ValueError):
            losses.eval_loss(losses.square(), float("nan"), 0.0)

    def test_invalid_specs(self):
        with self.assertRaises(ValueError):
            losses.LossSpec("lq", q=1.0)
        with self.assertRaises(ValueError):
            losses.LossSpec("entropy", y_lo=0.0, y_hi=1.0, b=0.5)
        with self.assertRaises(ValueError):
            losses.LossSpec("hinge")
        with self.assertRaises(ValueError):
            losses.LossSpec("square", y_lo=1.0, y_hi=-1.0)

    def test_ranges(self):
        loss = losses.square(B=2.0, b=1.0)
        self.assertEqual(loss.B, 2.0)
        self.assertEqual(loss.prediction_range, (-1.0, 1.0))
        self.assertEqual(losses.lq(1.5).name, "lq1.5")

    def test_json(self):
        loss = losses.lq(3.0, B=2.0, b=1.0)
        self.assertEqual(losses.LossSpec.from_json(loss.to_json()), loss)
        self.assertEqual(losses.LossSpec.from_json({"kind": "entropy"}), losses.entropy())


class MixabilityTest(parameterized.TestCase):
    def test_closed_forms(self):
        self.assertAlmostEqual(losses.mixability_eta_max(losses.square(B=1.0)), 0.5)
        self.assertAlmostEqual(losses.mixability_eta_max(losses.square(B=2.0)), 0.125)
        self.assertEqual(losses.mixability_eta_max(losses.entropy()), 1.0)
        self.assertAlmostEqual(losses.mixability_eta_max(losses.lq(1.5)), 1.0 / 3.0)
        self.assertAlmostEqual(losses.mixability_eta_max(losses.lq(3.0)), 1.0 / 3.0)
        self.assertIsNone(losses.mixability_eta_max(losses.absolute()))
        self.assertIsNone(losses.mixability_eta_max(losses.zero_one()))

    @parameterized.parameters(1.5, 2.0)
    def test_numeric_infimum_matches_closed_form(self, q):
        loss = losses.lq(q, B=1.0)
        numeric = losses.numeric_eta_infimum(loss, 1.0, 2001)
        self.assertAlmostEqual(numeric, losses.mixability_eta_max(loss), delta=1e-3)

    def test_numeric_infimum_lq3_dominates_threshold(self):
        loss = losses.lq(3.0, B=1.0)
        self.assertGreaterEqual(losses.numeric_eta_infimum(loss, 1.0, 2001), 1.0 / 3.0)

    def test_numeric_infimum_validation(self):
        with self.assertRaises(ValueError):
            losses.numeric_eta_infimum(losses.lq(2.0), 1.0, 1)
        with self.assertRaises(ValueError):
            losses.numeric_eta_infimum(losses.absolute(), 1.0, 100)

    def test_mixability_constant(self):
        square = losses.square(B=1.0)
        self.assertEqual(losses.mixability_constant(square, 0.5), 1.0)
        self.assertEqual(losses.mixability_constant(square, 0.6), math.inf)
        self.assertIsNone(losses.mixability_constant(losses.lq(3.0), 1.0))
        self.assertGreater(losses.mixability_constant(losses.absolute(), 1.0), 1.0)
        with self.assertRaises(ValueError):
            losses.mixability_constant(square, 0.0)


class PhiTest(parameterized.TestCase):
    def test_square_values(self):
        self.assertAlmostEqual(losses.phi(losses.square(), 0.75, -1.0, 1.0), 0.75)
        self.assertAlmostEqual(losses.best_constant(losses.square(), 0.75, -1.0, 1.0), -0.5)

    def test_ties_go_to_h1(self):
        self.assertEqual(losses.best_constant(losses.absolute(), 0.5, -1.0, 1.0), -1.0)
        self.assertEqual(losses.best_constant(losses.zero_one(), 0.5, 0.0, 1.0), 0.0)

    @parameterized.named_parameters(
        ("lq1.5", losses.lq(1.5), -1.0, 1.0),
        ("square", losses.square(), -1.0, 1.0),
        ("lq3", losses.lq(3.0), -1.0, 1.0),
        ("entropy", losses.entropy(), 1.0, 0.0),
        ("zero_one", losses.zero_one(), 0.0, 1.0),
    )
    def test_closed_form_matches_grid_minimum(self, loss, h1, h2):
        y = jnp.linspace(min(h1, h2), max(h1, h2), 20001)
        for p in (0.1, 0.25, 0.5, 0.6, 0.9):
            grid_min = float(jnp.min(losses.phi_p(loss, p, h1, h2, y)))
            self.assertAlmostEqual(losses.phi(loss, p, h1, h2), grid_min, delta=1e-6)

    def test_phi_validation(self):
        with self.assertRaises(ValueError):
            losses.phi(losses.square(), 1.5, -1.0, 1.0)
        with self.assertRaises(ValueError):
            losses.phi(losses.square(), 0.5, 1.0, 1.0)
        with self.assertRaises(ValueError):
            losses.phi_second_derivative(losses.square(), 0.0, -1.0, 1.0)

    def test_second_derivative_square(self):
        # phi(p) = 4 p (1 - p) for h = (-1, 1).
        self.assertAlmostEqual(losses.phi_second_derivative(losses.square(), 0.3, -1.0, 1.0), -8.0)

    def test_loss_span_delta(self):
        self.assertAlmostEqual(losses.loss_span_delta(losses.square(), 2.0, 1.0), 8.0)
        self.assertAlmostEqual(losses.loss_span_delta(losses.square(), 0.5, 1.0), 2.25)
        with self.assertRaises(ValueError):
            losses.loss_span_delta(losses.entropy(), 0.5, 1.0)


if __name__ == "__main__":
    absltest.main()
