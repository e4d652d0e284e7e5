import math

from absl.testing import absltest
import chex
import jax
import numpy as np

from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.aggregators import substitution


def _config(loss, lam, d, vf, **kwargs):
    return seqrand_lib.EstimatorConfig(
        loss=loss, lam=lam, prior=gibbs.LogWeights.uniform(d), variance_fn=vf, **kwargs
    )


def _stream(rng, experts, n):
    return [(experts.cells[int(k)], float(y)) for k, y in zip(rng.integers(0, experts.num_cells, n), rng.uniform(-1, 1, n))]


class EstimatorConfigTest(absltest.TestCase):
    def test_validation(self):
        vf = variance.zero()
        with self.assertRaises(ValueError):
            _config(losses.square(), 0.0, 2, vf)
        with self.assertRaises(ValueError):
            _config(losses.square(), 0.5, 2, vf, output_mode="median")
        with self.assertRaises(ValueError):
            _config(losses.square(), 0.5, 2, vf, estimator="bagging")
        with self.assertRaises(ValueError):
            _config(losses.square(), 0.5, 2, vf, y_grid_size=1)

    def test_json(self):
        config = _config(losses.lq(3.0), 0.2, 3, variance.hoeffding(8.0), output_mode="cesaro_mean")
        restored = seqrand_lib.EstimatorConfig.from_json(config.to_json())
        self.assertEqual(restored.to_json(), config.to_json())


class SeqRandFitTest(absltest.TestCase):
    def setUp(self):
        super().setUp()
        self.rng = np.random.default_rng(1)
        self.experts = gibbs.ExpertTable(cells=("a", "b"), predictions=self.rng.uniform(-1, 1, size=(3, 2)))

    def test_shapes(self):
        config = _config(losses.square(), 0.5, 3, variance.hoeffding(4.0))
        fitted = seqrand_lib.seqrand_fit(config, self.experts, _stream(self.rng, self.experts, 5), jax.random.PRNGKey(0))
        self.assertEqual(fitted.num_steps, 5)
        chex.assert_shape(fitted.s_table, (6, 3))
        chex.assert_shape(fitted.log_posteriors, (6, 3))
        chex.assert_shape(fitted.drawn_indices, (6,))
        chex.assert_shape(fitted.drawn_predictions, (6, 2))
        chex.assert_shape(fitted.log_partitions, (6,))
        chex.assert_shape(fitted.step_losses, (5,))
        np.testing.assert_array_equal(fitted.s_table[0], 0.0)

    def test_identity_draws_are_experts(self):
        config = _config(losses.square(), 0.5, 3, variance.hoeffding(4.0))
        fitted = seqrand_lib.seqrand_fit(config, self.experts, _stream(self.rng, self.experts, 8), jax.random.PRNGKey(3))
        indices = np.asarray(fitted.drawn_indices)
        self.assertTrue(np.all((indices >= 0) & (indices < 3)))
        np.testing.assert_array_equal(fitted.drawn_predictions, self.experts.predictions[indices])

    def test_mixture_draws_are_marked(self):
        config = _config(losses.square(), 0.125, 3, variance.zero())
        fitted = seqrand_lib.seqrand_fit(config, self.experts, _stream(self.rng, self.experts, 4), jax.random.PRNGKey(0))
        np.testing.assert_array_equal(fitted.drawn_indices, -1)

    def test_single_expert(self):
        experts = gibbs.ExpertTable(cells=("a",), predictions=[[0.3]])
        config = _config(losses.square(), 0.5, 1, variance.hoeffding(4.0))
        data = [("a", y) for y in (0.1, -0.4, 0.9)]
        fitted = seqrand_lib.seqrand_fit(config, experts, data, jax.random.PRNGKey(0))
        np.testing.assert_array_equal(fitted.log_posteriors, 0.0)
        np.testing.assert_array_equal(fitted.drawn_indices, 0)

    def test_reproducible_under_seed(self):
        config = _config(losses.absolute(), 1.0, 3, variance.bernstein())
        data = _stream(self.rng, self.experts, 10)
        first = seqrand_lib.seqrand_fit(config, self.experts, data, jax.random.PRNGKey(7))
        second = seqrand_lib.seqrand_fit(config, self.experts, data, jax.random.PRNGKey(7))
        np.testing.assert_array_equal(first.drawn_indices, second.drawn_indices)
        np.testing.assert_array_equal(first.s_table, second.s_table)

    def test_telescoping(self):
        for vf, loss, lam in (
            (variance.hoeffding(4.0), losses.square(), 0.7),
            (variance.bernstein(), losses.absolute(), 2.0),
            (variance.zero(), losses.square(), 0.5),
        ):
            config = _config(loss, lam, 3, vf)
            fitted = seqrand_lib.seqrand_fit(
                config, self.experts, _stream(self.rng, self.experts, 20), jax.random.PRNGKey(2)
            )
            self.assertLessEqual(seqrand_lib.telescoping_gap(fitted, config.prior, lam), 1e-9)

    def test_constant_delta_tracks_progressive_mixture(self):
        data = _stream(self.rng, self.experts, 12)
        config = _config(losses.square(), 0.4, 3, variance.hoeffding(4.0))
        fitted = seqrand_lib.seqrand_fit(config, self.experts, data, jax.random.PRNGKey(0))
        trajectory = seqrand_lib.progressive_mixture_trajectory(
            losses.square(), 0.4, config.prior, self.experts, data
        )
        np.testing.assert_allclose(fitted.log_posteriors, trajectory, atol=1e-12)

    def test_rejects_mismatched_inputs(self):
        config = _config(losses.square(), 0.5, 2, variance.hoeffding(4.0))
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_fit(config, self.experts, [("a", 0.0)], jax.random.PRNGKey(0))
        wide = gibbs.ExpertTable(cells=("a",), predictions=[[2.0], [0.0]])
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_fit(config, wide, [("a", 0.0)], jax.random.PRNGKey(0))
        bad_rate = _config(losses.square(), 1.0, 3, variance.zero())
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_fit(bad_rate, self.experts, [("a", 0.0)], jax.random.PRNGKey(0))

    def test_substitution_failure_names_step(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[-1.0], [1.0]])
        config = _config(losses.square(), 0.5, 2, variance.zero("substitution"), y_grid_size=2)
        with self.assertRaisesRegex(substitution.SubstitutionError, "step 0"):
            seqrand_lib.seqrand_fit(config, experts, [("x", 1.0)], jax.random.PRNGKey(0))

    def test_degenerate_posterior_names_step(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[0.0], [0.0]])
        config = _config(losses.entropy(), 1.0, 2, variance.zero())
        with self.assertRaisesRegex(gibbs.DegeneratePosteriorError, "step 1"):
            seqrand_lib.seqrand_fit(config, experts, [("x", 1.0)], jax.random.PRNGKey(0))


class ReplayTest(absltest.TestCase):
    def setUp(self):
        super().setUp()
        self.rng = np.random.default_rng(4)
        self.experts = gibbs.ExpertTable(cells=("a", "b"), predictions=self.rng.uniform(-1, 1, size=(3, 2)))
        self.data = _stream(self.rng, self.experts, 4)
        self.config = _config(losses.square(), 0.7, 3, variance.bernstein())

    def test_reproduces_a_random_fit(self):
        fitted = seqrand_lib.seqrand_fit(self.config, self.experts, self.data, jax.random.PRNGKey(3))
        replayed, log_prob = seqrand_lib.seqrand_replay(
            self.config, self.experts, self.data, np.asarray(fitted.drawn_indices)
        )
        for name in ("s_table", "log_posteriors", "drawn_indices", "drawn_predictions", "step_losses"):
            np.testing.assert_allclose(getattr(replayed, name), getattr(fitted, name), atol=1e-12)
        logw = np.asarray(fitted.log_posteriors)
        expected = sum(logw[i, k] for i, k in enumerate(np.asarray(fitted.drawn_indices)))
        self.assertAlmostEqual(log_prob, expected, places=12)

    def test_draw_probabilities_sum_to_one(self):
        data = self.data[:2]
        total = 0.0
        for code in range(27):
            indices = [(code // 3**i) % 3 for i in range(3)]
            _, log_prob = seqrand_lib.seqrand_replay(self.config, self.experts, data, indices)
            total += math.exp(log_prob)
        self.assertAlmostEqual(total, 1.0, places=12)

    def test_errors(self):
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_replay(self.config, self.experts, self.data, [0, 1])
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_replay(self.config, self.experts, self.data, [0, 1, 2, 3, 0])
        mixture = _config(losses.square(), 0.5, 3, variance.zero())
        with self.assertRaises(ValueError):
            seqrand_lib.seqrand_replay(mixture, self.experts, self.data, [0] * 5)


class PredictTest(absltest.TestCase):
    def setUp(self):
        super().setUp()
        self.rng = np.random.default_rng(4)
        self.experts = gibbs.ExpertTable(cells=(0, 1), predictions=self.rng.uniform(-1, 1, size=(4, 2)))
        self.data = _stream(self.rng, self.experts, 9)

    def test_uniform_draw_picks_a_slot(self):
        config = _config(losses.square(), 0.5, 4, variance.hoeffding(4.0))
        fitted = seqrand_lib.seqrand_fit(config, self.experts, self.data, jax.random.PRNGKey(0))
        value = seqrand_lib.seqrand_predict(fitted, config, self.experts, 1, jax.random.PRNGKey(5))
        self.assertIn(value, set(np.asarray(fitted.drawn_predictions[:, 1]).tolist()))

    def test_cesaro_matches_progressive_mixture(self):
        config = _config(losses.square(), 0.5, 4, variance.zero(), output_mode="cesaro_mean")
        fitted = seqrand_lib.seqrand_fit(config, self.experts, self.data, jax.random.PRNGKey(0))
        expected = seqrand_lib.progressive_mixture(losses.square(), 0.5, config.prior, self.experts, self.data)
        for k in range(2):
            value = seqrand_lib.seqrand_predict(fitted, config, self.experts, k, jax.random.PRNGKey(0))
            self.assertAlmostEqual(value, expected[k], delta=1e-12)


class ProgressiveMixtureTest(absltest.TestCase):
    def test_one_step_value(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[0.0], [1.0]])
        prior = gibbs.LogWeights.uniform(2)
        value = seqrand_lib.progressive_mixture(losses.square(), 0.5, prior, experts, [("x", 1.0)])
        expected = (0.5 + 1.0 / (1.0 + math.exp(-0.5))) / 2.0
        self.assertAlmostEqual(float(value[0]), expected, delta=1e-12)

    def test_empty_data_is_prior_mixture(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[0.0], [1.0]])
        prior = gibbs.LogWeights.from_probs([0.25, 0.75])
        value = seqrand_lib.progressive_mixture(losses.square(), 0.5, prior, experts, [])
        self.assertAlmostEqual(float(value[0]), 0.75)

    def test_validation(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[0.0], [1.0]])
        with self.assertRaises(ValueError):
            seqrand_lib.progressive_mixture(losses.square(), 0.0, gibbs.LogWeights.uniform(2), experts, [])
        with self.assertRaises(ValueError):
            seqrand_lib.progressive_mixture(losses.square(), 0.5, gibbs.LogWeights.uniform(3), experts, [])


class GibbsErmTest(absltest.TestCase):
    def test_saturates_on_empirical_minimizer(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[-0.5], [0.2], [0.9]])
        data = [("x", y) for y in (0.1, 0.3, 0.25)]
        rho = seqrand_lib.gibbs_erm(losses.square(), 1e3, gibbs.LogWeights.uniform(3), experts, data)
        np.testing.assert_allclose(rho.probs, [0.0, 1.0, 0.0], atol=1e-12)

    def test_no_data_returns_prior(self):
        experts = gibbs.ExpertTable(cells=("x",), predictions=[[-0.5], [0.2]])
        prior = gibbs.LogWeights.from_probs([0.1, 0.9])
        rho = seqrand_lib.gibbs_erm(losses.square(), 2.0, prior, experts, [])
        np.testing.assert_allclose(rho.probs, prior.probs, rtol=1e-12)


if __name__ == "__main__":
    absltest.main()
