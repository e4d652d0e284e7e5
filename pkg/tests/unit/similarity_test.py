import math

from absl.testing import absltest
from absl.testing import parameterized
import numpy as np

from seqrand import losses
from seqrand.minimax import hypercube
from seqrand.minimax import similarity


def _zero_one_edge():
    return hypercube.Hypercube(m=1, w=1.0, p_plus=0.75, p_minus=0.25, h1=0.0, h2=1.0, loss=losses.zero_one())


class TwoPointTest(parameterized.TestCase):
    def test_no_samples(self):
        self.assertAlmostEqual(similarity.two_point_similarity(similarity.sqrt, 0.7, 0.2, 0), 1.0)
        self.assertAlmostEqual(similarity.two_point_similarity(similarity.minimum, 0.7, 0.2, 0), 1.0)

    @parameterized.parameters((0.75, 0.25), (0.9, 0.3), (1.0, 0.0), (0.6, 0.0))
    def test_affinity_squared_is_one_minus_d_II(self, p_plus, p_minus):
        hc = hypercube.Hypercube(
            m=1, w=1.0, p_plus=p_plus, p_minus=p_minus, h1=-1.0, h2=1.0, loss=losses.square()
        )
        affinity = similarity.two_point_similarity(similarity.sqrt, p_plus, p_minus, 1)
        self.assertAlmostEqual(affinity**2, 1.0 - hc.d_II, places=12)

    @parameterized.parameters((0.75, 0.25), (0.9, 0.3), (0.55, 0.45))
    def test_total_variation_against_affinity(self, p_plus, p_minus):
        hc = hypercube.Hypercube(
            m=1, w=1.0, p_plus=p_plus, p_minus=p_minus, h1=-1.0, h2=1.0, loss=losses.square()
        )
        for k in (1, 3, 10, 40):
            s_min = similarity.two_point_similarity(similarity.minimum, p_plus, p_minus, k)
            self.assertGreaterEqual(s_min, similarity.affinity_lower_bound(hc.d_II, k) - 1e-12)

    def test_validation(self):
        with self.assertRaises(ValueError):
            similarity.two_point_similarity(similarity.sqrt, 1.2, 0.2, 1)
        with self.assertRaises(ValueError):
            similarity.two_point_similarity(similarity.sqrt, 0.7, 0.2, -1)
        with self.assertRaises(ValueError):
            similarity.two_point_similarity(similarity.sqrt, 0.7, 0.2, similarity.MAX_SAMPLES + 1)

    def test_log_binomial_table_switches_to_gammaln(self):
        table = np.asarray(similarity.log_binomial_table(70))
        for k, j in ((70, 0), (70, 35), (64, 10)):
            self.assertAlmostEqual(table[k, j], math.log(math.comb(k, j)), delta=1e-9)
        self.assertEqual(table[3, 5], -math.inf)


class ProductSimilarityTest(absltest.TestCase):
    def test_single_edge_sample(self):
        hc = _zero_one_edge()
        self.assertAlmostEqual(similarity.product_similarity(similarity.minimum, hc, 1), 0.5, places=12)
        self.assertAlmostEqual(similarity.total_variation(hc, 1), 0.5, places=12)
        self.assertAlmostEqual(similarity.affinity_lower_bound(hc.d_II, 1.0), 0.5, places=12)

    def test_no_samples(self):
        hc = _zero_one_edge()
        self.assertAlmostEqual(similarity.hellinger_affinity(hc, 0), 1.0)
        self.assertAlmostEqual(similarity.total_variation(hc, 0), 0.0)


class LowerBoundTest(parameterized.TestCase):
    def test_zero_one_edge(self):
        hc = _zero_one_edge()
        self.assertAlmostEqual(similarity.exact_lower_bound(hc, 1), 0.125, places=12)
        self.assertAlmostEqual(similarity.assouad_bound_closed(hc, 1, "hellinger"), 0.125, places=12)

    @parameterized.parameters(0, 1, 5, 40)
    def test_deterministic_hypercube(self, n):
        hc = hypercube.Hypercube(m=2, w=0.25, p_plus=1.0, p_minus=0.0, h1=-1.0, h2=1.0, loss=losses.square())
        expected = hc.m * hc.w * hc.d_I * (1.0 - hc.w) ** n
        self.assertAlmostEqual(similarity.exact_lower_bound(hc, n), expected, places=12)
        self.assertAlmostEqual(similarity.assouad_bound_closed(hc, n, "deterministic"), expected, places=12)
        self.assertGreaterEqual(similarity.best_closed_bound(hc, n), expected - 1e-12)

    @parameterized.named_parameters(
        ("square", hypercube.Hypercube.symmetric(4, 0.25, 0.25, -1.0, 1.0, losses.square())),
        ("lq3", hypercube.Hypercube.symmetric(3, 0.1, 0.5, -1.0, 1.0, losses.lq(3.0))),
        ("entropy", hypercube.Hypercube(m=2, w=0.2, p_plus=0.9, p_minus=0.2, h1=0.0, h2=1.0, loss=losses.entropy())),
        ("absolute", hypercube.Hypercube.symmetric(5, 0.2, 0.04, -1.0, 1.0, losses.absolute())),
    )
    def test_closed_bounds_below_exact(self, hc):
        for n in (1, 10, 100):
            exact = similarity.exact_lower_bound(hc, n)
            self.assertGreaterEqual(exact, similarity.assouad_bound_closed(hc, n, "hellinger") - 1e-12)
            self.assertLessEqual(exact, hc.m * hc.w * hc.d_I + 1e-12)

    def test_weak_variant_clips_at_zero(self):
        hc = hypercube.Hypercube.symmetric(4, 0.25, 0.25, -1.0, 1.0, losses.square())
        self.assertEqual(similarity.assouad_bound_closed(hc, 1000, "hellinger_weak"), 0.0)

    def test_validation(self):
        hc = hypercube.Hypercube.symmetric(4, 0.25, 0.25, -1.0, 1.0, losses.square())
        with self.assertRaises(ValueError):
            similarity.assouad_bound_closed(hc, 3, "chi2")
        with self.assertRaises(ValueError):
            similarity.assouad_bound_closed(hc, -1, "hellinger")
        with self.assertRaises(ValueError):
            similarity.assouad_bound_closed(hc, 3, "deterministic")
        with self.assertRaises(ValueError):
            similarity.exact_lower_bound(hc, similarity.MAX_SAMPLES + 1)


if __name__ == "__main__":
    absltest.main()
