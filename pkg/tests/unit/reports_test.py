import csv
import io
import json
import math

from absl.testing import absltest
import numpy as np

import seqrand
from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.harness import reports
from seqrand.minimax import hypercube


def _config(estimator, d, lam=0.5, vf=None, loss=None):
    return seqrand_lib.EstimatorConfig(
        loss=loss or losses.square(),
        lam=lam,
        prior=gibbs.LogWeights.uniform(d),
        variance_fn=vf or variance.zero(),
        output_mode="uniform_draw",
        estimator=estimator,
    )


def _deterministic_cube():
    return hypercube.Hypercube(m=2, w=0.25, p_plus=1.0, p_minus=0.0, h1=-1.0, h2=1.0, loss=losses.square())


class FormatTest(absltest.TestCase):
    def test_header_line(self):
        self.assertEqual(reports.header_line(7), f"# master_seed=7, version={seqrand.__version__}")

    def test_csv(self):
        rows = [{"a": 1, "b": None, "c": np.float64(0.5)}, {"a": np.int64(2), "b": 0.25, "c": "x"}]
        text = reports.format_csv(rows, ("a", "b"), 3)
        lines = text.splitlines()
        self.assertEqual(lines[0], reports.header_line(3))
        self.assertEqual(lines[1:], ["a,b", "1,", "2,0.25"])

    def test_json(self):
        rows = [{"value": np.array([1.0, 2.0]), "flag": np.bool_(True)}]
        payload = json.loads(reports.format_json(rows, 11))
        self.assertEqual(payload["master_seed"], 11)
        self.assertEqual(payload["version"], seqrand.__version__)
        self.assertEqual(payload["rows"], [{"value": [1.0, 2.0], "flag": True}])


class PairingTest(absltest.TestCase):
    def test_mixable_bounds(self):
        self.assertTrue(reports.matched_pairing("square_mixable", _config("progressive_mixture", 4)))
        self.assertTrue(reports.matched_pairing("gibbs_finite", _config("seqrand", 4)))
        self.assertFalse(reports.matched_pairing("square_mixable", _config("progressive_mixture", 4, lam=1.0)))
        self.assertFalse(reports.matched_pairing("square_mixable", _config("gibbs_erm", 4)))
        self.assertFalse(
            reports.matched_pairing("entropy", _config("progressive_mixture", 4, lam=0.5))
        )

    def test_variance_bounds(self):
        hoeffding = _config("seqrand", 4, vf=variance.hoeffding(4.0))
        self.assertTrue(reports.matched_pairing("hoeffding", hoeffding))
        self.assertTrue(reports.matched_pairing("hoeffding_lambda", hoeffding))
        self.assertFalse(reports.matched_pairing("hoeffding", _config("seqrand", 4)))
        absolute = _config("seqrand", 4, vf=variance.bernstein(), loss=losses.absolute())
        self.assertTrue(reports.matched_pairing("absolute_bernstein", absolute))
        self.assertFalse(reports.matched_pairing("lq_slow", absolute))
        self.assertFalse(reports.matched_pairing(None, absolute))


class CoversPatternsTest(absltest.TestCase):
    def test_covers(self):
        hc = _deterministic_cube()
        self.assertTrue(reports.covers_patterns(hc, hypercube.pattern_expert_set(hc, 4)))
        partial = gibbs.ExpertTable(cells=(0, 1, 2), predictions=[[1.0, 1.0, 0.0]])
        self.assertFalse(reports.covers_patterns(hc, partial))
        wrong_cells = gibbs.ExpertTable(cells=(0, 1), predictions=[[1.0, 1.0]])
        self.assertFalse(reports.covers_patterns(hc, wrong_cells))


class BoundReportTest(absltest.TestCase):
    def test_matched_row(self):
        hc = _deterministic_cube()
        entry = reports.ReportEntry(
            setting="square",
            hc=hc,
            experts=hypercube.pattern_expert_set(hc, 4),
            config=_config("progressive_mixture", 4),
            n=5,
            trials=40,
            upper_setting="square_mixable",
        )
        (row,) = reports.bound_report([entry], master_seed=0)
        self.assertEqual(tuple(row), reports.BOUND_COLUMNS)
        self.assertTrue(row["matched"])
        self.assertAlmostEqual(row["upper"], 2.0 * math.log(4.0) / 6.0)
        self.assertGreater(row["lower_exact"], 0.0)
        self.assertLessEqual(row["lower_closed"], row["lower_exact"] + reports.SANDWICH_TOL)
        self.assertTrue(row["sandwich_ok"])

    def test_unmatched_row_skips_upper_check(self):
        hc = _deterministic_cube()
        entry = reports.ReportEntry(
            setting="square",
            hc=hc,
            experts=hypercube.pattern_expert_set(hc, 4),
            config=_config("gibbs_erm", 4),
            n=3,
            trials=10,
            upper_setting="square_mixable",
            upper_params={"B": 0.001},
        )
        with self.assertLogs(level="WARNING"):
            row = reports.bound_row(entry, master_seed=0)
        self.assertFalse(row["matched"])
        self.assertAlmostEqual(row["upper"], 2.0 * 1e-6 * math.log(4.0) / 4.0)

    def test_missing_patterns_zero_the_lower_bounds(self):
        hc = _deterministic_cube()
        experts = gibbs.ExpertTable(cells=(0, 1, 2), predictions=[[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0]])
        entry = reports.ReportEntry(
            setting="partial", hc=hc, experts=experts, config=_config("progressive_mixture", 2), n=2, trials=10
        )
        with self.assertLogs(level="WARNING"):
            row = reports.bound_row(entry, master_seed=0)
        self.assertEqual((row["lower_exact"], row["lower_closed"]), (0.0, 0.0))
        self.assertIsNone(row["upper"])
        self.assertFalse(row["matched"])

    def test_rows_write_as_csv(self):
        hc = _deterministic_cube()
        entry = reports.ReportEntry(
            setting="square",
            hc=hc,
            experts=hypercube.pattern_expert_set(hc, 4),
            config=_config("progressive_mixture", 4),
            n=2,
            trials=10,
        )
        rows = reports.bound_report([entry], master_seed=5)
        text = reports.format_csv(rows, reports.BOUND_COLUMNS, 5)
        parsed = list(csv.DictReader(io.StringIO(text.split("\n", 1)[1])))
        self.assertEqual(parsed[0]["setting"], "square")
        self.assertEqual(parsed[0]["upper"], "")


if __name__ == "__main__":
    absltest.main()
