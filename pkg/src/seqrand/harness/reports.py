"""CSV/JSON report writers and the upper/empirical/lower bound comparison."""
import csv
import dataclasses
import inspect
import io
import json
from typing import Any, Dict, List, Optional, Sequence

from absl import logging
import numpy as np

import seqrand
from seqrand import gibbs
from seqrand import losses
from seqrand.aggregators import bounds
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.harness import monte_carlo
from seqrand.minimax import hypercube
from seqrand.minimax import similarity
from seqrand.utils import serialization

BOUND_COLUMNS = (
    "setting",
    "n",
    "estimator",
    "upper_setting",
    "lower_exact",
    "lower_closed",
    "empirical",
    "empirical_stderr",
    "upper",
    "matched",
    "sandwich_ok",
)

# Bounds proved for a zero variance function, or for the progressive mixture, below eta_max.
_MIXABLE_BOUNDS = {
    "gibbs_finite": None,
    "square_mixable": ("square",),
    "lq_fast": ("square", "lq"),
    "entropy": ("entropy",),
}

SANDWICH_TOL = 1e-12


def header_line(master_seed: int) -> str:
    return f"# master_seed={master_seed}, version={seqrand.__version__}"


def format_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], master_seed: int) -> str:
    """Comment line, header row, then one line per row; None becomes an empty field."""
    out = io.StringIO()
    out.write(header_line(master_seed) + "\n")
    writer = csv.DictWriter(out, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in serialization.to_jsonable([dict(r) for r in rows]):
        writer.writerow(row)
    return out.getvalue()


def format_json(rows: Sequence[Dict[str, Any]], master_seed: int) -> str:
    payload = {
        "master_seed": master_seed,
        "version": seqrand.__version__,
        "rows": serialization.to_jsonable([dict(r) for r in rows]),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclasses.dataclass(frozen=True, eq=False)
class ReportEntry:
    """One estimator run on the vertices of a hypercube, paired with an upper bound."""

    setting: str
    hc: hypercube.Hypercube
    experts: gibbs.ExpertTable
    config: seqrand_lib.EstimatorConfig
    n: int
    trials: int
    upper_setting: Optional[str] = None
    upper_params: Dict[str, Any] = dataclasses.field(default_factory=dict)


def matched_pairing(upper_setting: Optional[str], config: seqrand_lib.EstimatorConfig) -> bool:
    """Whether the estimator configuration is one the named upper bound is proved for."""
    if upper_setting is None:
        return False
    loss, vf = config.loss, config.variance_fn
    if upper_setting in _MIXABLE_BOUNDS:
        kinds = _MIXABLE_BOUNDS[upper_setting]
        if kinds is not None and loss.kind not in kinds:
            return False
        eta_max = losses.mixability_eta_max(loss)
        if eta_max is None or config.lam > eta_max * (1 + 1e-12):
            return False
        if config.estimator == "progressive_mixture":
            return True
        return config.estimator == "seqrand" and vf.kind == "zero"
    if config.estimator != "seqrand":
        return False
    if upper_setting in ("hoeffding", "hoeffding_lambda"):
        return vf.kind == "hoeffding_const" and vf.pi_hat == "identity"
    if upper_setting == "absolute_bernstein":
        return vf.kind == "bernstein" and loss.kind == "absolute"
    return False


def _upper_params(entry: ReportEntry) -> Dict[str, Any]:
    """Bound parameters filled from the entry, restricted to the bound's signature."""
    loss, vf = entry.config.loss, entry.config.variance_fn
    defaults = {
        "num_experts": entry.experts.num_experts,
        "n": entry.n,
        "lam": entry.config.lam,
        "min_risk": 0.0,
        "B": loss.B,
        "b": loss.b if loss.b is not None else loss.B,
        "q": loss.q,
        "span": vf.span if vf.span is not None else loss.width,
    }
    accepted = inspect.signature(bounds.UPPER_BOUNDS.get(entry.upper_setting)).parameters
    params = {k: v for k, v in defaults.items() if k in accepted}
    params.update(entry.upper_params)
    return params


def covers_patterns(hc: hypercube.Hypercube, experts: gibbs.ExpertTable) -> bool:
    """True if every vertex's Bayes predictor is a row of the expert table."""
    if experts.num_cells != hc.m + 1:
        return False
    rows = experts.predictions
    for sigma in hypercube.vertices(hc.m):
        target = hypercube.bayes_predictions(hc, sigma)
        if not np.any(np.all(np.abs(rows - target) <= 1e-12, axis=1)):
            return False
    return True


def bound_row(entry: ReportEntry, master_seed: int) -> Dict[str, Any]:
    if covers_patterns(entry.hc, entry.experts):
        lower_exact = similarity.exact_lower_bound(entry.hc, entry.n)
        lower_closed = similarity.best_closed_bound(entry.hc, entry.n)
    else:
        logging.warning("%s: expert set misses hypercube patterns, lower bounds set to 0", entry.setting)
        lower_exact = lower_closed = 0.0
    floor = monte_carlo.minimax_floor_mc(
        entry.hc, entry.experts, [entry.config], entry.n, entry.trials, master_seed, bound=lower_closed
    )
    worst = floor.maxima[0]
    upper = None
    if entry.upper_setting is not None:
        upper = bounds.upper_bound_value(entry.upper_setting, **_upper_params(entry))
    matched = matched_pairing(entry.upper_setting, entry.config)
    if entry.upper_setting is not None and not matched:
        logging.warning(
            "%s: %s is not the matched bound for %s; upper side not checked",
            entry.setting,
            entry.upper_setting,
            entry.config.estimator,
        )
    slack = 3.0 * worst.stderr + SANDWICH_TOL
    ok = lower_closed <= lower_exact + SANDWICH_TOL and lower_exact <= worst.mean + slack
    if matched:
        ok = ok and worst.mean <= upper + slack
    return {
        "setting": entry.setting,
        "n": entry.n,
        "estimator": entry.config.estimator,
        "upper_setting": entry.upper_setting,
        "lower_exact": lower_exact,
        "lower_closed": lower_closed,
        "empirical": worst.mean,
        "empirical_stderr": worst.stderr,
        "upper": upper,
        "matched": matched,
        "sandwich_ok": bool(ok),
    }


def bound_report(entries: Sequence[ReportEntry], master_seed: int) -> List[Dict[str, Any]]:
    rows = []
    for entry in entries:
        row = bound_row(entry, master_seed)
        logging.info(
            "bound_report %s n=%d: %.5g <= %.5g +- %.2g <= %s",
            row["setting"],
            row["n"],
            row["lower_exact"],
            row["empirical"],
            row["empirical_stderr"],
            row["upper"],
        )
        rows.append(row)
    return rows
