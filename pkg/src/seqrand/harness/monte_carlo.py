"""Monte-Carlo estimates of excess risk and of the minimax floor over hypercubes."""
import dataclasses
import functools
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from absl import logging
import chex
import jax
import jax.numpy as jnp
import numpy as np

from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.aggregators import substitution
from seqrand.harness import distributions
from seqrand.minimax import hypercube
from seqrand.minimax import similarity

MIN_TRIALS_FOR_STDERR = 30
MAX_HYPERCUBE_DIM = 8


@dataclasses.dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    trials: int
    master_seed: int

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError(f"MCResult needs at least two trials, got {self.trials}")

    @classmethod
    def from_samples(cls, samples, master_seed: int) -> "MCResult":
        samples = np.asarray(samples, dtype=float)
        trials = samples.shape[0]
        if trials < 2:
            raise ValueError(f"MCResult needs at least two trials, got {trials}")
        mean = float(np.mean(samples))
        if np.all(samples == samples[0]):
            stderr = 0.0
        else:
            stderr = float(np.std(samples, ddof=1) / math.sqrt(trials))
        return cls(mean=mean, stderr=stderr, trials=trials, master_seed=master_seed)

    def to_json(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def trial_keys(master_seed: int, trials: int, stream: Optional[int] = None) -> chex.Array:
    """fold_in(PRNGKey(master_seed), t) for every trial t, after folding in `stream`."""
    base = jax.random.PRNGKey(master_seed)
    if stream is not None:
        base = jax.random.fold_in(base, stream)
    return jax.vmap(lambda t: jax.random.fold_in(base, t))(jnp.arange(trials))


def _trial(config: seqrand_lib.EstimatorConfig, problem, predictions, n: int, key):
    """Risk of one fitted estimator, and whether its trajectory is valid."""
    loss = config.loss
    vf = config.variance_fn
    data_key, fit_key = jax.random.split(key)
    data = problem.sample(data_key, n)

    if config.estimator == "seqrand":
        candidates, worst_case = seqrand_lib.prediction_grids(config)
        fitted, ok = seqrand_lib.fit_kernel(
            loss,
            vf,
            config.lam,
            config.prior.logw,
            predictions,
            data.cells,
            data.ys,
            fit_key,
            candidates,
            worst_case,
            config.substitution_tol,
        )
        draws = fitted.drawn_predictions
        slots = seqrand_lib.slot_predictions(fitted, vf, predictions)
        valid = jnp.all(ok) & ~jnp.any(jnp.isnan(fitted.log_posteriors))
    else:
        table = seqrand_lib.cumulative_loss_table(loss, predictions, data.cells, data.ys)
        if config.estimator == "gibbs_erm":
            table = table[-1:]
        logw = gibbs.gibbs_log_weights(config.prior.logw, table, config.lam)
        valid = ~jnp.any(jnp.isnan(logw))
        if config.estimator == "gibbs_erm" and config.output_mode == "uniform_draw":
            risks = problem.risk(loss, predictions)
            weights = jnp.exp(logw[0])
            return jnp.sum(jnp.where(weights > 0, weights * risks, 0.0)), valid
        # The progressive mixture always predicts with the average of its mixtures.
        return problem.risk(loss, jnp.mean(jnp.exp(logw) @ predictions, axis=0)), valid

    if config.output_mode == "uniform_draw":
        return jnp.mean(problem.risk(loss, draws)), valid
    return problem.risk(loss, jnp.mean(slots, axis=0)), valid


def trial_risks(
    problem: distributions.RiskOracle,
    experts: gibbs.ExpertTable,
    config: seqrand_lib.EstimatorConfig,
    n: int,
    trials: int,
    master_seed: int,
    stream: Optional[int] = None,
    batch_size: int = 256,
) -> np.ndarray:
    """Per-trial risks R(g_hat); trial t always uses the same key."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    predictions = jnp.asarray(experts.predictions)
    run = jax.jit(jax.vmap(functools.partial(_trial, config, problem, predictions, n)))
    keys = trial_keys(master_seed, trials, stream)
    risks, valid = [], []
    for start in range(0, trials, batch_size):
        r, v = run(keys[start : start + batch_size])
        risks.append(np.asarray(r))
        valid.append(np.asarray(v))
    risks, valid = np.concatenate(risks), np.concatenate(valid)
    if not np.all(valid):
        t = int(np.flatnonzero(~valid)[0])
        if config.variance_fn.pi_hat == "substitution" and config.estimator == "seqrand":
            raise substitution.SubstitutionError(f"fit failed in trial {t}")
        raise gibbs.DegeneratePosteriorError(f"degenerate posterior in trial {t}")
    return risks


def _check_inputs(loss, experts, config, trials):
    if config.loss != loss:
        raise ValueError(f"config loss {config.loss.name} differs from {loss.name}")
    if config.num_experts != experts.num_experts:
        raise ValueError(f"Prior over {config.num_experts} experts, table has {experts.num_experts}")
    experts.check_range(loss)
    if trials < 2:
        raise ValueError(f"trials must be at least 2, got {trials}")
    if trials < MIN_TRIALS_FOR_STDERR:
        logging.warning("excess_risk_mc: %d trials give an unreliable standard error", trials)
    if config.estimator == "seqrand":
        variance.check_admissible(config.variance_fn, config.loss, config.lam)


def excess_risk_mc(
    problem: distributions.RiskOracle,
    loss: losses.LossSpec,
    experts: gibbs.ExpertTable,
    config: seqrand_lib.EstimatorConfig,
    n: int,
    trials: int,
    master_seed: int,
    stream: Optional[int] = None,
    batch_size: int = 256,
) -> MCResult:
    """Estimates E R(g_hat) - min_G R over `trials` independent samples of size n.

    Uniform-draw outputs average the exact risk over all n+1 slots; the
    progressive mixture is always scored at its averaged predictor.
    """
    _check_inputs(loss, experts, config, trials)
    min_risk = float(np.min(np.asarray(problem.risk(loss, jnp.asarray(experts.predictions)))))
    risks = trial_risks(problem, experts, config, n, trials, master_seed, stream, batch_size)
    return MCResult.from_samples(risks - min_risk, master_seed)


@dataclasses.dataclass(frozen=True)
class FloorResult:
    """Per-vertex excess risks for each estimator, with the closed lower bound."""

    vertices: Tuple[Tuple[int, ...], ...]
    per_vertex: Tuple[Tuple[MCResult, ...], ...]
    maxima: Tuple[MCResult, ...]
    bound: float
    flags: Tuple[bool, ...]


def minimax_floor_mc(
    hc: hypercube.Hypercube,
    experts: gibbs.ExpertTable,
    estimator_configs: Sequence[seqrand_lib.EstimatorConfig],
    n: int,
    trials: int,
    master_seed: int,
    bound: Optional[float] = None,
) -> FloorResult:
    """Runs every estimator on every vertex; flags whether the worst vertex reaches the bound."""
    if hc.m > MAX_HYPERCUBE_DIM:
        raise ValueError(f"m={hc.m} exceeds {MAX_HYPERCUBE_DIM}: too many vertices to enumerate")
    if experts.num_cells != hc.m + 1:
        raise ValueError(f"expert table has {experts.num_cells} cells, hypercube needs {hc.m + 1}")
    if bound is None:
        bound = similarity.best_closed_bound(hc, n)
    signs = tuple(hypercube.vertices(hc.m))
    per_vertex: List[Tuple[MCResult, ...]] = []
    for config in estimator_configs:
        results = []
        for v, sigma in enumerate(signs):
            P = hypercube.hypercube_vertex_distribution(hc, sigma)
            results.append(excess_risk_mc(P, hc.loss, experts, config, n, trials, master_seed, stream=v))
        per_vertex.append(tuple(results))
    maxima = tuple(max(results, key=lambda r: r.mean) for results in per_vertex)
    flags = tuple(bool(math.isinf(r.mean) and r.mean > 0 or r.mean >= bound - 3 * r.stderr) for r in maxima)
    return FloorResult(vertices=signs, per_vertex=tuple(per_vertex), maxima=maxima, bound=bound, flags=flags)


@dataclasses.dataclass(frozen=True)
class RateFit:
    exponent: float
    constant: float
    residual: float
    dropped: int


def rate_fit(curve: Sequence[Tuple[int, float]], log_num_experts: float = 1.0) -> RateFit:
    """Fits excess = C (log|G| / n)^v by least squares on log-log axes."""
    ns = np.array([n for n, _ in curve], dtype=float)
    values = np.array([getattr(e, "mean", e) for _, e in curve], dtype=float)
    keep = values > 0
    dropped = int(np.sum(~keep))
    if dropped:
        logging.warning("rate_fit: dropped %d nonpositive excess values", dropped)
    if np.sum(keep) < 4:
        raise ValueError(f"rate_fit needs at least 4 positive points, got {int(np.sum(keep))}")
    ns, values = ns[keep], values[keep]
    ratios = np.diff(np.log(np.sort(ns)))
    if np.ptp(ratios) > 0.1 * np.mean(ratios):
        logging.warning("rate_fit: sample sizes are not geometrically spaced")
    x = np.log(log_num_experts / ns)
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(exponent=float(slope), constant=float(np.exp(intercept)), residual=residual, dropped=dropped)
