"""Batch SeqRand, progressive mixture and Gibbs-ERM."""
import dataclasses
import functools
from typing import Any, Dict, Hashable, Tuple

import chex
import jax
import jax.numpy as jnp
from jax.scipy import special
import numpy as np

from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import substitution

OUTPUT_MODES = ("uniform_draw", "cesaro_mean")
ESTIMATORS = ("seqrand", "progressive_mixture", "gibbs_erm")


@dataclasses.dataclass(frozen=True, eq=False)
class EstimatorConfig:
    """Learning rate, prior and variance function of an aggregation procedure."""

    loss: losses.LossSpec
    lam: float
    prior: gibbs.LogWeights
    variance_fn: variance.VarianceFn
    output_mode: str = "uniform_draw"
    estimator: str = "seqrand"
    y_grid_size: int = 201
    substitution_tol: float = 1e-9

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"Unknown output mode {self.output_mode!r}, expected one of {OUTPUT_MODES}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"Unknown estimator {self.estimator!r}, expected one of {ESTIMATORS}")
        if self.y_grid_size < 2:
            raise ValueError(f"y_grid_size must be at least 2, got {self.y_grid_size}")
        gibbs.check_normalized(self.prior, tol=1e-9)

    @property
    def num_experts(self) -> int:
        return self.prior.size

    def replace(self, **changes) -> "EstimatorConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> Dict[str, Any]:
        return {
            "estimator": self.estimator,
            "loss": self.loss.to_json(),
            "lambda": self.lam,
            "prior": self.prior.to_json(),
            "variance_fn": self.variance_fn.to_json(),
            "output_mode": self.output_mode,
            "y_grid_size": self.y_grid_size,
            "substitution_tol": self.substitution_tol,
        }

    @classmethod
    def from_json(cls, obj) -> "EstimatorConfig":
        obj = dict(obj)
        return cls(
            loss=losses.LossSpec.from_json(obj["loss"]),
            lam=float(obj["lambda"]),
            prior=gibbs.LogWeights.from_json(obj["prior"]),
            variance_fn=variance.VarianceFn.from_json(obj["variance_fn"]),
            output_mode=obj.get("output_mode", "uniform_draw"),
            estimator=obj.get("estimator", "seqrand"),
            y_grid_size=int(obj.get("y_grid_size", 201)),
            substitution_tol=float(obj.get("substitution_tol", 1e-9)),
        )


@chex.dataclass(frozen=True)
class FittedAggregate:
    """Trajectory of a SeqRand fit over n outcomes.

    Row i of every table describes step i = 0..n. `log_posteriors[i]` is the
    Gibbs posterior pi_{-lam S_i}; `drawn_predictions[i]` is the prediction of
    g_i on every cell. `drawn_indices[i]` is -1 when g_i is not an expert
    (mixture or substitution). `step_losses[i-1]` is L(Z_i, g_{i-1}).
    """

    s_table: chex.Array
    log_posteriors: chex.Array
    drawn_indices: chex.Array
    drawn_predictions: chex.Array
    log_partitions: chex.Array
    step_losses: chex.Array

    @property
    def num_steps(self) -> int:
        return self.s_table.shape[0] - 1


def prediction_grids(config: EstimatorConfig):
    loss = config.loss
    candidates = jnp.linspace(*loss.prediction_range, config.y_grid_size)
    worst_case = jnp.linspace(loss.y_lo, loss.y_hi, config.y_grid_size)
    return candidates, worst_case


def _draw(loss, vf, lam, logw, predictions, key, candidates, worst_case, tol, forced=None):
    """pi_hat applied to a posterior, then one draw: (index, predictions, ok).

    `forced` replaces the random expert index of an identity draw.
    """
    if vf.pi_hat == "identity":
        index = jax.random.categorical(key, logw) if forced is None else forced
        return index.astype(jnp.int32), predictions[index], jnp.array(True)
    if vf.pi_hat == "dirac_mixture":
        return jnp.int32(-1), gibbs.mixture_predictions(logw, predictions), jnp.array(True)
    preds = substitution.substitute_all_cells(loss, logw, predictions, lam, candidates, worst_case, tol)
    return jnp.int32(-1), preds, ~jnp.any(jnp.isnan(preds))


@functools.partial(jax.jit, static_argnames=("loss", "vf"))
def fit_kernel(loss, vf, lam, prior_logw, predictions, cells, ys, key, candidates, worst_case, tol, forced=None):
    """Validation-free SeqRand loop; returns stacked per-step tables and flags.

    `forced`, of shape (n+1,), fixes the expert drawn at every step of an
    identity-draw fit.
    """
    d = predictions.shape[0]
    key, first_key = jax.random.split(key)
    forced0 = None if forced is None else forced[0]
    index0, pred0, ok0 = _draw(loss, vf, lam, prior_logw, predictions, first_key, candidates, worst_case, tol, forced0)

    def step(carry, outcome):
        s, logw, prev_pred, log_z, key = carry
        cell, y = outcome[:2]
        chosen = outcome[2] if forced is not None else None
        expert_losses = loss.pointwise(y, predictions[:, cell])
        prev_loss = loss.pointwise(y, prev_pred[cell])
        increment = expert_losses + variance.delta_fn(vf, lam, loss, y, expert_losses, prev_loss)
        log_z = log_z + special.logsumexp(logw - lam * increment)
        s = s + increment
        logw = gibbs.gibbs_log_weights(prior_logw, s, lam)
        key, draw_key = jax.random.split(key)
        index, pred, ok = _draw(loss, vf, lam, logw, predictions, draw_key, candidates, worst_case, tol, chosen)
        return (s, logw, pred, log_z, key), (s, logw, index, pred, log_z, prev_loss, ok)

    init = (jnp.zeros(d), prior_logw, pred0, jnp.zeros(()), key)
    xs = (cells, ys) if forced is None else (cells, ys, forced[1:])
    _, (s, logw, index, pred, log_z, step_losses, ok) = jax.lax.scan(step, init, xs)

    def prepend(first, rest):
        return jnp.concatenate([jnp.expand_dims(first, 0), rest], axis=0)

    fitted = FittedAggregate(
        s_table=prepend(jnp.zeros(d), s),
        log_posteriors=prepend(prior_logw, logw),
        drawn_indices=prepend(index0, index),
        drawn_predictions=prepend(pred0, pred),
        log_partitions=prepend(jnp.zeros(()), log_z),
        step_losses=step_losses,
    )
    return fitted, prepend(ok0, ok)


def as_outcomes(experts: gibbs.ExpertTable, data) -> gibbs.Outcomes:
    if isinstance(data, gibbs.Outcomes):
        cells = np.asarray(data.cells)
        if cells.size and (cells.min() < 0 or cells.max() >= experts.num_cells):
            raise ValueError(f"Cell indices outside [0, {experts.num_cells})")
        if np.any(np.isnan(np.asarray(data.ys))):
            raise ValueError("Outcome values contain NaN")
        return data
    return experts.outcomes(data)


def _check_config(config: EstimatorConfig, experts: gibbs.ExpertTable):
    if config.num_experts != experts.num_experts:
        raise ValueError(f"Prior over {config.num_experts} experts, table has {experts.num_experts}")
    experts.check_range(config.loss)


def seqrand_fit(
    config: EstimatorConfig,
    experts: gibbs.ExpertTable,
    data,
    rng: chex.PRNGKey,
) -> FittedAggregate:
    """Runs SeqRand over `data`: draw g_0, then for each outcome update S_i and draw g_i."""
    _check_config(config, experts)
    variance.check_admissible(config.variance_fn, config.loss, config.lam)
    outcomes = as_outcomes(experts, data)
    candidates, worst_case = prediction_grids(config)
    fitted, ok = fit_kernel(
        config.loss,
        config.variance_fn,
        config.lam,
        config.prior.logw,
        jnp.asarray(experts.predictions),
        outcomes.cells,
        outcomes.ys,
        rng,
        candidates,
        worst_case,
        config.substitution_tol,
    )
    _check_trajectory(fitted, np.asarray(ok))
    return fitted


def _check_trajectory(fitted: FittedAggregate, ok: np.ndarray):
    bad = np.flatnonzero(np.any(np.isnan(np.asarray(fitted.log_posteriors)), axis=-1))
    if bad.size:
        raise gibbs.DegeneratePosteriorError(f"degenerate posterior at step {int(bad[0])}")
    failed = np.flatnonzero(~ok)
    if failed.size:
        raise substitution.SubstitutionError(f"no substitution prediction on the grid at step {int(failed[0])}")


def seqrand_replay(
    config: EstimatorConfig,
    experts: gibbs.ExpertTable,
    data,
    drawn_indices,
) -> Tuple[FittedAggregate, float]:
    """SeqRand with the identity draws fixed to `drawn_indices` (one per step 0..n).

    Returns the trajectory and the log-probability of drawing that sequence.
    """
    if config.variance_fn.pi_hat != "identity":
        raise ValueError(f"replay needs identity draws, got pi_hat={config.variance_fn.pi_hat}")
    _check_config(config, experts)
    variance.check_admissible(config.variance_fn, config.loss, config.lam)
    outcomes = as_outcomes(experts, data)
    indices = np.asarray(drawn_indices, dtype=np.int32)
    if indices.shape != (outcomes.ys.shape[0] + 1,):
        raise ValueError(f"Expected {outcomes.ys.shape[0] + 1} drawn indices, got shape {indices.shape}")
    if indices.min() < 0 or indices.max() >= experts.num_experts:
        raise ValueError(f"Drawn indices outside [0, {experts.num_experts})")
    candidates, worst_case = prediction_grids(config)
    fitted, ok = fit_kernel(
        config.loss,
        config.variance_fn,
        config.lam,
        config.prior.logw,
        jnp.asarray(experts.predictions),
        outcomes.cells,
        outcomes.ys,
        jax.random.PRNGKey(0),
        candidates,
        worst_case,
        config.substitution_tol,
        forced=jnp.asarray(indices),
    )
    _check_trajectory(fitted, np.asarray(ok))
    log_posteriors = np.asarray(fitted.log_posteriors)
    return fitted, float(np.sum(log_posteriors[np.arange(indices.size), indices]))


def slot_predictions(fitted: FittedAggregate, vf: variance.VarianceFn, predictions) -> chex.Array:
    """Mean prediction of rho_hat_i for every slot i; shape (n+1, K)."""
    if vf.pi_hat == "identity":
        return jnp.exp(fitted.log_posteriors) @ predictions
    return fitted.drawn_predictions


def seqrand_predict(
    fitted: FittedAggregate,
    config: EstimatorConfig,
    experts: gibbs.ExpertTable,
    cell: Hashable,
    rng: chex.PRNGKey,
) -> float:
    k = experts.cell_index(cell)
    if config.output_mode == "uniform_draw":
        i = jax.random.randint(rng, (), 0, fitted.num_steps + 1)
        return float(fitted.drawn_predictions[i, k])
    slots = slot_predictions(fitted, config.variance_fn, jnp.asarray(experts.predictions))
    return float(jnp.mean(slots[:, k]))


def scratch_log_partitions(fitted: FittedAggregate, prior: gibbs.LogWeights, lam: float) -> chex.Array:
    """log E_pi exp(-lam S_i) computed directly from the s_table."""
    charged = prior.logw > -jnp.inf
    return special.logsumexp(jnp.where(charged, prior.logw - lam * fitted.s_table, -jnp.inf), axis=-1)


def telescoping_gap(fitted: FittedAggregate, prior: gibbs.LogWeights, lam: float) -> float:
    incremental = np.asarray(fitted.log_partitions)
    scratch = np.asarray(scratch_log_partitions(fitted, prior, lam))
    finite = np.isfinite(incremental) | np.isfinite(scratch)
    if not np.any(finite):
        return 0.0
    return float(np.max(np.abs(incremental[finite] - scratch[finite])))


def cumulative_loss_table(loss: losses.LossSpec, predictions, cells, ys):
    """Sigma_i(g) for i = 0..n; shape (n+1, d). Traceable."""
    step = loss.pointwise(ys[:, None], predictions[:, cells].T)
    return jnp.concatenate([jnp.zeros((1, predictions.shape[0])), jnp.cumsum(step, axis=0)], axis=0)


def progressive_mixture_trajectory(
    loss: losses.LossSpec, lam: float, prior: gibbs.LogWeights, experts: gibbs.ExpertTable, data
) -> chex.Array:
    """Log weights of pi_{-lam Sigma_i} for i = 0..n."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if prior.size != experts.num_experts:
        raise ValueError(f"Prior over {prior.size} experts, table has {experts.num_experts}")
    outcomes = as_outcomes(experts, data)
    table = cumulative_loss_table(loss, jnp.asarray(experts.predictions), outcomes.cells, outcomes.ys)
    logw = gibbs.gibbs_log_weights(prior.logw, table, lam)
    bad = np.flatnonzero(np.any(np.isnan(np.asarray(logw)), axis=-1))
    if bad.size:
        raise gibbs.DegeneratePosteriorError(f"degenerate posterior at step {int(bad[0])}")
    return logw


def progressive_mixture(
    loss: losses.LossSpec, lam: float, prior: gibbs.LogWeights, experts: gibbs.ExpertTable, data
) -> np.ndarray:
    """Cell-wise average of the n+1 Gibbs mixtures; one value per cell."""
    logw = progressive_mixture_trajectory(loss, lam, prior, experts, data)
    mixtures = jnp.exp(logw) @ jnp.asarray(experts.predictions)
    return np.asarray(jnp.mean(mixtures, axis=0))


def gibbs_erm(
    loss: losses.LossSpec, lam: float, prior: gibbs.LogWeights, experts: gibbs.ExpertTable, data
) -> gibbs.LogWeights:
    """Gibbs posterior on the full cumulative losses Sigma_n."""
    outcomes = as_outcomes(experts, data)
    table = cumulative_loss_table(loss, jnp.asarray(experts.predictions), outcomes.cells, outcomes.ys)
    return gibbs.gibbs_posterior(prior, np.asarray(table[-1]), lam)
