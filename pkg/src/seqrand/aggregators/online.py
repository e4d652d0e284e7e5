"""Online SeqRand: predict with g_{i-1} on Z_i, then update."""
from typing import Any, Dict, List, Sequence

import chex
import jax.numpy as jnp
import numpy as np

from seqrand import gibbs
from seqrand.aggregators import seqrand as seqrand_lib


@chex.dataclass(frozen=True)
class OnlineResult:
    """Per-step record of an online run.

    `expected_cumulative_loss` averages each step over the draw of g_{i-1};
    it equals `cumulative_loss` whenever pi_hat is deterministic.
    """

    predictions: chex.Array
    step_losses: chex.Array
    cumulative_loss: chex.Array
    expected_cumulative_loss: chex.Array
    final_scores: chex.Array
    audit_rhs: chex.Array


def audit_rhs(final_scores, prior: gibbs.LogWeights, lam: float) -> float:
    """min_g S_n(g) - log pi(g) / lam over experts with prior mass."""
    scores = np.asarray(final_scores) - np.asarray(prior.logw) / lam
    return float(np.min(scores))


def online_seqrand(
    config: seqrand_lib.EstimatorConfig,
    experts: gibbs.ExpertTable,
    stream,
    rng: chex.PRNGKey,
) -> OnlineResult:
    fitted = seqrand_lib.seqrand_fit(config, experts, stream, rng)
    outcomes = seqrand_lib.as_outcomes(experts, stream)
    n = fitted.num_steps
    cells = np.asarray(outcomes.cells)
    preds = np.asarray(fitted.drawn_predictions)[np.arange(n), cells]
    step_losses = np.asarray(fitted.step_losses)

    if config.variance_fn.pi_hat == "identity" and n:
        expert_losses = config.loss.pointwise(
            outcomes.ys[:, None], jnp.asarray(experts.predictions)[:, outcomes.cells].T
        )
        weights = jnp.exp(fitted.log_posteriors[:-1])
        charged = fitted.log_posteriors[:-1] > -jnp.inf
        expected = float(jnp.sum(jnp.where(charged, weights * expert_losses, 0.0)))
    else:
        expected = float(step_losses.sum())

    final_scores = np.asarray(fitted.s_table[-1])
    return OnlineResult(
        predictions=jnp.asarray(preds),
        step_losses=jnp.asarray(step_losses),
        cumulative_loss=jnp.asarray(step_losses.sum()),
        expected_cumulative_loss=jnp.asarray(expected),
        final_scores=jnp.asarray(final_scores),
        audit_rhs=jnp.asarray(audit_rhs(final_scores, config.prior, config.lam)),
    )


def replicate_audit(results: Sequence[OnlineResult], prior: gibbs.LogWeights, lam: float) -> Dict[str, float]:
    """Compares the averaged cumulative loss with the bound at averaged scores.

    The min over experts sits outside the expectation over draws, so the
    scores are averaged across replicates before minimizing.
    """
    if len(results) < 2:
        raise ValueError(f"Need at least two replicates, got {len(results)}")
    realized = np.array([float(r.expected_cumulative_loss) for r in results])
    scores = np.mean([np.asarray(r.final_scores) for r in results], axis=0)
    mean = float(realized.mean())
    stderr = float(realized.std(ddof=1) / np.sqrt(len(results)))
    bound = audit_rhs(scores, prior, lam)
    return {"mean_loss": mean, "stderr": stderr, "bound": bound, "holds": mean <= bound + 3 * stderr}


def prediction_rows(result: OnlineResult, experts: gibbs.ExpertTable, stream) -> List[Dict[str, Any]]:
    """(step, cell, prediction) rows for CSV output."""
    outcomes = seqrand_lib.as_outcomes(experts, stream)
    return [
        {"step": i + 1, "cell": experts.cells[int(k)], "prediction": float(p)}
        for i, (k, p) in enumerate(zip(np.asarray(outcomes.cells), np.asarray(result.predictions)))
    ]

