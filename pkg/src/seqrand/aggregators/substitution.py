"""Grid search for a prediction substituting the Gibbs mixture.

For a posterior rho and a candidate y*, the substitution margin is

    max_y  loss(y, y*) + (1 / lam) log E_{g ~ rho} exp(-lam loss(y, g(x))).

A candidate whose margin is <= 0 is admissible: its loss never exceeds the
mix-loss of rho.
"""
from typing import Hashable, Optional, Sequence

import jax
import jax.numpy as jnp
from jax.scipy import special
import numpy as np

from seqrand import gibbs
from seqrand import losses


class SubstitutionError(ValueError):
    """No grid prediction satisfies the substitution inequality."""


def margins_fn(loss: losses.LossSpec, logw, column, lam, candidates, worst_case):
    """Margins of every candidate, maximized over the worst-case grid."""
    expert_losses = loss.pointwise(worst_case[:, None], column[None, :])
    charged = logw > -jnp.inf
    mix = special.logsumexp(jnp.where(charged, logw - lam * expert_losses, -jnp.inf), axis=-1) / lam
    candidate_losses = loss.pointwise(worst_case[:, None], candidates[None, :])
    unreachable = jnp.isneginf(mix)[:, None]
    terms = jnp.where(unreachable, -jnp.inf, candidate_losses + mix[:, None])
    return jnp.max(terms, axis=0)


def substitute(loss: losses.LossSpec, logw, column, lam, candidates, worst_case, tol):
    """Traceable search at one cell; returns NaN when no candidate qualifies."""
    margins = margins_fn(loss, logw, column, lam, candidates, worst_case)
    best = jnp.argmin(margins)
    return jnp.where(margins[best] <= tol, candidates[best], jnp.nan)


def substitute_all_cells(loss, logw, predictions, lam, candidates, worst_case, tol):
    return jax.vmap(
        lambda column: substitute(loss, logw, column, lam, candidates, worst_case, tol),
        in_axes=1,
    )(predictions)


def algorithm_b_substitution(
    loss: losses.LossSpec,
    rho: gibbs.LogWeights,
    experts: gibbs.ExpertTable,
    lam: float,
    cell: Hashable,
    y_grid: Sequence[float],
    tol: float = 1e-9,
    worst_case_grid: Optional[Sequence[float]] = None,
) -> Optional[float]:
    """Returns the admissible grid prediction with the largest slack, or None.

    `worst_case_grid` defaults to `len(y_grid)` evenly spaced outputs.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if rho.size != experts.num_experts:
        raise ValueError(f"{rho.size} weights for {experts.num_experts} experts")
    candidates = np.asarray(y_grid, dtype=float)
    if candidates.ndim != 1 or candidates.size == 0:
        raise ValueError("y_grid must be a non-empty vector")
    lo, hi = loss.prediction_range
    if candidates.min() < lo - 1e-12 or candidates.max() > hi + 1e-12:
        raise ValueError(f"y_grid leaves the prediction range [{lo}, {hi}]")
    if worst_case_grid is None:
        worst_case_grid = np.linspace(loss.y_lo, loss.y_hi, candidates.size)
    k = experts.cell_index(cell)
    value = float(
        substitute(
            loss,
            rho.logw,
            jnp.asarray(experts.predictions[:, k]),
            lam,
            jnp.asarray(candidates),
            jnp.asarray(worst_case_grid, dtype=float),
            tol,
        )
    )
    return None if np.isnan(value) else value
