"""Distributions over a finite expert set, kept in log domain."""
import dataclasses
from typing import Any, Dict, Hashable, Iterable, Tuple

import chex
import jax
import jax.numpy as jnp
from jax.scipy import special
import numpy as np

NORMALIZATION_TOL = 1e-12


class DegeneratePosteriorError(ValueError):
    """A Gibbs update left no expert with positive mass."""


@chex.dataclass(frozen=True)
class LogWeights:
    """Normalized log-masses over d experts; -inf marks zero mass."""

    logw: chex.Array

    @property
    def size(self) -> int:
        return self.logw.shape[-1]

    @property
    def probs(self) -> chex.Array:
        return jnp.exp(self.logw)

    @classmethod
    def uniform(cls, d: int) -> "LogWeights":
        if d < 1:
            raise ValueError(f"Need at least one expert, got {d}")
        return cls(logw=jnp.full((d,), -jnp.log(d)))

    @classmethod
    def dirac(cls, d: int, index: int) -> "LogWeights":
        logw = jnp.full((d,), -jnp.inf).at[index].set(0.0)
        return cls(logw=logw)

    @classmethod
    def from_probs(cls, probs) -> "LogWeights":
        probs = np.asarray(probs, dtype=float)
        if np.any(np.isnan(probs)) or np.any(probs < 0) or probs.sum() <= 0:
            raise ValueError(f"Invalid probability vector {probs}")
        with np.errstate(divide="ignore"):
            logw = np.log(probs / probs.sum())
        return cls(logw=jnp.asarray(logw))

    def to_json(self):
        return [float(v) for v in np.asarray(self.logw)]

    @classmethod
    def from_json(cls, obj) -> "LogWeights":
        rho = cls(logw=jnp.asarray(np.asarray(obj, dtype=float)))
        check_normalized(rho)
        return rho


def check_normalized(rho: LogWeights, tol: float = NORMALIZATION_TOL):
    logw = np.asarray(rho.logw)
    if logw.ndim != 1 or logw.size == 0:
        raise ValueError(f"LogWeights must be a non-empty vector, got shape {logw.shape}")
    if np.any(np.isnan(logw)):
        raise ValueError("LogWeights contain NaN")
    total = float(special.logsumexp(jnp.asarray(logw)))
    if not abs(total) <= tol:
        raise ValueError(f"LogWeights not normalized: logsumexp = {total}")


@dataclasses.dataclass(frozen=True, eq=False)
class ExpertTable:
    """Predictions of d experts on K input cells: predictions[j, k] = g_j(x_k)."""

    cells: Tuple[Hashable, ...]
    predictions: np.ndarray

    def __post_init__(self):
        preds = np.asarray(self.predictions, dtype=float)
        object.__setattr__(self, "predictions", preds)
        object.__setattr__(self, "cells", tuple(self.cells))
        if preds.ndim != 2 or preds.shape[0] < 1 or preds.shape[1] < 1:
            raise ValueError(f"predictions must be a non-empty d x K matrix, got {preds.shape}")
        if len(self.cells) != preds.shape[1]:
            raise ValueError(f"{len(self.cells)} cells for {preds.shape[1]} prediction columns")
        if len(set(self.cells)) != len(self.cells):
            raise ValueError(f"Duplicate cell identifiers in {self.cells}")
        if np.any(np.isnan(preds)):
            raise ValueError("predictions contain NaN")

    @property
    def num_experts(self) -> int:
        return self.predictions.shape[0]

    @property
    def num_cells(self) -> int:
        return self.predictions.shape[1]

    def cell_index(self, cell: Hashable) -> int:
        try:
            return self.cells.index(cell)
        except ValueError:
            raise ValueError(f"Unknown cell {cell!r}") from None

    def check_range(self, loss) -> None:
        lo, hi = loss.prediction_range
        if self.predictions.min() < lo - 1e-12 or self.predictions.max() > hi + 1e-12:
            raise ValueError(
                f"Expert predictions in [{self.predictions.min()}, "
                f"{self.predictions.max()}] exceed prediction range [{lo}, {hi}]"
            )

    def outcomes(self, pairs: Iterable[Tuple[Hashable, float]]) -> "Outcomes":
        """Converts (cell identifier, y) pairs to indexed outcomes."""
        pairs = list(pairs)
        cells = np.array([self.cell_index(c) for c, _ in pairs], dtype=np.int32)
        ys = np.array([y for _, y in pairs], dtype=float)
        if np.any(np.isnan(ys)):
            raise ValueError("Outcome values contain NaN")
        return Outcomes(cells=jnp.asarray(cells), ys=jnp.asarray(ys))

    def to_json(self) -> Dict[str, Any]:
        return {"cells": list(self.cells), "predictions": self.predictions.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ExpertTable":
        return cls(cells=tuple(obj["cells"]), predictions=np.asarray(obj["predictions"]))


@chex.dataclass(frozen=True)
class Outcomes:
    """A sequence of outcomes z_i = (x_i, y_i) with x_i given by cell index."""

    cells: chex.Array
    ys: chex.Array


def gibbs_log_weights(logw, h, lam):
    """log of the prior reweighted by exp(-lam * h), renormalized.

    Traceable; an annihilated posterior comes out as NaN.
    """
    scaled = jnp.where(lam == 0, 0.0, lam * h)
    unnormalized = logw - scaled
    return unnormalized - special.logsumexp(unnormalized, axis=-1, keepdims=True)


def _validate_losses(prior: LogWeights, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (prior.size,):
        raise ValueError(f"h has shape {h.shape}, expected ({prior.size},)")
    if np.any(np.isnan(h)):
        raise ValueError("h contains NaN")
    return h


def gibbs_posterior(prior: LogWeights, h, lam: float) -> LogWeights:
    h = _validate_losses(prior, h)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    logw = gibbs_log_weights(prior.logw, jnp.asarray(h), lam)
    if np.any(np.isnan(np.asarray(logw))):
        raise DegeneratePosteriorError("degenerate posterior: every expert has zero mass")
    return LogWeights(logw=logw)


def kl_divergence(rho: LogWeights, pi: LogWeights) -> float:
    if rho.size != pi.size:
        raise ValueError(f"Length mismatch: {rho.size} vs {pi.size}")
    charged = rho.logw > -jnp.inf
    if bool(jnp.any(charged & (pi.logw == -jnp.inf))):
        return float("inf")
    terms = jnp.where(charged, rho.probs * (rho.logw - pi.logw), 0.0)
    return max(float(jnp.sum(terms)), 0.0)


def expected_value(rho: LogWeights, h) -> float:
    """E_{g ~ rho} h(g), skipping zero-mass experts."""
    h = jnp.asarray(h, dtype=float)
    return float(jnp.sum(jnp.where(rho.logw > -jnp.inf, rho.probs * h, 0.0)))


def free_energy(pi: LogWeights, h) -> float:
    """-log E_{g ~ pi} exp(-h(g))."""
    h = _validate_losses(pi, h)
    return float(-special.logsumexp(pi.logw - jnp.asarray(h)))


def variational_objective(rho: LogWeights, pi: LogWeights, h) -> float:
    """E_rho h + K(rho, pi), minimized over rho by the Gibbs distribution."""
    return expected_value(rho, h) + kl_divergence(rho, pi)


def duality_gap(pi: LogWeights, h) -> float:
    posterior = gibbs_posterior(pi, h, 1.0)
    return variational_objective(posterior, pi, h) - free_energy(pi, h)


def sample(rho: LogWeights, rng: chex.PRNGKey) -> int:
    return int(jax.random.categorical(rng, rho.logw))


def mixture_predictions(logw, predictions):
    """Cell-wise mixture E_{g ~ rho} g over all cells; traceable."""
    return jnp.exp(logw) @ predictions


def mixture_predict(rho: LogWeights, experts: ExpertTable, cell: Hashable) -> float:
    k = experts.cell_index(cell)
    if rho.size != experts.num_experts:
        raise ValueError(f"{rho.size} weights for {experts.num_experts} experts")
    return float(rho.probs @ jnp.asarray(experts.predictions[:, k]))
