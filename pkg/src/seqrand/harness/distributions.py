"""Finite-support data-generating distributions with exact risks."""
from typing import Hashable, Iterable, Protocol, Tuple

import chex
import jax
import jax.numpy as jnp
import numpy as np

from seqrand import gibbs
from seqrand import losses

MASS_TOL = 1e-12


class RiskOracle(Protocol):
    """Anything that samples outcomes and knows the risk of a predictor."""

    def sample(self, key: chex.PRNGKey, n: int) -> gibbs.Outcomes:
        ...

    def risk(self, loss: losses.LossSpec, predictions: chex.Array) -> chex.Array:
        ...


@chex.dataclass(frozen=True)
class DiscreteDistribution:
    """Joint law of (X, Y) on finitely many atoms.

    `cells` indexes the columns of the companion ExpertTable.
    """

    cells: chex.Array
    ys: chex.Array
    masses: chex.Array

    def sample(self, key: chex.PRNGKey, n: int) -> gibbs.Outcomes:
        atoms = jax.random.categorical(key, jnp.log(self.masses), shape=(n,))
        return gibbs.Outcomes(cells=self.cells[atoms], ys=self.ys[atoms])

    def risk(self, loss: losses.LossSpec, predictions: chex.Array) -> chex.Array:
        """Exact risk of predictions with trailing cell axis; batches over leading axes."""
        values = loss.pointwise(self.ys, jnp.asarray(predictions)[..., self.cells])
        return jnp.sum(jnp.where(self.masses > 0, self.masses * values, 0.0), axis=-1)


def from_support(
    experts: gibbs.ExpertTable, support: Iterable[Tuple[Hashable, float, float]]
) -> DiscreteDistribution:
    """Builds a distribution from (cell, y, mass) atoms."""
    support = list(support)
    if not support:
        raise ValueError("Empty support")
    cells = np.array([experts.cell_index(c) for c, _, _ in support], dtype=np.int32)
    ys = np.array([y for _, y, _ in support], dtype=float)
    masses = np.array([m for _, _, m in support], dtype=float)
    return from_arrays(cells, ys, masses)


def from_arrays(cells, ys, masses) -> DiscreteDistribution:
    cells = np.asarray(cells, dtype=np.int32)
    ys = np.asarray(ys, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if not cells.shape == ys.shape == masses.shape or cells.ndim != 1:
        raise ValueError(f"Mismatched support shapes {cells.shape}, {ys.shape}, {masses.shape}")
    if np.any(np.isnan(ys)) or np.any(np.isnan(masses)):
        raise ValueError("Support contains NaN")
    if np.any(masses < 0):
        raise ValueError("Negative mass in support")
    if abs(masses.sum() - 1.0) > MASS_TOL:
        raise ValueError(f"mass mismatch: total mass {masses.sum()}")
    return DiscreteDistribution(cells=jnp.asarray(cells), ys=jnp.asarray(ys), masses=jnp.asarray(masses))


def cell_marginal(P: DiscreteDistribution, num_cells: int) -> np.ndarray:
    return np.asarray(jnp.zeros(num_cells).at[P.cells].add(P.masses))


def expert_risks(P: DiscreteDistribution, loss: losses.LossSpec, experts: gibbs.ExpertTable) -> np.ndarray:
    return np.asarray(P.risk(loss, jnp.asarray(experts.predictions)))


def exact_risk(P: DiscreteDistribution, loss: losses.LossSpec, experts: gibbs.ExpertTable, predictor) -> float:
    """Risk of a deterministic predictor given by its value on every cell."""
    predictor = np.asarray(predictor, dtype=float)
    if predictor.shape != (experts.num_cells,):
        raise ValueError(f"predictor has shape {predictor.shape}, expected ({experts.num_cells},)")
    return float(P.risk(loss, jnp.asarray(predictor)))


def randomized_risk(
    P: DiscreteDistribution, loss: losses.LossSpec, experts: gibbs.ExpertTable, rho: gibbs.LogWeights
) -> float:
    """E_{g ~ rho} R(g)."""
    return gibbs.expected_value(rho, expert_risks(P, loss, experts))
