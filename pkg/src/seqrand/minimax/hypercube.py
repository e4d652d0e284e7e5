"""Hypercubes of distributions and their edge discrepancies."""
import dataclasses
import itertools
import math
from typing import List, Optional, Sequence, Tuple

import jax.numpy as jnp
from jax.scipy import integrate
import numpy as np

from seqrand import gibbs
from seqrand import losses
from seqrand.harness import distributions


@dataclasses.dataclass(frozen=True)
class Hypercube:
    """2^m distributions sharing the input marginal.

    Cells X_1..X_m carry mass w each and X_0 carries the rest. On X_j the
    output is h1 with probability p_plus or p_minus depending on the sign
    sigma_j, and h2 otherwise; X_0 always uses p_minus.
    """

    m: int
    w: float
    p_plus: float
    p_minus: float
    h1: float
    h2: float
    loss: losses.LossSpec

    def __post_init__(self):
        if not (isinstance(self.m, (int, np.integer)) and self.m >= 1):
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not (0 < self.w and self.m * self.w <= 1 + 1e-12):
            raise ValueError(f"need 0 < w and m * w <= 1, got m={self.m}, w={self.w}")
        if not 0 <= self.p_minus < self.p_plus <= 1:
            raise ValueError(f"need 0 <= p_minus < p_plus <= 1, got ({self.p_plus}, {self.p_minus})")
        if self.h1 == self.h2:
            raise ValueError(f"h1 and h2 must differ, got {self.h1}")
        if self.loss.kind in ("entropy", "zero_one") and not (0 <= self.h1 <= 1 and 0 <= self.h2 <= 1):
            raise ValueError(f"{self.loss.kind} outputs must lie in [0, 1], got ({self.h1}, {self.h2})")

    @classmethod
    def symmetric(cls, m: int, w: float, d_II: float, h1: float, h2: float, loss: losses.LossSpec) -> "Hypercube":
        """The (m, w, d_II) symmetric hypercube: p_plus = (1 + xi) / 2, xi = sqrt(d_II)."""
        if not 0 < d_II <= 1:
            raise ValueError(f"d_II must be in (0, 1], got {d_II}")
        xi = math.sqrt(d_II)
        return cls(m=m, w=w, p_plus=(1 + xi) / 2, p_minus=(1 - xi) / 2, h1=h1, h2=h2, loss=loss)

    @property
    def x0_mass(self) -> float:
        return max(1.0 - self.m * self.w, 0.0)

    @property
    def is_symmetric(self) -> bool:
        return abs(self.p_plus - (1.0 - self.p_minus)) <= 1e-12

    @property
    def is_deterministic(self) -> bool:
        return self.p_plus == 1.0 and self.p_minus == 0.0

    @property
    def d_II(self) -> float:
        return edge_discrepancy_II(self)

    @property
    def d_I(self) -> float:
        return edge_discrepancy_I(self)

    def to_json(self):
        return {
            "m": self.m,
            "w": self.w,
            "p_plus": self.p_plus,
            "p_minus": self.p_minus,
            "h1": self.h1,
            "h2": self.h2,
            "loss": self.loss.to_json(),
        }


def edge_discrepancy_II(hc: Hypercube) -> float:
    a = math.sqrt(hc.p_plus * (1.0 - hc.p_minus))
    c = math.sqrt((1.0 - hc.p_plus) * hc.p_minus)
    return min(max((a - c) ** 2, 0.0), 1.0)


def psi_fn(hc: Hypercube, alpha):
    """phi(alpha p+ + (1-alpha) p-) - alpha phi(p+) - (1-alpha) phi(p-); traceable."""
    phi = lambda p: losses.phi_fn(hc.loss, p, hc.h1, hc.h2)
    mid = alpha * hc.p_plus + (1.0 - alpha) * hc.p_minus
    return phi(mid) - alpha * phi(jnp.asarray(hc.p_plus)) - (1.0 - alpha) * phi(jnp.asarray(hc.p_minus))


def edge_discrepancy_I(hc: Hypercube) -> float:
    return max(float(psi_fn(hc, jnp.asarray(0.5))), 0.0)


def edge_discrepancy_I_quadrature(hc: Hypercube, num_points: int = 10_000) -> float:
    """d_I as (p+ - p-)^2 / 2 times the integral of min(t, 1-t) |phi''| along the edge."""
    if hc.loss.kind not in ("square", "lq"):
        raise ValueError(f"quadrature form needs an lq loss, got {hc.loss.kind}")
    if num_points < 2:
        raise ValueError(f"num_points must be at least 2, got {num_points}")
    t = jnp.linspace(0.0, 1.0, num_points)
    p = t * hc.p_plus + (1.0 - t) * hc.p_minus
    curvature = jnp.abs(losses.phi_second_derivative_fn(hc.loss, p, hc.h1, hc.h2))
    integrand = jnp.minimum(t, 1.0 - t) * curvature
    integrand = jnp.where(jnp.isfinite(integrand), integrand, 0.0)
    return float((hc.p_plus - hc.p_minus) ** 2 / 2.0 * integrate.trapezoid(integrand, t))


def psi_tilde_fn(hc: Hypercube):
    """The characteristic function u -> (mw/2)(u+1) psi(u/(u+1)); traceable."""
    scale = hc.m * hc.w / 2.0

    def fn(u):
        u = jnp.asarray(u, dtype=float)
        return scale * (u + 1.0) * psi_fn(hc, u / (u + 1.0))

    return fn


def psi_tilde(hc: Hypercube, u):
    arr = np.asarray(u, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValueError(f"u must be nonnegative, got {u}")
    out = psi_tilde_fn(hc)(jnp.asarray(arr))
    return float(out) if out.ndim == 0 else np.asarray(out)


def vertices(m: int) -> List[Tuple[int, ...]]:
    """All sign vectors, starting from the all-(+) vertex."""
    return list(itertools.product((1, -1), repeat=m))


def hypercube_vertex_distribution(
    hc: Hypercube, sigma: Sequence[int], cells: Optional[Sequence[int]] = None
) -> distributions.DiscreteDistribution:
    """The vertex distribution; `cells[0]` is X_0 and `cells[j]` is X_j."""
    sigma = tuple(int(s) for s in sigma)
    if len(sigma) != hc.m or any(s not in (1, -1) for s in sigma):
        raise ValueError(f"sigma must hold {hc.m} signs in {{+1, -1}}, got {sigma}")
    if cells is None:
        cells = tuple(range(hc.m + 1))
    if len(cells) != hc.m + 1:
        raise ValueError(f"need {hc.m + 1} cells (X_0..X_m), got {len(cells)}")
    probs = [hc.p_minus] + [hc.p_plus if s > 0 else hc.p_minus for s in sigma]
    cell_masses = [hc.x0_mass] + [hc.w] * hc.m
    atom_cells, ys, masses = [], [], []
    for cell, p, mass in zip(cells, probs, cell_masses):
        atom_cells += [cell, cell]
        ys += [hc.h1, hc.h2]
        masses += [mass * p, mass * (1.0 - p)]
    masses = np.asarray(masses)
    # m * w may exceed one by rounding.
    masses = masses / masses.sum()
    return distributions.from_arrays(atom_cells, ys, masses)


def bayes_predictions(hc: Hypercube, sigma: Sequence[int]) -> np.ndarray:
    """Best constant on every cell of the sigma vertex, X_0 first."""
    probs = [hc.p_minus] + [hc.p_plus if s > 0 else hc.p_minus for s in sigma]
    return np.array([losses.best_constant(hc.loss, p, hc.h1, hc.h2) for p in probs])


def pattern_expert_set(hc: Hypercube, d: int) -> gibbs.ExpertTable:
    """Bayes predictors of all 2^m vertices, padded with the all-(+) expert to d rows."""
    if d < 2:
        raise ValueError(f"d must be at least 2, got {d}")
    if d < 2**hc.m:
        raise ValueError(f"d={d} cannot hold the {2 ** hc.m} vertex patterns of an m={hc.m} hypercube")
    rows = [bayes_predictions(hc, sigma) for sigma in vertices(hc.m)]
    rows += [rows[0]] * (d - len(rows))
    return gibbs.ExpertTable(cells=tuple(range(hc.m + 1)), predictions=np.stack(rows))


def no_consistency_pair(loss: losses.LossSpec, h_grid: Sequence[float]) -> Tuple[float, float, float]:
    """(value, y1, y2) maximizing phi_{y1, y2}(1/2) over distinct grid pairs."""
    grid = np.unique(np.asarray(h_grid, dtype=float))
    if grid.size == 0 or np.any(np.isnan(grid)):
        raise ValueError("h_grid must be a non-empty grid without NaN")
    if loss.kind in ("entropy", "zero_one") and (grid.min() < 0 or grid.max() > 1):
        raise ValueError(f"{loss.kind} outputs must lie in [0, 1]")
    if grid.size == 1:
        return 0.0, float(grid[0]), float(grid[0])
    y1, y2 = np.meshgrid(grid, grid, indexing="ij")
    values = np.asarray(losses.phi_fn(loss, jnp.asarray(0.5), jnp.asarray(y1), jnp.asarray(y2)))
    values = np.where(y1 != y2, values, -np.inf)
    i, j = np.unravel_index(np.argmax(values), values.shape)
    return float(max(values[i, j], 0.0)), float(grid[i]), float(grid[j])


def no_consistency_bound(loss: losses.LossSpec, h_grid: Sequence[float]) -> float:
    return no_consistency_pair(loss, h_grid)[0]
