"""Regression data with heavy-tailed noise under a moment budget E|Y|^s <= A."""
import dataclasses
import math
from typing import Callable, List, Sequence, Tuple

from absl import logging
import chex
import jax
import jax.numpy as jnp
import numpy as np

from seqrand import gibbs
from seqrand import losses
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.harness import monte_carlo

SELF_CHECK_SLACK = 5.0


@dataclasses.dataclass(frozen=True, eq=False)
class HeavyTailGenerator:
    """Y = target(X) + noise with symmetric Pareto noise of tail index s + tail_excess.

    The noise scale is set so that ||Y||_s <= (headroom * A)^(1/s) by
    Minkowski's inequality. Risks of lq losses come from a moment curve
    t -> E|t + noise|^q tabulated once by quadrature.
    """

    target: np.ndarray
    cell_masses: np.ndarray
    q: float
    s: float
    A: float
    b: float
    tail_excess: float = 0.1
    headroom: float = 0.25
    quadrature_draws: int = 1_000_000
    quadrature_seed: int = 0
    grid_size: int = 1025

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        masses = np.asarray(self.cell_masses, dtype=float)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "cell_masses", masses)
        if target.ndim != 1 or target.shape != masses.shape:
            raise ValueError(f"target and cell_masses must be matching vectors, got {target.shape}, {masses.shape}")
        if np.any(masses < 0) or abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError("cell_masses must be a probability vector")
        if not (self.q >= 1 and self.s >= self.q):
            raise ValueError(f"need s >= q >= 1, got q={self.q}, s={self.s}")
        if not (self.A > 0 and self.b > 0):
            raise ValueError(f"A and b must be positive, got A={self.A}, b={self.b}")
        if np.max(np.abs(target)) > self.b + 1e-12:
            raise ValueError(f"target exceeds the prediction bound b={self.b}")
        noise_norm = (self.headroom * self.A) ** (1.0 / self.s) - np.max(np.abs(target))
        if not noise_norm > 0:
            raise ValueError(f"moment budget A={self.A} leaves no room for noise around the target")
        # E|noise|^s = scale^s * alpha / (alpha - s) for Pareto magnitudes.
        scale = noise_norm / (self.alpha / (self.alpha - self.s)) ** (1.0 / self.s)
        object.__setattr__(self, "scale", float(scale))

        key = jax.random.PRNGKey(self.quadrature_seed)
        noise = self.noise(key, (self.quadrature_draws,))
        moment = self._moment_check(jax.random.fold_in(key, 1), noise)
        limit = self.A * (1.0 + SELF_CHECK_SLACK / math.sqrt(self.quadrature_draws))
        if moment > limit:
            raise ValueError(f"empirical moment E|Y|^s = {moment} exceeds {limit}")
        logging.info("HeavyTailGenerator: noise scale %.4g, empirical E|Y|^s %.4g", scale, moment)

        half_width = float(np.max(np.abs(target))) + self.b
        grid = jnp.linspace(-2.0 * half_width, 2.0 * half_width, self.grid_size)
        curve = jax.lax.map(lambda t: jnp.mean(jnp.abs(t + noise) ** self.q), grid)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "moment_curve", curve)

    @classmethod
    def from_expert(cls, experts: gibbs.ExpertTable, index: int, cell_masses, **kwargs) -> "HeavyTailGenerator":
        return cls(target=experts.predictions[index], cell_masses=cell_masses, **kwargs)

    @property
    def alpha(self) -> float:
        return self.s + self.tail_excess

    def noise(self, key: chex.PRNGKey, shape) -> chex.Array:
        sign_key, size_key = jax.random.split(key)
        u = jax.random.uniform(size_key, shape, minval=jnp.finfo(float).tiny, maxval=1.0)
        sign = jax.random.rademacher(sign_key, shape, dtype=float)
        return sign * self.scale * u ** (-1.0 / self.alpha)

    def _moment_check(self, key, noise) -> float:
        cells = jax.random.categorical(key, jnp.log(self.cell_masses), shape=noise.shape)
        ys = jnp.asarray(self.target)[cells] + noise
        return float(jnp.mean(jnp.abs(ys) ** self.s))

    def sample(self, key: chex.PRNGKey, n: int) -> gibbs.Outcomes:
        cell_key, noise_key = jax.random.split(key)
        cells = jax.random.categorical(cell_key, jnp.log(self.cell_masses), shape=(n,)).astype(jnp.int32)
        ys = jnp.asarray(self.target)[cells] + self.noise(noise_key, (n,))
        return gibbs.Outcomes(cells=cells, ys=ys)

    def risk(self, loss: losses.LossSpec, predictions: chex.Array) -> chex.Array:
        if loss.kind not in ("square", "lq", "absolute") or loss.q != self.q:
            raise ValueError(f"moment curve tabulated for |.|^{self.q}, got {loss.name}")
        shift = jnp.asarray(self.target) - jnp.asarray(predictions)
        values = jnp.interp(shift, self.grid, self.moment_curve)
        return jnp.sum(jnp.asarray(self.cell_masses) * values, axis=-1)


def heavy_tail_curve(
    generator: HeavyTailGenerator,
    experts: gibbs.ExpertTable,
    config_for_n: Callable[[int], seqrand_lib.EstimatorConfig],
    ns: Sequence[int],
    trials: int,
    master_seed: int,
    batch_size: int = 256,
) -> List[Tuple[int, monte_carlo.MCResult]]:
    """Excess risk over a grid of sample sizes, one learning rate per n."""
    curve = []
    for n in ns:
        config = config_for_n(n)
        result = monte_carlo.excess_risk_mc(
            generator, config.loss, experts, config, n, trials, master_seed, batch_size=batch_size
        )
        logging.info("heavy_tail_curve: n=%d excess=%.5g +- %.2g", n, result.mean, result.stderr)
        curve.append((n, result))
    return curve
