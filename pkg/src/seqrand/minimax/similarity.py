"""f-similarities of product distributions and Assouad-type lower bounds.

For a concave f, S_f(P, Q) = E_Q f(dP/dQ). Outcomes with zero Q-mass are left
out of the sum, so pairs that are not absolutely continuous are handled
through the absolutely continuous part of P.
"""
import math
from typing import Callable

import jax.numpy as jnp
from jax.scipy import special
import numpy as np

from seqrand.minimax import hypercube

MAX_SAMPLES = 1000
EXACT_BINOMIAL_LIMIT = 60

VARIANTS = ("hellinger", "hellinger_weak", "deterministic")


def minimum(u):
    """f(u) = min(u, 1); S_f is one minus the total variation distance."""
    return jnp.minimum(u, 1.0)


def sqrt(u):
    """f(u) = sqrt(u); S_f is the Hellinger affinity."""
    return jnp.sqrt(u)


def log_binomial_table(n: int) -> jnp.ndarray:
    """log C(k, j) for 0 <= j <= k <= n; -inf above the diagonal."""
    k = np.arange(n + 1)[:, None]
    j = np.arange(n + 1)[None, :]
    if n <= EXACT_BINOMIAL_LIMIT:
        table = np.full((n + 1, n + 1), -np.inf)
        for a in range(n + 1):
            for b in range(a + 1):
                table[a, b] = math.log(math.comb(a, b))
        return jnp.asarray(table)
    value = special.gammaln(k + 1.0) - special.gammaln(j + 1.0) - special.gammaln(np.maximum(k - j, 0) + 1.0)
    return jnp.where(j <= k, value, -jnp.inf)


def _check_probabilities(p_plus, p_minus):
    for name, p in (("p_plus", p_plus), ("p_minus", p_minus)):
        if math.isnan(p) or not 0 <= p <= 1:
            raise ValueError(f"{name} must be in [0, 1], got {p}")


def _check_count(name, k):
    if int(k) != k or not 0 <= k <= MAX_SAMPLES:
        raise ValueError(f"{name} must be an integer in [0, {MAX_SAMPLES}], got {k}")


def two_point_similarities(f: Callable, p_plus: float, p_minus: float, n: int) -> jnp.ndarray:
    """S_f(Q+^k, Q-^k) for k = 0..n, with Q+- Bernoulli(p+-)."""
    log_binom = log_binomial_table(n)
    k = jnp.arange(n + 1.0)[:, None]
    j = jnp.arange(n + 1.0)[None, :]
    in_range = j <= k
    rest = jnp.maximum(k - j, 0.0)
    log_q = special.xlogy(j, p_minus) + special.xlogy(rest, 1.0 - p_minus)
    log_p = special.xlogy(j, p_plus) + special.xlogy(rest, 1.0 - p_plus)
    charged = in_range & (log_q > -jnp.inf)
    ratio = jnp.exp(jnp.where(charged, log_p - log_q, 0.0))
    weight = jnp.exp(jnp.where(charged, log_binom + log_q, -jnp.inf))
    return jnp.sum(jnp.where(charged, weight * f(ratio), 0.0), axis=1)


def two_point_similarity(f: Callable, p_plus: float, p_minus: float, k: int) -> float:
    _check_probabilities(p_plus, p_minus)
    _check_count("k", k)
    return float(two_point_similarities(f, p_plus, p_minus, int(k))[int(k)])


def product_similarity(f: Callable, hc: hypercube.Hypercube, n: int) -> float:
    """S_f between the n-fold products of the averaged + and - edge distributions."""
    _check_count("n", n)
    n = int(n)
    inner = two_point_similarities(f, hc.p_plus, hc.p_minus, n)
    k = jnp.arange(n + 1.0)
    log_weight = log_binomial_table(n)[n] + special.xlogy(k, hc.w) + special.xlogy(n - k, 1.0 - hc.w)
    return float(jnp.sum(jnp.where(log_weight > -jnp.inf, jnp.exp(log_weight) * inner, 0.0)))


def hellinger_affinity(hc: hypercube.Hypercube, n: int) -> float:
    return product_similarity(sqrt, hc, n)


def total_variation(hc: hypercube.Hypercube, n: int) -> float:
    return 1.0 - product_similarity(minimum, hc, n)


def exact_lower_bound(hc: hypercube.Hypercube, n: int) -> float:
    """S_psi_tilde of the n-fold products: the generalized Assouad bound."""
    return product_similarity(hypercube.psi_tilde_fn(hc), hc, n)


def affinity_lower_bound(d_II: float, exponent: float) -> float:
    """1 - sqrt(1 - (1 - d_II)^exponent), a lower bound on S_min."""
    return 1.0 - math.sqrt(max(1.0 - (1.0 - d_II) ** exponent, 0.0))


def assouad_bound_closed(hc: hypercube.Hypercube, n: int, variant: str) -> float:
    if variant not in VARIANTS:
        raise ValueError(f"Unknown variant {variant!r}, expected one of {VARIANTS}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    scale = hc.m * hc.w * hypercube.edge_discrepancy_I(hc)
    if variant == "hellinger":
        value = scale * affinity_lower_bound(hc.d_II, n * hc.w)
    elif variant == "hellinger_weak":
        value = scale * (1.0 - math.sqrt(n * hc.w * hc.d_II))
    else:
        if not hc.is_deterministic:
            raise ValueError("the deterministic variant needs p_plus = 1 and p_minus = 0")
        value = scale * (1.0 - hc.w) ** n
    return max(value, 0.0)


def best_closed_bound(hc: hypercube.Hypercube, n: int) -> float:
    values = [assouad_bound_closed(hc, n, "hellinger")]
    if hc.is_deterministic:
        values.append(assouad_bound_closed(hc, n, "deterministic"))
    return max(values)
