"""Named hypercube constructions with their displayed lower-bound values.

Every preset takes keyword parameters and returns a `Preset`: the hypercube
family used by the construction and the closed-form bound it proves.
"""
import dataclasses
import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from seqrand import losses
from seqrand.minimax import hypercube
from seqrand.minimax import similarity
from seqrand.utils import registry

PRESETS = registry.Registry("preset")


class PresetConstraintError(ValueError):
    """Preset parameters violate one of the construction's constraints."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        message = f"preset constraint violated: {constraint}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


@dataclasses.dataclass(frozen=True, eq=False)
class Preset:
    name: str
    hypercubes: Tuple[hypercube.Hypercube, ...]
    bound: float
    params: Dict[str, Any] = dataclasses.field(default_factory=dict)

    @property
    def hypercube(self) -> hypercube.Hypercube:
        return self.hypercubes[0]

    @property
    def loss(self) -> losses.LossSpec:
        return self.hypercube.loss


def preset_hypercube(name: str, **params) -> Preset:
    return PRESETS.apply(name, **params)


def list_presets():
    return PRESETS.names()


def log2_floor(num_experts: int) -> int:
    """floor(log2 |G|), exact for integers."""
    if int(num_experts) != num_experts or num_experts < 2:
        raise PresetConstraintError("num_experts >= 2", f"got {num_experts}")
    return int(num_experts).bit_length() - 1


def _check_n(n):
    if int(n) != n or n < 1:
        raise PresetConstraintError("n >= 1", f"got {n}")
    return int(n)


def _slow_q_limit(m: int, n: int) -> float:
    return 1.0 + min(math.sqrt(m / (4.0 * n)), 1.0)


def lq_slow_rate_bound(q: float, B: float, num_experts: int, n: int) -> float:
    m = log2_floor(num_experts)
    c_q = 0.25 if q == 1 else q / 40.0
    if num_experts < 2 ** (4 * n + 1):
        return c_q * B**q * math.sqrt(m / n)
    return 2.0 * c_q * B**q


@PRESETS.add("lq_slow_rate")
def lq_slow_rate(*, q: float, B: float, num_experts: int, n: int) -> Preset:
    """Symmetric (m, 1/m, m/4n ^ 1) hypercube on {-B, B} for 1 <= q <= 1 + sqrt(m/4n) ^ 1."""
    n = _check_n(n)
    m = log2_floor(num_experts)
    if q < 1 or q > _slow_q_limit(m, n) + 1e-12:
        raise PresetConstraintError("q_range", f"need 1 <= q <= {_slow_q_limit(m, n)}, got {q}")
    loss = losses.absolute(B) if q == 1 else losses.lq(q, B)
    hc = hypercube.Hypercube.symmetric(m, 1.0 / m, min(m / (4.0 * n), 1.0), -B, B, loss)
    bound = lq_slow_rate_bound(q, B, num_experts, n)
    return Preset("lq_slow_rate", (hc,), bound, dict(q=q, B=B, num_experts=num_experts, n=n))


def lq_fast_rate_bound(q: float, B: float, num_experts: int, n: int) -> float:
    m = log2_floor(num_experts)
    return max(q / (90.0 * (q - 1.0)), math.exp(-1.0)) * B**q * min(m / (n + 1.0), 1.0)


@PRESETS.add("lq_fast_rate")
def lq_fast_rate(*, q: float, B: float, num_experts: int, n: int) -> Preset:
    """Deterministic (m, 1/(n+1) ^ 1/m, 1) hypercube, plus a symmetric one for q < 2."""
    n = _check_n(n)
    m = log2_floor(num_experts)
    if not q > _slow_q_limit(m, n):
        raise PresetConstraintError("q_range", f"need q > {_slow_q_limit(m, n)}, got {q}")
    loss = losses.square(B) if q == 2 else losses.lq(q, B)
    family = [
        hypercube.Hypercube(
            m=m, w=min(1.0 / (n + 1), 1.0 / m), p_plus=1.0, p_minus=0.0, h1=-B, h2=B, loss=loss
        )
    ]
    if q < 2:
        family.append(hypercube.Hypercube.symmetric(m, 1.0 / m, min(4.0 * m / (9.0 * n), 1.0), -B, B, loss))
    bound = lq_fast_rate_bound(q, B, num_experts, n)
    return Preset("lq_fast_rate", tuple(family), bound, dict(q=q, B=B, num_experts=num_experts, n=n))


def absolute_unbounded_bound(b: float, num_experts: int, n: int) -> float:
    """b sqrt(m/4n ^ 1) (1 - sqrt(1/4 ^ n/m)); equals (b/4) sqrt(m/n) when m <= 4n."""
    m = log2_floor(num_experts)
    return b * math.sqrt(min(m / (4.0 * n), 1.0)) * (1.0 - math.sqrt(min(0.25, n / m)))


@PRESETS.add("absolute_unbounded")
def absolute_unbounded(*, b: float, num_experts: int, n: int) -> Preset:
    n = _check_n(n)
    m = log2_floor(num_experts)
    hc = hypercube.Hypercube.symmetric(m, 1.0 / m, min(m / (4.0 * n), 1.0), -b, b, losses.absolute(b))
    bound = absolute_unbounded_bound(b, num_experts, n)
    return Preset("absolute_unbounded", (hc,), bound, dict(b=b, num_experts=num_experts, n=n))


def _check_moments(q, s, b, A):
    if not (q > 1 and s >= q):
        raise PresetConstraintError("s >= q > 1", f"got q={q}, s={s}")
    if not (b > 0 and A > 0):
        raise PresetConstraintError("b > 0 and A > 0", f"got b={b}, A={A}")


def _moment_preset(name, hc, q, s, num_experts, n, extra):
    v = 1.0 - (q - 1.0) / s if name == "lq_moment_asymmetric" else 1.0 - q / (s + 2.0)
    rate = min(math.log(num_experts) / n, 1.0) ** v
    bound = similarity.assouad_bound_closed(hc, n, "hellinger")
    params = dict(q=q, s=s, num_experts=num_experts, n=n, rate=rate, **extra)
    return Preset(name, (hc,), bound, params)


@PRESETS.add("lq_moment_asymmetric")
def lq_moment_asymmetric(
    *, q: float, s: float, b: float, A: float, num_experts: int, n: int, C: Optional[float] = None
) -> Preset:
    """p+ = p, p- = 0 on {B, 0} with B = C p^(-1/(q-1)), m w p B^s = A and n w p = 1/4."""
    n = _check_n(n)
    _check_moments(q, s, b, A)
    m = log2_floor(num_experts)
    r = 1.0 / (q - 1.0)
    if C is None:
        C = 0.5 * b * min(1.0, 2.0 ** (1.0 - r))
    B = (4.0 * n * A / m) ** (1.0 / s)
    p = (C / B) ** (q - 1.0)
    if not 0 < p <= 1:
        raise PresetConstraintError("0 < p <= 1", f"p={p}")
    w = 1.0 / (4.0 * n * p)
    if m * w > 1 + 1e-12:
        raise PresetConstraintError("m * w <= 1", f"m={m}, w={w}")
    limit = (p**r + (1.0 - p) ** r) / p**r * b
    if B > limit * (1 + 1e-12):
        raise PresetConstraintError("best_prediction_bound", f"B={B} exceeds {limit}")
    hc = hypercube.Hypercube(m=m, w=w, p_plus=p, p_minus=0.0, h1=B, h2=0.0, loss=losses.lq(q, B, b=b))
    return _moment_preset("lq_moment_asymmetric", hc, q, s, num_experts, n, dict(b=b, A=A, C=C, B=B))


@PRESETS.add("lq_moment_symmetric")
def lq_moment_symmetric(
    *, q: float, s: float, b: float, A: float, num_experts: int, n: int, C: Optional[float] = None
) -> Preset:
    """Symmetric hypercube on {-B, B} with B = C d^(-1/2), m w B^s = A and n w d = 1/4."""
    n = _check_n(n)
    _check_moments(q, s, b, A)
    m = log2_floor(num_experts)
    r = 1.0 / (q - 1.0)
    if C is None:
        C = 0.5 * b * min(q - 1.0, 1.0)
    d_II = (m * C**s / (4.0 * n * A)) ** (2.0 / (s + 2.0))
    if not 0 < d_II <= 1:
        raise PresetConstraintError("d_II <= 1", f"d_II={d_II}")
    B = C / math.sqrt(d_II)
    w = 1.0 / (4.0 * n * d_II)
    if m * w > 1 + 1e-12:
        raise PresetConstraintError("m * w <= 1", f"m={m}, w={w}")
    root = math.sqrt(d_II)
    upper, lower = (1.0 + root) ** r, (1.0 - root) ** r
    limit = (upper + lower) / (upper - lower) * b
    if B > limit * (1 + 1e-12):
        raise PresetConstraintError("best_prediction_bound", f"B={B} exceeds {limit}")
    hc = hypercube.Hypercube.symmetric(m, w, d_II, -B, B, losses.lq(q, B, b=b))
    return _moment_preset("lq_moment_symmetric", hc, q, s, num_experts, n, dict(b=b, A=A, C=C, B=B))


def entropy_fast_rate_bound(m: int, n: int) -> float:
    return math.exp(-1.0) * math.log(2.0) * min(m / (n + 1.0), 1.0)


@PRESETS.add("entropy_fast_rate")
def entropy_fast_rate(*, n: int, num_experts: Optional[int] = None, m: Optional[int] = None) -> Preset:
    """Deterministic (m, 1/(n+1) ^ 1/m, 1) hypercube on {0, 1} under the entropy loss."""
    n = _check_n(n)
    if m is None:
        if num_experts is None:
            raise PresetConstraintError("num_experts or m required")
        m = log2_floor(num_experts)
    if int(m) != m or m < 1:
        raise PresetConstraintError("m >= 1", f"got {m}")
    m = int(m)
    hc = hypercube.Hypercube(
        m=m, w=min(1.0 / (n + 1), 1.0 / m), p_plus=1.0, p_minus=0.0, h1=0.0, h2=1.0, loss=losses.entropy()
    )
    return Preset("entropy_fast_rate", (hc,), entropy_fast_rate_bound(m, n), dict(m=m, n=n))


def _check_vc(V):
    if int(V) != V or V < 2:
        raise PresetConstraintError("V >= 2", f"got {V}")
    return int(V)


def classification_realizable_bound(V: int, n: int) -> float:
    if n >= V - 2:
        return (V - 1.0) / (2.0 * math.e * (n + 1.0))
    return 0.5 * (1.0 - 1.0 / V) ** n


@PRESETS.add("classification_realizable")
def classification_realizable(*, V: int, n: int) -> Preset:
    V = _check_vc(V)
    if int(n) != n or n < 0:
        raise PresetConstraintError("n >= 0", f"got {n}")
    n = int(n)
    loss = losses.zero_one()
    if n >= V - 2:
        hc = hypercube.Hypercube(m=V - 1, w=1.0 / (n + 1), p_plus=1.0, p_minus=0.0, h1=0.0, h2=1.0, loss=loss)
    else:
        hc = hypercube.Hypercube(m=V, w=1.0 / V, p_plus=1.0, p_minus=0.0, h1=0.0, h2=1.0, loss=loss)
    return Preset("classification_realizable", (hc,), classification_realizable_bound(V, n), dict(V=V, n=n))


def classification_noisy_bound(V: int, n: int, L: float) -> float:
    if (1.0 - 2.0 * L) ** 2 * n / V >= 4.0 / 9.0:
        return max(math.sqrt(L * (V - 1.0) / (32.0 * n)), 2.0 * (V - 1.0) / (27.0 * n))
    return (1.0 - 2.0 * L) / 6.0


@PRESETS.add("classification_noisy")
def classification_noisy(*, V: int, n: int, L: float) -> Preset:
    """The three-member hypercube family for a best risk L; invalid members are skipped."""
    V = _check_vc(V)
    n = _check_n(n)
    if not 0 <= L <= 0.5:
        raise PresetConstraintError("0 <= L <= 1/2", f"got {L}")
    loss = losses.zero_one()
    candidates = []
    if L > 0:
        candidates.append((V - 1, 2.0 * L / (V - 1), (V - 1) / (8.0 * n * L)))
    if L < 0.5:
        gap = (1.0 - 2.0 * L) ** 2
        candidates.append((V - 1, 4.0 / (9.0 * n * gap), gap))
        candidates.append((V, 1.0 / V, gap))
    family = []
    for m, w, d_II in candidates:
        if m >= 1 and m * w <= 1 + 1e-12 and 0 < d_II <= 1:
            family.append(hypercube.Hypercube.symmetric(m, w, d_II, 0.0, 1.0, loss))
    if not family:
        raise PresetConstraintError("no valid hypercube", f"V={V}, n={n}, L={L}")
    return Preset("classification_noisy", tuple(family), classification_noisy_bound(V, n, L), dict(V=V, n=n, L=L))


def classification_agnostic_bound(V: int, n: int) -> float:
    return math.sqrt(V / n) / 8.0


@PRESETS.add("classification_agnostic")
def classification_agnostic(*, V: int, n: int) -> Preset:
    """(V, 1/V, V/4n) hypercube: the noisy family at 1 - 2L = sqrt(V/n) / 2."""
    V = _check_vc(V)
    n = _check_n(n)
    if V > 4 * n:
        raise PresetConstraintError("V <= 4n", f"V={V}, n={n}")
    gap = 0.5 * math.sqrt(V / n)
    hc = hypercube.Hypercube.symmetric(V, 1.0 / V, gap**2, 0.0, 1.0, losses.zero_one())
    params = dict(V=V, n=n, L=(1.0 - gap) / 2.0)
    return Preset("classification_agnostic", (hc,), classification_agnostic_bound(V, n), params)


@PRESETS.add("no_consistency")
def no_consistency(
    *, n: int, alpha: float, loss: losses.LossSpec, h_grid: Optional[Sequence[float]] = None
) -> Preset:
    """(floor(n alpha), 1/floor(n alpha), 1) hypercubes on the best pair of outputs."""
    n = _check_n(n)
    if not alpha > 0:
        raise PresetConstraintError("alpha > 0", f"got {alpha}")
    m = int(math.floor(n * alpha))
    if m < 1:
        raise PresetConstraintError("floor(n * alpha) >= 1", f"n={n}, alpha={alpha}")
    if isinstance(loss, dict):
        loss = losses.LossSpec.from_json(loss)
    if h_grid is None:
        h_grid = np.linspace(loss.y_lo, loss.y_hi, 101)
    value, y1, y2 = hypercube.no_consistency_pair(loss, h_grid)
    if y1 == y2:
        raise PresetConstraintError("h_grid has two distinct outputs")
    hc = hypercube.Hypercube(m=m, w=1.0 / m, p_plus=1.0, p_minus=0.0, h1=y1, h2=y2, loss=loss)
    return Preset("no_consistency", (hc,), value, dict(n=n, alpha=alpha, m=m))


def report_row(setting: str, hc: hypercube.Hypercube, n: int) -> Dict[str, Any]:
    """One row of the lower-bound CSV report."""
    return {
        "setting": setting,
        "m": hc.m,
        "w": hc.w,
        "p_plus": hc.p_plus,
        "p_minus": hc.p_minus,
        "d_I": hc.d_I,
        "d_II": hc.d_II,
        "n": n,
        "exact_similarity": similarity.exact_lower_bound(hc, n),
        "closed_814": similarity.assouad_bound_closed(hc, n, "hellinger"),
        "weak_814": similarity.assouad_bound_closed(hc, n, "hellinger_weak"),
        "det_815": (
            similarity.assouad_bound_closed(hc, n, "deterministic") if hc.is_deterministic else None
        ),
    }


REPORT_COLUMNS = (
    "setting",
    "m",
    "w",
    "p_plus",
    "p_minus",
    "d_I",
    "d_II",
    "n",
    "exact_similarity",
    "closed_814",
    "weak_814",
    "det_815",
)
