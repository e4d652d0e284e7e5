"""Closed-form risk upper bounds and the matching learning-rate choices."""
import math

from seqrand.utils import registry

UPPER_BOUNDS = registry.Registry("upper bound")


def _check_common(num_experts, n):
    if num_experts < 1:
        raise ValueError(f"num_experts must be at least 1, got {num_experts}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")


@UPPER_BOUNDS.add("gibbs_finite")
def gibbs_finite(*, min_risk: float, num_experts: int, lam: float, n: int) -> float:
    """min_G R + log|G| / (lam (n+1)) under a zero variance function."""
    _check_common(num_experts, n)
    return min_risk + math.log(num_experts) / (lam * (n + 1))


@UPPER_BOUNDS.add("square_mixable")
def square_mixable(*, B: float, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    return 2.0 * B**2 * math.log(num_experts) / (n + 1)


@UPPER_BOUNDS.add("hoeffding")
def hoeffding(*, span: float, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    return span * math.sqrt(math.log(num_experts) / (2.0 * (n + 1)))


@UPPER_BOUNDS.add("hoeffding_lambda")
def hoeffding_at_lambda(*, span: float, num_experts: int, n: int, lam: float) -> float:
    """Excess-risk bound of the Hoeffding variant at an arbitrary lambda."""
    _check_common(num_experts, n)
    return lam * span**2 / 8.0 + math.log(num_experts) / (lam * (n + 1))


@UPPER_BOUNDS.add("absolute_bernstein")
def absolute_bernstein(*, b: float, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    return 2.0 * b * math.sqrt(2.0 * math.log(num_experts) / (n + 1))


@UPPER_BOUNDS.add("lq_fast")
def lq_fast(*, q: float, B: float, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    if n < 1:
        raise ValueError("lq_fast needs n >= 1")
    scale = q * min(1.0, 2.0 ** (q - 2.0)) * B**q / (q - 1.0)
    return scale * math.log(2.0) * math.log2(num_experts) / n


@UPPER_BOUNDS.add("lq_slow")
def lq_slow(*, q: float, B: float, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    if n < 1:
        raise ValueError("lq_slow needs n >= 1")
    return 2.0 ** ((2.0 * q - 1.0) / 2.0) * B**q * math.sqrt(math.log(num_experts) / n)


@UPPER_BOUNDS.add("entropy")
def entropy(*, num_experts: int, n: int) -> float:
    _check_common(num_experts, n)
    if n < 1:
        raise ValueError("entropy bound needs n >= 1")
    return math.log(num_experts) / n


@UPPER_BOUNDS.add("bernstein_margin")
def bernstein_margin(*, min_risk: float, c: float, num_experts: int, n: int) -> float:
    """Margin condition with exponent one at lam = 1 / (2c)."""
    _check_common(num_experts, n)
    return min_risk + 4.0 * c * math.log(num_experts) / (n + 1)


@UPPER_BOUNDS.add("bernstein_margin_general")
def bernstein_margin_general(
    *, reference_risk: float, expert_risk: float, c: float, lam: float, num_experts: int, n: int
) -> float:
    """Margin condition with exponent one, rho a Dirac on one expert, uniform prior."""
    _check_common(num_experts, n)
    if not 0 < c * lam < 1:
        raise ValueError(f"need 0 < c * lambda < 1, got {c * lam}")
    ratio = (1.0 + c * lam) / (1.0 - c * lam)
    penalty = math.log(num_experts) / ((1.0 - c * lam) * lam * (n + 1))
    return reference_risk + ratio * (expert_risk - reference_risk) + penalty


def heavy_tail_exponent(q: float, s: float) -> float:
    """Rate exponent v of (log|G| / n)^v under E|Y|^s <= A."""
    if not (q > 1 and s >= q):
        raise ValueError(f"need q > 1 and s >= q, got q={q}, s={s}")
    if s < 2.0 * q - 2.0:
        return 1.0 - (q - 1.0) / s
    return 1.0 - q / (s + 2.0)


@UPPER_BOUNDS.add("heavy_tail_rate")
def heavy_tail_rate(*, q: float, s: float, num_experts: int, n: int, C: float = 1.0) -> float:
    _check_common(num_experts, n)
    if n < 1:
        raise ValueError("heavy_tail_rate needs n >= 1")
    return C * (math.log(num_experts) / n) ** heavy_tail_exponent(q, s)


def upper_bound_value(setting: str, **params) -> float:
    """Evaluates the named closed-form bound; unknown names raise ValueError."""
    return float(UPPER_BOUNDS.apply(setting, **params))


def hoeffding_lambda(num_experts: int, span: float, n: int) -> float:
    """sqrt(8 log|G| / (span^2 (n+1)))."""
    _check_common(num_experts, n)
    if num_experts == 1:
        raise ValueError("hoeffding_lambda is degenerate for a single expert")
    return math.sqrt(8.0 * math.log(num_experts) / (span**2 * (n + 1)))


def absolute_lambda(num_experts: int, b: float, n: int) -> float:
    _check_common(num_experts, n)
    if num_experts == 1:
        raise ValueError("absolute_lambda is degenerate for a single expert")
    return math.sqrt(math.log(num_experts) / (2.0 * b**2 * (n + 1)))


def heavy_tail_lambda(num_experts: int, n: int, q: float, s: float, C1: float = 1.0) -> float:
    """C1 (log|G| / n)^e with e = (q-1)/s for s < 2q - 2, else q / (s+2)."""
    _check_common(num_experts, n)
    if n < 1 or num_experts == 1:
        raise ValueError("heavy_tail_lambda needs n >= 1 and at least two experts")
    if not (q > 1 and s >= q):
        raise ValueError(f"need q > 1 and s >= q, got q={q}, s={s}")
    exponent = (q - 1.0) / s if s < 2.0 * q - 2.0 else q / (s + 2.0)
    return C1 * (math.log(num_experts) / n) ** exponent


def bernstein_margin_lambda(c: float) -> float:
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    return 1.0 / (2.0 * c)
