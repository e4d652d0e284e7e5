"""Loss families, mixability constants and constant-prediction risks."""
import dataclasses
import math
from typing import Any, Dict, Optional

from absl import logging
import jax.numpy as jnp
from jax.scipy import special
import numpy as np

KINDS = ("square", "lq", "absolute", "entropy", "zero_one")


@dataclasses.dataclass(frozen=True)
class LossSpec:
    """A scalar loss together with its output and prediction ranges.

    `q` is the exponent of |y - y'|: 2 for `square`, 1 for `absolute`, user
    supplied (> 1) for `lq`. `b` bounds predictions to [-b, b]; `None` means
    predictions share the output range.
    """

    kind: str
    q: Optional[float] = None
    y_lo: float = -1.0
    y_hi: float = 1.0
    b: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown loss kind {self.kind!r}, expected one of {KINDS}")
        if self.kind == "lq":
            if self.q is None or not self.q > 1:
                raise ValueError(f"lq loss requires q > 1, got {self.q}")
        elif self.kind == "square":
            object.__setattr__(self, "q", 2.0)
        elif self.kind == "absolute":
            object.__setattr__(self, "q", 1.0)
        if not self.y_lo < self.y_hi:
            raise ValueError(f"Empty output range [{self.y_lo}, {self.y_hi}]")
        if self.kind in ("entropy", "zero_one"):
            if self.y_lo < 0.0 or self.y_hi > 1.0:
                raise ValueError(
                    f"{self.kind} loss requires outputs in [0, 1], "
                    f"got [{self.y_lo}, {self.y_hi}]"
                )
            if self.b is not None:
                raise ValueError(f"{self.kind} loss predicts in the output range")
        if self.b is not None and not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")

    @property
    def B(self) -> float:
        """Half-width of the output range."""
        return 0.5 * (self.y_hi - self.y_lo)

    @property
    def width(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def prediction_range(self):
        if self.b is None:
            return self.y_lo, self.y_hi
        return -self.b, self.b

    @property
    def name(self) -> str:
        if self.kind == "lq":
            return f"lq{self.q:g}"
        return self.kind

    def pointwise(self, y, y_pred):
        """Traceable elementwise loss; broadcasting over `y` and `y_pred`."""
        y = jnp.asarray(y)
        y_pred = jnp.asarray(y_pred)
        if self.kind == "absolute":
            return jnp.abs(y - y_pred)
        if self.kind in ("square", "lq"):
            return jnp.abs(y - y_pred) ** self.q
        if self.kind == "zero_one":
            return (y != y_pred).astype(jnp.result_type(float))
        # Bernoulli Kullback-Leibler divergence with 0 log 0 = 0.
        value = (
            special.xlogy(y, y)
            - special.xlogy(y, y_pred)
            + special.xlogy(1.0 - y, 1.0 - y)
            - special.xlogy(1.0 - y, 1.0 - y_pred)
        )
        return jnp.maximum(value, 0.0)

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "q": self.q,
            "y_lo": self.y_lo,
            "y_hi": self.y_hi,
            "b": self.b,
        }

    @classmethod
    def from_json(cls, obj) -> "LossSpec":
        obj = dict(obj)
        kind = obj.get("kind")
        defaults = _DEFAULT_RANGES.get(kind, (-1.0, 1.0))
        return cls(
            kind=kind,
            q=obj.get("q") if kind == "lq" else None,
            y_lo=float(obj.get("y_lo", defaults[0])),
            y_hi=float(obj.get("y_hi", defaults[1])),
            b=None if obj.get("b") is None else float(obj["b"]),
        )


_DEFAULT_RANGES = {"entropy": (0.0, 1.0), "zero_one": (0.0, 1.0)}


def square(B: float = 1.0, b: Optional[float] = None) -> LossSpec:
    return LossSpec("square", y_lo=-B, y_hi=B, b=b)


def lq(q: float, B: float = 1.0, b: Optional[float] = None) -> LossSpec:
    return LossSpec("lq", q=q, y_lo=-B, y_hi=B, b=b)


def absolute(B: float = 1.0, b: Optional[float] = None) -> LossSpec:
    return LossSpec("absolute", y_lo=-B, y_hi=B, b=b)


def entropy() -> LossSpec:
    return LossSpec("entropy", y_lo=0.0, y_hi=1.0)


def zero_one() -> LossSpec:
    return LossSpec("zero_one", y_lo=0.0, y_hi=1.0)


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    return arr


def eval_loss(loss: LossSpec, y_true, y_pred) -> float:
    """Evaluates loss(y_true, y_pred); entropy mismatches at {0, 1} give +inf."""
    y_true = _check_finite("y_true", y_true)
    y_pred = _check_finite("y_pred", y_pred)
    lo, hi = loss.prediction_range
    if np.any(y_pred < lo - 1e-12) or np.any(y_pred > hi + 1e-12):
        raise ValueError(f"Prediction {y_pred} outside prediction range [{lo}, {hi}]")
    return float(loss.pointwise(y_true, y_pred))


def mixability_eta_max(loss: LossSpec) -> Optional[float]:
    """Largest learning rate whose mixability constant equals one."""
    if loss.kind == "square":
        return 1.0 / (2.0 * loss.B**2)
    if loss.kind == "entropy":
        return 1.0
    if loss.kind == "lq":
        q = loss.q
        return (q - 1.0) / (q * loss.B**q) * min(1.0, 2.0 ** (2.0 - q))
    return None


def mixability_constant(loss: LossSpec, eta: float) -> Optional[float]:
    """The constant c(eta) of the generic aggregating algorithm.

    Returns `None` when only a sufficient condition for c = 1 is known
    (lq losses above their threshold).
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if loss.kind == "absolute":
        scaled = eta * loss.width
        return scaled / (2.0 * math.log(2.0 / (1.0 + math.exp(-scaled))))
    if loss.kind == "zero_one":
        return None
    eta_max = mixability_eta_max(loss)
    if eta <= eta_max:
        return 1.0
    if loss.kind == "lq":
        return None
    return math.inf


def numeric_eta_infimum(loss: LossSpec, B: float, grid_size: int) -> float:
    """Grid infimum of the reduced one-dimensional mixability expression.

    Minimizes (q-1)/(q (2B)^q) / (t (1-t) [t^(q-1) + (1-t)^(q-1)]) over the
    interior grid t = i / grid_size, i = 1..grid_size-1.
    """
    if loss.kind not in ("lq", "square"):
        raise ValueError(f"numeric_eta_infimum needs an lq loss, got {loss.kind}")
    if grid_size < 2:
        raise ValueError(f"grid_size must be at least 2, got {grid_size}")
    if grid_size < 100:
        logging.warning("numeric_eta_infimum: coarse grid of size %d", grid_size)
    q = loss.q
    t = jnp.arange(1, grid_size) / grid_size
    denom = t * (1.0 - t) * (t ** (q - 1.0) + (1.0 - t) ** (q - 1.0))
    scale = (q - 1.0) / (q * (2.0 * B) ** q)
    return float(scale * jnp.min(1.0 / denom))


def _check_probability(p):
    arr = _check_finite("p", p)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"p must be in [0, 1], got {p}")
    return arr


def _check_outputs(loss, h1, h2):
    if h1 == h2:
        raise ValueError(f"h1 and h2 must differ, got {h1}")
    if loss.kind == "entropy" and not (0 <= h1 <= 1 and 0 <= h2 <= 1):
        raise ValueError(f"entropy outputs must lie in [0, 1], got ({h1}, {h2})")


def _bernoulli_entropy(y):
    return special.entr(y) + special.entr(1.0 - y)


def phi_fn(loss: LossSpec, p, h1, h2):
    """Traceable optimal constant-prediction risk; no validation."""
    if loss.kind in ("square", "lq"):
        r = 1.0 / (loss.q - 1.0)
        d = p**r + (1.0 - p) ** r
        return p * (1.0 - p) * jnp.abs(h2 - h1) ** loss.q / d ** (loss.q - 1.0)
    if loss.kind == "absolute":
        return jnp.minimum(p, 1.0 - p) * jnp.abs(h2 - h1)
    if loss.kind == "zero_one":
        return jnp.minimum(p, 1.0 - p)
    return (
        _bernoulli_entropy(p * h1 + (1.0 - p) * h2)
        - p * _bernoulli_entropy(h1)
        - (1.0 - p) * _bernoulli_entropy(h2)
    )


def phi(loss: LossSpec, p, h1: float, h2: float):
    """Risk of the best constant prediction when Y = h1 w.p. p, else h2."""
    arr = _check_probability(p)
    _check_outputs(loss, h1, h2)
    out = phi_fn(loss, jnp.asarray(arr), h1, h2)
    return float(out) if out.ndim == 0 else np.asarray(out)


def phi_p(loss: LossSpec, p, h1, h2, y):
    """Risk of predicting the constant `y`."""
    return p * loss.pointwise(h1, y) + (1.0 - p) * loss.pointwise(h2, y)


def phi_second_derivative(loss: LossSpec, p, h1: float, h2: float):
    if loss.kind not in ("square", "lq"):
        raise ValueError(f"closed-form second derivative needs an lq loss, got {loss.kind}")
    arr = _check_probability(p)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError(f"p must be in (0, 1), got {p}")
    _check_outputs(loss, h1, h2)
    out = phi_second_derivative_fn(loss, jnp.asarray(arr), h1, h2)
    return float(out) if out.ndim == 0 else np.asarray(out)


def phi_second_derivative_fn(loss: LossSpec, p, h1, h2):
    q = loss.q
    r = 1.0 / (q - 1.0)
    d = p**r + (1.0 - p) ** r
    return (
        -(q / (q - 1.0))
        * (p * (1.0 - p)) ** ((2.0 - q) / (q - 1.0))
        * jnp.abs(h2 - h1) ** q
        / d ** (q + 1.0)
    )


def best_constant(loss: LossSpec, p, h1: float, h2: float):
    """Minimizer of `phi_p`; zero-one and absolute ties go to h1."""
    arr = _check_probability(p)
    _check_outputs(loss, h1, h2)
    out = best_constant_fn(loss, jnp.asarray(arr), h1, h2)
    return float(out) if out.ndim == 0 else np.asarray(out)


def best_constant_fn(loss: LossSpec, p, h1, h2):
    if loss.kind in ("square", "lq"):
        r = 1.0 / (loss.q - 1.0)
        a, c = p**r, (1.0 - p) ** r
        return (a * h1 + c * h2) / (a + c)
    if loss.kind in ("absolute", "zero_one"):
        return jnp.where(p >= 0.5, h1, h2) * jnp.ones_like(p)
    return p * h1 + (1.0 - p) * h2


def loss_span_delta_fn(loss: LossSpec, y, b):
    """sup over |a|, |c| <= b of loss(y, a) - loss(y, c)."""
    dist = jnp.abs(y)
    return (dist + b) ** loss.q - jnp.maximum(dist - b, 0.0) ** loss.q


def loss_span_delta(loss: LossSpec, y, b: float):
    if loss.kind not in ("square", "lq", "absolute"):
        raise ValueError(f"loss_span_delta needs an lq-type loss, got {loss.kind}")
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    y = _check_finite("y", y)
    out = loss_span_delta_fn(loss, jnp.asarray(y), b)
    return float(out) if out.ndim == 0 else np.asarray(out)
