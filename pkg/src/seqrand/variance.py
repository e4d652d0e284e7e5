"""Variance functions delta_lambda and the variance-inequality verifier."""
import dataclasses
import functools
from typing import Any, Dict, Optional

import jax
import jax.numpy as jnp
from jax.scipy import special
import numpy as np

from seqrand import gibbs
from seqrand import losses

KINDS = ("zero", "bernstein", "hoeffding_const", "heavy_tail")
PI_HAT_MODES = ("identity", "dirac_mixture", "substitution")
# pi_hat of configurations that leave it out.
DEFAULT_PI_HAT = {"zero": "dirac_mixture", "heavy_tail": "dirac_mixture"}


@dataclasses.dataclass(frozen=True)
class VarianceFn:
    """A variance function paired with the map pi_hat applied to posteriors."""

    kind: str
    pi_hat: str = "identity"
    span: Optional[float] = None
    b: Optional[float] = None
    B: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown variance function {self.kind!r}, expected one of {KINDS}")
        if self.pi_hat not in PI_HAT_MODES:
            raise ValueError(f"Unknown pi_hat mode {self.pi_hat!r}, expected one of {PI_HAT_MODES}")
        if self.kind == "hoeffding_const" and not (self.span is not None and self.span > 0):
            raise ValueError(f"hoeffding_const requires span > 0, got {self.span}")
        if self.kind == "heavy_tail":
            if self.b is None or self.B is None or not 0 < self.b <= self.B:
                raise ValueError(f"heavy_tail requires 0 < b <= B, got b={self.b}, B={self.B}")

    @property
    def depends_on_expert(self) -> bool:
        return self.kind == "bernstein"

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "span": self.span,
            "b": self.b,
            "B": self.B,
            "pi_hat": self.pi_hat,
        }

    @classmethod
    def from_json(cls, obj) -> "VarianceFn":
        obj = dict(obj)
        return cls(
            kind=obj.get("kind"),
            pi_hat=obj.get("pi_hat", DEFAULT_PI_HAT.get(obj.get("kind"), "identity")),
            span=obj.get("span"),
            b=obj.get("b"),
            B=obj.get("B"),
        )


def zero(pi_hat: str = "dirac_mixture") -> VarianceFn:
    return VarianceFn("zero", pi_hat=pi_hat)


def bernstein() -> VarianceFn:
    return VarianceFn("bernstein", pi_hat="identity")


def hoeffding(span: float, pi_hat: str = "identity") -> VarianceFn:
    return VarianceFn("hoeffding_const", pi_hat=pi_hat, span=span)


def heavy_tail(b: float, B: float, pi_hat: str = "dirac_mixture") -> VarianceFn:
    return VarianceFn("heavy_tail", pi_hat=pi_hat, b=b, B=B)


def heavy_tail_threshold(q: float, b: float, lam: float) -> float:
    """Truncation level ((q-1)/(q lam))^(1/q) - b used with the heavy-tail delta."""
    return ((q - 1.0) / (q * lam)) ** (1.0 / q) - b


def heavy_tail_lambda_max(q: float, b: float, B: float) -> float:
    """Largest lambda for which the heavy-tail delta satisfies the inequality."""
    return (q - 1.0) / (q * (B + b) ** q)


def check_admissible(vf: VarianceFn, loss: losses.LossSpec, lam: float) -> None:
    """Raises ValueError if (vf, loss, lam) is not a certified configuration."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if vf.kind == "zero":
        if vf.pi_hat == "identity":
            raise ValueError("zero variance function requires pi_hat dirac_mixture or substitution")
        eta_max = losses.mixability_eta_max(loss)
        if eta_max is None:
            raise ValueError(f"zero variance function needs a mixable loss, got {loss.kind}")
        if lam > eta_max * (1 + 1e-12):
            raise ValueError(f"lambda={lam} exceeds the mixability threshold {eta_max} of {loss.name}")
    elif vf.kind == "heavy_tail":
        if loss.kind not in ("square", "lq"):
            raise ValueError(f"heavy_tail variance function needs an lq loss, got {loss.kind}")
        if vf.pi_hat != "dirac_mixture":
            raise ValueError("heavy_tail variance function requires pi_hat dirac_mixture")
        lam_max = heavy_tail_lambda_max(loss.q, vf.b, vf.B)
        if lam > lam_max * (1 + 1e-12):
            raise ValueError(f"lambda={lam} exceeds the heavy-tail threshold {lam_max}")


def _loss_difference(loss_g, loss_gprime):
    both_infinite = jnp.isinf(loss_g) & jnp.isinf(loss_gprime)
    return jnp.where(both_infinite, 0.0, loss_g - loss_gprime)


def delta_fn(vf: VarianceFn, lam, loss: losses.LossSpec, y, loss_g, loss_gprime):
    """Traceable delta_lambda(z, g, g'); broadcasts over expert axes."""
    loss_g = jnp.asarray(loss_g)
    shape = jnp.broadcast_shapes(jnp.shape(loss_g), jnp.shape(loss_gprime))
    if vf.kind == "zero":
        return jnp.zeros(shape)
    if vf.kind == "bernstein":
        return lam * _loss_difference(loss_g, loss_gprime) ** 2 / 2.0
    if vf.kind == "hoeffding_const":
        return jnp.full(shape, lam * vf.span**2 / 8.0)
    span = losses.loss_span_delta_fn(loss, y, vf.b)
    small = lam * span < 1.0
    value = jnp.where(small, lam * span**2 / 2.0, span - 1.0 / (2.0 * lam))
    return jnp.broadcast_to(jnp.where(jnp.abs(y) > vf.B, value, 0.0), shape)


def delta(vf: VarianceFn, lam: float, loss: losses.LossSpec, y: float, loss_g: float, loss_gprime: float) -> float:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return float(delta_fn(vf, lam, loss, y, loss_g, loss_gprime))


def _inequality_at(loss, vf, lam, logw, column, y, gprime_pred):
    """LHS of the variance inequality at one outcome z = (x, y).

    `column` holds the expert predictions at x; `gprime_pred` is the pi_hat
    prediction at x (ignored for identity).
    """
    loss_g = loss.pointwise(y, column)
    charged = logw > -jnp.inf

    def log_mean(loss_gprime):
        exponent = lam * (loss_gprime - loss_g - delta_fn(vf, lam, loss, y, loss_g, loss_gprime))
        exponent = jnp.where(jnp.isinf(loss_g), -jnp.inf, exponent)
        return special.logsumexp(jnp.where(charged, logw + exponent, -jnp.inf))

    if vf.pi_hat == "identity":
        inner = jax.vmap(log_mean)(loss_g)
        return jnp.sum(jnp.where(charged, jnp.exp(logw) * inner, 0.0))
    value = log_mean(loss.pointwise(y, gprime_pred))
    return jnp.where(jnp.isnan(gprime_pred), jnp.inf, value)


@functools.partial(jax.jit, static_argnames=("loss", "vf"))
def _inequality_values(loss, vf, lam, logw, predictions, cells, ys, candidates, worst_case, tol):
    # Imported here: aggregators depends on this module.
    from seqrand.aggregators import substitution

    if vf.pi_hat == "dirac_mixture":
        gprime = gibbs.mixture_predictions(logw, predictions)
    elif vf.pi_hat == "substitution":
        gprime = substitution.substitute_all_cells(loss, logw, predictions, lam, candidates, worst_case, tol)
    else:
        gprime = jnp.zeros(predictions.shape[1])

    def one(cell, y):
        return _inequality_at(loss, vf, lam, logw, predictions[:, cell], y, gprime[cell])

    return jax.vmap(one)(cells, ys)


def variance_inequality_values(
    loss: losses.LossSpec,
    lam: float,
    vf: VarianceFn,
    experts: gibbs.ExpertTable,
    rho: gibbs.LogWeights,
    z_samples,
    y_grid_size: int = 201,
    tol: float = 1e-9,
) -> np.ndarray:
    """Per-sample left-hand sides of the variance inequality."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if rho.size != experts.num_experts:
        raise ValueError(f"{rho.size} weights for {experts.num_experts} experts")
    gibbs.check_normalized(rho, tol=1e-9)
    if not isinstance(z_samples, gibbs.Outcomes):
        z_samples = experts.outcomes(z_samples)
    if z_samples.ys.shape[0] == 0:
        raise ValueError("z_samples is empty")
    if vf.pi_hat == "dirac_mixture":
        mixture = np.asarray(gibbs.mixture_predictions(rho.logw, jnp.asarray(experts.predictions)))
        lo, hi = loss.prediction_range
        if mixture.min() < lo - 1e-12 or mixture.max() > hi + 1e-12:
            raise ValueError("mixture prediction outside prediction range")
    candidates = jnp.linspace(*loss.prediction_range, y_grid_size)
    worst_case = jnp.linspace(loss.y_lo, loss.y_hi, y_grid_size)
    values = _inequality_values(
        loss,
        vf,
        lam,
        rho.logw,
        jnp.asarray(experts.predictions),
        z_samples.cells,
        z_samples.ys,
        candidates,
        worst_case,
        tol,
    )
    return np.asarray(values)


def verify_variance_inequality(
    loss: losses.LossSpec,
    lam: float,
    vf: VarianceFn,
    experts: gibbs.ExpertTable,
    rho: gibbs.LogWeights,
    z_samples,
    **kwargs,
) -> float:
    """Maximum over z_samples of E_{g' ~ pi_hat(rho)} log E_{g ~ rho} e^{lam [...]}.

    Values <= 0 certify the variance inequality at rho for every sample.
    """
    return float(np.max(variance_inequality_values(loss, lam, vf, experts, rho, z_samples, **kwargs)))
