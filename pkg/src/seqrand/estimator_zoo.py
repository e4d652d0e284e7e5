"""Named estimator configurations with default learning rates."""
import functools
from typing import Any, Optional

from seqrand import config as config_lib
from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import bounds
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.utils import registry

ESTIMATORS = registry.Registry("estimator")

OVERRIDE_KEYS = ("lambda", "variance_fn", "output_mode", "prior", "y_grid_size", "substitution_tol")


@functools.lru_cache()
def list_estimators():
    return ESTIMATORS.names()


def loss_span(loss: losses.LossSpec) -> Optional[float]:
    """sup - inf of the loss over outputs and predictions; None if unbounded."""
    if loss.kind == "entropy":
        return None
    if loss.kind == "zero_one":
        return 1.0
    lo, hi = loss.prediction_range
    reach = max(loss.y_hi - lo, hi - loss.y_lo)
    return reach**loss.q


def _mixable_lambda(loss: losses.LossSpec, name: str) -> float:
    eta_max = losses.mixability_eta_max(loss)
    if eta_max is None:
        raise config_lib.ConfigError("lambda", f"{name} on {loss.name} needs an explicit learning rate")
    return eta_max


def default_variance_fn(loss: losses.LossSpec) -> variance.VarianceFn:
    if losses.mixability_eta_max(loss) is not None:
        return variance.zero("dirac_mixture")
    if loss.kind == "absolute":
        return variance.bernstein()
    return variance.hoeffding(loss_span(loss))


def default_lambda(loss: losses.LossSpec, vf: variance.VarianceFn, num_experts: int, n: int) -> float:
    """The learning rate each variance function's excess-risk bound is stated at."""
    if vf.kind == "zero":
        return _mixable_lambda(loss, "zero variance function")
    if vf.kind == "hoeffding_const":
        return bounds.hoeffding_lambda(num_experts, vf.span, n)
    if vf.kind == "bernstein":
        if loss.kind != "absolute":
            raise config_lib.ConfigError("lambda", f"bernstein on {loss.name} needs an explicit learning rate")
        b = loss.b if loss.b is not None else loss.B
        return bounds.absolute_lambda(num_experts, b, n)
    raise config_lib.ConfigError("lambda", "heavy_tail variance function needs an explicit learning rate")


def _prior(value, num_experts: int) -> gibbs.LogWeights:
    if value is None:
        return gibbs.LogWeights.uniform(num_experts)
    if len(value) != num_experts:
        raise config_lib.ConfigError("prior", f"{len(value)} weights for {num_experts} experts")
    return config_lib.wrap_errors("prior", gibbs.LogWeights.from_probs, value)


def _make(estimator, loss, num_experts, n, vf, overrides) -> seqrand_lib.EstimatorConfig:
    lam = overrides.get("lambda")
    if lam is None:
        lam = config_lib.wrap_errors("lambda", default_lambda, loss, vf, num_experts, n)
    else:
        lam = config_lib.parse_lambdas(lam)[0]
    return config_lib.wrap_errors(
        estimator,
        seqrand_lib.EstimatorConfig,
        loss=loss,
        lam=lam,
        prior=_prior(overrides.get("prior"), num_experts),
        variance_fn=vf,
        output_mode=overrides.get("output_mode", "uniform_draw"),
        estimator=estimator,
        y_grid_size=overrides.get("y_grid_size", 201),
        substitution_tol=overrides.get("substitution_tol", 1e-9),
    )


def _variance_override(loss, overrides):
    if "variance_fn" in overrides:
        return config_lib.parse_variance_fn(overrides["variance_fn"])
    return default_variance_fn(loss)


@ESTIMATORS.add("seqrand")
def _seqrand(loss, num_experts, n, overrides):
    config = _make("seqrand", loss, num_experts, n, _variance_override(loss, overrides), overrides)
    config_lib.wrap_errors("variance_fn", variance.check_admissible, config.variance_fn, loss, config.lam)
    return config


@ESTIMATORS.add("online_seqrand")
def _online_seqrand(loss, num_experts, n, overrides):
    """Online SeqRand; its batch view is the uniform draw over prefixes."""
    if overrides.get("output_mode", "uniform_draw") != "uniform_draw":
        raise config_lib.ConfigError("output_mode", "online_seqrand predicts with the uniform draw")
    return _seqrand(loss, num_experts, n, overrides)


@ESTIMATORS.add("progressive_mixture")
def _progressive_mixture(loss, num_experts, n, overrides):
    """Predicts with the average of its n+1 Gibbs mixtures."""
    if overrides.get("output_mode", "cesaro_mean") != "cesaro_mean":
        raise config_lib.ConfigError("output_mode", "progressive_mixture predicts with the cesaro mean")
    overrides = dict(overrides, output_mode="cesaro_mean")
    if "lambda" not in overrides:
        overrides = dict(overrides, **{"lambda": _mixable_lambda(loss, "progressive_mixture")})
    return _make("progressive_mixture", loss, num_experts, n, variance.zero("dirac_mixture"), overrides)


@ESTIMATORS.add("gibbs_erm")
def _gibbs_erm(loss, num_experts, n, overrides):
    if "lambda" not in overrides:
        span = loss_span(loss)
        if losses.mixability_eta_max(loss) is not None:
            lam = _mixable_lambda(loss, "gibbs_erm")
        elif span is not None and num_experts > 1:
            lam = bounds.hoeffding_lambda(num_experts, span, n)
        else:
            raise config_lib.ConfigError("lambda", f"gibbs_erm on {loss.name} needs an explicit learning rate")
        overrides = dict(overrides, **{"lambda": lam})
    return _make("gibbs_erm", loss, num_experts, n, variance.zero("dirac_mixture"), overrides)


def build_estimator_config(
    name: str, loss: losses.LossSpec, num_experts: int, n: int, **overrides: Any
) -> seqrand_lib.EstimatorConfig:
    """Config of a named estimator; `overrides` use the JSON key names."""
    if name not in ESTIMATORS:
        raise config_lib.ConfigError("estimator", f"unknown estimator {name!r}, expected one of {list_estimators()}")
    config_lib.check_keys(overrides, OVERRIDE_KEYS, "estimator_params")
    return ESTIMATORS.get(name)(loss, num_experts, n, overrides)

