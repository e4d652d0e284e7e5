"""JSON experiment configurations and their schema checks.

Every command reads one JSON object. Validation runs before any computation
and reports the offending key through `ConfigError`.
"""
import json
import math
from typing import Any, Dict, List, Mapping, Sequence

from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.minimax import hypercube
from seqrand.minimax import presets


class ConfigError(ValueError):
    """An experiment configuration violates the schema."""

    def __init__(self, key: str, detail: str):
        self.key = key
        super().__init__(f"config key {key!r}: {detail}")


REQUIRED_KEYS = {
    "mixability": ("losses",),
    "variance_check": ("loss", "lambda", "variance_fn", "experts", "samples"),
    "run": ("entries",),
    "lower_bound": ("presets",),
}

STOCHASTIC_COMMANDS = ("run",)


def load_config(path: str) -> Dict[str, Any]:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError:
        raise ConfigError("config", f"no such file {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"invalid JSON in {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return cfg


def validate_command(command: str, cfg: Mapping[str, Any], seed) -> None:
    if command not in REQUIRED_KEYS:
        raise ConfigError("command", f"unknown command {command!r}, expected one of {sorted(REQUIRED_KEYS)}")
    for key in REQUIRED_KEYS[command]:
        if key not in cfg:
            raise ConfigError(key, f"required by {command}")
    if command in STOCHASTIC_COMMANDS and seed is None:
        raise ConfigError("seed", f"{command} is stochastic and needs --seed")


def wrap_errors(key: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(key, str(e)) from None


def parse_loss(obj, key: str = "loss") -> losses.LossSpec:
    if not isinstance(obj, Mapping):
        raise ConfigError(key, "expected a loss object")
    return wrap_errors(key, losses.LossSpec.from_json, obj)


def parse_variance_fn(obj, key: str = "variance_fn") -> variance.VarianceFn:
    if not isinstance(obj, Mapping):
        raise ConfigError(key, "expected a variance function object")
    return wrap_errors(key, variance.VarianceFn.from_json, obj)


def parse_experts(obj, key: str = "experts") -> gibbs.ExpertTable:
    if not isinstance(obj, Mapping):
        raise ConfigError(key, "expected an object with cells and predictions")
    return wrap_errors(key, gibbs.ExpertTable.from_json, obj)


def parse_positive_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(key, f"expected a positive integer, got {value!r}")
    return value


def parse_lambdas(value, key: str = "lambda") -> List[float]:
    values = value if isinstance(value, list) else [value]
    if not values:
        raise ConfigError(key, "empty list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
            raise ConfigError(key, f"expected positive finite learning rates, got {v!r}")
        out.append(float(v))
    return out


def parse_samples(value, experts: gibbs.ExpertTable, key: str = "samples") -> gibbs.Outcomes:
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a non-empty list of [cell, y] pairs")
    if any(not isinstance(pair, (list, tuple)) or len(pair) != 2 for pair in value):
        raise ConfigError(key, "every sample must be a [cell, y] pair")
    return wrap_errors(key, experts.outcomes, [tuple(pair) for pair in value])


def parse_rhos(value, num_experts: int, key: str = "rho") -> List[gibbs.LogWeights]:
    """Posteriors as probability vectors; a single vector or a list of them."""
    if value is None:
        return [gibbs.LogWeights.uniform(num_experts)]
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a probability vector or a list of them")
    vectors = value if isinstance(value[0], list) else [value]
    rhos = []
    for probs in vectors:
        if len(probs) != num_experts:
            raise ConfigError(key, f"{len(probs)} weights for {num_experts} experts")
        rhos.append(wrap_errors(key, gibbs.LogWeights.from_probs, probs))
    return rhos


def parse_hypercube(entry: Mapping[str, Any], key: str) -> hypercube.Hypercube:
    """A hypercube given field by field or through a named preset."""
    if "preset" in entry:
        preset_entry = entry["preset"]
        if not isinstance(preset_entry, Mapping) or "name" not in preset_entry:
            raise ConfigError(f"{key}.preset", "expected an object with a name")
        params = dict(preset_entry.get("params", {}))
        if preset_entry["name"] not in presets.PRESETS:
            raise ConfigError(f"{key}.preset", f"unknown preset {preset_entry['name']!r}")
        preset = wrap_errors(f"{key}.preset", presets.preset_hypercube, preset_entry["name"], **params)
        return preset.hypercube
    if "hypercube" not in entry:
        raise ConfigError(key, "needs a hypercube or a preset")
    if not isinstance(entry["hypercube"], Mapping):
        raise ConfigError(f"{key}.hypercube", "expected an object")
    fields = dict(entry["hypercube"])
    fields["loss"] = parse_loss(fields.get("loss"), f"{key}.hypercube.loss")
    return wrap_errors(f"{key}.hypercube", hypercube.Hypercube, **fields)


def entry_experts(entry: Mapping[str, Any], hc: hypercube.Hypercube, key: str) -> gibbs.ExpertTable:
    if "experts" in entry:
        return parse_experts(entry["experts"], f"{key}.experts")
    d = parse_positive_int(entry.get("pattern_experts", 2**hc.m), f"{key}.pattern_experts")
    return wrap_errors(f"{key}.pattern_experts", hypercube.pattern_expert_set, hc, d)


def check_keys(obj: Mapping[str, Any], allowed: Sequence[str], key: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(key, f"unknown keys {unknown}")
