"""Command-line driver: `seqrand COMMAND --config PATH [--seed S] [--out PATH] [--format csv|json]`.

Commands:
  mixability      closed-form and numeric mixability thresholds per loss
  variance_check  worst variance-inequality value over configured samples
  run             Monte-Carlo bound comparison over hypercube vertices
  lower_bound     minimax lower-bound rows for named presets

Exit codes: 0 success, 1 a bound or inequality check failed or an estimator
broke down at runtime, 2 bad configuration.
"""
import dataclasses
import sys
from typing import Any, Dict, List, Optional, Sequence

from absl import app
from absl import flags
from absl import logging
import numpy as np

from seqrand import config as config_lib
from seqrand import estimator_zoo
from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import bounds
from seqrand.aggregators import substitution
from seqrand.harness import reports
from seqrand.minimax import presets
from seqrand.utils import registry

_CONFIG = flags.DEFINE_string("config", None, "Path to the JSON experiment config")
_SEED = flags.DEFINE_integer("seed", None, "Master seed of stochastic commands")
_OUT = flags.DEFINE_string("out", None, "Output file; the report goes to stdout if unset")
_FORMAT = flags.DEFINE_enum("format", "csv", ["csv", "json"], "Output format")

COMMANDS = registry.Registry("command")

MIXABILITY_COLUMNS = ("loss", "eta_max", "eta_numeric")
VARIANCE_COLUMNS = ("lambda", "rho", "max_value", "witness_cell", "witness_y", "passed")
LOWER_BOUND_COLUMNS = presets.REPORT_COLUMNS + ("preset", "preset_bound")


@dataclasses.dataclass
class CommandResult:
    rows: List[Dict[str, Any]]
    columns: Sequence[str]
    status: int
    summary: str


@COMMANDS.add("mixability")
def cmd_mixability(cfg, seed) -> CommandResult:
    items = cfg["losses"]
    if not isinstance(items, list) or not items:
        raise config_lib.ConfigError("losses", "expected a non-empty list of losses")
    grid_size = cfg.get("grid_size", 2001)
    rows = []
    for i, obj in enumerate(items):
        loss = config_lib.parse_loss(obj, f"losses[{i}]")
        eta_max = losses.mixability_eta_max(loss)
        numeric = None
        if loss.kind == "lq":
            numeric = config_lib.wrap_errors("grid_size", losses.numeric_eta_infimum, loss, loss.B, grid_size)
        rows.append(
            {
                "loss": loss.name,
                "eta_max": "none" if eta_max is None else eta_max,
                "eta_numeric": "n/a" if numeric is None else numeric,
            }
        )
    return CommandResult(rows, MIXABILITY_COLUMNS, 0, f"mixability: {len(rows)} losses")


@COMMANDS.add("variance_check")
def cmd_variance_check(cfg, seed) -> CommandResult:
    loss = config_lib.parse_loss(cfg["loss"])
    vf = config_lib.parse_variance_fn(cfg["variance_fn"])
    experts = config_lib.parse_experts(cfg["experts"])
    samples = config_lib.parse_samples(cfg["samples"], experts)
    lambdas = config_lib.parse_lambdas(cfg["lambda"])
    rhos = config_lib.parse_rhos(cfg.get("rho"), experts.num_experts)
    tol = float(cfg.get("tolerance", 1e-9))
    grid = cfg.get("y_grid_size", 201)
    cells = np.asarray(samples.cells)
    ys = np.asarray(samples.ys)
    rows = []
    for lam in lambdas:
        for r, rho in enumerate(rhos):
            values = config_lib.wrap_errors(
                "variance_check",
                variance.variance_inequality_values,
                loss,
                lam,
                vf,
                experts,
                rho,
                samples,
                y_grid_size=grid,
            )
            worst = int(np.argmax(values))
            rows.append(
                {
                    "lambda": lam,
                    "rho": r,
                    "max_value": float(values[worst]),
                    "witness_cell": experts.cells[int(cells[worst])],
                    "witness_y": float(ys[worst]),
                    "passed": bool(values[worst] <= tol),
                }
            )
    failed = [row for row in rows if not row["passed"]]
    for row in failed:
        logging.warning(
            "variance inequality violated at lambda=%g: %.3g at cell %s, y=%g",
            row["lambda"],
            row["max_value"],
            row["witness_cell"],
            row["witness_y"],
        )
    summary = f"variance_check: {len(rows) - len(failed)}/{len(rows)} passed"
    return CommandResult(rows, VARIANCE_COLUMNS, 1 if failed else 0, summary)


def _report_entry(obj, i: int) -> reports.ReportEntry:
    key = f"entries[{i}]"
    if not isinstance(obj, dict):
        raise config_lib.ConfigError(key, "expected an object")
    config_lib.check_keys(
        obj,
        (
            "setting",
            "hypercube",
            "preset",
            "experts",
            "pattern_experts",
            "estimator",
            "estimator_params",
            "n",
            "trials",
            "upper_setting",
            "upper_params",
        ),
        key,
    )
    for required in ("estimator", "n", "trials"):
        if required not in obj:
            raise config_lib.ConfigError(f"{key}.{required}", "required")
    hc = config_lib.parse_hypercube(obj, key)
    experts = config_lib.entry_experts(obj, hc, key)
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise config_lib.ConfigError(f"{key}.n", f"expected a nonnegative integer, got {n!r}")
    trials = config_lib.parse_positive_int(obj["trials"], f"{key}.trials")
    if trials < 2:
        raise config_lib.ConfigError(f"{key}.trials", "at least two trials are needed")
    estimator = estimator_zoo.build_estimator_config(
        obj["estimator"], hc.loss, experts.num_experts, n, **obj.get("estimator_params", {})
    )
    upper_setting = obj.get("upper_setting")
    if upper_setting is not None and upper_setting not in bounds.UPPER_BOUNDS:
        raise config_lib.ConfigError(f"{key}.upper_setting", f"unknown upper bound {upper_setting!r}")
    setting = obj.get("setting") or (obj["preset"]["name"] if "preset" in obj else "hypercube")
    return reports.ReportEntry(
        setting=setting,
        hc=hc,
        experts=experts,
        config=estimator,
        n=n,
        trials=trials,
        upper_setting=upper_setting,
        upper_params=dict(obj.get("upper_params", {})),
    )


@COMMANDS.add("run")
def cmd_run(cfg, seed) -> CommandResult:
    items = cfg["entries"]
    if not isinstance(items, list) or not items:
        raise config_lib.ConfigError("entries", "expected a non-empty list")
    entries = [_report_entry(obj, i) for i, obj in enumerate(items)]
    rows = reports.bound_report(entries, seed)
    failed = sum(not row["sandwich_ok"] for row in rows)
    summary = f"run: {len(rows) - failed}/{len(rows)} sandwiches hold"
    return CommandResult(rows, reports.BOUND_COLUMNS, 1 if failed else 0, summary)


@COMMANDS.add("lower_bound")
def cmd_lower_bound(cfg, seed) -> CommandResult:
    items = cfg["presets"]
    if not isinstance(items, list) or not items:
        raise config_lib.ConfigError("presets", "expected a non-empty list")
    rows = []
    for i, obj in enumerate(items):
        key = f"presets[{i}]"
        if not isinstance(obj, dict) or "name" not in obj:
            raise config_lib.ConfigError(key, "expected an object with a name")
        if obj["name"] not in presets.PRESETS:
            raise config_lib.ConfigError(f"{key}.name", f"unknown preset {obj['name']!r}")
        params = dict(obj.get("params", {}))
        preset = config_lib.wrap_errors(key, presets.preset_hypercube, obj["name"], **params)
        n = preset.params.get("n", params.get("n"))
        for hc in preset.hypercubes:
            row = presets.report_row(obj.get("setting", preset.name), hc, n)
            row.update(preset=preset.name, preset_bound=preset.bound)
            rows.append(row)
    return CommandResult(rows, LOWER_BOUND_COLUMNS, 0, f"lower_bound: {len(rows)} rows")


def execute(command: str, config_path: Optional[str], seed: Optional[int]) -> CommandResult:
    if config_path is None:
        raise config_lib.ConfigError("config", "--config is required")
    cfg = config_lib.load_config(config_path)
    config_lib.validate_command(command, cfg, seed)
    return COMMANDS.get(command)(cfg, seed)


def main(argv):
    if len(argv) != 2:
        logging.error("expected exactly one command, one of %s", COMMANDS.names())
        return 2
    seed = _SEED.value
    try:
        result = execute(argv[1], _CONFIG.value, seed)
    except (gibbs.DegeneratePosteriorError, substitution.SubstitutionError) as e:
        logging.error("%s", e)
        return 1
    except ValueError as e:
        logging.error("%s", e)
        return 2
    header_seed = seed if seed is not None else 0
    if _FORMAT.value == "csv":
        text = reports.format_csv(result.rows, result.columns, header_seed)
    else:
        text = reports.format_json(result.rows, header_seed)
    if _OUT.value is None:
        sys.stdout.write(text)
    else:
        with open(_OUT.value, "w", newline="") as f:
            f.write(text)
    logging.info("%s", result.summary)
    logging.info("%s exited with status %d", argv[1], result.status)
    return result.status


def run():
    app.run(main)


if __name__ == "__main__":
    run()
