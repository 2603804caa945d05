"""Command-line front end: load a model file, dispatch one computation, emit a
JSON result document and, for curve commands, a CSV.

All floats are serialized with 17 significant digits and keys are sorted, so
identical configurations produce byte-identical artifacts.  Exit codes:
0 success, 2 validation failure (machine-readable JSON on stderr), 3 numeric
failure with the failing condition named.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import freqrate, homotopy, horizon, model as model_mod, robust, stochastic
from .errors import InvalidParams, QefError

COMMANDS = ("validate", "rate", "rate-curve", "horizon", "montecarlo", "tail",
            "worst-case", "appendix-check")
RATE_METHODS = ("frequency", "homotopy", "small_theta", "classical")


@dataclass
class RunConfig:
    command: str
    model_path: str | None = None
    theta: float | None = None
    theta_grid: list[float] | None = None
    horizon_t: float | None = None
    n_points: int | None = None
    t_sweep: list[float] | None = None
    nodes_per_unit: int = 50
    method: str = "frequency"
    alpha: float | None = None
    epsilon: float | None = None
    theta_max: float | None = None
    omega: float | None = None
    n_trunc: int = 60
    quad_order: int = 40
    n_samples: int = 100_000
    seed: int = 0
    mu_constant: list[float] | None = None
    output_path: str | None = None
    tolerances: dict = dc_field(default_factory=dict)

    def quad_config(self) -> freqrate.QuadConfig:
        tol = self.tolerances
        return freqrate.QuadConfig(
            epsabs=float(tol.get("quad_epsabs", 1e-11)),
            epsrel=float(tol.get("quad_epsrel", 1e-10)),
            tail_tol=float(tol.get("tail_tol", 1e-9)),
        )


_CONFIG_KEYS = {
    "command": str, "model_path": str, "theta": float, "theta_grid": list,
    "T": float, "N": int, "t_sweep": list, "nodes_per_unit": int,
    "method": str, "alpha": float, "epsilon": float, "theta_max": float,
    "omega": float, "n_trunc": int, "quad_order": int, "n_samples": int,
    "seed": int, "mu_constant": list, "output_path": str, "tolerances": dict,
}


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParams(f"config is not valid JSON: {exc}",
                                field="config") from exc
    if not isinstance(doc, dict):
        raise InvalidParams("config must be a JSON object", field="config")
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        raise InvalidParams(f"unknown config fields: {sorted(unknown)}",
                            field="config")
    if "command" not in doc:
        raise InvalidParams("config is missing the command field",
                            field="command")
    cfg = RunConfig(command=doc["command"])
    mapping = {"T": "horizon_t", "N": "n_points"}
    for key, value in doc.items():
        if key == "command":
            continue
        setattr(cfg, mapping.get(key, key), value)
    _validate_config(cfg)
    return cfg


def _require(cfg: RunConfig, name: str, attr: str):
    if getattr(cfg, attr) is None:
        raise InvalidParams(f"command {cfg.command!r} requires field {name}",
                            field=name)


def _validate_config(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise InvalidParams(f"unknown command {cfg.command!r}; expected one of "
                            f"{COMMANDS}", field="command")
    if cfg.command != "appendix-check":
        _require(cfg, "model_path", "model_path")
    if cfg.command in ("rate", "horizon", "montecarlo"):
        _require(cfg, "theta", "theta")
    if cfg.command == "rate" and cfg.method not in RATE_METHODS:
        raise InvalidParams(f"method must be one of {RATE_METHODS}",
                            field="method")
    if cfg.command == "rate-curve":
        _require(cfg, "theta_grid", "theta_grid")
        grid = cfg.theta_grid
        if len(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidParams("theta_grid must be strictly increasing",
                                field="theta_grid")
    if cfg.command == "horizon" and cfg.t_sweep is None:
        _require(cfg, "T", "horizon_t")
        _require(cfg, "N", "n_points")
    if cfg.command == "montecarlo":
        _require(cfg, "T", "horizon_t")
        _require(cfg, "N", "n_points")
    if cfg.command == "tail":
        _require(cfg, "alpha", "alpha")
    if cfg.command == "worst-case":
        _require(cfg, "epsilon", "epsilon")
    if cfg.command == "appendix-check":
        _require(cfg, "omega", "omega")
    if cfg.command in ("rate-curve", "horizon") and cfg.t_sweep is not None:
        pass
    if cfg.command in ("rate-curve",) and cfg.output_path is None:
        raise InvalidParams("curve commands require output_path",
                            field="output_path")
    if cfg.command == "horizon" and cfg.t_sweep is not None \
            and cfg.output_path is None:
        raise InvalidParams("horizon sweeps require output_path",
                            field="output_path")


# -- deterministic serialization ---------------------------------------------

def _render(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 1)}'
                 for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {_render(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            raise ValueError(f"non-finite value {value} in result document")
        return format(value, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def render_document(doc: dict) -> str:
    return _render(doc) + "\n"


_REQUIRED_OUTPUT_FIELDS = {
    "validate": ("valid", "hurwitz", "pr_residual"),
    "rate": ("upsilon", "margin", "method"),
    "rate-curve": ("n_rows", "csv_path", "method"),
    "horizon": ("theta",),
    "montecarlo": ("mc_value", "mc_stderr", "closed_form"),
    "tail": ("alpha", "exponent", "argmax_theta"),
    "worst-case": ("epsilon", "bound", "argmin_theta"),
    "appendix-check": ("max_block_error", "sigma"),
}


def validate_result_document(doc: dict) -> None:
    """Schema check used by tests and by the round-trip invariant."""
    for key in ("command", "inputs", "diagnostics"):
        if key not in doc:
            raise InvalidParams(f"result document is missing {key!r}", field=key)
    command = doc["command"]
    if command not in COMMANDS:
        raise InvalidParams(f"result document has unknown command {command!r}",
                            field="command")
    for key in _REQUIRED_OUTPUT_FIELDS[command]:
        if key not in doc:
            raise InvalidParams(
                f"result document for {command!r} is missing {key!r}", field=key)


def _digest(path: str | None) -> str | None:
    if path is None:
        return None
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(format(float(cell), ".17g"))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# -- command implementations ---------------------------------------------------

def _rate_by_method(ss, theta: float, method: str, quad_cfg) -> freqrate.RateResult:
    if method == "frequency":
        return freqrate.qef_rate(ss, theta, quad_cfg)
    if method == "homotopy":
        return homotopy.rate_via_homotopy(
            ss, theta, homotopy.HomotopyConfig(quad=quad_cfg))
    if method == "small_theta":
        return freqrate.small_theta_rate(ss, theta, quad_cfg)
    return freqrate.classical_rate(ss, theta, quad_cfg)


def _cmd_validate(cfg: RunConfig, ss) -> dict:
    return {
        "valid": True,
        "nu": ss.nu,
        "n": ss.n_out,
        "m": ss.b.shape[1],
        "hurwitz": ss.hurwitz,
        "pr_residual": ss.pr_residual,
        "spectral_abscissa": ss.spectral_abscissa,
    }


def _cmd_rate(cfg: RunConfig, ss) -> dict:
    result = _rate_by_method(ss, cfg.theta, cfg.method, cfg.quad_config())
    return {
        "upsilon": result.value,
        "margin": result.admissibility_margin,
        "method": result.method,
        "theta": result.theta,
        "diagnostics_extra": {
            "lambda_cut": result.lambda_cut,
            "n_nodes": result.n_nodes,
            "est_quadrature_error": result.est_quadrature_error,
        },
    }


def _cmd_rate_curve(cfg: RunConfig, ss) -> dict:
    quad_cfg = cfg.quad_config()
    rows = []
    for theta in cfg.theta_grid:
        result = _rate_by_method(ss, float(theta), cfg.method, quad_cfg)
        rows.append((result.theta, result.value, result.method,
                     result.est_quadrature_error))
    _write_csv(cfg.output_path, ["theta", "upsilon", "method", "est_error"], rows)
    return {"n_rows": len(rows), "csv_path": cfg.output_path,
            "method": cfg.method,
            "theta_min": float(cfg.theta_grid[0]),
            "theta_max": float(cfg.theta_grid[-1])}


def _cmd_horizon(cfg: RunConfig, ss) -> dict:
    theta = float(cfg.theta)
    if cfg.t_sweep is not None:
        rows = horizon.rate_convergence_study(
            ss, theta, cfg.t_sweep, nodes_per_unit=cfg.nodes_per_unit)
        _write_csv(cfg.output_path,
                   ["T", "rate_estimate", "target", "rel_error"], rows)
        return {"theta": theta, "n_rows": len(rows),
                "csv_path": cfg.output_path,
                "target": rows[0][2], "final_rel_error": rows[-1][3]}
    grid = horizon.TimeGrid(horizon=float(cfg.horizon_t),
                            n_points=int(cfg.n_points))
    value = horizon.finite_horizon_log_qef(ss, grid, theta)
    return {"theta": theta, "T": grid.horizon, "N": grid.n_points,
            "log_qef": value, "rate_estimate": value / grid.horizon}


def _cmd_montecarlo(cfg: RunConfig, ss) -> dict:
    theta = float(cfg.theta)
    grid = horizon.TimeGrid(horizon=float(cfg.horizon_t),
                            n_points=int(cfg.n_points))
    mu = None
    if cfg.mu_constant is not None:
        const = np.asarray(cfg.mu_constant, dtype=float)
        mu = np.tile(const, (grid.n_points, 1))
    ops = horizon.build_operators(ss, grid, theta)
    closed = horizon.finite_horizon_log_qef(ss, grid, theta, mu=mu, ops=ops)
    est = stochastic.mc_log_qef(ss, grid, theta, mu=mu,
                                n_samples=int(cfg.n_samples),
                                seed=int(cfg.seed), ops=ops)
    diff = abs(est.value - closed)
    return {"theta": theta, "T": grid.horizon, "N": grid.n_points,
            "mc_value": est.value, "mc_stderr": est.stderr,
            "closed_form": closed, "abs_diff": diff,
            "within_3_stderr": bool(diff <= 3.0 * est.stderr),
            "n_samples": est.n_samples, "seed": est.seed}


def _theta_cap(cfg: RunConfig, ss) -> float:
    if cfg.theta_max is not None:
        return float(cfg.theta_max)
    return model_mod.find_theta_max(ss)


def _cmd_tail(cfg: RunConfig, ss) -> dict:
    quad_cfg = cfg.quad_config()
    theta_cap = _theta_cap(cfg, ss)
    bound = robust.tail_exponent(
        lambda th: freqrate.qef_rate(ss, th, quad_cfg), float(cfg.alpha),
        theta_cap)
    return {"alpha": bound.alpha, "exponent": bound.exponent,
            "argmax_theta": bound.argmax_theta,
            "at_boundary": bound.at_boundary, "theta_max": theta_cap}


def _cmd_worst_case(cfg: RunConfig, ss) -> dict:
    quad_cfg = cfg.quad_config()
    theta_cap = _theta_cap(cfg, ss)
    derivative = freqrate.rate_derivative_at_zero(ss, quad_cfg)
    bound = robust.worst_case_bound(
        lambda th: freqrate.qef_rate(ss, th, quad_cfg), float(cfg.epsilon),
        theta_cap, derivative_at_zero=derivative)
    return {"epsilon": bound.epsilon, "bound": bound.bound,
            "argmin_theta": bound.argmin_theta,
            "at_zero_limit": bound.at_zero_limit,
            "at_boundary": bound.at_boundary,
            "nominal_bound": 2.0 * derivative, "theta_max": theta_cap}


def _cmd_appendix_check(cfg: RunConfig, _ss) -> dict:
    error, sigma = stochastic.fock_truncation_check(
        float(cfg.omega), int(cfg.n_trunc), int(cfg.quad_order))
    return {"max_block_error": error, "sigma": sigma,
            "omega": float(cfg.omega), "n_trunc": int(cfg.n_trunc),
            "quad_order": int(cfg.quad_order)}


_DISPATCH = {
    "validate": _cmd_validate,
    "rate": _cmd_rate,
    "rate-curve": _cmd_rate_curve,
    "horizon": _cmd_horizon,
    "montecarlo": _cmd_montecarlo,
    "tail": _cmd_tail,
    "worst-case": _cmd_worst_case,
    "appendix-check": _cmd_appendix_check,
}


def run(cfg: RunConfig, stdout=None) -> int:
    """Execute one configured computation and emit its artifacts."""
    stdout = stdout or sys.stdout
    _validate_config(cfg)
    ss = model_mod.load_model(cfg.model_path) if cfg.model_path else None

    outputs = _DISPATCH[cfg.command](cfg, ss)
    diagnostics = outputs.pop("diagnostics_extra", {})
    diagnostics["worker_cap"] = int(os.environ.get("QEF_NUM_THREADS", "0")) or None

    doc = {
        "command": cfg.command,
        "model_digest": _digest(cfg.model_path),
        "inputs": {
            "model_path": cfg.model_path,
            "theta": cfg.theta,
            "seed": cfg.seed,
            "method": cfg.method if cfg.command in ("rate", "rate-curve") else None,
        },
        "diagnostics": diagnostics,
    }
    doc.update(outputs)
    validate_result_document(doc)

    text = render_document(doc)
    stdout.write(text)
    if cfg.output_path is not None and cfg.command not in ("rate-curve",) \
            and not (cfg.command == "horizon" and cfg.t_sweep is not None):
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def _error_json(exc: Exception) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field is not None:
        payload["field"] = field
    for attr in ("margin", "spectral_radius", "residual", "min_omega"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload["condition"] = f"{attr}={value}"
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qefrate",
        description="Quadratic-exponential cost rates, tail exponents and "
                    "worst-case bounds for stationary Gaussian quantum models")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--theta", type=float, default=None)
    parser.add_argument("--T", type=float, default=None, dest="horizon_t")
    parser.add_argument("--N", type=int, default=None, dest="n_points")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, dest="output_path")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        for attr in ("theta", "horizon_t", "n_points", "seed", "output_path"):
            value = getattr(args, attr)
            if value is not None:
                setattr(cfg, attr, value)
        return run(cfg)
    except (InvalidParams, OSError, ValueError) as exc:
        sys.stderr.write(_error_json(exc) + "\n")
        return 2
    except QefError as exc:
        sys.stderr.write(_error_json(exc) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
