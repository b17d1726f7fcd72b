"""Flat ``key = value`` run configuration.

Dotted keys, ``#`` comments, blank lines allowed.  Every command has a fixed
set of allowed keys; an unknown key is a hard error carrying its line number.
Lists (v_list, eps_list) are comma separated.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .jumps import (
    ConstantJumps,
    GammaJumps,
    IntensityShiftedJumps,
    InverseGaussianJumps,
    JumpFamily,
)
from .model import LinearDrift, ModelSpec, NonlinearDrift, ValidatedModel, validate_model

MODEL_KEYS = {
    "drift.kind", "drift.alpha", "drift.delta", "drift.gamma", "drift.lambda0",
    "beta",
    "jumps.kind", "jumps.u", "jumps.v", "jumps.mean", "jumps.shape", "jumps.c",
    "jumps.coupling", "jumps.base_kind",
    "lambda_init",
}
RUN_KEYS = {"horizon", "grid_dt", "paths", "seed", "max_jumps", "bound_refresh"}
OUTPUT_KEYS = {"out_dir", "emit_paths", "emit_svg"}

ALLOWED_KEYS = {
    "simulate": MODEL_KEYS | RUN_KEYS | OUTPUT_KEYS,
    "moments": MODEL_KEYS | {"horizon", "grid_dt"} | {"out_dir", "emit_svg"},
    "limit": {"v_list", "c0", "c1", "u", "t", "paths", "seed"}
             | {"out_dir", "emit_svg"},
    "detlimit": MODEL_KEYS | {"eps_list", "horizon", "paths", "seed",
                              "max_jumps"} | {"out_dir", "emit_svg"},
}

_INT_KEYS = {"paths", "seed", "max_jumps"}
_BOOL_KEYS = {"emit_paths", "emit_svg"}
_STR_KEYS = {"drift.kind", "jumps.kind", "jumps.base_kind", "out_dir"}
_LIST_KEYS = {"v_list", "eps_list"}


def _parse_value(key: str, raw: str, line_no: int):
    raw = raw.strip()
    try:
        if key in _STR_KEYS:
            return raw
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _LIST_KEYS:
            return [float(v) for v in raw.split(",") if v.strip()]
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: bad value for {key}: {exc}") from None


def parse_config(path: str, command: str) -> dict:
    """Read and type the config file for ``command``."""
    allowed = ALLOWED_KEYS.get(command)
    if allowed is None:
        raise ConfigError(f"unknown command {command!r}")
    values: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for line_no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {text!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in allowed:
            raise ConfigError(
                f"line {line_no}: unknown key {key!r} for command {command!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, line_no)
    return values


def _require(values: dict, key: str):
    if key not in values:
        raise ConfigError(f"missing required key {key!r}")
    return values[key]


def build_jumps(values: dict) -> JumpFamily:
    kind = _require(values, "jumps.kind")
    if kind == "intensity_shifted":
        base = _build_base_jumps(values, _require(values, "jumps.base_kind"))
        return IntensityShiftedJumps(base=base,
                                     coupling=_require(values, "jumps.coupling"))
    return _build_base_jumps(values, kind)


def _build_base_jumps(values: dict, kind: str) -> JumpFamily:
    if kind == "gamma":
        return GammaJumps(u=_require(values, "jumps.u"),
                          v=_require(values, "jumps.v"))
    if kind == "inverse_gaussian":
        return InverseGaussianJumps(mean=_require(values, "jumps.mean"),
                                    shape=_require(values, "jumps.shape"))
    if kind == "constant":
        return ConstantJumps(c=_require(values, "jumps.c"))
    raise ConfigError(f"unknown jumps.kind {kind!r}")


def build_model(values: dict) -> ValidatedModel:
    kind = _require(values, "drift.kind")
    if kind == "linear":
        drift = LinearDrift(alpha=_require(values, "drift.alpha"),
                            lambda0=_require(values, "drift.lambda0"))
    elif kind == "nonlinear":
        drift = NonlinearDrift(alpha=_require(values, "drift.alpha"),
                               delta=_require(values, "drift.delta"),
                               gamma=_require(values, "drift.gamma"),
                               lambda0=_require(values, "drift.lambda0"))
    else:
        raise ConfigError(f"unknown drift.kind {kind!r}")
    try:
        return validate_model(ModelSpec(
            drift=drift,
            beta=_require(values, "beta"),
            jumps=build_jumps(values),
            lambda_init=_require(values, "lambda_init")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class OutputOptions:
    out_dir: str
    emit_paths: bool
    emit_svg: bool


def output_options(values: dict) -> OutputOptions:
    return OutputOptions(out_dir=values.get("out_dir", "."),
                         emit_paths=bool(values.get("emit_paths", False)),
                         emit_svg=bool(values.get("emit_svg", False)))
