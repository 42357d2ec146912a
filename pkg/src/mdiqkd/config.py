"""Flat key/value configuration with dotted section names.

Format: one ``section.key = value`` per line, ``#`` comments, blank lines
ignored. Every run resolves a complete mapping (defaults, preset overrides,
config file, command-line flags, in that order) and echoes it verbatim into
the run manifest, so a manifest is itself a valid config reproducing the run.
"""
from __future__ import annotations

import math
from typing import Any, Mapping

from .params import (
    ChannelGeometry,
    FixedAngles,
    GaussianMC,
    IntensitySettings,
    SystemParams,
    reduction_angles,
)


class ConfigError(Exception):
    """Malformed configuration input."""


# key -> (kind, default); kinds: float, int, bool, str, floatlist, strlist
BASE_SCHEMA: dict[str, tuple[str, Any]] = {
    "system.eta_d": ("float", 0.145),
    "system.y0": ("float", 6.02e-6),
    "system.f_e": ("float", 1.16),
    "system.alpha_db_per_km": ("float", 0.2),
    "system.e_d": ("float", 0.015),
    "system.e_m": ("float", 0.02),
    "system.e1": ("float", -1.0),  # negative: derive default split from e_d
    "system.e2": ("float", -1.0),
    "system.e3": ("float", -1.0),
    "system.misalignment": ("str", "gaussian"),  # gaussian | reduction | fixed
    "system.theta1": ("float", 0.0),
    "system.theta2": ("float", 0.0),
    "system.theta3": ("float", 0.0),
    "system.quadrature_points": ("int", 128),
    "system.mc_samples": ("int", 2000),
    "system.rng_seed": ("int", 1),
    "channel.l_ac_km": ("float", 25.0),
    "channel.l_bc_km": ("float", 25.0),
    "intensity.mu_a": ("float", 0.3),
    "intensity.nu_a": ("float", 0.1),
    "intensity.omega_a": ("float", 5e-4),
    "intensity.mu_b": ("float", 0.3),
    "intensity.nu_b": ("float", 0.1),
    "intensity.omega_b": ("float", 5e-4),
    "run.mode": ("str", "two-decoy"),  # asymptotic | two-decoy
    "run.tie_parties": ("bool", False),
    "run.symmetric_choice": ("bool", False),
    "run.omega_floor": ("float", 5e-4),
    "run.threads": ("int", 1),
}

SWEEP_SCHEMA: dict[str, tuple[str, Any]] = {
    "sweep.e_d_values": ("floatlist", []),
    "sweep.e_m_values": ("floatlist", []),
    "sweep.y0_values": ("floatlist", []),
    "sweep.l_total_values": ("floatlist", []),
    "sweep.l_bc_values": ("floatlist", []),
    "sweep.l_ac_values": ("floatlist", []),
    "sweep.x": ("float", 0.1),
    "sweep.x_values": ("floatlist", []),
    "sweep.modes": ("strlist", ["asymptotic"]),
}

FULL_SCHEMA = {**BASE_SCHEMA, **SWEEP_SCHEMA}


def _parse_scalar(kind: str, raw: str, key: str) -> Any:
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "floatlist":
            return [float(part) for part in raw.split(",") if part.strip() != ""]
        if kind == "strlist":
            return [part.strip() for part in raw.split(",") if part.strip() != ""]
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> string-value pairs from a config file body."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def resolve(
    overrides: Mapping[str, str] | None = None,
    preset_defaults: Mapping[str, Any] | None = None,
    allowed: Mapping[str, tuple[str, Any]] | None = None,
) -> dict[str, Any]:
    """Full typed configuration for one run.

    ``allowed`` restricts which keys this run understands (defaults to the
    base schema); unknown keys are rejected rather than silently ignored.
    """
    schema = dict(allowed if allowed is not None else BASE_SCHEMA)
    resolved = {key: default for key, (_, default) in schema.items()}
    for key, value in (preset_defaults or {}).items():
        if key not in schema:
            raise ConfigError(f"preset sets unknown key {key!r}")
        resolved[key] = value
    for key, raw in (overrides or {}).items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = _parse_scalar(schema[key][0], raw, key)
    return resolved


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, list):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def render_manifest(resolved: Mapping[str, Any], extra: Mapping[str, Any]) -> str:
    """Deterministic `key = value` listing of every resolved setting."""
    lines = [f"{k} = {_format_value(v)}" for k, v in sorted(extra.items())]
    lines += [f"{k} = {_format_value(v)}" for k, v in sorted(resolved.items())]
    return "\n".join(lines) + "\n"


def build_system(resolved: Mapping[str, Any]) -> SystemParams:
    e_d = resolved["system.e_d"]
    e1, e2, e3 = resolved["system.e1"], resolved["system.e2"], resolved["system.e3"]
    split = None if e1 < 0 or e2 < 0 or e3 < 0 else (e1, e2, e3)
    kind = resolved["system.misalignment"]
    if kind == "gaussian":
        mode: FixedAngles | GaussianMC = GaussianMC()
    elif kind == "reduction":
        mode = reduction_angles(e_d)
    elif kind == "fixed":
        mode = FixedAngles(
            resolved["system.theta1"],
            resolved["system.theta2"],
            resolved["system.theta3"],
        )
    else:
        raise ConfigError(
            f"system.misalignment must be gaussian|reduction|fixed, got {kind!r}"
        )
    return SystemParams(
        eta_d=resolved["system.eta_d"],
        y0=resolved["system.y0"],
        f_e=resolved["system.f_e"],
        alpha_db_per_km=resolved["system.alpha_db_per_km"],
        e_d=e_d,
        e_m=resolved["system.e_m"],
        e_split=split,
        misalignment_mode=mode,
        quadrature_points=resolved["system.quadrature_points"],
        mc_samples=resolved["system.mc_samples"],
        rng_seed=resolved["system.rng_seed"],
    )


def build_geometry(resolved: Mapping[str, Any]) -> ChannelGeometry:
    return ChannelGeometry(
        resolved["channel.l_ac_km"],
        resolved["channel.l_bc_km"],
        resolved["system.alpha_db_per_km"],
    )


def build_intensities(resolved: Mapping[str, Any]) -> IntensitySettings:
    return IntensitySettings(
        resolved["intensity.mu_a"],
        resolved["intensity.nu_a"],
        resolved["intensity.omega_a"],
        resolved["intensity.mu_b"],
        resolved["intensity.nu_b"],
        resolved["intensity.omega_b"],
    )


def check_finite(rows: list[list[Any]]) -> None:
    """Guard CSV payloads against silent NaN/inf propagation."""
    for row in rows:
        for cell in row:
            if isinstance(cell, float) and not math.isfinite(cell):
                raise ArithmeticError(f"non-finite value in output row {row!r}")
