"""Scenario runner: named reproductions, gain-table/bound dumps and
intensity optimizations, all emitting plot-ready CSV plus a run manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import asym, interference, optimize
from .config import (
    BASE_SCHEMA,
    SWEEP_SCHEMA,
    ConfigError,
    build_geometry,
    build_intensities,
    build_system,
    check_finite,
    parse_config_text,
    render_manifest,
    resolve,
)
from .decoy import build_gain_table, decoy_bounds
from .keyrate import KeyRateReport, two_decoy_rate
from .params import ChannelGeometry, ValidationError


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: list[list[Any]]) -> None:
    check_finite(rows)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _map_points(
    worker: Callable[[Any], Any], points: Sequence[Any], threads: int
) -> list[Any]:
    """Order-preserving map over independent sweep points."""
    if threads <= 1 or len(points) <= 1:
        return [worker(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, points))


def _rate_row(report: KeyRateReport) -> list[Any]:
    return [
        report.mode,
        report.mu_a,
        report.mu_b,
        report.geometry.l_ac_km,
        report.geometry.l_bc_km,
        report.rate,
        report.single_photon_term,
        report.ec_term,
        report.p11_z,
        report.y11,
        report.e11,
        report.q_z,
        report.e_z,
    ]


_RATE_HEADER = [
    "mode", "mu_a", "mu_b", "l_ac_km", "l_bc_km", "rate",
    "single_photon_term", "ec_term", "p11_z", "y11", "e11", "q_z", "e_z",
]


# ---------------------------------------------------------------------------
# sweep presets

def _symmetric_geometry(total_km: float, alpha: float) -> ChannelGeometry:
    return ChannelGeometry(total_km / 2.0, total_km / 2.0, alpha)


def _tolerance_sweep(
    resolved: Mapping[str, Any],
    sweep_key: str,
    system_key: str,
    threads: int,
) -> tuple[list[str], list[list[Any]]]:
    """Shared driver for the error-tolerance figures: optimize the symmetric
    asymptotic rate at each (swept parameter, total distance) point."""
    values = resolved[sweep_key]
    totals = resolved["sweep.l_total_values"]
    points = [(v, total) for v in values for total in totals]

    def worker(point: tuple[float, float]) -> list[Any]:
        value, total = point
        local = dict(resolved)
        local[system_key] = value
        params = build_system(local)
        geometry = _symmetric_geometry(total, params.alpha_db_per_km)
        res = optimize.optimize_asymptotic(geometry, params, tie_parties=True)
        return [value, total, res.best_rate, res.best_settings.mu_a]

    rows = _map_points(worker, points, threads)
    name = sweep_key.split(".")[-1].replace("_values", "")
    return [name, "l_total_km", "rate", "mu_opt"], rows


def _run_fig3(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    header, rows = _tolerance_sweep(resolved, "sweep.e_d_values", "system.e_d", threads)
    path = out / "fig3.csv"
    _write_csv(path, header, rows)
    return [path]


def _run_fig5(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    header, rows = _tolerance_sweep(resolved, "sweep.e_m_values", "system.e_m", threads)
    path = out / "fig5.csv"
    _write_csv(path, header, rows)
    return [path]


def _run_fig7(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    header, rows = _tolerance_sweep(resolved, "sweep.y0_values", "system.y0", threads)
    path = out / "fig7.csv"
    _write_csv(path, header, rows)
    return [path]


def _run_fig6_asymptotic(
    resolved: Mapping[str, Any], out: Path, threads: int
) -> list[Path]:
    params = build_system(resolved)
    omega = resolved["run.omega_floor"]
    totals = resolved["sweep.l_total_values"]

    def worker(total: float) -> list[Any]:
        [row] = optimize.optimal_intensity_sweep("TwoDecoyBounds", [total], params, omega)
        s = row.settings
        return [total, s.mu_a, s.nu_a, s.omega_a, row.rate]

    rows = _map_points(worker, totals, threads)
    path = out / "fig6_asymptotic.csv"
    _write_csv(path, ["l_total_km", "mu_opt", "nu_opt", "omega", "rate"], rows)
    return [path]


_MODE_NAMES = {"asymptotic": "AsymptoticTruth", "two-decoy": "TwoDecoyBounds"}


def _compare_rows(
    x: float,
    l_bc: float,
    mode_name: str,
    params,
    omega: float,
) -> list[list[Any]]:
    comp = optimize.asymmetric_compare(x, l_bc, _MODE_NAMES[mode_name], params, omega)
    rows = []
    for choice, res in (("symmetric", comp.symmetric_choice), ("optimal", comp.optimal_choice)):
        s = res.best_settings
        rows.append(
            [x, l_bc, mode_name, choice, s.mu_a, s.mu_b, s.nu_a, s.nu_b,
             res.best_rate, comp.advantage, comp.arrival_ratio]
        )
    return rows


_COMPARE_HEADER = [
    "x", "l_bc_km", "mode", "choice", "mu_a", "mu_b", "nu_a", "nu_b",
    "rate", "advantage", "arrival_ratio",
]


def _run_fig8(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    params = build_system(resolved)
    omega = resolved["run.omega_floor"]
    x = resolved["sweep.x"]
    points = [
        (l_bc, mode)
        for mode in resolved["sweep.modes"]
        for l_bc in resolved["sweep.l_bc_values"]
    ]
    for _, mode in points:
        if mode not in _MODE_NAMES:
            raise ConfigError(f"sweep.modes entries must be asymptotic|two-decoy, got {mode!r}")

    def worker(point: tuple[float, str]) -> list[list[Any]]:
        l_bc, mode = point
        return _compare_rows(x, l_bc, mode, params, omega)

    rows = [row for chunk in _map_points(worker, points, threads) for row in chunk]
    path = out / "fig8.csv"
    _write_csv(path, _COMPARE_HEADER, rows)
    return [path]


def _run_table4(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    paths = _run_fig8(resolved, out, threads)
    target = out / "table4.csv"
    paths[0].rename(target)
    return [target]


def _run_fig9(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    params = build_system(resolved)
    l_bcs = resolved["sweep.l_bc_values"]
    l_acs = resolved["sweep.l_ac_values"]

    def worker(l_bc: float) -> list[list[Any]]:
        return [
            [r.l_ac_km, r.l_bc_km, r.r_rig, r.rig_mu[0], r.rig_mu[1],
             r.r_est, r.est_mu[0], r.est_mu[1]]
            for r in asym.rig_vs_est_scan([l_bc], l_acs, params)
        ]

    rows = [row for chunk in _map_points(worker, l_bcs, threads) for row in chunk]
    scan_path = out / "fig9.csv"
    _write_csv(
        scan_path,
        ["l_ac_km", "l_bc_km", "r_rig", "mu_a_rig", "mu_b_rig",
         "r_est", "mu_a_est", "mu_b_est"],
        rows,
    )
    x_max = asym.max_tolerable_x(params, l_bc_km=min(l_bcs))
    tol_path = out / "fig9_tolerable_x.csv"
    _write_csv(tol_path, ["l_bc_km", "max_tolerable_x"], [[min(l_bcs), x_max]])
    return [scan_path, tol_path]


def _run_fig10(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    params = build_system(resolved)
    points = [
        (l_ac, l_bc)
        for l_ac in resolved["sweep.l_ac_values"]
        for l_bc in resolved["sweep.l_bc_values"]
    ]

    def worker(point: tuple[float, float]) -> list[Any]:
        l_ac, l_bc = point
        geometry = ChannelGeometry(l_ac, l_bc, params.alpha_db_per_km)
        res = optimize.optimize_asymptotic(geometry, params)
        return [l_ac, l_bc, res.best_settings.mu_a, res.best_settings.mu_b, res.best_rate]

    rows = _map_points(worker, points, threads)
    path = out / "fig10.csv"
    _write_csv(path, ["l_ac_km", "l_bc_km", "mu_a_opt", "mu_b_opt", "rate"], rows)
    return [path]


def _run_fig11(resolved: Mapping[str, Any], out: Path, threads: int) -> list[Path]:
    params = build_system(resolved)
    omega = resolved["run.omega_floor"]
    points = [
        (x, mode)
        for x in resolved["sweep.x_values"]
        for mode in resolved["sweep.modes"]
    ]

    def worker(point: tuple[float, str]) -> list[list[Any]]:
        x, mode = point
        rows = asym.fixed_x_scan(
            x, resolved["sweep.l_bc_values"], _MODE_NAMES[mode], params, omega
        )
        return [
            [r.x, r.l_bc_km, mode, r.rate, r.mu_a, r.mu_b, r.nu_a, r.nu_b,
             r.mu_ratio, r.nu_ratio]
            for r in rows
        ]

    rows = [row for chunk in _map_points(worker, points, threads) for row in chunk]
    path = out / "fig11.csv"
    _write_csv(
        path,
        ["x", "l_bc_km", "mode", "rate", "mu_a", "mu_b", "nu_a", "nu_b",
         "mu_ratio", "nu_ratio"],
        rows,
    )
    return [path]


PRESETS: dict[str, tuple[dict[str, Any], Callable[..., list[Path]], tuple[str, ...]]] = {
    "fig3": (
        {
            "system.e_m": 0.0,
            "system.misalignment": "gaussian",
            "sweep.e_d_values": [0.0, 0.02, 0.04, 0.05, 0.055, 0.06, 0.065, 0.07, 0.075, 0.08],
            "sweep.l_total_values": [0.0, 120.0],
        },
        _run_fig3,
        ("sweep.e_d_values", "sweep.l_total_values"),
    ),
    "fig5": (
        {
            "system.e_d": 0.0,
            "system.misalignment": "reduction",
            "sweep.e_m_values": [0.0, 0.2, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9],
            "sweep.l_total_values": [0.0, 120.0],
        },
        _run_fig5,
        ("sweep.e_m_values", "sweep.l_total_values"),
    ),
    "fig7": (
        {
            "system.e_m": 0.0,
            "system.misalignment": "reduction",
            "sweep.y0_values": [1e-6, 1e-5, 1e-4, 5e-4, 1e-3, 2e-3, 5e-3],
            "sweep.l_total_values": [0.0],
        },
        _run_fig7,
        ("sweep.y0_values", "sweep.l_total_values"),
    ),
    "fig6-asymptotic": (
        {
            "system.misalignment": "reduction",
            "sweep.l_total_values": [0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0],
        },
        _run_fig6_asymptotic,
        ("sweep.l_total_values",),
    ),
    "fig8": (
        {
            "system.misalignment": "reduction",
            "sweep.x": 0.1,
            "sweep.l_bc_values": [0.0, 10.0, 20.0, 30.0],
            "sweep.modes": ["asymptotic", "two-decoy"],
        },
        _run_fig8,
        ("sweep.x", "sweep.l_bc_values", "sweep.modes"),
    ),
    "fig9": (
        {
            "system.misalignment": "reduction",
            "sweep.l_bc_values": [0.001, 10.0, 25.0],
            "sweep.l_ac_values": [0.001, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0,
                                   70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0],
        },
        _run_fig9,
        ("sweep.l_bc_values", "sweep.l_ac_values"),
    ),
    "fig10": (
        {
            "system.misalignment": "reduction",
            "sweep.l_ac_values": [0.001, 25.0, 50.0, 75.0, 100.0],
            "sweep.l_bc_values": [0.001, 25.0, 50.0, 75.0, 100.0],
        },
        _run_fig10,
        ("sweep.l_ac_values", "sweep.l_bc_values"),
    ),
    "fig11": (
        {
            "system.misalignment": "reduction",
            "sweep.x_values": [0.1, 0.9],
            "sweep.l_bc_values": [0.0, 20.0, 40.0, 60.0],
            "sweep.modes": ["asymptotic", "two-decoy"],
        },
        _run_fig11,
        ("sweep.x_values", "sweep.l_bc_values", "sweep.modes"),
    ),
    "table4": (
        {
            "system.misalignment": "reduction",
            "sweep.x": 0.1,
            "sweep.l_bc_values": [0.0, 10.0, 20.0],
            "sweep.modes": ["asymptotic"],
        },
        _run_table4,
        ("sweep.x", "sweep.l_bc_values", "sweep.modes"),
    ),
}


# ---------------------------------------------------------------------------
# selftest

def _selftest(out: Path | None) -> int:
    """Oracle-equivalence checks of the numeric engine against the closed
    forms, plus the decoy sandwich on a reduced grid. Prints one line per
    check; exit 3 on any failure."""
    from .params import SystemParams, reduction_angles, symmetric_intensities
    from .closedform import qz_hh_closed_form, qz_hv_closed_form, y11_e11_true

    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        failures += 0 if ok else 1
        print(f"selftest {name}: {'PASS' if ok else 'FAIL'} ({detail})")

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(60):
        ga, gb = rng.uniform(0.01, 0.3, 2)
        e_d1 = rng.uniform(0.0, 0.2)
        y0 = rng.uniform(0.0, 1e-3)
        theta = math.asin(math.sqrt(e_d1))
        for sign, label in ((1.0, "same"), (-1.0, "opposite")):
            for bits, closed in (((0, 0), qz_hh_closed_form), ((0, 1), qz_hv_closed_form)):
                pair = interference.EncodingPair("Z", *bits)
                res = interference.coincidence_gains(
                    pair, (theta, sign * theta, 0.0), ga, gb, 0.0, y0, 128
                )
                ref = closed(ga, gb, e_d1, y0, angle_sign=label)
                worst = max(worst, abs(res.q_triplet - ref[0]), abs(res.q_singlet - ref[1]))
    report("engine-vs-closed-form", worst <= 1e-9, f"max deviation {worst:.3e}")

    params = SystemParams(misalignment_mode=reduction_angles(0.015), e_m=0.0)
    geometry = ChannelGeometry(25.0, 25.0, params.alpha_db_per_km)
    settings = symmetric_intensities(0.3, 0.1, 5e-4)
    table = build_gain_table(settings, geometry, params)
    bounds = decoy_bounds(table, settings)
    y11_true, e11_true = y11_e11_true(geometry, params)
    ok = bounds.y11_z_lower <= y11_true + 1e-12 and bounds.e11_x_upper >= e11_true - 1e-12
    report(
        "decoy-sandwich",
        ok,
        f"y11 {bounds.y11_z_lower:.3e} <= {y11_true:.3e}, "
        f"e11 {bounds.e11_x_upper:.3e} >= {e11_true:.3e}",
    )

    phi = np.linspace(0.0, 2.0 * np.pi, 7)
    intens = interference.detector_intensities(
        interference.EncodingPair("X", 0, 1), (0.2, -0.1, 0.05), phi, 0.2, 0.25, 0.3
    )
    spread = float(np.ptp(intens.total))
    report("energy-conservation", spread <= 1e-12, f"total spread {spread:.3e}")

    if out is not None:
        _write_csv(out / "selftest.csv", ["check", "status"], [["all", "done"]])
    return 0 if failures == 0 else 3


# ---------------------------------------------------------------------------
# entry point

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="flat key/value config file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, help="override system.rng_seed")
    parser.add_argument("--threads", type=int, help="worker threads for sweep points")
    parser.add_argument("--mc-samples", type=int, help="override system.mc_samples")
    parser.add_argument("--quadrature", type=int, help="override system.quadrature_points")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdiqkd",
        description="Model, bound and optimize a polarization-encoding MDI-QKD system",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "decoy-bounds", "optimize", "selftest"):
        _add_common(sub.add_parser(name))
    sweep = sub.add_parser("sweep")
    _add_common(sweep)
    sweep.add_argument("--preset", required=True, choices=sorted(PRESETS))
    return parser


def _resolved_from_args(args: argparse.Namespace, preset: str | None) -> dict[str, Any]:
    overrides: dict[str, str] = {}
    if args.config is not None:
        try:
            overrides = parse_config_text(args.config.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if preset is None:
        resolved = resolve(overrides)
    else:
        defaults, _, sweep_keys = PRESETS[preset]
        allowed = dict(BASE_SCHEMA)
        allowed.update({k: SWEEP_SCHEMA[k] for k in sweep_keys})
        resolved = resolve(overrides, preset_defaults=defaults, allowed=allowed)
    if args.seed is not None:
        resolved["system.rng_seed"] = args.seed
    if args.mc_samples is not None:
        resolved["system.mc_samples"] = args.mc_samples
    if args.quadrature is not None:
        resolved["system.quadrature_points"] = args.quadrature
    if args.threads is not None:
        resolved["run.threads"] = args.threads
    return resolved


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _dispatch(args: argparse.Namespace) -> int:
    preset = getattr(args, "preset", None)
    if args.command == "selftest":
        out = args.out
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        return _selftest(out)

    resolved = _resolved_from_args(args, preset if args.command == "sweep" else None)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    threads = resolved["run.threads"]
    written: list[Path]

    if args.command == "simulate":
        params = build_system(resolved)
        geometry = build_geometry(resolved)
        settings = build_intensities(resolved)
        table = build_gain_table(settings, geometry, params)
        path = out / "gain_table.csv"
        path.write_text(table.to_csv())
        written = [path]
    elif args.command == "decoy-bounds":
        params = build_system(resolved)
        geometry = build_geometry(resolved)
        settings = build_intensities(resolved)
        table = build_gain_table(settings, geometry, params)
        bounds = decoy_bounds(table, settings)
        gt_path = out / "gain_table.csv"
        gt_path.write_text(table.to_csv())
        bounds_path = out / "bounds.csv"
        _write_csv(
            bounds_path,
            ["y11_z_lower", "y11_x_lower", "e11_x_upper", "case_z", "case_x",
             "y11_z_raw", "y11_x_raw", "e11_x_raw"],
            [[bounds.y11_z_lower, bounds.y11_x_lower, bounds.e11_x_upper,
              bounds.case_z, bounds.case_x,
              bounds.y11_z_raw, bounds.y11_x_raw, bounds.e11_x_raw]],
        )
        report = two_decoy_rate(settings, geometry, params)
        rate_path = out / "rate.csv"
        _write_csv(rate_path, _RATE_HEADER, [_rate_row(report)])
        written = [gt_path, bounds_path, rate_path]
    elif args.command == "optimize":
        params = build_system(resolved)
        geometry = build_geometry(resolved)
        mode = resolved["run.mode"]
        if mode == "asymptotic":
            res = optimize.optimize_asymptotic(
                geometry, params,
                tie_parties=resolved["run.tie_parties"],
                symmetric_choice=resolved["run.symmetric_choice"],
            )
        elif mode == "two-decoy":
            res = optimize.optimize_two_decoy(
                geometry, params,
                omega=resolved["run.omega_floor"],
                tie_parties=resolved["run.tie_parties"],
                symmetric_choice=resolved["run.symmetric_choice"],
            )
        else:
            raise ConfigError(f"run.mode must be asymptotic|two-decoy, got {mode!r}")
        s = res.best_settings
        path = out / "optimum.csv"
        _write_csv(
            path,
            ["mode", "l_ac_km", "l_bc_km", "mu_a", "nu_a", "omega_a",
             "mu_b", "nu_b", "omega_b", "rate", "evaluations", "converged"],
            [[mode, geometry.l_ac_km, geometry.l_bc_km, s.mu_a, s.nu_a, s.omega_a,
              s.mu_b, s.nu_b, s.omega_b, res.best_rate, res.evaluations,
              res.converged]],
        )
        written = [path]
    elif args.command == "sweep":
        _, runner, _ = PRESETS[preset]
        written = runner(resolved, out, threads)
    else:  # pragma: no cover - argparse enforces choices
        raise ConfigError(f"unknown command {args.command!r}")

    extra = {"run.command": args.command}
    if preset is not None and args.command == "sweep":
        extra["run.preset"] = preset
    (out / "manifest.txt").write_text(render_manifest(resolved, extra))
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
