"""Command-line entry point.

Subcommands::

    sample-levy     sample a driver realization, write increment/event CSVs
    solve           run the full pipeline and write the solution field
    oracle-compare  solve and compare against the preset's closed form
    convergence     dt-ladder error study with log-log regression
    flow-identity   round-trip and jump-inverse identity checks
    exp-map         debug evaluation of the jump exponential map

Every run is reproducible from its config file and seed; the manifest
embeds both.  Exit status is nonzero iff an enabled check fails.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .characteristics import integrate_path
from .config import RunConfig, load_config, parse_seed
from .driver import coarsen_driver, make_realization
from .exceptions import ConfigError, MarcusTransportError
from .expmap import JumpVectorField, exp_map, exp_map_inverse_check
from .inverse_flow import round_trip_residual
from .presets import PRESET_NAMES
from .reports import (ReportBundle, plot_convergence, plot_driver_path,
                      plot_field, write_events_csv, write_field_csv,
                      write_increments_csv)
from .solver import OracleSpec, oracle_compare, solve

_ORACLE_TOL = {"deterministic": 1e-6, "sinh": 5e-3, "h_transform": 5e-3}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="marcus-transport",
        description="Levy-driven stochastic transport equations by the method "
                    "of stochastic characteristics.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--preset", choices=PRESET_NAMES,
                        help="named coefficient preset (alternative to --config)")
        sp.add_argument("--seed", help="master seed, decimal or hex")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker count (results are schedule-independent)")

    common(sub.add_parser("sample-levy", help="sample a driver realization"))
    common(sub.add_parser("solve", help="solve the equation and write the field"))
    common(sub.add_parser("oracle-compare", help="solve and compare to the oracle"))
    sp = sub.add_parser("convergence", help="dt-ladder error study")
    common(sp)
    sp.add_argument("--dts", default="0.015625,0.0078125,0.00390625,0.001953125",
                    help="comma-separated dt ladder (>= 4 values)")
    sp.add_argument("--realizations", type=int, default=8,
                    help="number of driver realizations to average over")
    sp = sub.add_parser("flow-identity", help="round-trip and jump-inverse checks")
    common(sp)
    sp.add_argument("--tol", type=float, default=1e-3,
                    help="round-trip residual tolerance")
    sp = sub.add_parser("exp-map", help="evaluate the jump exponential map")
    common(sp)
    sp.add_argument("--x0", type=float, default=0.0)
    sp.add_argument("--z", type=float, default=1.0)
    sp.add_argument("--substeps", type=int, default=32)
    return p


def _load(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.preset:
            raise ConfigError("give either --config or --preset, not both")
    elif args.preset:
        cfg = RunConfig(problem={"preset": args.preset})
    else:
        raise ConfigError("a run needs --config or --preset")
    if args.seed is not None:
        cfg.driver["seed"] = parse_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def _bundle(args, cfg: RunConfig) -> ReportBundle:
    out_dir = cfg.output.get("dir", args.out)
    os.makedirs(out_dir, exist_ok=True)
    bundle = ReportBundle(out_dir=out_dir)
    bundle.summary["seed"] = cfg.seed
    bundle.summary["config"] = {"problem": cfg.problem, "driver": dict(cfg.driver),
                                "numerics": dict(cfg.numerics)}
    return bundle


def _make_driver(cfg: RunConfig, extra_times=()):
    return make_realization(
        cfg.measure_spec(), cfg.horizon, cfg.dt, cfg.seed,
        with_brownian=bool(cfg.driver.get("brownian", False)),
        output_times=list(cfg.times) + list(extra_times),
        small_jump_mode=cfg.numerics.get("small_jump_mode", "drop"),
    )


def cmd_sample_levy(args) -> int:
    cfg = _load(args)
    bundle = _bundle(args, cfg)
    driver = _make_driver(cfg)
    inc_path = bundle.add(os.path.join(bundle.out_dir, "increments.csv"))
    ev_path = bundle.add(os.path.join(bundle.out_dir, "events.csv"))
    write_increments_csv(driver, inc_path)
    write_events_csv(driver, ev_path)
    if cfg.output.get("figures", True):
        fig_path = bundle.add(os.path.join(bundle.out_dir, "driver_path.png"))
        plot_driver_path(driver, fig_path)
    max_mark = max((float(np.max(np.abs(ev.mark))) for ev in driver.jump_events),
                   default=0.0)
    bundle.summary.update({"event_count": len(driver.jump_events),
                           "max_abs_mark": max_mark,
                           "grid_points": len(driver.grid)})
    bundle.write_manifest()
    print(f"events: {len(driver.jump_events)}  max |z|: {max_mark:.4g}  "
          f"grid points: {len(driver.grid)}")
    return 0


def _solve_pipeline(cfg: RunConfig, bundle: ReportBundle):
    coeffs = cfg.build_coeffs()
    u0 = cfg.build_u0()
    driver = _make_driver(cfg)
    field = solve(coeffs, driver, u0, cfg.times, cfg.grid(),
                  table_grid=cfg.table_grid(), substeps=cfg.substeps,
                  inversion_tol=float(cfg.numerics.get("inversion_tol", 1e-9)))
    return coeffs, u0, driver, field


def _oracle_for(cfg: RunConfig, u0, coeffs, driver) -> OracleSpec | None:
    preset = cfg.preset
    if preset is None or preset.oracle_kind is None:
        return None
    return OracleSpec(kind=preset.oracle_kind, u0=u0, driver=driver, coeffs=coeffs,
                      **preset.oracle_kwargs)


def cmd_solve(args) -> int:
    cfg = _load(args)
    bundle = _bundle(args, cfg)
    coeffs, u0, driver, field = _solve_pipeline(cfg, bundle)
    csv_path = bundle.add(os.path.join(bundle.out_dir, "field.csv"))
    write_field_csv(field, csv_path)
    if cfg.output.get("figures", True):
        fig_path = bundle.add(os.path.join(bundle.out_dir, "field.png"))
        plot_field(field, fig_path)
    bundle.summary["flagged_fraction"] = field.flagged_fraction
    oracle = _oracle_for(cfg, u0, coeffs, driver)
    if oracle is not None:
        report = oracle_compare(field, oracle)
        tol = _ORACLE_TOL[oracle.kind]
        bundle.checks["oracle_rmse"] = bool(report.rmse <= tol)
        bundle.summary["oracle"] = {"kind": oracle.kind, "rmse": report.rmse,
                                    "max_abs": report.max_abs, "tolerance": tol}
        print(f"oracle {oracle.kind}: rmse={report.rmse:.3e} "
              f"(tol {tol:g}) -> {'pass' if bundle.checks['oracle_rmse'] else 'FAIL'}")
    bundle.checks["no_unflagged_divergence"] = bool(np.all(
        np.isfinite(field.values[~field.flags])))
    bundle.write_manifest()
    print(f"field written: {csv_path}  flagged fraction: {field.flagged_fraction:.3f}")
    return 0 if bundle.passed else 1


def cmd_oracle_compare(args) -> int:
    cfg = _load(args)
    bundle = _bundle(args, cfg)
    coeffs, u0, driver, field = _solve_pipeline(cfg, bundle)
    oracle = _oracle_for(cfg, u0, coeffs, driver)
    if oracle is None:
        print("the selected problem has no closed-form oracle", file=sys.stderr)
        return 2
    report = oracle_compare(field, oracle)
    tol = _ORACLE_TOL[oracle.kind]
    ok = report.rmse <= tol
    for row in report.per_time:
        print(f"t={row['t']:8.3f}  rmse={row['rmse']:.3e}  "
              f"max={row['max_abs']:.3e}  n={row['n_valid']}")
    print(f"overall rmse={report.rmse:.3e}  max={report.max_abs:.3e}  "
          f"flagged={report.flagged_fraction:.3f} -> {'pass' if ok else 'FAIL'}")
    bundle.checks["oracle_rmse"] = bool(ok)
    bundle.summary["oracle"] = {"kind": oracle.kind, "rmse": report.rmse,
                                "per_time": report.per_time}
    bundle.write_manifest()
    return 0 if ok else 1


def cmd_convergence(args) -> int:
    cfg = _load(args)
    bundle = _bundle(args, cfg)
    dts = sorted((float(v) for v in args.dts.split(",")), reverse=True)
    if len(dts) < 4:
        print("insufficient data: the dt ladder needs at least 4 values",
              file=sys.stderr)
        return 2
    if args.realizations < 1:
        raise ConfigError("--realizations must be >= 1")
    coeffs = cfg.build_coeffs()
    t_end = cfg.horizon
    ref_dt = min(dts) / 16.0
    cfg.numerics["dt"] = ref_dt
    table = cfg.table_grid()
    # Sup-error per dt, root-mean-squared over independent realizations of the
    # same driver law refined by common random numbers.
    sq = np.zeros(len(dts))
    for r in range(args.realizations):
        driver = make_realization(
            cfg.measure_spec(), cfg.horizon, ref_dt, cfg.seed, realization_index=r,
            with_brownian=bool(cfg.driver.get("brownian", False)),
            output_times=[t_end],
            small_jump_mode=cfg.numerics.get("small_jump_mode", "drop"))
        ref = integrate_path(coeffs, driver, table, [t_end], substeps=cfg.substeps)
        for i, dt in enumerate(dts):
            coarse = coarsen_driver(driver, dt)
            flow = integrate_path(coeffs, coarse, table, [t_end], substeps=cfg.substeps)
            ok = ~flow.diverged & ~ref.diverged
            sq[i] += float(np.max(np.abs(flow.x[ok, 0, 0] - ref.x[ok, 0, 0]))) ** 2
    errors = list(np.sqrt(sq / args.realizations))
    logs = np.log(np.asarray(dts))
    loge = np.log(np.asarray(errors))
    slope, intercept = np.polyfit(logs, loge, 1)
    pred = slope * logs + intercept
    ss_res = float(np.sum((loge - pred) ** 2))
    ss_tot = float(np.sum((loge - np.mean(loge)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    for dt, err in zip(dts, errors):
        print(f"dt={dt:.6g}  sup-error={err:.4e}")
    print(f"slope={slope:.3f}  R2={r2:.4f}")
    if cfg.output.get("figures", True):
        fig_path = bundle.add(os.path.join(bundle.out_dir, "convergence.png"))
        plot_convergence(dts, errors, slope, r2, fig_path)
    bundle.summary.update({"dts": dts, "errors": errors, "slope": slope, "r2": r2})
    bundle.checks["regression_fit"] = bool(r2 >= 0.9)
    bundle.write_manifest()
    return 0 if bundle.passed else 1


def cmd_flow_identity(args) -> int:
    cfg = _load(args)
    bundle = _bundle(args, cfg)
    coeffs = cfg.build_coeffs()
    driver = _make_driver(cfg)
    t_end = cfg.times[-1]
    table = cfg.table_grid()
    flow = integrate_path(coeffs, driver, table, [t_end], substeps=cfg.substeps)
    grid = cfg.grid()
    endpoints = flow.x[~flow.diverged, 0, 0]
    samples = grid[(grid > endpoints.min()) & (grid < endpoints.max())]
    if samples.size == 0:
        lo, hi = np.percentile(endpoints, [10.0, 90.0])
        samples = np.linspace(lo, hi, 50)
    residual = round_trip_residual(flow, t_end, samples)

    def jump_field(x, z):
        return -np.einsum("kdm,m->kd", coeffs.alpha(np.atleast_2d(x)), np.atleast_1d(z))

    field = JumpVectorField(dimension=1, evaluate=lambda x, z: jump_field(x, z)[0]
                            if np.asarray(x).ndim == 1 else jump_field(x, z))
    rng = np.random.default_rng(cfg.seed)
    worst_inverse = 0.0
    for _ in range(100):
        x0 = rng.uniform(-2.0, 2.0, size=1)
        z = rng.uniform(-1.0, 1.0, size=1)
        worst_inverse = max(worst_inverse,
                            exp_map_inverse_check(field, x0, z, substeps=64))
    ok_round = residual <= args.tol
    ok_inverse = worst_inverse <= 1e-8
    print(f"round-trip residual: {residual:.3e} (tol {args.tol:g}) -> "
          f"{'pass' if ok_round else 'FAIL'}")
    print(f"jump-inverse residual: {worst_inverse:.3e} (tol 1e-08) -> "
          f"{'pass' if ok_inverse else 'FAIL'}")
    bundle.checks.update({"round_trip": bool(ok_round),
                          "jump_inverse": bool(ok_inverse)})
    bundle.summary.update({"round_trip_residual": residual,
                           "jump_inverse_residual": worst_inverse,
                           "n_samples": int(len(samples))})
    bundle.write_manifest()
    return 0 if bundle.passed else 1


def cmd_exp_map(args) -> int:
    cfg = _load(args)
    coeffs = cfg.build_coeffs()

    def evaluate(x, z):
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        out = -np.einsum("kdm,m->kd", coeffs.alpha(xs), np.atleast_1d(z))
        return out[0] if np.asarray(x).ndim == 1 else out

    field = JumpVectorField(dimension=coeffs.d, evaluate=evaluate)
    result = exp_map(field, np.array([args.x0]), np.array([args.z]),
                     substeps=args.substeps)
    print(f"endpoint: {result.endpoint[0]!r}")
    print(f"estimated_error: {result.estimated_error:.3e}")
    return 0


_COMMANDS = {
    "sample-levy": cmd_sample_levy,
    "solve": cmd_solve,
    "oracle-compare": cmd_oracle_compare,
    "convergence": cmd_convergence,
    "flow-identity": cmd_flow_identity,
    "exp-map": cmd_exp_map,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except MarcusTransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
