"""Experiment driver: constants, pressure scans, correlation scans, KS
solves, and the invariant verification suite, all from one TOML config."""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config
from .correlation import (CONVERGENCE_CSV_HEADER, KSTruncation, RadiusError,
                          convergence_report, ks_series_discrete,
                          rho_dilute_direct)
from .energy import (CoarseEdgeError, check_superstability, stability_constants)
from .estimate import Estimate
from .lattice import CubeGrid, Region, uniform_points_in_region
from .partition import (PRESSURE_CSV_HEADER, epsilon1, pressures,
                        z_grand, z_partition_of_unity, z_plus_direct,
                        sample_moments, z_dilute, z_plus)
from .potential import activity_radius, mayer_c_beta

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2

CONSTANTS_CSV_HEADER = ("a,b,v0,A,B_local,C_d,a_m,B_global,c_beta,z_max")


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _write_lines(path: str, lines) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


def _csv(path: str, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _write_lines(path, lines)


def _seed_for(cfg: ExperimentConfig, tag: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, tag]).generate_state(1)[0])


def cmd_constants(cfg: ExperimentConfig, out: str) -> int:
    rows, lines = [], []
    c_beta = mayer_c_beta(cfg.potential, cfg.ensemble.beta).value
    for a in cfg.sweep:
        grid = CubeGrid(a, cfg.potential.dimension)
        c = stability_constants(cfg.potential, grid)
        z_max = activity_radius(cfg.potential, cfg.ensemble.beta,
                                c.B_global, c_beta)
        rows.append((a, c.b, c.v0, c.A, c.B_local, c.C_d, c.a_m,
                     c.B_global, c_beta, z_max))
        lines.append(
            f"a={_fmt(a)} b={_fmt(c.b)} v0={_fmt(c.v0)} A={_fmt(c.A)} "
            f"B_local={_fmt(c.B_local)} C_d={_fmt(c.C_d)} a_m={_fmt(c.a_m)} "
            f"B_global={_fmt(c.B_global)} c_beta={_fmt(c_beta)} "
            f"z_max={_fmt(z_max)}")
    _csv(os.path.join(out, "constants.csv"), CONSTANTS_CSV_HEADER, rows)
    _write_lines(os.path.join(out, "report.txt"), lines)
    for line in lines:
        print(line)
    return EXIT_OK


def cmd_pressure_scan(cfg: ExperimentConfig, out: str) -> int:
    regions = cfg.regions()
    consts = {r.grid.a: stability_constants(cfg.potential, r.grid)
              for r in regions}
    rows = pressures(cfg.potential, regions, cfg.ensemble, consts,
                     cfg.n_max, cfg.samples, _seed_for(cfg, 1))
    _csv(os.path.join(out, "pressure-scan.csv"), PRESSURE_CSV_HEADER,
         [(r.a, r.n_cubes, r.volume, r.p_full, r.p_full_err, r.p_minus,
           r.p_minus_err, r.p_plus, r.p_plus_err, r.eps1, r.bound)
          for r in rows])
    lines, failed = [], False
    for r in rows:
        ok = r.bound_ok
        failed |= not ok
        lines.append(f"a={_fmt(r.a)} p_plus={_fmt(r.p_plus)} "
                     f"bound={_fmt(r.bound)} {'PASS' if ok else 'FAIL'}")
    gaps = [r.p_plus for r in rows]
    if len(gaps) >= 2:
        trend = all(x > y for x, y in zip(gaps, gaps[1:]))
        failed |= not trend
        lines.append("pressure gap strictly decreasing: "
                     + ("PASS" if trend else "FAIL"))
    _write_lines(os.path.join(out, "report.txt"), lines)
    for line in lines:
        print(line)
    return EXIT_ASSERT if failed else EXIT_OK


def _radius_guard(cfg: ExperimentConfig) -> None:
    from .energy import global_bounds
    gb = global_bounds(cfg.potential)
    c_beta = mayer_c_beta(cfg.potential, cfg.ensemble.beta).value
    z_max = activity_radius(cfg.potential, cfg.ensemble.beta, gb.B_global,
                            c_beta)
    if cfg.ensemble.z >= z_max and not cfg.override_radius:
        raise RadiusError(
            f"z={cfg.ensemble.z} is at or above the series radius "
            f"e^(-2 beta B - 1)/C(beta) = {z_max:.6g}; set "
            "override_radius=true to proceed")


def cmd_corr_scan(cfg: ExperimentConfig, out: str) -> int:
    if not cfg.eta:
        raise ConfigError("corr-scan needs [eta] points")
    _radius_guard(cfg)
    from .energy import global_bounds
    b_global = global_bounds(cfg.potential).B_global
    rows, notes = convergence_report(
        cfg.potential, cfg.ensemble, list(cfg.eta), cfg.regions(),
        cfg.n_max, cfg.samples, _seed_for(cfg, 2), b_global)
    _csv(os.path.join(out, "corr-scan.csv"), CONVERGENCE_CSV_HEADER,
         [(r.a, r.rho_full, r.rho_full_err, r.rho_minus, r.rho_minus_err,
           r.diff, r.remainder_R, r.z_ratio) for r in rows])
    lines, failed = list(notes), False
    if len(rows) >= 2:
        rem_ok = all(x.remainder_R >= y.remainder_R
                     for x, y in zip(rows, rows[1:]))
        ratio_ok = all(x.z_deficit >= y.z_deficit
                       for x, y in zip(rows, rows[1:]))
        failed = not (rem_ok and ratio_ok)
        lines.append("remainder nonincreasing: "
                     + ("PASS" if rem_ok else "FAIL"))
        lines.append("Z ratio trend toward 1: "
                     + ("PASS" if ratio_ok else "FAIL"))
    _write_lines(os.path.join(out, "report.txt"), lines)
    for line in lines:
        print(line)
    return EXIT_ASSERT if failed else EXIT_OK


KS_CSV_HEADER = "a,eta_size,order,ks_minus,ks_tol,direct,direct_err,diff"


def cmd_ks(cfg: ExperimentConfig, out: str) -> int:
    if not cfg.eta:
        raise ConfigError("ks needs [eta] points")
    _radius_guard(cfg)
    from .energy import global_bounds
    B = global_bounds(cfg.potential).B_global
    trunc = KSTruncation(order=cfg.order, cutoff_radius=cfg.cutoff_radius,
                         quad_budget=cfg.nodes, xi=cfg.xi)
    rows, lines, failed = [], [], False
    for region in cfg.regions():
        est = ks_series_discrete(cfg.potential, region, cfg.ensemble,
                                 list(cfg.eta), trunc, B,
                                 override_radius=cfg.override_radius)
        direct = rho_dilute_direct(cfg.potential, region, cfg.ensemble,
                                   list(cfg.eta)) \
            if region.n_cubes <= 24 else Estimate(math.nan)
        diff = est.value - direct.value
        rows.append((region.grid.a, len(cfg.eta), cfg.order, est.value,
                     est.trunc_bound, direct.value, direct.trunc_bound, diff))
        if not math.isnan(direct.value):
            ok = abs(diff) <= est.trunc_bound + direct.trunc_bound + 1e-15
            failed |= not ok
            lines.append(f"a={_fmt(region.grid.a)} |ks-direct|="
                         f"{_fmt(abs(diff))} tol={_fmt(est.trunc_bound)} "
                         f"{'PASS' if ok else 'FAIL'}")
    _csv(os.path.join(out, "ks.csv"), KS_CSV_HEADER, rows)
    _write_lines(os.path.join(out, "report.txt"), lines)
    for line in lines:
        print(line)
    return EXIT_ASSERT if failed else EXIT_OK


def cmd_verify(cfg: ExperimentConfig, out: str) -> int:
    lines, failed = [], False
    regions = cfg.regions()
    if all(r.n_cubes == 0 for r in regions):
        lines.append("PASS vacuous: empty region, nothing to verify")
        _write_lines(os.path.join(out, "report.txt"), lines)
        print(lines[0])
        return EXIT_OK

    consts = {}
    for region in regions:
        try:
            consts[region.grid.a] = stability_constants(cfg.potential,
                                                        region.grid)
            lines.append(f"PASS constants a={_fmt(region.grid.a)}")
        except (CoarseEdgeError, ValueError) as exc:
            lines.append(f"FAIL constants a={_fmt(region.grid.a)}: {exc}")
            failed = True

    rng = np.random.default_rng([_seed_for(cfg, 3)])
    n_audit, worst = 0, math.inf
    for region in regions:
        c = consts.get(region.grid.a)
        if c is None or region.n_cubes == 0:
            continue
        for _ in range(500):
            n_pts = int(rng.poisson(2.0 * region.n_cubes))
            if n_pts < 1:
                continue
            gamma = uniform_points_in_region(region, n_pts, rng)
            margin = check_superstability(cfg.potential, c, region.grid,
                                          gamma)
            if not math.isinf(margin):
                worst = min(worst, margin)
            n_audit += 1
    if n_audit:
        ok = worst >= 0.0
        failed |= not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} superstability audit: "
                     f"{n_audit} configurations, worst margin {_fmt(worst)}")

    small = next((r for r in regions if 0 < r.n_cubes <= 6), None)
    if small is None and regions and regions[0].n_cubes > 0:
        g = regions[0].grid
        small = Region.box(g, (4,))
    if small is not None and small.grid.a in consts:
        c = consts[small.grid.a]
        ens = cfg.ensemble
        seed = _seed_for(cfg, 4)
        table = sample_moments(cfg.potential, small, ens, cfg.n_max,
                               cfg.samples, seed)
        zf = z_grand(cfg.potential, small, ens, cfg.n_max, cfg.samples,
                     seed, c.B_global, table=table)
        zm = z_dilute(cfg.potential, small, ens, mode="enumerate")
        zp = z_plus_direct(cfg.potential, small, ens, c,
                           max(20, cfg.samples // 20), seed,
                           n_cap=cfg.dense_cap)
        resid = abs(math.log(zf.value) - math.log(zm.value)
                    - math.log(zp.value))
        tol = 3.0 * zf.stat_err / zf.value + zf.trunc_bound / zf.value \
            + zm.trunc_bound / zm.value + zp.total_err / zp.value
        ok = resid <= tol
        failed |= not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} factorization: residual "
                     f"{_fmt(resid)} tol {_fmt(tol)}")

    # KS depth bound and pi normalization on the first usable region
    probe = next((r for r in regions if r.n_cubes >= 3), None)
    if probe is not None:
        trunc = KSTruncation(order=1, quad_budget=cfg.nodes, xi=cfg.xi)
        a = probe.grid.a
        eta3 = [(i + 0.5) * a - 0.5 * a + 0.1 * a for i in range(3)]
        try:
            est = ks_series_discrete(cfg.potential, probe, cfg.ensemble,
                                     eta3, trunc, override_radius=True)
            ok = est.value == 0.0
            failed |= not ok
            lines.append(f"{'PASS' if ok else 'FAIL'} KS depth bound: "
                         f"order 1 at |eta|=3 -> {_fmt(est.value)}")
        except NotImplementedError:
            lines.append("PASS KS depth bound: skipped (d > 1 lattice)")
        from .correlation import _pi_weights
        w = rng.standard_normal(5)
        pi = _pi_weights(cfg.ensemble.beta, 0.0, w)
        ok = abs(float(np.sum(pi)) - 1.0) < 1e-12
        failed |= not ok
        lines.append(f"{'PASS' if ok else 'FAIL'} pi weights normalized: "
                     f"sum={_fmt(float(np.sum(pi)))}")

    _write_lines(os.path.join(out, "report.txt"), lines)
    for line in lines:
        print(line)
    return EXIT_ASSERT if failed else EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "pressure-scan": cmd_pressure_scan,
    "corr-scan": cmd_corr_scan,
    "ks": cmd_ks,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quasilattice",
        description="quasi-lattice gas engine: constants, pressure and "
                    "correlation scans, Kirkwood-Salzburg solves")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="TOML experiment file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--override-radius", action="store_true",
                        help="run even above the series convergence radius")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = _replace(cfg, seed=args.seed)
        if args.override_radius:
            cfg = _replace(cfg, override_radius=True)
        out = args.out if args.out is not None else cfg.out
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, RadiusError, CoarseEdgeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _replace(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    import dataclasses
    return dataclasses.replace(cfg, **kw)


if __name__ == "__main__":
    sys.exit(main())
