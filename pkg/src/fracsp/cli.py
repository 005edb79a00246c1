"""Command-line entry points: solve-q, solve, sweep, landscape, check.

Every output JSON embeds the fully resolved configuration for provenance.
Floats are serialized with shortest round-trip formatting, so re-running a
subcommand with the same config and seed produces byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics, energy, fracops, grid as gridmod, minimizer, potentials, qsolver
from .config import (ConfigError, RunConfig, apply_overrides, config_from_dict,
                     parse_config, sqrt_astar_scaled)
from .fieldio import dump_field

SUBCOMMANDS = ("solve-q", "solve", "sweep", "landscape", "check")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _payload(cfg: RunConfig, body: dict) -> dict:
    return {"config": cfg.resolved, **body}


def _solve_q(cfg: RunConfig):
    return qsolver.solve_Q(cfg.grid, cfg.params.s, cfg.params.p)


def run(subcommand: str, cfg: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    out = cfg.output_dir
    if subcommand == "solve-q":
        gs = _solve_q(cfg)
        _write_json(out / "q_summary.json", _payload(cfg, gs.summary()))
        if "fields" in cfg.output_formats:
            dump_field(gs.Q, out / "q_profile")
        return 0

    if subcommand == "solve":
        q_ref = _solve_q(cfg) if cfg.solver.seed_kind == "rescaled_Q" else None
        res = minimizer.minimize(cfg.grid, cfg.potential, cfg.params, cfg.solver,
                                 variant="full", q_ref=q_ref)
        _write_json(out / "solve_result.json", _payload(cfg, res.summary()))
        if "fields" in cfg.output_formats:
            dump_field(res.u, out / "solution")
        return 0 if res.converged else 1

    if subcommand == "landscape":
        gs = _solve_q(cfg)
        rep = potentials.analyze_landscape(cfg.potential, gs.Q, gs.a_star)
        _write_json(out / "landscape.json",
                    _payload(cfg, potentials.landscape_to_dict(rep)))
        return 0

    if subcommand == "sweep":
        gs = _solve_q(cfg)
        if cfg.sweep_a_list is None:
            print("sweep requires sweep.a_list in the config", file=sys.stderr)
            return 1
        a_list = cfg.sweep_a_list
        if cfg.sweep_a_unit == "sqrt_astar":
            a_list = sqrt_astar_scaled(a_list, gs.a_star)
        landscape = None
        if cfg.potential is not None and cfg.potential.wells:
            landscape = potentials.analyze_landscape(cfg.potential, gs.Q, gs.a_star)
        prm1 = energy.Params(cfg.params.s, cfg.params.p, a=1.0, m=1.0,
                             allow_s_outside=cfg.params.allow_s_outside)
        try:
            records = asymptotics.run_sweep(cfg.grid, cfg.potential, prm1, a_list,
                                            cfg.solver, gs, landscape=landscape)
            aborted = None
        except asymptotics.SweepAborted as exc:
            records = exc.records
            aborted = str(exc)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(asymptotics.SWEEP_COLUMNS)
            for rec in records:
                writer.writerow([repr(v) if isinstance(v, float) else v
                                 for v in rec.row()])
        body = {"a_star": gs.a_star, "aborted": aborted,
                "records": len(records)}
        if aborted is None and len(records) >= 4:
            fit = asymptotics.fit_energy_scaling(records, prm1, gs.a_star)
            body["fit"] = fit.to_dict()
            if landscape is not None:
                conc = asymptotics.check_concentration(records, landscape,
                                                       cfg.potential, cfg.grid)
                body["concentration"] = conc.to_dict()
        _write_json(out / "sweep_summary.json", _payload(cfg, body))
        return 0 if aborted is None else 1

    if subcommand == "check":
        results = diagnostic_suite(cfg)
        ok = all(r["passed"] for r in results.values())
        _write_json(out / "check_report.json",
                    _payload(cfg, {"passed": ok, "checks": results}))
        if not ok:
            failures = {k: v for k, v in results.items() if not v["passed"]}
            print(json.dumps({"failed_checks": failures}, indent=2), file=sys.stderr)
        return 0 if ok else 1

    raise ValueError(f"unknown subcommand {subcommand!r}")


def diagnostic_suite(cfg: RunConfig) -> dict:
    """Operator, profile, and gradient checks at the configured resolution.

    Covers the transform identities, the virial ratios of the computed
    profile, interpolation-constant sharpness, the linearized-kernel
    residuals, the virial integral identity, and finite-difference gradient
    agreement for all four functional variants.
    """
    g = cfg.grid
    s, p = cfg.params.s, cfg.params.p
    rng = np.random.default_rng(cfg.seed)
    checks: dict[str, dict] = {}

    def record(name: str, value: float, tol: float) -> None:
        checks[name] = {"value": float(value), "tol": float(tol),
                        "passed": bool(value < tol)}

    # transform identities on random smooth fields
    def smooth_field():
        k2 = g.k_sq()
        spec = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        import scipy.fft as sfft

        vals = np.real(sfft.ifftn(spec * np.exp(-k2)))
        return gridmod.Field(g, vals / np.max(np.abs(vals)))

    u = smooth_field()
    v = smooth_field()
    coeffs = gridmod.to_spectral(u)
    record("plancherel",
           abs(gridmod.norm_l2sq(u) - gridmod.spectral_l2sq(g, coeffs))
           / gridmod.norm_l2sq(u), 1e-12)
    rt = gridmod.from_spectral(g, coeffs)
    record("roundtrip", float(np.max(np.abs(rt.values - u.values))
                              / np.max(np.abs(u.values))), 1e-12)
    x1 = g.x1
    kx = np.pi / g.L
    mode = gridmod.Field(g, np.broadcast_to(np.cos(kx * x1)[:, None, None],
                                            g.shape).copy())
    flm = fracops.frac_laplacian(mode, s)
    record("eigenfunction", float(np.max(np.abs(flm.values - kx ** (2 * s)
                                                * mode.values))
                                  / kx ** (2 * s)), 1e-10)
    flu = fracops.frac_laplacian(u, s)
    flv = fracops.frac_laplacian(v, s)
    ip1 = g.cell_volume * float(np.sum(flu.values * v.values))
    ip2 = g.cell_volume * float(np.sum(u.values * flv.values))
    record("self_adjoint", abs(ip1 - ip2) / abs(ip1), 1e-10)
    lin = fracops.frac_laplacian(gridmod.Field(g, 2.0 * u.values - 3.0 * v.values), s)
    record("linearity", float(np.max(np.abs(lin.values - 2 * flu.values
                                            + 3 * flv.values))
                              / np.max(np.abs(lin.values))), 1e-12)

    gs = _solve_q(cfg)
    record("q_residual_rel", gs.residual / np.sqrt(gs.a_star), 1e-6)
    t1, t2 = qsolver.pohozaev_targets(s, p)
    r1, r2 = gs.pohozaev_ratios
    record("pohozaev_1", abs(r1 - t1) / t1, 0.02)
    record("pohozaev_2", abs(r2 - t2) / t2, 0.02)
    copt = energy.gn_constant(cfg.params, gs.a_star)
    record("gn_sharpness", abs(energy.gn_ratio(gs.Q, s, p) - copt) / copt, 0.02)
    kc = qsolver.linearized_kernel_check(gs, s, p)
    record("kernel_residual", max(kc.axis_residuals), 5e-2)
    record("pseudo_eigenvector", kc.pseudo_eigen_rel_err, 5e-2)
    record("virial", qsolver.virial_check(gs.Q, s), 0.02)

    # finite-difference gradient agreement, all variants
    worst = 0.0
    prm = cfg.params
    for variant in energy.VARIANTS:
        uu = smooth_field()
        vv = smooth_field()
        gr = energy.gradient(uu, cfg.potential, prm, variant)
        ip = g.cell_volume * float(np.sum(gr.values * vv.values))
        eps_fd = 1e-5
        ep = energy.energy(gridmod.Field(g, uu.values + eps_fd * vv.values),
                           cfg.potential, prm, variant).total
        em = energy.energy(gridmod.Field(g, uu.values - eps_fd * vv.values),
                           cfg.potential, prm, variant).total
        fd = (ep - em) / (4.0 * eps_fd)
        worst = max(worst, abs(ip - fd) / max(abs(ip), 1e-30))
    record("gradient_fd", worst, 1e-5)
    return checks


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracsp",
        description="Spectral solver suite for constrained fractional "
                    "Schrodinger-Poisson ground states")
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} pipeline")
        sp.add_argument("config", help="path to a TOML run configuration")
    args, extra = parser.parse_known_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2

    overrides = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            print(f"unrecognized argument: {tok}", file=sys.stderr)
            return 2
        if "=" in tok:
            path, text = tok[2:].split("=", 1)
            overrides.append((path, text))
            i += 1
        else:
            if i + 1 >= len(extra):
                print(f"missing value for override {tok}", file=sys.stderr)
                return 2
            overrides.append((tok[2:], extra[i + 1]))
            i += 2

    try:
        cfg = parse_config(args.config)
        if overrides:
            cfg = config_from_dict(apply_overrides(cfg.resolved, overrides))
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg)


if __name__ == "__main__":
    sys.exit(main())
