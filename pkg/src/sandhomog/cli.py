"""Command line driver: ``sandhomog <command> --config FILE --out DIR``.

Exit codes: 0 success, 1 numerical failure (or violated hypotheses for
``validate``), 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import cell_solver as cs
from . import eps_solver as es
from . import twoscale as ts
from .coeffs import validate_hypotheses
from .config import ConfigError, RunConfig, load_config
from .errors import ContractError, SolverError
from .grid import save_field

COMMANDS = ("validate", "solve", "cell", "homogenize", "twoscale", "corrector")


def _diag_csv(run, path):
    cols = ["t", "l2", "h1", "mass", "boundary_flux", "identity_gap"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(len(run.diagnostics["t"])):
            w.writerow([repr(float(run.diagnostics[c][i])) for c in cols])


def _profile_files(profile, out):
    grid = profile.grid
    from . import grid as fv

    with open(os.path.join(out, "profile_meta.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "residual", "threshold_flag", "l2", "h1", "mass"])
        for k, th in enumerate(profile.thetas):
            save_field(os.path.join(out, f"profile_{k:04d}.csv"), grid, profile.values[k])
            w.writerow([
                repr(float(th)), repr(float(profile.periodic_residual)), int(profile.threshold_flags[k]),
                repr(fv.l2_norm(grid, profile.values[k])), repr(fv.h1_seminorm(grid, profile.values[k])),
                repr(fv.mass(grid, profile.values[k])),
            ])


def _eps_problem(cfg: RunConfig, objs, epsilon=None):
    law, forcing, consts, grid = objs
    consts = cfg.constants(epsilon)
    return es.EpsProblem(
        grid, consts, law, forcing, cfg.initial_field(grid), T_final=cfg.T_final, dt=cfg.dt,
        g_boundary=cfg.boundary_data(grid), store_every=cfg.store_every,
    )


def _cell_problem(cfg: RunConfig, objs, limit=False):
    law, forcing, consts, grid = objs
    g = cfg.boundary_data(grid)
    if callable(g):
        g = g(cfg.cell_t)
    return cs.CellProblem(
        grid, consts, law, forcing, t=cfg.cell_t, tau=cfg.cell_tau, theta_steps=cfg.theta_steps,
        g_boundary=g, tol_periodic=cfg.tol_periodic, max_periods=cfg.max_periods, limit=limit,
        theta_scheme=cfg.theta_scheme,
    )


def cmd_validate(cfg, objs, out):
    law, forcing, consts, _ = objs
    rep = validate_hypotheses(law, forcing, cfg.sample_density, consts=consts)
    with open(os.path.join(out, "validate.txt"), "w") as fh:
        fh.write("\n".join(rep.lines()) + "\n")
    summary = {"ok": rep.ok, "violations": len(rep.violations), "g_thr_tilde": rep.g_thr_tilde}
    return (0 if rep.ok else 1), summary


def cmd_solve(cfg, objs, out):
    run = es.solve(_eps_problem(cfg, objs))
    for k, (t, z) in enumerate(zip(run.times, run.snapshots)):
        save_field(os.path.join(out, f"snapshot_{k:05d}.csv"), run.grid, z)
    _diag_csv(run, os.path.join(out, "diagnostics.csv"))
    d = run.diagnostics
    summary = {
        "steps": int(len(d["t"]) - 1),
        "dt": run.dt,
        "sup_l2": float(np.max(d["l2"])),
        "final_l2": float(d["l2"][-1]),
        "max_identity_gap": float(np.max(d["identity_gap"])),
        "identity_ok": bool(np.max(d["identity_gap"]) <= 1e-10),
    }
    return 0, summary


def cmd_cell(cfg, objs, out):
    p = _cell_problem(cfg, objs)
    summary = {}
    prof = None
    if cfg.mu_ladder:
        prof = cs.continue_mu_to_zero(p, cfg.mu_ladder)
        summary["mu_increments"] = list(map(float, prof.increments))
    elif p.consts.mu > 0:
        prof = cs.solve_mu_nu(p)
    if cfg.nu_ladder:
        prof = cs.continue_nu_to_zero(p, cfg.nu_ladder)
        summary["nu_increments"] = list(map(float, prof.increments))
    if prof is None:
        prof = cs.solve_periodic(p)
    summary["continuation_converged"] = prof.norms.get("continuation_converged")
    summary["norms"] = cs.norm_certificates(prof)
    summary["periodic_residual"] = float(prof.periodic_residual)
    summary["periods"] = int(prof.periods)
    _profile_files(prof, out)
    return 0, summary


def cmd_homogenize(cfg, objs, out):
    p = _cell_problem(cfg, objs, limit=True)
    summary = {}
    if cfg.regime == "long":
        thr = cs.threshold_set(p.consts, p.law, p.forcing, (p.t,), p.thetas, cfg.g_thr_tilde)
        prof = cs.solve_homogenized_long(p, thr)
        summary["threshold_nodes"] = int(prof.threshold_flags.sum())
        summary["max_elliptic_residual"] = float(np.max(prof.elliptic_residuals))
        summary["g_thr_tilde"] = thr.g_thr_tilde
    else:
        prof = cs.solve_homogenized_short(p)
        summary["periods"] = int(prof.periods)
    summary["periodic_residual"] = float(prof.periodic_residual)
    summary["norms"] = cs.norm_certificates(prof)
    _profile_files(prof, out)
    return 0, summary


def _ladder(cfg):
    if len(cfg.eps_ladder) < 3:
        raise ConfigError(f"eps_ladder needs at least 3 entries, got {len(cfg.eps_ladder)}")
    return cfg.eps_ladder


def cmd_twoscale(cfg, objs, out):
    ladder = _ladder(cfg)
    rep = ts.convergence_study(_eps_problem(cfg, objs), ts.default_battery(), ladder, cfg.theta_steps)
    ts.write_twoscale_csv(rep, os.path.join(out, "twoscale_report.csv"))
    return 0, rep.summary()


def cmd_corrector(cfg, objs, out):
    ladder = _ladder(cfg)
    template = _eps_problem(cfg, objs)
    if cfg.corrector_source == "synthetic":
        rep = ts.synthetic_corrector_study(template, ladder, cfg.theta_steps)
    else:
        rep = ts.corrector_study(template, ladder, theta_steps=cfg.theta_steps)
    ts.write_corrector_csv(rep, os.path.join(out, "corrector_report.csv"))
    return 0, rep.summary()


HANDLERS = {
    "validate": cmd_validate,
    "solve": cmd_solve,
    "cell": cmd_cell,
    "homogenize": cmd_homogenize,
    "twoscale": cmd_twoscale,
    "corrector": cmd_corrector,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="sandhomog", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=None, help="output directory (default: [run] out)")
        p.add_argument("--eps", type=float, default=None, help="override [model] epsilon")
        p.add_argument("--ladder", default=None, help="override [model] eps_ladder, comma separated")
    return ap


def run(argv=None):
    """Run one command; returns ``(exit_code, summary)``."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return (2 if exc.code else 0), {}
    try:
        cfg = load_config(args.config)
        if args.eps is not None:
            cfg.epsilon = args.eps
        if args.ladder is not None:
            cfg.eps_ladder = tuple(float(v) for v in args.ladder.split(",") if v.strip())
        objs = cfg.validate()
    except (ConfigError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2, {}
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    try:
        code, summary = HANDLERS[args.command](cfg, objs, out)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2, {}
    except (SolverError, ContractError) as err:
        hist = getattr(err, "history", None)
        if hist:
            with open(os.path.join(out, "residual_history.txt"), "w") as fh:
                fh.write("\n".join(repr(float(h)) for h in hist) + "\n")
        step = getattr(err, "step", None)
        print(f"numerical failure{f' at step {step}' if step else ''}: {err}", file=sys.stderr)
        summary = {"command": args.command, "failed": True, "error": str(err)}
        ts.write_summary(summary, os.path.join(out, "summary.json"))
        return 1, summary
    except ValueError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2, {}
    summary = {"command": args.command, **summary}
    ts.write_summary(summary, os.path.join(out, "summary.json"))
    return code, summary


def main(argv=None):
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
