"""Command line entry point: ``springreg <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .cloudio import load_instance
from .core import RegistrationError, build_body_model, pose_from_state, rotation_geodesic_error
from .dynamics import SimConfig, initial_state, simulate
from .equilibria import (enumerate_equilibria, make_equilateral_triangle, make_square,
                         symmetry_torque_residual)
from .harness import DEFAULT_SEED, MonteCarloConfig, run_equilibria_study, run_simulation_study
from .horn import horn_solve, objective_value
from .robust import RobustSpringModel, inactive_springs, robust_simulate


def _pose_json(pose):
    return {"rotation": pose.rotation.tolist(), "translation": pose.translation.tolist()}


def _energy_json(e):
    return {"Vk": e.kinetic, "Vp": e.potential, "V": e.total, "Vdot": e.rate}


def _sim_config(args):
    return SimConfig(dt=args.dt, stop_threshold=args.stop, max_steps=args.max_steps,
                     record_every=args.record_every)


def _add_pair(p):
    p.add_argument("--model", required=True, type=Path, help="model cloud file (x y z [sigma])")
    p.add_argument("--scene", required=True, type=Path, help="scene cloud file")


def _add_sim(p):
    p.add_argument("--mu", type=float, default=1.0, help="viscous damping coefficient")
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--stop", type=float, default=1e-4, help="stop when |ds/dt| falls below this")
    p.add_argument("--max-steps", type=int, default=200_000)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--csv", type=Path, help="write the sampled trajectory here")


def _write_trajectory_csv(path, traj, dt, R_horn, active=False):
    cols = ["step", "time", "Vk", "Vp", "V", "Vdot", "rot_err_vs_horn_rad", "com_norm"]
    if active:
        cols.append("active_springs")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for j, (t, st, e) in enumerate(zip(traj.times, traj.states, traj.energies)):
            row = [int(round(t / dt)), repr(float(t)), repr(e.kinetic), repr(e.potential),
                   repr(e.total), repr(e.rate), repr(rotation_geodesic_error(st.rotation, R_horn)),
                   repr(float(np.linalg.norm(st.com_position)))]
            if active:
                row.append(traj.active_springs[j])
            w.writerow(row)


def cmd_horn(args):
    inst = load_instance(args.model, args.scene)
    pose = horn_solve(inst)
    obj = objective_value(inst, pose)
    if args.json:
        print(json.dumps({**_pose_json(pose), "objective": obj}, indent=2))
    else:
        for row in pose.rotation:
            print(" ".join(f"{v: .12f}" for v in row))
        print(" ".join(f"{v: .12f}" for v in pose.translation))
        print(f"objective {obj:.12g}")
    return 0


def cmd_simulate(args):
    inst = load_instance(args.model, args.scene)
    model = build_body_model(inst, args.mu)
    traj = simulate(model, initial_state(model), _sim_config(args))
    horn = horn_solve(inst)
    if args.csv:
        _write_trajectory_csv(args.csv, traj, args.dt, horn.rotation)
    pose = pose_from_state(traj.final_state, model)
    print(json.dumps({
        "pose": _pose_json(pose),
        "termination": traj.termination.value,
        "steps": traj.steps,
        "final_energies": _energy_json(traj.energies[-1]),
        "rotation_error_vs_horn_rad": rotation_geodesic_error(pose.rotation, horn.rotation),
    }, indent=2))
    return 0


def cmd_equilibria(args):
    inst = load_instance(args.model, args.scene)
    model = build_body_model(inst, args.mu)
    out = []
    for c in enumerate_equilibria(model):
        out.append({
            "rotation": c.rotation.tolist(),
            "torque_residual": c.torque_residual,
            "eigenvalues": [[z.real, z.imag] for z in c.eigenvalues],
            "unstable_count": c.unstable_count,
            "rotation_error_vs_horn_rad": c.rotation_error_vs_horn,
        })
    print(json.dumps(out, indent=2 if args.json else None))
    return 0


def cmd_symmetry(args):
    make = make_equilateral_triangle if args.shape == "triangle" else make_square
    rng = np.random.default_rng(args.seed)
    thetas = ([args.theta] if args.theta is not None else []) + list(rng.uniform(0, 2 * np.pi, args.samples))
    k = 2.0 / args.sigma**2
    rows = []
    for th in thetas:
        res = symmetry_torque_residual(make(args.l, th, args.sigma))
        rows.append({"theta": th, "torque_residual": res, "relative": res / (k * args.l**2)})
    print(json.dumps({"shape": args.shape, "l": args.l, "k": k, "samples": rows}, indent=2))
    return 0


def cmd_robust(args):
    inst = load_instance(args.model, args.scene)
    base = build_body_model(inst, args.mu)
    betas = None if args.beta is None else np.full(base.n, args.beta)
    model = RobustSpringModel.from_body(base, args.cbar, betas)
    traj = robust_simulate(model, initial_state(base), _sim_config(args))
    horn = horn_solve(inst)
    if args.csv:
        _write_trajectory_csv(args.csv, traj, args.dt, horn.rotation, active=True)
    pose = pose_from_state(traj.final_state, base)
    summary = {
        "pose": _pose_json(pose),
        "termination": traj.termination.value,
        "steps": traj.steps,
        "final_energies": _energy_json(traj.energies[-1]),
        "active_springs": traj.active_springs[-1],
    }
    if args.outlier_report:
        summary["outliers"] = inactive_springs(model, traj.final_state).tolist()
    print(json.dumps(summary, indent=2))
    return 0


def cmd_montecarlo(args):
    runs = args.runs or (50 if args.study == "equilibria" else 100)
    cfg = MonteCarloConfig(runs=runs, n_points=args.points, sigma=args.sigma, seed=args.seed,
                           out_dir=args.out, mu=args.mu, workers=args.workers)
    study = run_equilibria_study if args.study == "equilibria" else run_simulation_study
    records = study(cfg)
    failed = [r for r in records if not r.passed]
    errs = np.array([r.rotation_error for r in records])
    print(json.dumps({
        "study": args.study,
        "runs": len(records),
        "failed_runs": [{"run_index": r.run_index, "failures": r.failures} for r in failed],
        "max_rotation_error_deg": float(np.degrees(np.nanmax(errs))),
        "total_wall_time_s": sum(r.wall_time for r in records),
        "out_dir": str(args.out) if args.out else None,
    }, indent=2))
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="springreg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("horn", help="closed-form weighted registration")
    _add_pair(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_horn)

    p = sub.add_parser("simulate", help="register by simulating the spring-damper dynamics")
    _add_pair(p)
    _add_sim(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibria", help="enumerate and certify equilibria")
    _add_pair(p)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--json", action="store_true", help="pretty-print JSON")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("symmetry", help="torque residuals of symmetric equilibrium continua")
    p.add_argument("--shape", choices=("triangle", "square"), required=True)
    p.add_argument("--theta", type=float)
    p.add_argument("--samples", type=int, default=0, help="additional uniformly random angles")
    p.add_argument("--l", type=float, default=1.0, help="center-to-vertex length")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("robust", help="simulate with saturated springs")
    _add_pair(p)
    _add_sim(p)
    p.add_argument("--cbar", type=float, required=True, help="saturation level")
    p.add_argument("--beta", type=float, help="common spring noise scale (default: per-point sigma)")
    p.add_argument("--outlier-report", action="store_true", help="list springs cut at the end")
    p.set_defaults(func=cmd_robust)

    p = sub.add_parser("montecarlo", help="seeded Monte Carlo studies")
    p.add_argument("--study", choices=("equilibria", "simulation"), required=True)
    p.add_argument("--runs", type=int)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RegistrationError, ValueError, OSError) as exc:
        print(f"springreg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
