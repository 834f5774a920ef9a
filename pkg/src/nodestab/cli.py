"""Command-line front end.

Subcommands emit plot-ready CSV/JSON plus a ``meta.json`` echoing the
resolved configuration and seed, so every run can be reproduced exactly.
Exit codes: 0 success, 1 runtime or numeric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DivergenceError
from .initializers import default_initialize, init_report, sii_initialize
from .network import Activation, forward, load_model, save_model
from .serialize import load_json, write_json
from .solvers import (
    InputSignal,
    TABLEAUS,
    integrate_fixed,
    tableau_for_order,
    write_trajectory_csv,
)
from .stability import model_poles, region_grid, write_poles_json, write_region_csv
from .experiments.studies import (
    LinearPoleConfig,
    SolverSwapConfig,
    TeacherStudentConfig,
    run_linear_pole_study,
    run_solver_swap_demo,
    run_teacher_student_study,
    write_solver_swap,
)


def _range_arg(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected LO:HI, got {text!r}"
        ) from exc
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"range {text!r} must satisfy LO < HI")
    return lo, hi


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from exc


def _out_dir(args, default_name: str) -> Path:
    out = Path(args.out) if args.out else Path("out") / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, command: str, args, config: dict,
                seed: int | None = None) -> None:
    resolved = seed if seed is not None else (
        0 if args.seed is None else args.seed
    )
    write_json(
        out / "meta.json",
        {
            "command": command,
            "seed": resolved,
            "format": args.format,
            "version": __version__,
            "config": config,
        },
    )


def _cmd_region(args) -> int:
    out = _out_dir(args, "region")
    grid = region_grid(args.order, args.re, args.im, args.res)
    if args.format == "json":
        write_json(
            out / "region.json",
            {
                "order": args.order,
                "re": grid.re.tolist(),
                "im": grid.im.tolist(),
                "absR": grid.abs_r.tolist(),
            },
        )
    else:
        write_region_csv(grid, out / "region.csv")
    _write_meta(out, "region", args, {
        "order": args.order,
        "re": list(args.re),
        "im": list(args.im),
        "res": args.res,
    })
    print(f"wrote region grid for order {args.order} to {out}")
    return 0


def _parse_dims(dims: list[int], input_dim: int) -> tuple[int, int, list[int]]:
    if len(dims) < 2:
        raise ValueError("--dims needs at least input and output sizes")
    state_dim = dims[-1]
    if dims[0] != state_dim + input_dim:
        raise ValueError(
            f"first layer size {dims[0]} must equal state_dim + input_dim "
            f"= {state_dim} + {input_dim}"
        )
    return state_dim, input_dim, dims[1:-1]


def _cmd_init(args) -> int:
    out = _out_dir(args, "init")
    seed = 0 if args.seed is None else args.seed
    state_dim, input_dim, hidden = _parse_dims(args.dims, args.input_dim)
    act = Activation(args.activation)
    rng = np.random.default_rng(seed)
    if args.method == "sii":
        net, plan = sii_initialize(
            state_dim, input_dim, hidden, act, args.order, args.step, rng,
            margin=args.margin, seed=seed,
        )
    else:
        net = default_initialize(state_dim, input_dim, hidden, act, rng)
        plan = None
    meta = {
        "seed": seed,
        "init_method": args.method,
        "solver": tableau_for_order(args.order).name,
        "step_size": args.step,
    }
    save_model(net, out / "model.json", meta=meta)
    report = init_report(args.method, net, plan, args.order, args.step, seed)
    write_json(out / "report.json", report)
    _write_meta(out, "init", args, {
        "dims": args.dims,
        "input_dim": args.input_dim,
        "activation": args.activation,
        "order": args.order,
        "step": args.step,
        "method": args.method,
        "margin": args.margin,
    })
    mismatch = report.get("max_mismatch")
    note = f", max eigenvalue mismatch {mismatch:.3e}" if mismatch is not None else ""
    print(f"wrote {args.method} model to {out}{note}")
    return 0


def _cmd_poles(args) -> int:
    out = _out_dir(args, "poles")
    net, _ = load_model(args.model)
    poles = model_poles(net, args.step, args.order)
    write_poles_json(poles, out / "poles.json")
    _write_meta(out, "poles", args, {
        "model": str(args.model),
        "order": args.order,
        "step": args.step,
    })
    inside = sum(1 for p in poles if p.inside)
    print(f"{inside}/{len(poles)} poles inside the order-{args.order} region; "
          f"wrote {out / 'poles.json'}")
    return 0


def _load_input_csv(path) -> InputSignal:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return InputSignal(data[:, 0], data[:, 1:], mode="linear")


def _cmd_simulate(args) -> int:
    out = _out_dir(args, "simulate")
    net, _ = load_model(args.model)
    sig = _load_input_csv(args.input) if args.input else None

    def f(t, x, u):
        del t
        return forward(net, x, u if net.input_dim else None)

    x0 = np.asarray(args.x0, dtype=float)
    traj = integrate_fixed(
        TABLEAUS[args.solver], f, x0, sig, h=args.step, steps=args.steps,
        divergence_limit=args.divergence_limit,
    )
    write_trajectory_csv(traj, out / "trajectory.csv")
    _write_meta(out, "simulate", args, {
        "model": str(args.model),
        "solver": args.solver,
        "step": args.step,
        "steps": args.steps,
        "x0": list(map(float, args.x0)),
        "input": str(args.input) if args.input else None,
        "divergence_limit": args.divergence_limit,
    })
    print(f"wrote {traj.times.size}-sample trajectory to {out / 'trajectory.csv'}")
    return 0


_STUDY_CONFIGS = {
    "teacher-student": TeacherStudentConfig,
    "linear-poles": LinearPoleConfig,
    "solver-swap": SolverSwapConfig,
}


def _cmd_study(args) -> int:
    out = _out_dir(args, args.kind)
    cfg_cls = _STUDY_CONFIGS[args.kind]
    overrides = {}
    if args.config:
        obj = load_json(args.config)
        # meta.json files nest the config under "config"
        overrides = obj.get("config", obj)
    cfg = cfg_cls.from_dict(overrides)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.seeds is not None and hasattr(cfg, "seeds"):
        cfg.seeds = args.seeds

    if args.kind == "teacher-student":
        result = run_teacher_student_study(cfg, out_dir=out)
        summary = result.summary
        print(f"{len(result.records)} runs, {len(result.failures)} failures")
        for method, stats in summary["methods"].items():
            med = stats.get("median")
            med_txt = f"{med:.6g}" if med is not None else "n/a"
            print(f"  {method}: median min test loss {med_txt}")
    elif args.kind == "linear-poles":
        result = run_linear_pole_study(cfg, out_dir=out)
        learned = result.learned()
        confined = sum(1 for r in learned if r["absR"] <= 1.05)
        total = len(learned)
        share = 100.0 * confined / total if total else float("nan")
        print(f"{total} learned poles, {confined} ({share:.1f}%) with |R| <= 1.05; "
              f"{len(result.failures)} failures")
    else:
        result = run_solver_swap_demo(
            cfg.eigenvalues, cfg.step, cfg.steps, cfg.perturbation, cfg.solvers
        )
        write_solver_swap(result, out)
        for order in sorted(result.solvers):
            info = result.solvers[order]
            print(
                f"  order {order}: growth/step measured {info['measured_growth']:.6f}"
                f" predicted {info['predicted_growth']:.6f}"
            )
    _write_meta(out, "study", args, {
        "kind": args.kind,
        **{k: (list(v) if isinstance(v, tuple) else v)
           for k, v in vars(cfg).items()},
    }, seed=cfg.master_seed)
    print(f"study artifacts in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodestab",
        description="Runge-Kutta stability regions and stability-informed "
                    "initialization for neural ODEs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="master RNG seed (default 0; for studies a "
                            "config file's master_seed wins unless given)")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("region", help="stability-region grid of |R_p(z)|")
    common(p)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--re", type=_range_arg, default=(-3.5, 1.5),
                   help="real-axis range LO:HI")
    p.add_argument("--im", type=_range_arg, default=(-3.2, 3.2),
                   help="imaginary-axis range LO:HI")
    p.add_argument("--res", type=int, default=201, help="grid points per axis")
    p.set_defaults(func=_cmd_region)

    p = sub.add_parser("init", help="initialize a state-transition net")
    common(p)
    p.add_argument("--dims", type=_int_list, required=True,
                   help="full layer chain, e.g. 5,32,32,4 "
                        "(first = state+input, last = state)")
    p.add_argument("--input-dim", type=int, default=0)
    p.add_argument("--activation", default="elu",
                   choices=("relu", "elu", "tanh", "identity"))
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--method", choices=("sii", "default"), default="sii")
    p.add_argument("--margin", type=float, default=0.05)
    p.set_defaults(func=_cmd_init)

    p = sub.add_parser("poles", help="linearized poles of a saved model")
    common(p)
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--order", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--step", type=float, required=True)
    p.set_defaults(func=_cmd_poles)

    p = sub.add_parser("simulate", help="fixed-step rollout of a saved model")
    common(p)
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--solver", choices=tuple(TABLEAUS), default="rk4")
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--x0", type=_float_list, required=True,
                   help="initial state, comma-separated")
    p.add_argument("--input", type=str, default=None,
                   help="CSV of t,u0,u1,... samples (linear interpolation)")
    p.add_argument("--divergence-limit", type=float, default=1e8)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("study", help="run a benchmark study")
    common(p)
    p.add_argument("--kind", choices=tuple(_STUDY_CONFIGS), required=True)
    p.add_argument("--config", type=str, default=None,
                   help="JSON config (a previous run's meta.json also works)")
    p.add_argument("--seeds", type=int, default=None)
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        step = f" at step {exc.step}" if exc.step is not None else ""
        print(f"error: trajectory diverged{step}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
