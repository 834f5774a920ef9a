"""The three desk-scale studies and their on-disk artifact layout.

Outputs follow one scheme: per-run directories ``seed_###/<method>/`` with
``model.json`` (best net), ``losses.csv`` (test-loss curve), and
``poles.json`` (linearized poles of the best net), plus a ``summary.csv``
with one row per (seed, method). Studies are deterministic given the
master seed; per-seed RNG streams are derived so seeds can be reordered
or parallelized without changing results.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..initializers import default_initialize, sii_initialize
from ..network import Activation, FeedforwardNet, save_model
from ..serialize import write_csv, write_json
from ..solvers import integrate_fixed, tableau_for_order
from ..stability import in_region, model_poles, poles_to_dicts, stability_poly
from .data import (
    Dataset,
    build_fixed_step_dataset,
    build_teacher_dataset,
    dataset_fingerprint,
    eigenvalue_block_matrix,
    make_random_linear_system,
    make_teacher,
)
from .training import TrainConfig, TrainResult, train_student

SUMMARY_HEADER = ["seed", "init_method", "min_test_loss", "epoch_of_min",
                  "diverged_windows"]


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def _filter_fields(cls, obj: dict) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    return {k: v for k, v in obj.items() if k in names}


def _tupled(value):
    return tuple(value) if isinstance(value, (list, tuple)) else value


@dataclass
class TeacherStudentConfig:
    """Paired SII-vs-default regression on trajectories of a stability-
    initialized teacher net."""

    state_dim: int = 4
    input_dim: int = 1
    teacher_hidden: tuple[int, ...] = (32, 32)
    student_hidden: tuple[int, ...] = (32, 32)
    activation: str = "elu"
    teacher_mode: str = "inside_region"
    solver_order: int = 1
    step: float = 0.1
    dt: float = 0.1
    n_steps: int = 100
    n_train: int = 20
    n_test: int = 5
    period_range: tuple[float, float] = (0.5, 2.0)
    duty_range: tuple[float, float] = (0.2, 0.8)
    amplitude: float = 1.0
    noise_std: float = 0.1
    margin: float = 0.05
    epochs: int = 300
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 10
    horizon: int | None = None
    datagen_rtol: float = 1e-6
    datagen_atol: float = 1e-8
    master_seed: int = 0
    seeds: int = 30

    def __post_init__(self):
        self.teacher_hidden = _tupled(self.teacher_hidden)
        self.student_hidden = _tupled(self.student_hidden)
        self.period_range = _tupled(self.period_range)
        self.duty_range = _tupled(self.duty_range)

    @classmethod
    def from_dict(cls, obj: dict) -> "TeacherStudentConfig":
        return cls(**_filter_fields(cls, obj))

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            solver_order=self.solver_order,
            step=self.step,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            batch_size=self.batch_size,
            horizon=self.horizon,
            seed=seed,
        )


@dataclass
class StudyResult:
    """Per-seed records plus per-method summary statistics."""

    records: list[dict]
    failures: list[dict]
    summary: dict
    fingerprints: dict

    def method_losses(self, method: str) -> list[float]:
        return [
            r["min_test_loss"] for r in self.records if r["init_method"] == method
        ]


def _summarize(records: list[dict], failures: list[dict]) -> dict:
    methods = sorted({r["init_method"] for r in records})
    out = {"failed_seeds": len(failures), "methods": {}}
    for m in methods:
        losses = np.array(
            [r["min_test_loss"] for r in records if r["init_method"] == m]
        )
        finite = losses[np.isfinite(losses)]
        stats = {
            "runs": int(losses.size),
            "non_finite": int(losses.size - finite.size),
        }
        if finite.size:
            stats["median"] = float(np.median(finite))
            stats["q1"] = float(np.percentile(finite, 25))
            stats["q3"] = float(np.percentile(finite, 75))
        out["methods"][m] = stats
    return out


def write_summary_csv(records: list[dict], path) -> None:
    rows = [
        [
            r["seed"],
            r["init_method"],
            float(r["min_test_loss"]),
            r["epoch_of_min"],
            r["diverged_windows"],
        ]
        for r in sorted(records, key=lambda r: (r["seed"], r["init_method"]))
    ]
    write_csv(path, SUMMARY_HEADER, rows)


def _write_run_artifacts(
    out_dir: Path,
    seed: int,
    method: str,
    result: TrainResult,
    order: int,
    step: float,
) -> None:
    run_dir = out_dir / f"seed_{seed:03d}" / method
    run_dir.mkdir(parents=True, exist_ok=True)
    save_model(
        result.best_net,
        run_dir / "model.json",
        meta={
            "seed": seed,
            "init_method": method,
            "solver": tableau_for_order(order).name,
            "step_size": step,
        },
    )
    write_csv(
        run_dir / "losses.csv",
        ["epoch", "test_loss"],
        ([e, float(v)] for e, v in enumerate(result.loss_curve)),
    )
    write_json(
        run_dir / "poles.json",
        poles_to_dicts(model_poles(result.best_net, step, order)),
    )


def _record(seed: int, method: str, result: TrainResult) -> dict:
    return {
        "seed": seed,
        "init_method": method,
        "min_test_loss": result.min_test_loss,
        "epoch_of_min": result.epoch_of_min,
        "diverged_windows": result.diverged_windows,
        "loss_curve": result.loss_curve,
    }


def run_teacher_student_study(
    cfg: TeacherStudentConfig,
    seeds: int | None = None,
    out_dir=None,
) -> StudyResult:
    """Train one SII and one default student per seed on identical data.

    Per-seed failures are recorded and skipped; the summary reports their
    count. Writes the artifact tree when ``out_dir`` is given.
    """
    n_seeds = cfg.seeds if seeds is None else seeds
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    act = Activation(cfg.activation)
    out_path = Path(out_dir) if out_dir is not None else None
    records: list[dict] = []
    failures: list[dict] = []
    fingerprints: dict = {}
    for seed in range(n_seeds):
        try:
            teacher, _ = make_teacher(
                cfg.state_dim, cfg.input_dim, cfg.teacher_hidden, act,
                cfg.solver_order, cfg.step, _rng(cfg.master_seed, seed, 0),
                mode=cfg.teacher_mode, margin=cfg.margin,
            )
            data_rng = _rng(cfg.master_seed, seed, 1)
            common = dict(
                n_steps=cfg.n_steps, dt=cfg.dt, rng=data_rng,
                period_range=cfg.period_range, duty_range=cfg.duty_range,
                amplitude=cfg.amplitude, noise_std=cfg.noise_std,
                rtol=cfg.datagen_rtol, atol=cfg.datagen_atol,
            )
            train_ds = build_teacher_dataset(
                teacher, cfg.n_train, split="train", **common
            )
            test_ds = build_teacher_dataset(
                teacher, cfg.n_test, split="test", **common
            )
            fingerprints[seed] = {
                "train": dataset_fingerprint(train_ds),
                "test": dataset_fingerprint(test_ds),
            }
        except Exception as exc:  # noqa: BLE001 - per-seed isolation
            failures.append({"seed": seed, "stage": "setup", "error": repr(exc)})
            continue

        students = {}
        try:
            students["sii"], _ = sii_initialize(
                cfg.state_dim, cfg.input_dim, cfg.student_hidden, act,
                cfg.solver_order, cfg.step, _rng(cfg.master_seed, seed, 2),
                margin=cfg.margin,
            )
        except Exception as exc:  # noqa: BLE001
            failures.append({"seed": seed, "stage": "sii-init", "error": repr(exc)})
        students["default"] = default_initialize(
            cfg.state_dim, cfg.input_dim, cfg.student_hidden, act,
            _rng(cfg.master_seed, seed, 3),
        )

        for method in sorted(students):
            try:
                result = train_student(
                    students[method], train_ds, test_ds, cfg.train_config(seed)
                )
            except Exception as exc:  # noqa: BLE001
                failures.append(
                    {"seed": seed, "stage": method, "error": repr(exc)}
                )
                continue
            records.append(_record(seed, method, result))
            if out_path is not None:
                _write_run_artifacts(
                    out_path, seed, method, result, cfg.solver_order, cfg.step
                )

    summary = _summarize(records, failures)
    if out_path is not None:
        write_summary_csv(records, out_path / "summary.csv")
        write_json(out_path / "study.json", {
            "summary": summary,
            "failures": failures,
            "fingerprints": fingerprints,
        })
    return StudyResult(records, failures, summary, fingerprints)


@dataclass
class LinearPoleConfig:
    """Learned-pole placement when the reference dynamics are outside the
    training solver's stability region."""

    state_dim: int = 3
    input_dim: int = 1
    student_hidden: tuple[int, ...] = (32,)
    activation: str = "elu"
    solvers: tuple[int, ...] = (1, 2, 3)
    step: float = 0.1
    dt: float = 0.1
    n_steps: int = 100
    n_train: int = 20
    n_test: int = 5
    datagen_order: int = 4
    period_range: tuple[float, float] = (0.5, 2.0)
    duty_range: tuple[float, float] = (0.2, 0.8)
    amplitude: float = 1.0
    noise_std: float = 0.1
    epochs: int = 300
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 10
    horizon: int | None = None
    master_seed: int = 0
    seeds: int = 20

    def __post_init__(self):
        self.student_hidden = _tupled(self.student_hidden)
        self.solvers = _tupled(self.solvers)
        self.period_range = _tupled(self.period_range)
        self.duty_range = _tupled(self.duty_range)

    @classmethod
    def from_dict(cls, obj: dict) -> "LinearPoleConfig":
        return cls(**_filter_fields(cls, obj))

    def train_config(self, order: int, seed: int) -> TrainConfig:
        return TrainConfig(
            solver_order=order,
            step=self.step,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            optimizer=self.optimizer,
            batch_size=self.batch_size,
            horizon=self.horizon,
            seed=seed,
        )


POLES_HEADER = ["solver_order", "seed", "kind", "re", "im", "z_re", "z_im",
                "absR", "inside"]


@dataclass
class PoleStudyResult:
    """Learned and reference pole rows plus per-solver training records."""

    rows: list[dict]
    records: dict
    failures: list[dict]

    def learned(self, order: int | None = None) -> list[dict]:
        return [
            r for r in self.rows
            if r["kind"] == "learned"
            and (order is None or r["solver_order"] == order)
        ]


def _pole_row(order: int, seed: int, kind: str, lam: complex, step: float) -> dict:
    z = lam * step
    return {
        "solver_order": order,
        "seed": seed,
        "kind": kind,
        "re": lam.real,
        "im": lam.imag,
        "z_re": z.real,
        "z_im": z.imag,
        "absR": abs(stability_poly(order, z)),
        "inside": bool(in_region(order, z)),
    }


def run_linear_pole_study(
    cfg: LinearPoleConfig,
    seeds: int | None = None,
    out_dir=None,
) -> PoleStudyResult:
    """Per solver and seed: a linear reference with poles outside that
    solver's region (kept inside the data-generation solver's region so
    the ground truth stays bounded), data from fixed-step rollouts, one
    default-initialized student, and the best model's poles."""
    n_seeds = cfg.seeds if seeds is None else seeds
    if n_seeds < 1:
        raise ValueError("need at least one seed")
    act = Activation(cfg.activation)
    datagen_tab = tableau_for_order(cfg.datagen_order)
    out_path = Path(out_dir) if out_dir is not None else None
    rows: list[dict] = []
    records: dict = {order: [] for order in cfg.solvers}
    failures: list[dict] = []
    for order in cfg.solvers:
        for seed in range(n_seeds):
            try:
                system, eigset = make_random_linear_system(
                    cfg.state_dim, order, cfg.step,
                    _rng(cfg.master_seed, order, seed, 0),
                    d_u=cfg.input_dim, mode="outside_region",
                    confine_order=cfg.datagen_order,
                )
                data_rng = _rng(cfg.master_seed, order, seed, 1)
                common = dict(
                    tableau=datagen_tab, n_steps=cfg.n_steps, dt=cfg.dt,
                    rng=data_rng, period_range=cfg.period_range,
                    duty_range=cfg.duty_range, amplitude=cfg.amplitude,
                    noise_std=cfg.noise_std,
                )
                train_ds = build_fixed_step_dataset(
                    system.deriv, cfg.state_dim, cfg.input_dim,
                    n_sequences=cfg.n_train, split="train", **common,
                )
                test_ds = build_fixed_step_dataset(
                    system.deriv, cfg.state_dim, cfg.input_dim,
                    n_sequences=cfg.n_test, split="test", **common,
                )
                student = default_initialize(
                    cfg.state_dim, cfg.input_dim, cfg.student_hidden, act,
                    _rng(cfg.master_seed, order, seed, 2),
                )
                result = train_student(
                    student, train_ds, test_ds, cfg.train_config(order, seed)
                )
            except Exception as exc:  # noqa: BLE001 - per-seed isolation
                failures.append(
                    {"solver_order": order, "seed": seed, "error": repr(exc)}
                )
                continue
            for pole in model_poles(result.best_net, cfg.step, order):
                rows.append(_pole_row(order, seed, "learned", pole.lam, cfg.step))
            for lam in eigset.values:
                rows.append(_pole_row(order, seed, "reference", lam, cfg.step))
            records[order].append(_record(seed, "default", result))
            if out_path is not None:
                _write_run_artifacts(
                    out_path / f"p{order}", seed, "default", result, order,
                    cfg.step,
                )
    if out_path is not None:
        write_csv(
            out_path / "poles.csv",
            POLES_HEADER,
            (
                [r[k] for k in POLES_HEADER]
                for r in sorted(
                    rows,
                    key=lambda r: (r["solver_order"], r["seed"], r["kind"],
                                   r["re"], r["im"]),
                )
            ),
        )
        for order in cfg.solvers:
            write_summary_csv(records[order], out_path / f"p{order}" / "summary.csv")
        write_json(out_path / "study.json", {"failures": failures})
    return PoleStudyResult(rows, records, failures)


@dataclass
class SolverSwapConfig:
    """Fixed-step response of one linear system under two solvers."""

    eigenvalues: tuple = ((-2.1, 24.0), (-2.1, -24.0))
    step: float = 0.1
    steps: int = 60
    perturbation: float = 0.01
    solvers: tuple[int, ...] = (4, 1)
    master_seed: int = 0

    def __post_init__(self):
        self.eigenvalues = tuple(tuple(p) for p in self.eigenvalues)
        self.solvers = _tupled(self.solvers)

    @classmethod
    def from_dict(cls, obj: dict) -> "SolverSwapConfig":
        return cls(**_filter_fields(cls, obj))


@dataclass
class SolverSwapResult:
    """Per-solver trajectories, growth factors, and pole flags."""

    eigenvalues: list[complex]
    step: float
    solvers: dict  # order -> dict with trajectory, ratios, growth, flags


def run_solver_swap_demo(
    eigvals,
    step: float,
    steps: int = 60,
    perturbation: float = 0.01,
    solvers=(4, 1),
) -> SolverSwapResult:
    """Simulate a small perturbation of a linear system with the given
    (conjugation-closed, left-half-plane) poles under each solver.

    Reports per-step norm amplification, the measured growth (last-step
    ratio), the spectral prediction max |R_p(h lam)|, and per-pole region
    membership.
    """
    lams = [complex(v[0], v[1]) if not isinstance(v, complex) else v
            for v in eigvals]
    if any(v.real >= 0 for v in lams):
        raise ValueError("demo poles must lie strictly in the left half-plane")
    a = eigenvalue_block_matrix(lams)
    d = a.shape[0]
    x0 = perturbation * np.ones(d) / np.sqrt(d)

    def f(t, x, u):
        del t, u
        return x @ a.T

    out: dict = {}
    for order in solvers:
        tab = tableau_for_order(order)
        traj = integrate_fixed(tab, f, x0, None, h=step, steps=steps)
        norms = np.linalg.norm(traj.states, axis=1)
        ratios = norms[1:] / norms[:-1]
        r_vals = [abs(stability_poly(order, lam * step)) for lam in lams]
        out[order] = {
            "trajectory": traj,
            "ratios": ratios,
            "measured_growth": float(ratios[-1]),
            "predicted_growth": float(max(r_vals)),
            "poles": [
                {
                    "re": lam.real,
                    "im": lam.imag,
                    "z_re": (lam * step).real,
                    "z_im": (lam * step).imag,
                    "abs_r": float(r),
                    "inside": bool(in_region(order, lam * step)),
                }
                for lam, r in zip(lams, r_vals)
            ],
        }
    return SolverSwapResult(lams, step, out)


def write_solver_swap(result: SolverSwapResult, out_dir) -> None:
    from ..solvers import write_trajectory_csv

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    rows = []
    pole_rows = []
    for order in sorted(result.solvers):
        info = result.solvers[order]
        name = tableau_for_order(order).name
        write_trajectory_csv(info["trajectory"], out_path / f"trajectory_{name}.csv")
        rows.append(
            [
                name,
                order,
                float(info["predicted_growth"]),
                float(info["measured_growth"]),
                sum(1 for p in info["poles"] if p["inside"]),
                len(info["poles"]),
            ]
        )
        for p in info["poles"]:
            pole_rows.append(
                [name, float(p["re"]), float(p["im"]), float(p["z_re"]),
                 float(p["z_im"]), float(p["abs_r"]), p["inside"]]
            )
    write_csv(
        out_path / "swap_summary.csv",
        ["solver", "order", "predicted_growth", "measured_growth",
         "poles_inside", "poles_total"],
        rows,
    )
    write_csv(
        out_path / "poles.csv",
        ["solver", "re", "im", "z_re", "z_im", "absR", "inside"],
        pole_rows,
    )
