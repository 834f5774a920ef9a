"""Input-signal and trajectory generation for the studies.

Teachers are stability-initialized nets simulated with the adaptive 5(4)
solver; linear references are random similarity transforms of eigenvalue
block matrices rolled out with a fixed-step method. Inputs are noisy
pulse-width-modulated waveforms sampled on the trajectory grid.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from ..initializers import SIIPlan, sii_initialize_from_eigenset
from ..linalg import conjugate_blocks, sample_haar_orthogonal
from ..network import Activation, FeedforwardNet, forward
from ..solvers import (
    ButcherTableau,
    InputSignal,
    Trajectory,
    integrate_dopri,
    integrate_fixed,
)
from ..stability import (
    EigenSet,
    SamplerConfig,
    sample_stable_eigenvalues,
    sample_unstable_eigenvalues,
)


def gen_pwm_input(
    n_samples: int,
    dt: float,
    period: float,
    duty: float,
    amplitude: float = 1.0,
    noise_std: float = 0.1,
    rng: np.random.Generator | None = None,
) -> InputSignal:
    """Noisy PWM waveform sampled at k dt.

    The clean waveform is ``amplitude`` while the phase (t mod period) /
    period is below ``duty`` and 0 otherwise; i.i.d. Gaussian noise with
    std ``noise_std`` is added per sample.
    """
    if not 0.0 < duty < 1.0:
        raise ValueError("duty must lie strictly between 0 and 1")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    t = dt * np.arange(n_samples)
    phase = np.mod(t, period) / period
    w = np.where(phase < duty, amplitude, 0.0)
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy signals need an rng")
        w = w + noise_std * rng.standard_normal(n_samples)
    return InputSignal(t, w[:, None], mode="linear")


@dataclass
class LinearSystem:
    """dx/dt = a x + b u."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise DimensionError("state matrix must be square")
        if self.b.shape[0] != self.a.shape[0]:
            raise DimensionError("input matrix must have one row per state")

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    @property
    def input_dim(self) -> int:
        return self.b.shape[1]

    def deriv(self, t, x, u):
        del t
        out = x @ self.a.T
        if self.input_dim and u is not None and np.size(u):
            out = out + np.asarray(u, dtype=float) @ self.b.T
        return out


def eigenvalue_block_matrix(values) -> np.ndarray:
    """Real block-diagonal matrix with the given conjugation-closed
    spectrum: 2x2 rotation-scaling blocks for pairs, scalars for reals."""
    blocks = conjugate_blocks(values)
    d = sum(2 if kind == "pair" else 1 for kind, _ in blocks)
    out = np.zeros((d, d))
    pos = 0
    for kind, val in blocks:
        if kind == "pair":
            mu, om = val.real, val.imag
            out[pos : pos + 2, pos : pos + 2] = [[mu, om], [-om, mu]]
            pos += 2
        else:
            out[pos, pos] = val.real
            pos += 1
    return out


def make_random_linear_system(
    d: int,
    order: int,
    step: float,
    rng: np.random.Generator,
    d_u: int = 1,
    mode: str = "outside_region",
    margin: float = 0.05,
    confine_order: int | None = None,
) -> tuple[LinearSystem, EigenSet]:
    """Random linear reference with eigenvalues placed relative to the
    order-p region: block spectrum conjugated by a Haar orthogonal, input
    matrix entries ~ U(-1, 1)."""
    cfg = SamplerConfig(order=order, step=step, state_dim=d)
    if mode == "outside_region":
        eigset = sample_unstable_eigenvalues(cfg, rng, confine_order=confine_order)
    elif mode == "inside_region":
        cfg = SamplerConfig(order=order, step=step, state_dim=d, margin=margin)
        eigset = sample_stable_eigenvalues(cfg, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    core = eigenvalue_block_matrix(eigset.values)
    q = sample_haar_orthogonal(d, rng)
    a = q.T @ core @ q
    b = rng.uniform(-1.0, 1.0, size=(d, d_u))
    return LinearSystem(a, b), eigset


def make_teacher(
    state_dim: int,
    input_dim: int,
    hidden_dims,
    activation: Activation,
    order: int,
    step: float,
    rng: np.random.Generator,
    mode: str = "inside_region",
    margin: float = 0.05,
) -> tuple[FeedforwardNet, SIIPlan]:
    """Stability-initialized teacher whose poles are either inside the
    order-p region or outside it (while still continuous-time stable)."""
    cfg = SamplerConfig(order=order, step=step, state_dim=state_dim, margin=margin)
    if mode == "inside_region":
        eigset = sample_stable_eigenvalues(cfg, rng)
    elif mode == "outside_region":
        eigset = sample_unstable_eigenvalues(
            SamplerConfig(order=order, step=step, state_dim=state_dim), rng
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return sii_initialize_from_eigenset(
        eigset, state_dim, input_dim, hidden_dims, activation, rng
    )


def simulate_teacher(
    teacher: FeedforwardNet,
    x0,
    sig: InputSignal | None,
    dt: float,
    n_steps: int,
    rtol: float = 1e-6,
    atol: float = 1e-8,
) -> Trajectory:
    """Adaptive-solver rollout of a teacher net sampled at k dt."""

    def f(t, x, u):
        del t
        return forward(teacher, x, u if teacher.input_dim else None)

    return integrate_dopri(
        f, x0, sig, t_end=n_steps * dt, rtol=rtol, atol=atol, sample_dt=dt
    )


@dataclass
class Dataset:
    """Aligned (input signal, trajectory) pairs on a shared time grid."""

    sequences: list[tuple[InputSignal, Trajectory]]
    dt: float
    split: str = "train"

    def __post_init__(self):
        for sig, traj in self.sequences:
            if sig is not None and len(traj) != sig.times.size:
                raise DimensionError(
                    "input and trajectory must share the same time grid"
                )

    def __len__(self) -> int:
        return len(self.sequences)


def _draw_pwm(
    n_samples, dt, rng, period_range, duty_range, amplitude, noise_std
) -> InputSignal:
    period = rng.uniform(*period_range)
    duty = rng.uniform(*duty_range)
    return gen_pwm_input(n_samples, dt, period, duty, amplitude, noise_std, rng)


def build_teacher_dataset(
    teacher: FeedforwardNet,
    n_sequences: int,
    n_steps: int,
    dt: float,
    rng: np.random.Generator,
    split: str = "train",
    period_range=(0.5, 2.0),
    duty_range=(0.2, 0.8),
    amplitude: float = 1.0,
    noise_std: float = 0.1,
    rtol: float = 1e-6,
    atol: float = 1e-8,
) -> Dataset:
    """Ground-truth sequences from adaptive-solver teacher rollouts with
    fresh PWM inputs and initial states ~ U[0, 1)."""
    seqs = []
    for _ in range(n_sequences):
        sig = None
        if teacher.input_dim:
            sig = _draw_pwm(
                n_steps + 1, dt, rng, period_range, duty_range, amplitude, noise_std
            )
        x0 = rng.random(teacher.state_dim)
        traj = simulate_teacher(teacher, x0, sig, dt, n_steps, rtol, atol)
        seqs.append((sig, traj))
    return Dataset(seqs, dt, split)


def build_fixed_step_dataset(
    deriv,
    state_dim: int,
    input_dim: int,
    tableau: ButcherTableau,
    n_sequences: int,
    n_steps: int,
    dt: float,
    rng: np.random.Generator,
    split: str = "train",
    period_range=(0.5, 2.0),
    duty_range=(0.2, 0.8),
    amplitude: float = 1.0,
    noise_std: float = 0.1,
) -> Dataset:
    """Sequences from fixed-step rollouts of an arbitrary derivative
    function (used for linear references and exact-fit fixtures)."""
    seqs = []
    for _ in range(n_sequences):
        sig = None
        if input_dim:
            sig = _draw_pwm(
                n_steps + 1, dt, rng, period_range, duty_range, amplitude, noise_std
            )
        x0 = rng.random(state_dim)
        traj = integrate_fixed(tableau, deriv, x0, sig, h=dt, steps=n_steps)
        seqs.append((sig, traj))
    return Dataset(seqs, dt, split)


def dataset_fingerprint(ds: Dataset) -> str:
    """SHA-256 over the raw sample bytes; used to assert that paired
    training runs really saw identical data."""
    digest = hashlib.sha256()
    digest.update(np.float64(ds.dt).tobytes())
    for sig, traj in ds.sequences:
        if sig is not None:
            digest.update(sig.times.tobytes())
            digest.update(sig.values.tobytes())
        digest.update(traj.times.tobytes())
        digest.update(traj.states.tobytes())
    return digest.hexdigest()
