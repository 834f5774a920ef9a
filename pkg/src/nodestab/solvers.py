"""Explicit Runge-Kutta integration.

Fixed-step stepping is driven by Butcher tableaus (orders 1-4 shipped,
one tableau per order so the stage count equals the order); adaptive
integration uses the Dormand-Prince 5(4) embedded pair with standard
error-norm step control and cubic-Hermite dense output for sampling on a
uniform grid.

Derivative functions have signature ``f(t, x, u) -> dx/dt`` and must
accept ``x`` of shape ``(d,)`` (trailing batch axes pass through
untouched by the steppers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergenceError, EmptySignalError, StiffnessError
from .serialize import write_csv


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit s-stage Runge-Kutta method."""

    name: str
    order: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        c = np.asarray(self.c, dtype=float)
        s = b.size
        if a.shape != (s, s) or c.shape != (s,):
            raise DimensionError("tableau arrays must share the stage count")
        if np.any(np.abs(np.triu(a)) > 0):
            raise ValueError("explicit tableau requires strictly lower-triangular a")
        if abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("tableau weights must sum to 1")
        if np.max(np.abs(a.sum(axis=1) - c)) > 1e-12:
            raise ValueError("tableau nodes must satisfy c_i = sum_j a_ij")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.b.size


EULER = ButcherTableau("euler", 1, np.zeros((1, 1)), np.array([1.0]), np.zeros(1))

MIDPOINT = ButcherTableau(
    "midpoint",
    2,
    np.array([[0.0, 0.0], [0.5, 0.0]]),
    np.array([0.0, 1.0]),
    np.array([0.0, 0.5]),
)

RK3 = ButcherTableau(
    "rk3",
    3,
    np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-1.0, 2.0, 0.0]]),
    np.array([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
    np.array([0.0, 0.5, 1.0]),
)

RK4 = ButcherTableau(
    "rk4",
    4,
    np.array(
        [
            [0.0, 0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0, 0.0],
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    ),
    np.array([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]),
    np.array([0.0, 0.5, 0.5, 1.0]),
)

TABLEAUS = {t.name: t for t in (EULER, MIDPOINT, RK3, RK4)}


def tableau_for_order(order: int) -> ButcherTableau:
    for t in TABLEAUS.values():
        if t.order == order:
            return t
    raise ValueError(f"no shipped tableau of order {order}")


@dataclass
class InputSignal:
    """Sampled exogenous input with an interpolation rule.

    ``mode`` is ``"linear"`` (piecewise linear, endpoint-clamped) or
    ``"zero_order_hold"`` (latest sample at or before t).
    """

    times: np.ndarray
    values: np.ndarray
    mode: str = "linear"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.size == 0:
            raise EmptySignalError("input signal has no samples")
        if self.times.ndim != 1 or self.values.shape[0] != self.times.size:
            raise DimensionError("times and values must have matching lengths")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("signal times must be strictly increasing")
        if self.mode not in ("linear", "zero_order_hold"):
            raise ValueError(f"unknown interpolation mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def interp_input(sig: InputSignal, t: float) -> np.ndarray:
    """Input value at time t; clamps to the endpoint values outside the
    sampled range."""
    if sig is None:
        raise EmptySignalError("no input signal to interpolate")
    times, vals = sig.times, sig.values
    if sig.mode == "zero_order_hold":
        idx = int(np.searchsorted(times, t, side="right")) - 1
        return vals[min(max(idx, 0), times.size - 1)].copy()
    if t <= times[0]:
        return vals[0].copy()
    if t >= times[-1]:
        return vals[-1].copy()
    j = int(np.searchsorted(times, t, side="right")) - 1
    frac = (t - times[j]) / (times[j + 1] - times[j])
    return (1.0 - frac) * vals[j] + frac * vals[j + 1]


_EMPTY_INPUT = np.zeros(0)


def _input_at(sig, t):
    return _EMPTY_INPUT if sig is None else interp_input(sig, t)


def rk_step(tab: ButcherTableau, f, t: float, x, h: float, sig=None) -> np.ndarray:
    """One explicit Runge-Kutta step of size h from (t, x)."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.asarray(x, dtype=float)
    k = []
    for i in range(tab.stages):
        y = x
        for j in range(i):
            aij = tab.a[i, j]
            if aij != 0.0:
                y = y + (h * aij) * k[j]
        ti = t + tab.c[i] * h
        ki = np.asarray(f(ti, y, _input_at(sig, ti)), dtype=float)
        if not np.all(np.isfinite(ki)):
            raise DivergenceError(f"non-finite value in stage {i}", stage=i)
        k.append(ki)
    out = x
    for i in range(tab.stages):
        if tab.b[i] != 0.0:
            out = out + (h * tab.b[i]) * k[i]
    return out


@dataclass
class Trajectory:
    """Sampled state path: times (n,), states (n, d)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.times.size != self.states.shape[0]:
            raise DimensionError("times and states must have matching lengths")

    def __len__(self) -> int:
        return self.times.size


def integrate_fixed(
    tab: ButcherTableau,
    f,
    x0,
    sig=None,
    h: float = 0.1,
    steps: int = 0,
    t0: float = 0.0,
    divergence_limit: float | None = None,
) -> Trajectory:
    """Fixed-step rollout: steps+1 states at t0 + k h.

    Raises ``DivergenceError`` (with the failing step) on non-finite
    states, or when the state norm exceeds ``divergence_limit`` if one is
    given.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    x = np.asarray(x0, dtype=float).copy()
    times = t0 + h * np.arange(steps + 1)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for kstep in range(steps):
        try:
            x = rk_step(tab, f, times[kstep], x, h, sig)
        except DivergenceError as exc:
            raise DivergenceError(
                f"divergence at step {kstep}: {exc}", step=kstep, stage=exc.stage
            ) from exc
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at step {kstep}", step=kstep)
        if divergence_limit is not None and float(np.max(np.abs(x))) > divergence_limit:
            raise DivergenceError(
                f"state magnitude exceeded {divergence_limit:g} at step {kstep}",
                step=kstep,
            )
        out[kstep + 1] = x
    return Trajectory(times, out)


# Dormand-Prince 5(4) coefficients; row 7 equals the 5th-order weights so
# the last stage is the derivative at the accepted point (FSAL).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_DP_SAFETY = 0.9
_DP_MIN_FACTOR = 0.2
_DP_MAX_FACTOR = 5.0
_DP_MIN_STEP = 1e-12


def _hermite(theta, dt, xa, fa, xb, fb):
    t2 = theta * theta
    t3 = t2 * theta
    return (
        (2 * t3 - 3 * t2 + 1) * xa
        + (t3 - 2 * t2 + theta) * dt * fa
        + (-2 * t3 + 3 * t2) * xb
        + (t3 - t2) * dt * fb
    )


def integrate_dopri(
    f,
    x0,
    sig=None,
    t_end: float = 1.0,
    rtol: float = 1e-6,
    atol: float = 1e-8,
    sample_dt: float = 0.1,
    t0: float = 0.0,
) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration sampled on a uniform grid.

    Error per step is controlled by the scaled RMS norm with mixed
    tolerance ``atol + rtol * |x|``; accepted steps are interpolated with
    a cubic Hermite onto ``t0 + k sample_dt``.
    """
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    if rtol <= 0 or atol <= 0 or sample_dt <= 0:
        raise ValueError("tolerances and sample_dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    n_grid = int(np.floor((t_end - t0) / sample_dt + 1e-9))
    grid = t0 + sample_dt * np.arange(n_grid + 1)
    samples = np.empty((n_grid + 1, x.size))
    samples[0] = x
    next_idx = 1

    t = t0
    k1 = np.asarray(f(t, x, _input_at(sig, t)), dtype=float)
    h = (t_end - t0) / 100.0
    n_accepted = 0
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        if h < _DP_MIN_STEP:
            raise StiffnessError(
                f"step size underflow ({h:.3e}) at t = {t:.6g}; "
                "problem too stiff for the 5(4) pair"
            )
        h = min(h, t_end - t)
        k = [k1]
        for i in range(1, 7):
            y = x + h * (np.stack(k, axis=0).T @ _DP_A[i])
            ti = t + _DP_C[i] * h
            k.append(np.asarray(f(ti, y, _input_at(sig, ti)), dtype=float))
        kmat = np.stack(k, axis=0)
        x_new = x + h * (kmat.T @ _DP_B5)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(
                f"non-finite state after {n_accepted} accepted steps",
                step=n_accepted,
            )
        err_vec = h * (kmat.T @ (_DP_B5 - _DP_B4))
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if err <= 1.0:
            f_new = k[6]  # FSAL: derivative at (t + h, x_new)
            t_new = t + h
            while next_idx <= n_grid and grid[next_idx] <= t_new + 1e-12:
                theta = (grid[next_idx] - t) / h
                samples[next_idx] = _hermite(theta, h, x, k1, x_new, f_new)
                next_idx += 1
            t, x, k1 = t_new, x_new, f_new
            n_accepted += 1

        factor = _DP_MAX_FACTOR if err == 0.0 else _DP_SAFETY * err ** -0.2
        h = h * min(_DP_MAX_FACTOR, max(_DP_MIN_FACTOR, factor))
    while next_idx <= n_grid:
        samples[next_idx] = x
        next_idx += 1
    return Trajectory(grid, samples)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``t,x0,x1,...`` rows at full double precision."""
    header = ["t"] + [f"x{i}" for i in range(traj.states.shape[1])]
    rows = (
        [float(t)] + [float(v) for v in row]
        for t, row in zip(traj.times, traj.states)
    )
    write_csv(path, header, rows)
