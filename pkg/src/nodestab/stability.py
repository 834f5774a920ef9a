"""Stability regions of explicit Runge-Kutta methods and eigenvalue
sampling inside (or outside) them.

For an order-p method with p stages the update on scalar linear dynamics
is multiplication by the truncated exponential

    R_p(z) = 1 + z + z^2/2 + ... + z^p/p!,   z = h * lambda,

so |R_p(z)| < 1 is the (strict) region-membership test used throughout.
The rejection sampler draws candidates in the scaled z-plane from
mu ~ U(-3, -0.1), omega ~ U(-3, 3), accepts on the region test, and
stores continuous-time eigenvalues z / h together with their conjugates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import network
from .errors import InfeasibleRegionError
from .linalg import eigenvalues
from .serialize import write_csv, write_json

SUPPORTED_ORDERS = (1, 2, 3, 4)

_FACTORIALS = [math.factorial(k) for k in range(max(SUPPORTED_ORDERS) + 1)]


def _check_order(p: int) -> int:
    if p not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported solver order {p}; expected one of 1..4")
    return int(p)


def stability_poly(p: int, z):
    """Truncated exponential R_p(z); accepts scalars or arrays."""
    _check_order(p)
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    term = np.ones_like(z)
    for k in range(1, p + 1):
        term = term * z / k
        out = out + term
    if out.ndim == 0:
        return complex(out)
    return out


def in_region(p: int, z, margin: float = 0.0):
    """Strict membership test |R_p(z)| < 1 - margin."""
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must lie in [0, 1)")
    r = np.abs(stability_poly(p, z))
    res = r < 1.0 - margin
    if np.ndim(res) == 0:
        return bool(res)
    return res


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the stability-region rejection sampler."""

    order: int
    step: float
    state_dim: int
    use_complex: bool = True
    margin: float = 0.05
    mu_range: tuple[float, float] = (-3.0, -0.1)
    omega_range: tuple[float, float] = (-3.0, 3.0)

    def __post_init__(self):
        _check_order(self.order)
        if self.step <= 0:
            raise ValueError("step size must be positive")
        if self.state_dim < 1:
            raise ValueError("state_dim must be >= 1")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError("margin must lie in [0, 1)")
        if self.mu_range[0] >= self.mu_range[1] or self.mu_range[1] >= 0:
            raise ValueError("mu_range must be an increasing, negative interval")


@dataclass
class EigenSet:
    """Conjugation-closed multiset of continuous-time eigenvalues tied to
    the (solver order, step size) it was sampled for."""

    values: list[complex]
    step_size: float
    solver_order: int

    def __post_init__(self):
        self.values = [complex(v) for v in self.values]

    def __len__(self) -> int:
        return len(self.values)

    def scaled(self) -> list[complex]:
        """The eigenvalues in the solver plane, z = h * lambda."""
        return [v * self.step_size for v in self.values]

    def as_pairs(self) -> list[list[float]]:
        return [[v.real, v.imag] for v in self.values]


def _draw(cfg: SamplerConfig, rng, room_for_pair: bool) -> complex:
    mu = rng.uniform(*cfg.mu_range)
    if cfg.use_complex and room_for_pair:
        omega = rng.uniform(*cfg.omega_range)
    else:
        omega = 0.0
    return complex(mu, omega)


def sample_stable_eigenvalues(cfg: SamplerConfig, rng) -> EigenSet:
    """Rejection-sample state_dim eigenvalues inside the solver region.

    Candidates are drawn and tested in the scaled plane; accepted values
    are stored as z / step (with the conjugate when complex). Complex
    draws happen only while two slots remain so conjugate closure always
    holds.
    """
    values: list[complex] = []
    while len(values) < cfg.state_dim:
        z = _draw(cfg, rng, len(values) <= cfg.state_dim - 2)
        if abs(stability_poly(cfg.order, z)) < 1.0 - cfg.margin:
            values.append(z / cfg.step)
            if z.imag != 0.0:
                values.append(z.conjugate() / cfg.step)
    return EigenSet(values, cfg.step, cfg.order)


def sample_unstable_eigenvalues(
    cfg: SamplerConfig,
    rng,
    confine_order: int | None = None,
    max_draws: int = 200_000,
) -> EigenSet:
    """Like the stable sampler but accepting the complement of the region
    (still Re < 0, so the continuous-time system stays stable).

    ``confine_order`` optionally requires candidates to remain inside a
    higher-order region, keeping data generated with that solver bounded.
    Raises ``InfeasibleRegionError`` when the admissible set within the
    sampling rectangle appears empty.
    """
    if confine_order is not None:
        _check_order(confine_order)
    values: list[complex] = []
    for _ in range(max_draws):
        if len(values) >= cfg.state_dim:
            break
        z = _draw(cfg, rng, len(values) <= cfg.state_dim - 2)
        if abs(stability_poly(cfg.order, z)) <= 1.0:
            continue
        if confine_order is not None and not in_region(confine_order, z):
            continue
        values.append(z / cfg.step)
        if z.imag != 0.0:
            values.append(z.conjugate() / cfg.step)
    if len(values) < cfg.state_dim:
        raise InfeasibleRegionError(
            f"no admissible region-excluded samples for order {cfg.order} "
            f"within {max_draws} draws"
        )
    return EigenSet(values, cfg.step, cfg.order)


@dataclass
class RegionGrid:
    """|R_p| evaluated on a rectangle of the z-plane."""

    order: int
    re: np.ndarray
    im: np.ndarray
    abs_r: np.ndarray  # shape (len(im), len(re))


def region_grid(p: int, re_range, im_range, resolution: int) -> RegionGrid:
    """Uniform grid of |R_p(z)| suitable for contouring at level 1."""
    _check_order(p)
    if resolution < 2:
        raise ValueError("resolution must be >= 2 per axis")
    re = np.linspace(re_range[0], re_range[1], resolution)
    im = np.linspace(im_range[0], im_range[1], resolution)
    z = re[None, :] + 1j * im[:, None]
    return RegionGrid(p, re, im, np.abs(stability_poly(p, z)))


def write_region_csv(grid: RegionGrid, path) -> None:
    rows = (
        [float(grid.re[i]), float(grid.im[j]), float(grid.abs_r[j, i])]
        for j in range(grid.im.size)
        for i in range(grid.re.size)
    )
    write_csv(path, ["re", "im", "absR"], rows)


@dataclass(frozen=True)
class Pole:
    """One linearized-model eigenvalue and its solver-region verdict."""

    lam: complex
    z: complex
    inside: bool


def model_poles(net: network.FeedforwardNet, h: float, p: int) -> list[Pole]:
    """Eigenvalues of the state Jacobian at the zero reference, scaled by
    the step size and classified against the order-p region.

    Uses the exact Jacobian at x = 0, u = 0 with the net's actual biases
    (trained nets have nonzero biases). The boundary is excluded: a pole
    with |R_p(h lam)| = 1 (e.g. lam = 0) is classified outside.
    """
    u0 = np.zeros(net.input_dim) if net.input_dim else None
    jac = network.jacobian_state(net, np.zeros(net.state_dim), u0)
    lams = eigenvalues(jac)
    poles = []
    for lam in lams:
        lam = complex(lam)
        z = lam * h
        poles.append(Pole(lam, z, bool(in_region(p, z))))
    return poles


def poles_to_dicts(poles: list[Pole]) -> list[dict]:
    return [
        {
            "re": p.lam.real,
            "im": p.lam.imag,
            "z_re": p.z.real,
            "z_im": p.z.imag,
            "inside": p.inside,
        }
        for p in poles
    ]


def write_poles_json(poles: list[Pole], path) -> None:
    write_json(path, poles_to_dicts(poles))
