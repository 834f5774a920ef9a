"""Dense linear algebra used by initialization and pole analysis.

Matrices are plain float64 numpy arrays in row-major layout; complex
scalars are Python ``complex``. QR factorization and general eigenvalues
delegate to LAPACK (Hessenberg reduction followed by shifted QR
iteration); Haar sampling, principal roots, and eigenvalue-multiset
utilities are implemented here.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError, DimensionError


def _as_square(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def qr_decompose(m) -> tuple[np.ndarray, np.ndarray]:
    """Full QR factorization of a square matrix: ``m = q @ r``.

    ``q`` is orthogonal, ``r`` upper triangular.
    """
    a = _as_square(m)
    q, r = np.linalg.qr(a)
    return q, r


def sample_haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d orthogonal matrix from the Haar distribution.

    QR of a standard Gaussian matrix alone is not Haar; the columns of Q
    must be rescaled by the signs of diag(R) to remove the sign bias of
    the factorization.
    """
    if d < 1:
        raise DimensionError(f"dimension must be >= 1, got {d}")
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs[np.newaxis, :]


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues (with multiplicity) of a square real matrix.

    Returns a complex array closed under conjugation.
    """
    a = _as_square(m)
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def principal_nth_root(z: complex, n: int) -> complex:
    """Principal n-th root: argument arg(z)/n with arg(z) in (-pi, pi]."""
    if n < 1:
        raise ValueError(f"root order must be >= 1, got {n}")
    z = complex(z)
    if z == 0:
        return 0j
    if z.imag == 0.0:
        # pin arg exactly to 0 or pi; atan2 on a signed zero can return -pi
        arg = 0.0 if z.real > 0 else math.pi
    else:
        arg = math.atan2(z.imag, z.real)
    mag = abs(z) ** (1.0 / n)
    theta = arg / n
    return complex(mag * math.cos(theta), mag * math.sin(theta))


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between two finite point sets in C."""
    xs = np.asarray(a, dtype=complex).ravel()
    ys = np.asarray(b, dtype=complex).ravel()
    if xs.size == 0 or ys.size == 0:
        raise ValueError("point sets must be nonempty")
    d = np.abs(xs[:, None] - ys[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def conjugate_blocks(values, tol: float = 1e-9) -> list[tuple[str, complex]]:
    """Group a conjugation-closed multiset into real and pair blocks.

    Returns entries ``("real", x)`` or ``("pair", z)`` with Im(z) > 0, in
    first-occurrence order. Raises if the set is not closed under
    conjugation (relative tolerance ``tol``).
    """
    vals = [complex(v) for v in values]
    scale = max([1.0] + [abs(v) for v in vals])
    blocks: list[tuple[str, complex]] = []
    pending: list[complex] = []
    for v in vals:
        if abs(v.imag) <= tol * scale:
            blocks.append(("real", complex(v.real, 0.0)))
            continue
        match = None
        for i, u in enumerate(pending):
            if abs(u - v.conjugate()) <= tol * scale:
                match = i
                break
        if match is None:
            pending.append(v)
        else:
            u = pending.pop(match)
            rep = u if u.imag > 0 else v
            blocks.append(("pair", rep))
    if pending:
        raise ValueError(
            f"eigenvalue set is not closed under conjugation: {pending}"
        )
    return blocks
