"""Stability-informed initialization (SII) of feedforward state-transition
networks, and the default uniform baseline.

SII places the eigenvalues of the zero-reference linearization exactly:
eigenvalues are rejection-sampled inside the chosen solver's stability
region, split into per-layer factors via n-th roots, laid out as
block-diagonal cores (a 2x2 rotation-scaling block per conjugate pair, a
scalar per real eigenvalue), zero-padded to the layer shapes, and mixed
with Haar-orthogonal factors so that the product of the weight matrices
recovers the sampled spectrum while every entry is nonzero with
probability 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .linalg import (
    conjugate_blocks,
    eigenvalues,
    hausdorff_distance,
    principal_nth_root,
    sample_haar_orthogonal,
)
from .network import Activation, FeedforwardNet
from .stability import EigenSet, SamplerConfig, sample_stable_eigenvalues

DEFAULT_BIAS_BOUND = 1e-4


@dataclass(frozen=True)
class _Block:
    """One diagonal block of the eigenvalue factors.

    Real eigenvalues with even depth have no real n-th root; those use
    the magnitude root in every layer and flip the sign once, in the last
    layer, so the layer product still equals the eigenvalue.
    """

    size: int  # 1 for a real eigenvalue, 2 for a conjugate pair
    entry: complex  # per-layer root factor (real part only for size 1)
    flip_last: bool = False


@dataclass
class SIIPlan:
    """Everything needed to deterministically rebuild the weight factors."""

    eigenset: EigenSet
    state_dim: int
    input_dim: int
    hidden_dims: tuple[int, ...]
    activation: Activation
    root_factors: list[complex]
    zeta: float
    bias_bound: float
    seed: int | None
    input_coupling: np.ndarray | None
    blocks: list[_Block]

    @property
    def depth(self) -> int:
        return len(self.hidden_dims) + 1

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.state_dim + self.input_dim, *self.hidden_dims, self.state_dim)


def _real_root(lam: float, n: int) -> tuple[float, bool]:
    """Per-layer scalar factor for a real eigenvalue and whether the last
    layer negates it."""
    mag = abs(lam) ** (1.0 / n)
    if lam >= 0:
        return mag, False
    if n % 2 == 1:
        return -mag, False
    return mag, True


def make_sii_plan(
    eigenset: EigenSet,
    state_dim: int,
    input_dim: int,
    hidden_dims,
    activation: Activation,
    rng: np.random.Generator,
    bias_bound: float = DEFAULT_BIAS_BOUND,
    seed: int | None = None,
) -> SIIPlan:
    """Compute root factors, blocks, and the input-coupling draw."""
    hidden_dims = tuple(int(d) for d in hidden_dims)
    if len(eigenset) != state_dim:
        raise DimensionError(
            f"eigenset has {len(eigenset)} values for state_dim {state_dim}"
        )
    if any(d < state_dim for d in hidden_dims):
        raise DimensionError(
            "every hidden dimension must be at least the state dimension"
        )
    n = len(hidden_dims) + 1
    root_factors = [principal_nth_root(v, n) for v in eigenset.values]
    zeta = float(np.mean([abs(r.real) for r in root_factors]))

    blocks: list[_Block] = []
    for kind, val in conjugate_blocks(eigenset.values):
        if kind == "pair":
            root = principal_nth_root(val, n)
            blocks.append(_Block(2, root))
        else:
            entry, flip = _real_root(val.real, n)
            blocks.append(_Block(1, complex(entry, 0.0), flip))

    coupling = None
    if input_dim > 0:
        coupling = rng.uniform(-zeta, zeta, size=(state_dim, input_dim))
    return SIIPlan(
        eigenset,
        state_dim,
        input_dim,
        hidden_dims,
        activation,
        root_factors,
        zeta,
        bias_bound,
        seed,
        coupling,
        blocks,
    )


def build_lambda(plan: SIIPlan, layer_index: int) -> np.ndarray:
    """Eigenvalue factor for one layer (1-based index).

    The top-left state-by-state core is block diagonal; the rest is zero
    padding up to the layer shape. The first layer additionally carries
    the uniform input-coupling columns in the rows of the eigen-blocks.
    """
    n = plan.depth
    if not 1 <= layer_index <= n:
        raise DimensionError(f"layer index {layer_index} outside 1..{n}")
    dims = plan.layer_dims
    rows, cols = dims[layer_index], dims[layer_index - 1]
    lam = np.zeros((rows, cols))
    pos = 0
    for blk in plan.blocks:
        if blk.size == 2:
            mu, om = blk.entry.real, blk.entry.imag
            lam[pos : pos + 2, pos : pos + 2] = [[mu, om], [-om, mu]]
        else:
            val = blk.entry.real
            if blk.flip_last and layer_index == n:
                val = -val
            lam[pos, pos] = val
        pos += blk.size
    if layer_index == 1 and plan.input_dim > 0:
        lam[: plan.state_dim, plan.state_dim :] = plan.input_coupling
    return lam


def build_from_plan(plan: SIIPlan, rng: np.random.Generator) -> FeedforwardNet:
    """Assemble weights from the plan's factors and fresh Haar mixers,
    then draw small uniform biases."""
    n = plan.depth
    lambdas = [build_lambda(plan, i) for i in range(1, n + 1)]
    if n == 1:
        weights = [lambdas[0]]
    else:
        mixers = [sample_haar_orthogonal(d, rng) for d in plan.hidden_dims]
        weights = [mixers[0] @ lambdas[0]]
        for i in range(1, n - 1):
            weights.append(mixers[i] @ lambdas[i] @ mixers[i - 1].T)
        weights.append(lambdas[-1] @ mixers[-1].T)
    kappa = plan.activation.kappa
    if kappa != 1.0:
        # cancel the activation slopes of the n-1 hidden nonlinearities
        for i in range(n - 1):
            weights[i] = weights[i] / kappa
    eps = plan.bias_bound
    dims = plan.layer_dims
    biases = [rng.uniform(-eps, eps, size=dims[i + 1]) for i in range(n)]
    return FeedforwardNet(
        plan.state_dim,
        plan.input_dim,
        plan.hidden_dims,
        weights,
        biases,
        plan.activation,
    )


def sii_initialize_from_eigenset(
    eigenset: EigenSet,
    state_dim: int,
    input_dim: int,
    hidden_dims,
    activation: Activation,
    rng: np.random.Generator,
    bias_bound: float = DEFAULT_BIAS_BOUND,
    seed: int | None = None,
) -> tuple[FeedforwardNet, SIIPlan]:
    plan = make_sii_plan(
        eigenset, state_dim, input_dim, hidden_dims, activation, rng,
        bias_bound=bias_bound, seed=seed,
    )
    return build_from_plan(plan, rng), plan


def sii_initialize(
    state_dim: int,
    input_dim: int,
    hidden_dims,
    activation: Activation,
    order: int,
    step: float,
    rng: np.random.Generator,
    use_complex: bool = True,
    margin: float = 0.05,
    bias_bound: float = DEFAULT_BIAS_BOUND,
    seed: int | None = None,
) -> tuple[FeedforwardNet, SIIPlan]:
    """Stability-informed initialization for the given solver order/step.

    Returns the net together with the plan that records the sampled
    eigenvalues (the plan is what ``verify_linearization`` checks
    against).
    """
    cfg = SamplerConfig(
        order=order,
        step=step,
        state_dim=state_dim,
        use_complex=use_complex,
        margin=margin,
    )
    eigenset = sample_stable_eigenvalues(cfg, rng)
    return sii_initialize_from_eigenset(
        eigenset, state_dim, input_dim, hidden_dims, activation, rng,
        bias_bound=bias_bound, seed=seed,
    )


def default_initialize(
    state_dim: int,
    input_dim: int,
    hidden_dims,
    activation: Activation,
    rng: np.random.Generator,
) -> FeedforwardNet:
    """Uniform baseline: layer entries ~ U(-1/sqrt(d_in), 1/sqrt(d_in))."""
    hidden_dims = tuple(int(d) for d in hidden_dims)
    dims = (state_dim + input_dim, *hidden_dims, state_dim)
    weights, biases = [], []
    for i in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[i])
        weights.append(rng.uniform(-bound, bound, size=(dims[i + 1], dims[i])))
        biases.append(rng.uniform(-bound, bound, size=dims[i + 1]))
    return FeedforwardNet(state_dim, input_dim, hidden_dims, weights, biases,
                          activation)


def linearized_product(net: FeedforwardNet) -> np.ndarray:
    """kappa^(n-1) W_n ... W_1 restricted to the state columns: the exact
    zero-bias linearization of the net."""
    prod = net.weights[0][:, : net.state_dim]
    for w in net.weights[1:]:
        prod = w @ prod
    kappa = net.activation.kappa
    if kappa != 1.0:
        prod = prod * kappa ** (net.depth - 1)
    return prod


def verify_linearization(net: FeedforwardNet, eigenset: EigenSet) -> float:
    """Relative Hausdorff distance between the eigenvalues of the
    zero-bias linearization and the target set."""
    achieved = eigenvalues(linearized_product(net))
    target = np.asarray(eigenset.values, dtype=complex)
    scale = float(np.max(np.abs(target))) if len(target) else 0.0
    dist = hausdorff_distance(achieved, target)
    return dist / scale if scale > 0 else dist


def init_report(
    method: str,
    net: FeedforwardNet,
    plan: SIIPlan | None,
    order: int | None,
    step: float | None,
    seed: int | None,
) -> dict:
    """Initialization report: target vs achieved eigenvalues (SII only)."""
    report = {
        "method": method,
        "seed": seed,
        "solver_order": order,
        "step_size": step,
    }
    achieved = eigenvalues(linearized_product(net))
    order_key = np.lexsort((achieved.imag, achieved.real))
    report["achieved_eigenvalues"] = [
        [float(v.real), float(v.imag)] for v in achieved[order_key]
    ]
    if plan is not None:
        report["target_eigenvalues"] = plan.eigenset.as_pairs()
        report["max_mismatch"] = verify_linearization(net, plan.eigenset)
    return report
