"""Training of student nets through the unrolled fixed-step solver.

Gradients are exact reverse-mode: the adjoint of every Runge-Kutta stage
is chained through the network's backward pass, so the loss gradient is
the true derivative of the discretized rollout (no continuous adjoint
approximation). Windows whose rollout leaves the representable range are
skipped and counted; an epoch aborts if more than half its windows
diverge.

Window loss is the summed squared error over all predicted samples; a
batch averages window losses over its non-diverged members.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, DivergenceError
from ..network import FeedforwardNet, Gradients, forward_cached, vjp_cached
from ..solvers import ButcherTableau, tableau_for_order
from .data import Dataset

DEFAULT_DIVERGENCE_LIMIT = 1e8


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    solver_order: int = 1
    step: float = 0.1
    epochs: int = 300
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    horizon: int | None = None  # steps per training window; None = full sequence
    batch_size: int = 10
    seed: int = 0
    divergence_limit: float = DEFAULT_DIVERGENCE_LIMIT

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.step <= 0:
            raise ValueError("epochs, batch_size, and step must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainResult:
    """Outcome of ``train_student``.

    ``loss_curve[e]`` is the test loss before any update (e = 0) and
    after epoch e; ``best_net`` is the snapshot at the minimum.
    """

    net: FeedforwardNet
    best_net: FeedforwardNet
    loss_curve: list[float]
    min_test_loss: float
    epoch_of_min: int
    diverged_windows: int


def _pack(ds: Dataset):
    """Stack a dataset onto shared arrays: inputs (S, n, d_u) or None,
    states (S, n, d_x)."""
    times = ds.sequences[0][1].times
    states = np.stack([traj.states for _, traj in ds.sequences])
    sigs = [sig for sig, _ in ds.sequences]
    if sigs[0] is None:
        return times, None, states, "linear"
    for sig, traj in ds.sequences:
        if sig.times.shape != times.shape or not np.allclose(sig.times, times):
            raise DimensionError("all sequences must share one time grid")
    inputs = np.stack([sig.values for sig in sigs])
    return times, inputs, states, sigs[0].mode


def _stage_input_fn(inputs, seq_ids, starts, substeps, mode):
    """Vectorized per-window input interpolation at stage times.

    Stage times sit at (k_sub + c_i) / substeps grid units past each
    window start, so the grid index offset and blend weight are shared by
    every window in the batch.
    """
    if inputs is None:
        return lambda k_sub, c_i: None

    def u_at(k_sub: int, c_i: float):
        pos = (k_sub + c_i) / substeps
        base = int(np.floor(pos))
        frac = pos - base
        idx = starts + base
        lo = inputs[seq_ids, idx]
        if mode == "zero_order_hold" or frac == 0.0:
            return lo
        return (1.0 - frac) * lo + frac * inputs[seq_ids, idx + 1]

    return u_at


def _zero_rows(arrays, dead):
    for arr in arrays:
        arr[dead] = 0.0


def rollout_batch(
    net: FeedforwardNet,
    tab: ButcherTableau,
    h: float,
    x0: np.ndarray,
    u_at,
    n_sub: int,
    divergence_limit: float,
    keep_caches: bool = True,
):
    """Batched fixed-step rollout returning all states, the per-stage
    backward caches, and the per-window alive mask.

    Windows that produce non-finite values or exceed the divergence limit
    are zeroed out and marked dead; their caches are sanitized so the
    backward pass stays finite.
    """
    B = x0.shape[0]
    alive = np.ones(B, dtype=bool)
    xs = np.empty((n_sub + 1, B, net.state_dim))
    xs[0] = x0
    caches: list[list] = []
    x = x0.copy()
    for k in range(n_sub):
        ks: list[np.ndarray] = []
        step_caches = []
        for i in range(tab.stages):
            y = x
            for j in range(i):
                aij = tab.a[i, j]
                if aij != 0.0:
                    y = y + (h * aij) * ks[j]
            u = u_at(k, float(tab.c[i]))
            xu = y if u is None else np.concatenate([y, u], axis=1)
            out, cache = forward_cached(net, xu)
            dead = ~np.all(np.isfinite(out), axis=1)
            if dead.any():
                alive &= ~dead
            if not alive.all():
                out[~alive] = 0.0
                acts, pre = cache
                _zero_rows(acts, ~alive)
                _zero_rows(pre, ~alive)
            ks.append(out)
            if keep_caches:
                step_caches.append(cache)
        x_new = x
        for i in range(tab.stages):
            if tab.b[i] != 0.0:
                x_new = x_new + (h * tab.b[i]) * ks[i]
        bad = ~np.all(np.isfinite(x_new), axis=1)
        bad |= np.max(np.abs(np.where(np.isfinite(x_new), x_new, 0.0)), axis=1) > divergence_limit
        if bad.any():
            alive &= ~bad
        x_new[~alive] = 0.0
        xs[k + 1] = x_new
        x = x_new
        if keep_caches:
            caches.append(step_caches)
    return xs, caches, alive


def window_loss_and_grads(
    net: FeedforwardNet,
    tab: ButcherTableau,
    h: float,
    x0: np.ndarray,
    u_at,
    targets: np.ndarray,
    substeps: int = 1,
    divergence_limit: float = DEFAULT_DIVERGENCE_LIMIT,
):
    """Loss and exact parameter gradients for a batch of windows.

    ``targets`` has shape (B, H, d): ground truth at sample steps 1..H.
    The loss is the summed squared error per window, averaged over alive
    windows; dead windows contribute nothing.

    Returns ``(loss, grads, alive)``.
    """
    B, horizon, d = targets.shape
    n_sub = horizon * substeps
    xs, caches, alive = rollout_batch(
        net, tab, h, x0, u_at, n_sub, divergence_limit, keep_caches=True
    )
    n_alive = int(alive.sum())
    grads = Gradients.zeros_like(net)
    if n_alive == 0:
        return 0.0, grads, alive

    sample_pos = {(j + 1) * substeps: j for j in range(horizon)}
    diffs = {}
    loss = 0.0
    for pos, j in sample_pos.items():
        diff = (xs[pos] - targets[:, j, :]) * alive[:, None]
        diffs[pos] = diff
        loss += float(np.sum(diff * diff))
    loss /= n_alive

    g = np.zeros((B, d))
    scale = 2.0 / n_alive
    for k in range(n_sub, 0, -1):
        if k in diffs:
            g = g + scale * diffs[k]
        step_caches = caches[k - 1]
        dy: list[np.ndarray | None] = [None] * tab.stages
        for i in range(tab.stages - 1, -1, -1):
            dk = (h * tab.b[i]) * g
            for l in range(i + 1, tab.stages):
                ali = tab.a[l, i]
                if ali != 0.0:
                    dk = dk + (h * ali) * dy[l]
            stage_grads, dxu = vjp_cached(net, step_caches[i], dk)
            dy[i] = dxu[:, : net.state_dim]
            grads.add_(stage_grads)
        for i in range(tab.stages):
            g = g + dy[i]
    return loss, grads, alive


def evaluate_loss(
    net: FeedforwardNet,
    tab: ButcherTableau,
    h: float,
    x0: np.ndarray,
    u_at,
    targets: np.ndarray,
    substeps: int = 1,
    divergence_limit: float = DEFAULT_DIVERGENCE_LIMIT,
) -> float:
    """Mean over windows of the summed squared error; a diverged window
    makes the result infinite."""
    B, horizon, _ = targets.shape
    n_sub = horizon * substeps
    xs, _, alive = rollout_batch(
        net, tab, h, x0, u_at, n_sub, divergence_limit, keep_caches=False
    )
    if not alive.all():
        return float("inf")
    pred = xs[substeps::substeps]  # (H, B, d) at sample steps 1..H
    err = pred.transpose(1, 0, 2) - targets
    return float(np.mean(np.sum(err * err, axis=(1, 2))))


class _Optimizer:
    def __init__(self, net: FeedforwardNet, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        if cfg.optimizer == "adam":
            self.m = Gradients.zeros_like(net)
            self.v = Gradients.zeros_like(net)

    def step(self, net: FeedforwardNet, grads: Gradients) -> None:
        cfg = self.cfg
        params = net.weights + net.biases
        gs = grads.weights + grads.biases
        if cfg.optimizer == "sgd":
            for p, g in zip(params, gs):
                p -= cfg.learning_rate * g
            return
        self.t += 1
        ms = self.m.weights + self.m.biases
        vs = self.v.weights + self.v.biases
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps_opt)


def _window_index(n_steps: int, horizon: int, n_seq: int):
    starts = list(range(0, n_steps - horizon + 1, horizon))
    return [(s, w) for s in range(n_seq) for w in starts]


def train_student(
    student: FeedforwardNet,
    train_ds: Dataset,
    test_ds: Dataset,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit a student to trajectory data through the fixed-step solver.

    The input net is not modified; the returned result carries the final
    and best (minimum-test-loss) copies, the per-epoch test-loss curve,
    and the total number of skipped diverged windows.
    """
    tab = tableau_for_order(cfg.solver_order)
    times, tr_inputs, tr_states, mode = _pack(train_ds)
    _, te_inputs, te_states, te_mode = _pack(test_ds)
    dt = float(times[1] - times[0]) if times.size > 1 else cfg.step
    substeps = max(1, int(round(dt / cfg.step)))
    if abs(substeps * cfg.step - dt) > 1e-9 * max(dt, 1.0):
        raise DimensionError(
            f"solver step {cfg.step} must divide the sampling period {dt}"
        )
    n_steps = tr_states.shape[1] - 1
    horizon = cfg.horizon or n_steps
    if not 1 <= horizon <= n_steps:
        raise ValueError("horizon must lie in 1..sequence length")

    windows = _window_index(n_steps, horizon, tr_states.shape[0])
    rng = np.random.default_rng(cfg.seed)
    net = student.copy()
    opt = _Optimizer(net, cfg)

    n_test = te_states.shape[0]
    test_steps = te_states.shape[1] - 1

    def test_loss() -> float:
        u_at = _stage_input_fn(
            te_inputs, np.arange(n_test), np.zeros(n_test, dtype=int),
            substeps, te_mode,
        )
        return evaluate_loss(
            net, tab, cfg.step, te_states[:, 0].copy(), u_at,
            te_states[:, 1:], substeps, cfg.divergence_limit,
        )

    curve = [test_loss()]
    best = min(curve[0], float("inf"))
    best_epoch = 0
    best_net = net.copy()
    diverged_total = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(windows))
        diverged_epoch = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [windows[i] for i in order[lo : lo + cfg.batch_size]]
            seq_ids = np.array([s for s, _ in batch])
            starts = np.array([w for _, w in batch])
            x0 = tr_states[seq_ids, starts].copy()
            tgt = np.stack(
                [tr_states[s, w + 1 : w + horizon + 1] for s, w in batch]
            )
            u_at = _stage_input_fn(tr_inputs, seq_ids, starts, substeps, mode)
            _, grads, alive = window_loss_and_grads(
                net, tab, cfg.step, x0, u_at, tgt, substeps,
                cfg.divergence_limit,
            )
            diverged_epoch += int((~alive).sum())
            if alive.any() and cfg.learning_rate > 0:
                opt.step(net, grads)
        diverged_total += diverged_epoch
        if diverged_epoch > 0.5 * len(windows):
            raise DivergenceError(
                f"{diverged_epoch}/{len(windows)} windows diverged in epoch {epoch}"
            )
        loss = test_loss()
        curve.append(loss)
        if loss < best:
            best, best_epoch = loss, epoch
            best_net = net.copy()

    return TrainResult(net, best_net, curve, best, best_epoch, diverged_total)
