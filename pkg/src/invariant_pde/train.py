"""Training: rollout MSE loss, exact reverse-mode gradients, Adam, sparsity.

The loss is the mean squared error of stacked-block predictions against
observed snapshots plus an L1 penalty on the readout weights (the output
layer and the advective-unit weights), which are the entries that become
candidate-term coefficients.  Sparsification adds a single hard-threshold
event late in training: readout weights below the threshold are clamped to
zero and stay frozen.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from invariant_pde import autodiff as ad
from invariant_pde.grid import Trajectory
from invariant_pde.rollout import DivergenceError, RolloutConfig, predict_states
from invariant_pde.symnet import (
    CandidateTerm,
    NetConfig,
    NetParams,
    expand_to_terms,
    init_params,
)


class GradientError(RuntimeError):
    """A gradient entry is non-finite; message names the parameter block."""


class TrainingDivergedError(RuntimeError):
    """Training aborted on divergence; carries the partial loss history."""

    def __init__(self, epoch: int, history):
        self.epoch = epoch
        self.history = history
        super().__init__(f"training diverged at epoch {epoch}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3000
    learning_rate: float = 1e-3
    l1_weight: float = 1e-6
    n_blocks: int = 4
    batch_size: int = 8
    seed: int = 0
    hard_threshold: float = 1e-3
    threshold_epoch: int | None = None
    # untrained rollouts through third-derivative channels amplify grid-scale
    # noise; a small initialization keeps the first epochs stable
    init_scale: float = 0.01

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l1_weight < 0 or self.hard_threshold < 0:
            raise ValueError("l1_weight and hard_threshold must be >= 0")
        if self.n_blocks < 1 or self.batch_size < 1:
            raise ValueError("n_blocks and batch_size must be >= 1")

    @property
    def resolved_threshold_epoch(self) -> int:
        if self.threshold_epoch is not None:
            return self.threshold_epoch
        return int(0.8 * self.epochs)


# ---------------------------------------------------------------------------
# parameter flattening


def _segments(cfg: NetConfig, n_nets: int):
    """Canonical (net, label, shape) walk shared by flatten/unflatten."""
    segs = []
    for j in range(n_nets):
        for i in range(1, cfg.k + 1):
            segs.append((j, f"hidden_w{i}", (2, cfg.hidden_width(i))))
            segs.append((j, f"hidden_b{i}", (2,)))
        segs.append((j, "out_w", (cfg.readout_width,)))
        segs.append((j, "out_b", ()))
        if cfg.kind == "galileo":
            segs.append((j, "eta_w", (len(cfg.layout.eta),)))
            segs.append((j, "eta_b", ()))
    return segs


def flatten_params(nets: list[NetParams], cfg: NetConfig) -> np.ndarray:
    parts = []
    for p in nets:
        for W, b in zip(p.hidden_w, p.hidden_b):
            parts.append(np.asarray(W, dtype=float).ravel())
            parts.append(np.asarray(b, dtype=float).ravel())
        parts.append(np.asarray(p.out_w, dtype=float).ravel())
        parts.append(np.array([float(ad.value_of(p.out_b))]))
        if cfg.kind == "galileo":
            parts.append(np.asarray(p.eta_w, dtype=float).ravel())
            parts.append(np.array([float(ad.value_of(p.eta_b))]))
    return np.concatenate(parts)


def unflatten_params(vec: np.ndarray, cfg: NetConfig, n_nets: int) -> list[NetParams]:
    nets = []
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape)) if shape else 1
        out = vec[pos : pos + size].reshape(shape) if shape else float(vec[pos])
        pos += size
        return out

    for _ in range(n_nets):
        hw, hb = [], []
        for i in range(1, cfg.k + 1):
            hw.append(np.array(take((2, cfg.hidden_width(i)))))
            hb.append(np.array(take((2,))))
        out_w = np.array(take((cfg.readout_width,)))
        out_b = take(())
        if cfg.kind == "galileo":
            eta_w = np.array(take((len(cfg.layout.eta),)))
            eta_b = take(())
            nets.append(NetParams(hw, hb, out_w, out_b, eta_w, eta_b))
        else:
            nets.append(NetParams(hw, hb, out_w, out_b))
    if pos != vec.size:
        raise ValueError(f"parameter vector length {vec.size} != expected {pos}")
    return nets


def _wrap_vars(vec: np.ndarray, cfg: NetConfig, n_nets: int):
    """Parameter vector as Var scalars, plus the flat Var list for gradients."""
    flat = [ad.Var(float(v)) for v in vec]
    nets = []
    pos = 0

    def take_list(size):
        nonlocal pos
        out = flat[pos : pos + size]
        pos += size
        return out

    for _ in range(n_nets):
        hw, hb = [], []
        for i in range(1, cfg.k + 1):
            width = cfg.hidden_width(i)
            rows = take_list(2 * width)
            hw.append([rows[:width], rows[width:]])
            hb.append(take_list(2))
        out_w = take_list(cfg.readout_width)
        out_b = take_list(1)[0]
        if cfg.kind == "galileo":
            eta_w = take_list(len(cfg.layout.eta))
            eta_b = take_list(1)[0]
            nets.append(NetParams(hw, hb, out_w, out_b, eta_w, eta_b))
        else:
            nets.append(NetParams(hw, hb, out_w, out_b))
    return nets, flat


def readout_mask(cfg: NetConfig, n_nets: int) -> np.ndarray:
    """Boolean mask over the flat vector selecting readout and advective weights."""
    mask = []
    for _, label, shape in _segments(cfg, n_nets):
        size = int(np.prod(shape)) if shape else 1
        mask.append(np.full(size, label in ("out_w", "eta_w")))
    return np.concatenate(mask)


def _readout_weight_vars(nets_vars, cfg: NetConfig):
    ws = []
    for p in nets_vars:
        ws.extend(p.out_w)
        if cfg.kind == "galileo":
            ws.extend(p.eta_w)
    return ws


# ---------------------------------------------------------------------------
# loss


def l1_penalty(nets: list[NetParams], cfg: NetConfig) -> float:
    total = 0.0
    for p in nets:
        total += float(np.sum(np.abs(np.asarray(p.out_w, dtype=float))))
        if cfg.kind == "galileo":
            total += float(np.sum(np.abs(np.asarray(p.eta_w, dtype=float))))
    return total


def loss(pred: Trajectory, target: Trajectory, nets: list[NetParams], cfg: NetConfig, l1_weight: float) -> float:
    """MSE over all points/snapshots/components plus the readout L1 penalty.

    `pred` holds predictions only (seed snapshots excluded by the caller).
    """
    if pred.n_snapshots != target.n_snapshots or pred.n_components != target.n_components:
        raise ValueError("prediction and target shapes differ")
    if pred.spec != target.spec:
        raise ValueError("prediction and target grids differ")
    sq = 0.0
    count = 0
    for ps, ts in zip(pred.snapshots, target.snapshots):
        for pc, tc in zip(ps.components, ts.components):
            sq += float(np.sum((pc - tc) ** 2))
            count += pc.size
    return sq / count + l1_weight * l1_penalty(nets, cfg)


@dataclass
class Window:
    """One training sample: seed state(s) and the following target snapshots."""

    spec: object
    seeds: list
    targets: list


def sample_windows(
    trajectories: list[Trajectory],
    n_blocks: int,
    scheme: str,
    batch_size: int,
    rng: np.random.Generator,
) -> list[Window]:
    n_seed = 1 if scheme == "first" else 2
    length = n_seed + n_blocks
    windows = []
    for _ in range(batch_size):
        t = int(rng.integers(len(trajectories)))
        traj = trajectories[t]
        if traj.n_snapshots < length:
            raise ValueError(
                f"trajectory with {traj.n_snapshots} snapshots cannot supply windows of {length}"
            )
        start = int(rng.integers(traj.n_snapshots - length + 1))
        states = [
            [np.asarray(c) for c in traj.snapshots[start + j].components]
            for j in range(length)
        ]
        windows.append(Window(spec=traj.spec, seeds=states[:n_seed], targets=states[n_seed:]))
    return windows


def _pipeline_loss(nets_like, windows, net_cfg, rcfg, l1_weight, l1_vars=None):
    """Total loss over a batch; works on float or Var parameters."""
    sq_total = 0.0
    count = 0
    for w in windows:
        preds = predict_states(w.seeds, nets_like, net_cfg, w.spec, rcfg)
        for pred_state, targ_state in zip(preds, w.targets):
            for pv, tv in zip(pred_state, targ_state):
                sq_total = ad.add(sq_total, ad.sum_sq_diff(pv, tv))
                count += tv.size
    mse = ad.scale(sq_total, 1.0 / count)
    if l1_vars is not None:
        l1 = ad.abs_sum(l1_vars)
    else:
        l1 = ad.abs_sum(_readout_weight_list(nets_like, net_cfg))
    return ad.add(mse, ad.scale(l1, l1_weight)), ad.value_of(mse), ad.value_of(l1)


def _readout_weight_list(nets, cfg):
    ws = []
    for p in nets:
        ws.extend(list(p.out_w))
        if cfg.kind == "galileo":
            ws.extend(list(p.eta_w))
    return ws


def grad_loss(
    nets: list[NetParams],
    windows: list[Window],
    net_cfg: NetConfig,
    rollout_cfg: RolloutConfig,
    l1_weight: float,
):
    """Loss and its exact gradient with the same structure as the parameters."""
    vec = flatten_params(nets, net_cfg)
    total, mse, l1v, grad = _loss_and_grad_vec(
        vec, windows, net_cfg, rollout_cfg, l1_weight, len(nets)
    )
    return total, unflatten_params(grad, net_cfg, len(nets))


def _loss_and_grad_vec(vec, windows, net_cfg, rcfg, l1_weight, n_nets):
    nets_vars, flat = _wrap_vars(vec, net_cfg, n_nets)
    l1_vars = _readout_weight_vars(nets_vars, net_cfg)
    total, mse, l1v = _pipeline_loss(nets_vars, windows, net_cfg, rcfg, l1_weight, l1_vars)
    ad.backward(total)
    grad = np.array([v.grad if v.grad is not None else 0.0 for v in flat])
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        segs = _segments(net_cfg, n_nets)
        pos = 0
        for j, label, shape in segs:
            size = int(np.prod(shape)) if shape else 1
            if pos <= bad < pos + size:
                raise GradientError(f"non-finite gradient in net {j} block {label}")
            pos += size
        raise GradientError("non-finite gradient")
    return ad.value_of(total), mse, l1v, grad


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    t: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(t=0, m=np.zeros(n), v=np.zeros(n))


def optimizer_step(
    vec: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One adaptive moment estimation update with bias correction."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_vec = vec - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return new_vec, AdamState(t=t, m=m, v=v)


# ---------------------------------------------------------------------------
# training loop and reporting


@dataclass
class TrainResult:
    nets: list[NetParams]
    history: list[tuple[int, float, float, float]]  # (epoch, loss, mse, l1)
    frozen: np.ndarray | None = None


def default_scheme(kind: str) -> str:
    return "second" if kind == "lorentz" else "first"


def train_model(
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    data,
    scheme: str | None = None,
) -> TrainResult:
    """Fit one network per component to observed trajectories.

    `data` is a Trajectory or a list of them sharing one grid and dt.
    Deterministic given train_cfg.seed.  Divergence raises
    TrainingDivergedError carrying the partial history.
    """
    trajectories = [data] if isinstance(data, Trajectory) else list(data)
    spec = trajectories[0].spec
    dt = trajectories[0].dt
    for t in trajectories:
        if t.spec != spec or t.dt != dt:
            raise ValueError("all training trajectories must share grid and dt")
        if t.n_components != net_cfg.n:
            raise ValueError("component count of data and network config differ")
    scheme = scheme or default_scheme(net_cfg.kind)
    rcfg = RolloutConfig(
        dt=dt, n_blocks=train_cfg.n_blocks, scheme=scheme, max_deriv=net_cfg.max_deriv
    )
    n_seed = 1 if scheme == "first" else 2
    min_len = n_seed + train_cfg.n_blocks
    if min(t.n_snapshots for t in trajectories) < min_len:
        raise ValueError(f"training data must supply windows of {min_len} snapshots")

    rng = np.random.default_rng(train_cfg.seed)
    nets = [
        init_params(replace(net_cfg, equation_index=c), rng, scale=train_cfg.init_scale)
        for c in range(net_cfg.n)
    ]
    vec = flatten_params(nets, net_cfg)
    state = AdamState.zeros(vec.size)
    r_mask = readout_mask(net_cfg, net_cfg.n)
    frozen = np.zeros(vec.size, dtype=bool)

    history: list[tuple[int, float, float, float]] = []
    for epoch in range(1, train_cfg.epochs + 1):
        windows = sample_windows(
            trajectories, train_cfg.n_blocks, scheme, train_cfg.batch_size, rng
        )
        try:
            total, mse, l1v, grad = _loss_and_grad_vec(
                vec, windows, net_cfg, rcfg, train_cfg.l1_weight, net_cfg.n
            )
        except DivergenceError as exc:
            raise TrainingDivergedError(epoch, history) from exc
        vec, state = optimizer_step(vec, grad, state, train_cfg.learning_rate)
        if epoch == train_cfg.resolved_threshold_epoch and train_cfg.hard_threshold > 0:
            frozen = r_mask & (np.abs(vec) < train_cfg.hard_threshold)
        vec[frozen] = 0.0
        history.append((epoch, total, mse, l1v))

    return TrainResult(nets=unflatten_params(vec, net_cfg, net_cfg.n), history=history, frozen=frozen)


@dataclass
class DiscoveredPDE:
    """Expanded candidate-term coefficients per component, with a count rule."""

    terms: tuple
    report_threshold: float

    @property
    def remaining_count(self) -> int:
        return sum(
            1
            for comp in self.terms
            for c in comp.values()
            if abs(c) >= self.report_threshold
        )

    def component_terms(self, comp: int) -> dict:
        return self.terms[comp]

    def to_json_dict(self) -> dict:
        comps = {}
        from invariant_pde.symnet import comp_name

        for c, terms in enumerate(self.terms):
            comps[comp_name(c)] = {
                t.name: coeff for t, coeff in sorted(terms.items(), key=lambda kv: kv[0].name)
            }
        return {
            "components": comps,
            "threshold": self.report_threshold,
            "remaining_count": self.remaining_count,
        }


def extract_pde(nets: list[NetParams], net_cfg: NetConfig, report_threshold: float) -> DiscoveredPDE:
    """Expand each component's network into terms and count survivors."""
    terms = tuple(
        expand_to_terms(replace(net_cfg, equation_index=c), p) for c, p in enumerate(nets)
    )
    return DiscoveredPDE(terms=terms, report_threshold=report_threshold)


def write_loss_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "mse", "l1_component"])
        for epoch, total, mse, l1v in history:
            writer.writerow([epoch, repr(total), repr(mse), repr(l1v)])


def write_pde_report(path, pde: DiscoveredPDE) -> None:
    with open(path, "w") as fh:
        json.dump(pde.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
