"""Forward prediction by stacked learned time-step blocks.

Each block evaluates the per-component networks on derivative channels of
the current state and advances one step: explicit Euler for first-order
dynamics, leapfrog for second-order, with a half-step Taylor start when
only one initial field (zero initial time derivative) is available.
Channels are recomputed from the latest prediction in every block, so
gradients flow through the whole chain when states are tracked.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from invariant_pde import autodiff as ad
from invariant_pde.grid import Field, GridSpec, Trajectory
from invariant_pde.stencil import central_stencil
from invariant_pde.symnet import Atom, NetConfig, NetParams, forward_from_channels

SCHEMES = ("first", "second")
DIVERGENCE_LIMIT = 1.0e6


class DivergenceError(RuntimeError):
    """A prediction left the finite range; carries the failing block index."""

    def __init__(self, block: int, message: str = ""):
        self.block = block
        super().__init__(message or f"rollout diverged at block {block}")


@dataclass(frozen=True)
class RolloutConfig:
    dt: float
    n_blocks: int
    scheme: str = "first"
    max_deriv: int = 3
    accuracy: int = 4

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@lru_cache(maxsize=None)
def _stencil(order: int, accuracy: int, h: float, axis: str):
    return central_stencil(order, accuracy, h, axis)


def _derivative(value, dx_order: int, dy_order: int, spec: GridSpec, accuracy: int):
    out = value
    if dx_order > 0:
        s = _stencil(dx_order, accuracy, spec.dx, "x")
        out = ad.correlate(out, s.offsets, s.weights, 0)
    if dy_order > 0:
        s = _stencil(dy_order, accuracy, spec.dy, "y")
        out = ad.correlate(out, s.offsets, s.weights, 1)
    return out


def state_channels(state, cfg: NetConfig, spec: GridSpec, accuracy: int = 4) -> dict:
    """All channel values required by cfg's layout, from per-component state values."""
    lay = cfg.layout
    atoms = set(lay.fc) | set(lay.bypass) | set(lay.comps)
    for pair in lay.eta:
        a, b = lay.eta_factors(pair)
        atoms.add(a)
        atoms.add(b)
    channels: dict = {}
    for atom in atoms:
        base = state[atom.comp]
        if atom.kind == "comp":
            channels[atom] = base
        elif atom.kind == "deriv":
            channels[atom] = _derivative(base, atom.dx, atom.dy, spec, accuracy)
        elif atom.kind == "sin":
            channels[atom] = ad.sin(base)
        elif atom.kind == "exp":
            channels[atom] = ad.exp(base)
    return channels


def _component_cfgs(cfg: NetConfig) -> list[NetConfig]:
    return [replace(cfg, equation_index=c) for c in range(cfg.n)]


def _rhs(state, nets: list[NetParams], cfg: NetConfig, spec: GridSpec, accuracy: int):
    channels = state_channels(state, cfg, spec, accuracy)
    return [
        forward_from_channels(c, p, channels)
        for c, p in zip(_component_cfgs(cfg), nets)
    ]


def _guard(state, block: int) -> None:
    for v in state:
        arr = np.asarray(ad.value_of(v))
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > DIVERGENCE_LIMIT:
            raise DivergenceError(block)


def step_first_order(state, nets, net_cfg: NetConfig, spec: GridSpec, cfg: RolloutConfig, block: int = 0):
    """One Euler block: u(t+dt) = u(t) + dt * N(u(t))."""
    rhs = _rhs(state, nets, net_cfg, spec, cfg.accuracy)
    nxt = [ad.add(u, ad.scale(n, cfg.dt)) for u, n in zip(state, rhs)]
    _guard(nxt, block)
    return nxt


def step_second_order(
    curr,
    prev,
    nets,
    net_cfg: NetConfig,
    spec: GridSpec,
    cfg: RolloutConfig,
    is_first_step: bool = False,
    block: int = 0,
):
    """One leapfrog block: u(t+dt) = 2 u(t) - u(t-dt) + dt^2 N(u(t)).

    With is_first_step (single seed, zero initial time derivative):
    u(dt) = u(0) + 0.5 dt^2 N(u(0)).
    """
    rhs = _rhs(curr, nets, net_cfg, spec, cfg.accuracy)
    dt2 = cfg.dt * cfg.dt
    if is_first_step:
        nxt = [ad.add(u, ad.scale(n, 0.5 * dt2)) for u, n in zip(curr, rhs)]
    else:
        if prev is None:
            raise ValueError("leapfrog step needs the previous state")
        nxt = [
            ad.add(ad.sub(ad.scale(u, 2.0), up), ad.scale(n, dt2))
            for u, up, n in zip(curr, prev, rhs)
        ]
    _guard(nxt, block)
    return nxt


def predict_states(seed_states, nets, net_cfg: NetConfig, spec: GridSpec, cfg: RolloutConfig):
    """Chain n_blocks steps from one or two seed states; returns predictions only.

    First-order needs one seed; second-order uses two when given, otherwise
    starts from rest.  Values may be arrays or tracked Vars.
    """
    preds = []
    with np.errstate(over="ignore", invalid="ignore"):
        if cfg.scheme == "first":
            if len(seed_states) != 1:
                raise ValueError("first-order rollout needs exactly one seed state")
            state = seed_states[0]
            for b in range(cfg.n_blocks):
                state = step_first_order(state, nets, net_cfg, spec, cfg, block=b)
                preds.append(state)
            return preds

        if len(seed_states) == 1:
            prev, curr = None, seed_states[0]
            first = True
        elif len(seed_states) == 2:
            prev, curr = seed_states[0], seed_states[1]
            first = False
        else:
            raise ValueError("second-order rollout needs one or two seed states")
        for b in range(cfg.n_blocks):
            nxt = step_second_order(
                curr, prev, nets, net_cfg, spec, cfg, is_first_step=first, block=b
            )
            first = False
            prev, curr = curr, nxt
            preds.append(curr)
    return preds


def rollout(initial, nets, net_cfg: NetConfig, cfg: RolloutConfig) -> Trajectory:
    """Rollout from one or two initial Fields; returns seeds plus predictions."""
    fields = [initial] if isinstance(initial, Field) else list(initial)
    spec = fields[0].spec
    seeds = [[np.asarray(c) for c in f.components] for f in fields]
    preds = predict_states(seeds, nets, net_cfg, spec, cfg)
    snaps = list(fields) + [
        Field(spec, tuple(np.asarray(ad.value_of(v)) for v in state)) for state in preds
    ]
    return Trajectory(spec=spec, dt=cfg.dt, snapshots=tuple(snaps))
