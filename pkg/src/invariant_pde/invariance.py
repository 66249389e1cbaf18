"""Numerical frame boosts and covariance verification on sampled trajectories.

Galilean boosts are restricted to grid-aligned frame velocities (c * dt an
integer number of cells), so the transform is an exact permutation plus a
constant shift of the advected velocity component, and per-term covariance
checks hold to rounding error.  Lorentz boosts resample the trajectory at
transformed spacetime coordinates by bilinear interpolation in the (x, t)
plane, one y-row at a time (the boost is along x only).

Residual checks compare R = u_t - N (or u_tt - N) between the two frames at
corresponding spacetime points; a covariant term set keeps the deviation at
the discretization level whatever the boost, while a non-covariant term
picks up an O(c) mismatch.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from invariant_pde.grid import Field, Trajectory
from invariant_pde.stencil import derivative_array
from invariant_pde.symnet import Atom, CandidateTerm, parse_term


class BoostAlignmentError(ValueError):
    """Galilean boost velocity is not grid aligned."""


class BoostRangeError(ValueError):
    """Lorentz boost sampling window leaves the available spacetime slab."""


@dataclass(frozen=True)
class BoostParams:
    """Frame velocity c; c0 is the invariant speed (Lorentz boosts only)."""

    c: float
    c0: float | None = None

    def __post_init__(self):
        if self.c0 is not None:
            if self.c0 <= 0:
                raise ValueError("invariant speed c0 must be positive")
            if abs(self.c) >= self.c0:
                raise ValueError("|c| must be below the invariant speed c0")

    @property
    def gamma(self) -> float:
        if self.c0 is None:
            return 1.0
        return 1.0 / math.sqrt(1.0 - (self.c / self.c0) ** 2)

    @property
    def alpha(self) -> float:
        if self.c0 is None:
            return 0.0
        return self.c / (self.c0 * self.c0)


# ---------------------------------------------------------------------------
# term evaluation on snapshots


def _coerce_term_map(terms) -> dict[CandidateTerm, float]:
    out = {}
    for key, c in terms.items():
        term = parse_term(key) if isinstance(key, str) else key
        out[term] = float(c)
    return out


def coerce_component_terms(pde, n_components: int) -> list[dict[CandidateTerm, float]]:
    """Accept a DiscoveredPDE, a per-component list of mappings, or one mapping."""
    if hasattr(pde, "terms"):
        seq = list(pde.terms)
    elif isinstance(pde, dict):
        seq = [pde] * n_components if n_components > 1 else [pde]
    else:
        seq = list(pde)
    if len(seq) != n_components:
        raise ValueError(f"expected term sets for {n_components} components")
    return [_coerce_term_map(t) for t in seq]


def _atom_values(field: Field, atoms, accuracy: int) -> dict[Atom, np.ndarray]:
    g = field.spec
    values: dict[Atom, np.ndarray] = {}
    for a in atoms:
        base = field.components[a.comp]
        if a.kind == "comp":
            values[a] = base
        elif a.kind == "deriv":
            values[a] = derivative_array(base, a.dx, a.dy, g.dx, g.dy, accuracy)
        elif a.kind == "sin":
            values[a] = np.sin(base)
        elif a.kind == "exp":
            values[a] = np.exp(base)
    return values


def evaluate_terms_on_field(
    field: Field, terms: dict[CandidateTerm, float], accuracy: int = 4
) -> np.ndarray:
    """Evaluate sum_k coeff_k * term_k pointwise on one snapshot."""
    atoms = {a for t in terms for a in t.factors}
    vals = _atom_values(field, atoms, accuracy)
    out = np.zeros(field.spec.shape)
    for term, coeff in terms.items():
        acc = np.full(field.spec.shape, coeff)
        for a in term.factors:
            acc = acc * vals[a]
        out += acc
    return out


# ---------------------------------------------------------------------------
# Galilean boosts


def _aligned_shift(c: float, dt: float, dx: float) -> int:
    s = c * dt / dx
    s_round = round(s)
    if abs(s - s_round) > 1e-9 * max(1.0, abs(s)):
        lo = math.floor(s) * dx / dt
        hi = math.ceil(s) * dx / dt
        raise BoostAlignmentError(
            f"boost velocity {c} is not grid aligned; nearest admissible values are "
            f"{lo:.12g} and {hi:.12g}"
        )
    return int(s_round)


def galileo_boost(traj: Trajectory, c: float) -> Trajectory:
    """Exact uniform-velocity frame change of a sampled trajectory.

    Snapshot k shifts by k * (c dt / dx) cells along x (periodic) and the
    x-velocity component (component 0) drops by c.  Requires a grid-aligned
    velocity so no interpolation occurs.
    """
    s = _aligned_shift(c, traj.dt, traj.spec.dx)
    snaps = []
    for k, snap in enumerate(traj.snapshots):
        comps = []
        for m, comp in enumerate(snap.components):
            arr = np.roll(comp, -k * s, axis=0)
            if m == 0:
                arr = arr - c
            comps.append(arr)
        snaps.append(Field(traj.spec, tuple(comps)))
    return Trajectory(spec=traj.spec, dt=traj.dt, snapshots=tuple(snaps))


def galileo_term_transform_deviation(
    traj: Trajectory, c: float, term, accuracy: int = 4
) -> float:
    """Max pointwise mismatch of one term between frames, after the exact
    advective correction for terms carrying a factor of the boosted component.

    Terms in the admissible library (pure derivative products and advective
    pairs) come out at rounding level; terms outside it do not.
    """
    term = parse_term(term) if isinstance(term, str) else term
    s = _aligned_shift(c, traj.dt, traj.spec.dx)
    boosted = galileo_boost(traj, c)
    tmap = {term: 1.0}

    # one factor of the shifted component u_0 contributes -c * (rest of term)
    rest = None
    factors = list(term.factors)
    if Atom("comp", 0) in factors:
        others = list(factors)
        others.remove(Atom("comp", 0))
        rest = {CandidateTerm(tuple(others)): 1.0}

    dev = 0.0
    for k, (snap, bsnap) in enumerate(zip(traj.snapshots, boosted.snapshots)):
        orig = evaluate_terms_on_field(snap, tmap, accuracy)
        moved = evaluate_terms_on_field(bsnap, tmap, accuracy)
        if rest is not None:
            moved = moved + c * evaluate_terms_on_field(bsnap, rest, accuracy)
        dev = max(dev, float(np.max(np.abs(moved - np.roll(orig, -k * s, axis=0)))))
    return dev


def _first_order_residuals(traj: Trajectory, term_sets, accuracy: int) -> np.ndarray:
    """R[k] = u_t - N at interior snapshots, stacked (K-2, n, nx, ny)."""
    stacks = [traj.component_stack(c) for c in range(traj.n_components)]
    K = traj.n_snapshots
    out = np.empty((K - 2, traj.n_components) + traj.spec.shape)
    for k in range(1, K - 1):
        rhs = [
            evaluate_terms_on_field(traj.snapshots[k], term_sets[c], accuracy)
            for c in range(traj.n_components)
        ]
        for c in range(traj.n_components):
            ut = (stacks[c][k + 1] - stacks[c][k - 1]) / (2.0 * traj.dt)
            out[k - 1, c] = ut - rhs[c]
    return out


def _second_order_residuals(traj: Trajectory, term_sets, accuracy: int) -> np.ndarray:
    stacks = [traj.component_stack(c) for c in range(traj.n_components)]
    K = traj.n_snapshots
    out = np.empty((K - 2, traj.n_components) + traj.spec.shape)
    dt2 = traj.dt * traj.dt
    for k in range(1, K - 1):
        rhs = [
            evaluate_terms_on_field(traj.snapshots[k], term_sets[c], accuracy)
            for c in range(traj.n_components)
        ]
        for c in range(traj.n_components):
            utt = (stacks[c][k + 1] - 2.0 * stacks[c][k] + stacks[c][k - 1]) / dt2
            out[k - 1, c] = utt - rhs[c]
    return out


def galileo_self_residual(traj: Trajectory, pde, accuracy: int = 4) -> float:
    """Max |u_t - N| on the unboosted data (the discretization floor)."""
    term_sets = coerce_component_terms(pde, traj.n_components)
    return float(np.max(np.abs(_first_order_residuals(traj, term_sets, accuracy))))


def check_galileo_covariance(traj: Trajectory, c: float, pde, accuracy: int = 4) -> float:
    """Max deviation of the PDE residual between frames at corresponding points.

    For a Galilean-covariant right-hand side this stays at the level of the
    time-differencing error, independent of c.
    """
    term_sets = coerce_component_terms(pde, traj.n_components)
    s = _aligned_shift(c, traj.dt, traj.spec.dx)
    R = _first_order_residuals(traj, term_sets, accuracy)
    boosted = galileo_boost(traj, c)
    Rb = _first_order_residuals(boosted, term_sets, accuracy)
    dev = 0.0
    for k in range(R.shape[0]):
        # residual row k corresponds to snapshot index k+1
        aligned = np.roll(R[k], -(k + 1) * s, axis=1)
        dev = max(dev, float(np.max(np.abs(Rb[k] - aligned))))
    return dev


# ---------------------------------------------------------------------------
# Lorentz boosts


def _snap(frac: np.ndarray) -> np.ndarray:
    """Snap near-integer lattice coordinates so aligned boosts sample exactly."""
    rounded = np.round(frac)
    near = np.abs(frac - rounded) <= 1e-9 * np.maximum(1.0, np.abs(frac))
    return np.where(near, rounded, frac)


def _lorentz_sample(stack: np.ndarray, t_src: np.ndarray, x_src: np.ndarray, dt: float, dx: float):
    """Bilinear sample of (K, nx, ny) data at per-column (t, x); x wraps."""
    K, nx, ny = stack.shape
    tf = _snap(t_src / dt)
    xf = _snap(x_src / dx)
    it = np.clip(np.floor(tf).astype(int), 0, K - 2)
    wt = tf - it
    ix = np.floor(xf).astype(int)
    wx = xf - ix
    ix0 = np.mod(ix, nx)
    ix1 = np.mod(ix + 1, nx)
    wt_ = wt[:, None]
    wx_ = wx[:, None]
    return (
        (1 - wt_) * (1 - wx_) * stack[it, ix0]
        + (1 - wt_) * wx_ * stack[it, ix1]
        + wt_ * (1 - wx_) * stack[it + 1, ix0]
        + wt_ * wx_ * stack[it + 1, ix1]
    )


def lorentz_boost(
    traj: Trajectory,
    bp: BoostParams,
    start_index: int = 0,
    n_snapshots: int | None = None,
) -> Trajectory:
    """Resample the trajectory in a frame boosted along x.

    Output snapshot k lives at boosted time (start_index + k) * dt on the
    original spatial lattice; values come from bilinear interpolation of the
    source data at (gamma (x + c t), gamma (t + alpha x)).  Sampling must
    stay inside the available time slab.
    """
    if bp.c0 is None:
        raise ValueError("Lorentz boost needs an invariant speed c0")
    g = traj.spec
    K = traj.n_snapshots
    if K < 2:
        raise BoostRangeError("need at least 2 snapshots to interpolate in time")
    T = (K - 1) * traj.dt
    gamma, alpha, c = bp.gamma, bp.alpha, bp.c
    x = np.arange(g.nx) * g.dx

    def valid(kk: int) -> bool:
        t_src = gamma * (kk * traj.dt + alpha * x)
        return bool(np.all(t_src >= -1e-12) and np.all(t_src <= T + 1e-12))

    x_max = (g.nx - 1) * g.dx
    lo = max(0.0, -alpha * x_max, -alpha * 0.0)
    hi = T / gamma - max(0.0, alpha * x_max)
    if not valid(start_index):
        raise BoostRangeError(
            f"boosted time {start_index * traj.dt:.6g} outside the admissible range "
            f"[{lo:.6g}, {hi:.6g}]"
        )
    if n_snapshots is None:
        n = 0
        while valid(start_index + n):
            n += 1
        n_snapshots = n
    elif not valid(start_index + n_snapshots - 1):
        raise BoostRangeError(
            f"requested window ends at {(start_index + n_snapshots - 1) * traj.dt:.6g}, "
            f"admissible boosted times are [{lo:.6g}, {hi:.6g}]"
        )

    stacks = [traj.component_stack(cmp) for cmp in range(traj.n_components)]
    snaps = []
    for k in range(n_snapshots):
        tbar = (start_index + k) * traj.dt
        t_src = np.clip(gamma * (tbar + alpha * x), 0.0, T)
        x_src = gamma * (x + c * tbar)
        comps = tuple(
            _lorentz_sample(st, t_src, x_src, traj.dt, g.dx) for st in stacks
        )
        snaps.append(Field(g, comps))
    return Trajectory(spec=g, dt=traj.dt, snapshots=tuple(snaps))


def lorentz_term_transform_deviation(
    traj: Trajectory, bp: BoostParams, term, accuracy: int = 4, x_margin: int = 4
) -> float:
    """Frame mismatch of a zero-derivative term (pointwise scalar) under the boost.

    Bounded by the bilinear interpolation error; derivative-bearing terms are
    not frame scalars and come out large.
    """
    term = parse_term(term) if isinstance(term, str) else term
    tmap = {term: 1.0}
    boosted = lorentz_boost(traj, bp)
    g = traj.spec
    x = np.arange(g.nx) * g.dx
    orig_vals = np.stack(
        [evaluate_terms_on_field(s, tmap, accuracy) for s in traj.snapshots]
    )
    cols = slice(x_margin, g.nx - x_margin)
    dev = 0.0
    for k in range(boosted.n_snapshots):
        tbar = k * traj.dt
        t_src = np.clip(bp.gamma * (tbar + bp.alpha * x), 0.0, (traj.n_snapshots - 1) * traj.dt)
        x_src = bp.gamma * (x + bp.c * tbar)
        mapped = _lorentz_sample(orig_vals, t_src, x_src, traj.dt, g.dx)
        here = evaluate_terms_on_field(boosted.snapshots[k], tmap, accuracy)
        dev = max(dev, float(np.max(np.abs((here - mapped)[cols]))))
    return dev


def lorentz_self_residual(traj: Trajectory, pde, accuracy: int = 4) -> float:
    term_sets = coerce_component_terms(pde, traj.n_components)
    return float(np.max(np.abs(_second_order_residuals(traj, term_sets, accuracy))))


def check_lorentz_covariance(
    traj: Trajectory,
    bp: BoostParams,
    pde,
    accuracy: int = 4,
    x_margin: int = 4,
) -> float:
    """Max deviation of R = u_tt - N between frames at corresponding points.

    Columns within x_margin of the wrap seam are excluded: the boosted frame
    mixes time into x, so the resampled field is not periodic and stencils
    crossing the seam are meaningless.  Annotates (does not fail) when the
    term set's Laplacian coefficient differs from c0^2, since covariance is
    only expected at that coefficient.
    """
    term_sets = coerce_component_terms(pde, traj.n_components)
    lap_x = term_sets[0].get(CandidateTerm((Atom("deriv", 0, dx=2, dy=0),)), 0.0)
    if bp.c0 is not None and abs(lap_x - bp.c0**2) > 1e-9:
        warnings.warn(
            f"Laplacian coefficient {lap_x} differs from c0^2 = {bp.c0 ** 2}; "
            "frame covariance is not expected",
            stacklevel=2,
        )

    R = _second_order_residuals(traj, term_sets, accuracy)  # rows at k = 1..K-2
    boosted = lorentz_boost(traj, bp)
    if boosted.n_snapshots < 3:
        raise BoostRangeError("boosted window too short for second time differences")
    Rb = _second_order_residuals(boosted, term_sets, accuracy)

    g = traj.spec
    x = np.arange(g.nx) * g.dx
    cols = slice(x_margin, g.nx - x_margin)
    # R lives on times dt..(K-2) dt; shift the time origin for interpolation
    dev = 0.0
    for kb in range(Rb.shape[0]):
        tbar = (kb + 1) * traj.dt
        t_src = bp.gamma * (tbar + bp.alpha * x) - traj.dt
        x_src = bp.gamma * (x + bp.c * tbar)
        t_hi = (R.shape[0] - 1) * traj.dt
        ok = (t_src >= -1e-12) & (t_src <= t_hi + 1e-12)
        for comp in range(traj.n_components):
            mapped = _lorentz_sample(
                R[:, comp], np.clip(t_src, 0.0, t_hi), x_src, traj.dt, g.dx
            )
            diff = np.abs(Rb[kb, comp] - mapped)[cols]
            diff = diff[ok[cols]]
            if diff.size:
                dev = max(dev, float(np.max(diff)))
    return dev
