"""Reference solvers generating ground-truth trajectories.

Burgers (two components, first order in time) integrates with classic RK4
in time and 4th-order central stencils in space.  The sine-Gordon type
equation (one component, second order in time) uses leapfrog with a
third-order Taylor start so the global order stays 2.  Both run on uniform
periodic grids and save every ``save_every`` solver steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from invariant_pde.grid import Field, GridSpec, Trajectory
from invariant_pde.stencil import derivative_array

BLOWUP_LIMIT = 1.0e6


class StabilityError(ValueError):
    """Requested solver step violates the stability bound."""


class BlowUpError(RuntimeError):
    """Solution magnitude exceeded the blow-up guard."""


@dataclass(frozen=True)
class BurgersSpec:
    """Viscous Burgers system u_t = -u u_x - v u_y + nu lap(u) (and likewise v)."""

    nu: float
    grid: GridSpec
    t_end: float
    solver_dt: float
    save_every: int = 1

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        if self.t_end <= 0 or self.solver_dt <= 0 or self.save_every < 1:
            raise ValueError("t_end, solver_dt, save_every must be positive")
        h = min(self.grid.dx, self.grid.dy)
        if self.solver_dt > 0.2 * h * h / self.nu:
            raise StabilityError(
                f"solver_dt {self.solver_dt} exceeds diffusive bound {0.2 * h * h / self.nu:.3e}"
            )


@dataclass(frozen=True)
class SineGordonSpec:
    """Second-order wave equation u_tt = m2 sin(u) + c2 lap(u)."""

    m2: float
    c2: float
    grid: GridSpec
    t_end: float
    solver_dt: float
    save_every: int = 1

    def __post_init__(self):
        if self.c2 <= 0:
            raise ValueError("wave speed squared must be positive")
        if self.t_end <= 0 or self.solver_dt <= 0 or self.save_every < 1:
            raise ValueError("t_end, solver_dt, save_every must be positive")
        h = min(self.grid.dx, self.grid.dy)
        if self.solver_dt > 0.5 * h / np.sqrt(self.c2):
            raise StabilityError(
                f"solver_dt {self.solver_dt} exceeds CFL bound {0.5 * h / np.sqrt(self.c2):.3e}"
            )


def _lap(u: np.ndarray, g: GridSpec, acc: int = 4) -> np.ndarray:
    return derivative_array(u, 2, 0, g.dx, g.dy, acc) + derivative_array(u, 0, 2, g.dx, g.dy, acc)


def _burgers_rhs(u, v, g: GridSpec, nu: float, advect: bool):
    du = nu * _lap(u, g)
    dv = nu * _lap(v, g)
    if advect:
        ux = derivative_array(u, 1, 0, g.dx, g.dy)
        uy = derivative_array(u, 0, 1, g.dx, g.dy)
        vx = derivative_array(v, 1, 0, g.dx, g.dy)
        vy = derivative_array(v, 0, 1, g.dx, g.dy)
        du = du - u * ux - v * uy
        dv = dv - u * vx - v * vy
    return du, dv


def _check_bounded(arrs, t):
    for a in arrs:
        if not np.all(np.isfinite(a)) or np.max(np.abs(a)) > BLOWUP_LIMIT:
            raise BlowUpError(f"solution blew up near t = {t:.4f}")


def solve_burgers2d(spec: BurgersSpec, ic: Field, advect: bool = True) -> Trajectory:
    """Integrate the two-component Burgers system from a (u, v) initial field.

    The advective CFL (max speed * dt / h <= 0.5) is checked against the
    initial condition; disabling `advect` reduces the system to two
    independent heat equations (for validation runs).
    """
    if ic.n_components != 2:
        raise ValueError("Burgers initial condition needs exactly 2 components")
    g = spec.grid
    if advect:
        speed = max(np.max(np.abs(ic.components[0])), np.max(np.abs(ic.components[1])))
        if speed * spec.solver_dt / min(g.dx, g.dy) > 0.5:
            raise StabilityError("advective CFL above 0.5 for this initial condition")

    u = np.array(ic.components[0])
    v = np.array(ic.components[1])
    n_steps = int(round(spec.t_end / spec.solver_dt))
    dt = spec.solver_dt
    snaps = [Field(g, (u, v))]
    for step in range(1, n_steps + 1):
        k1u, k1v = _burgers_rhs(u, v, g, spec.nu, advect)
        k2u, k2v = _burgers_rhs(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, g, spec.nu, advect)
        k3u, k3v = _burgers_rhs(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, g, spec.nu, advect)
        k4u, k4v = _burgers_rhs(u + dt * k3u, v + dt * k3v, g, spec.nu, advect)
        u = u + (dt / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if step % spec.save_every == 0:
            _check_bounded((u, v), step * dt)
            snaps.append(Field(g, (u, v)))
    return Trajectory(spec=g, dt=spec.save_every * dt, snapshots=tuple(snaps))


def _sg_accel(u: np.ndarray, spec: SineGordonSpec) -> np.ndarray:
    return spec.m2 * np.sin(u) + spec.c2 * _lap(u, spec.grid)


def solve_sine_gordon2d(
    spec: SineGordonSpec, ic: Field, ic_velocity: Field | None = None
) -> Trajectory:
    """Integrate u_tt = m2 sin(u) + c2 lap(u) by leapfrog.

    The first step uses a third-order Taylor expansion (acceleration and its
    time derivative), preserving second-order global accuracy.  A missing
    ic_velocity means starting from rest.
    """
    if ic.n_components != 1:
        raise ValueError("sine-Gordon initial condition is a single component")
    g = spec.grid
    dt = spec.solver_dt
    u_prev = np.array(ic.components[0])
    v0 = np.zeros_like(u_prev) if ic_velocity is None else np.array(ic_velocity.components[0])

    a0 = _sg_accel(u_prev, spec)
    # d/dt of the acceleration along the solution: m2 cos(u) u_t + c2 lap(u_t)
    jerk = spec.m2 * np.cos(u_prev) * v0 + spec.c2 * _lap(v0, g)
    u_curr = u_prev + dt * v0 + 0.5 * dt * dt * a0 + (dt**3 / 6.0) * jerk

    n_steps = int(round(spec.t_end / spec.solver_dt))
    snaps = [Field(g, (u_prev,))]
    if 1 % spec.save_every == 0:
        snaps.append(Field(g, (u_curr,)))
    for step in range(2, n_steps + 1):
        u_next = 2.0 * u_curr - u_prev + dt * dt * _sg_accel(u_curr, spec)
        u_prev, u_curr = u_curr, u_next
        if step % spec.save_every == 0:
            _check_bounded((u_curr,), step * dt)
            snaps.append(Field(g, (u_curr,)))
    return Trajectory(spec=g, dt=spec.save_every * dt, snapshots=tuple(snaps))
