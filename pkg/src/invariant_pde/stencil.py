"""Central finite-difference stencils on periodic grids.

Weights come from an exact rational solve of the Taylor moment conditions,
so the returned stencils satisfy them to rounding error.  Application is a
circular correlation along one axis; periodicity removes all boundary
cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from invariant_pde.grid import Field

SUPPORTED_ACCURACIES = (2, 4)
MAX_DERIV_ORDER = 4

_AXIS_INDEX = {"x": 0, "y": 1}


@dataclass(frozen=True)
class Stencil:
    deriv_order: int
    accuracy_order: int
    offsets: tuple[int, ...]
    weights: tuple[float, ...]
    axis: str

    def __post_init__(self):
        if len(self.offsets) != len(self.weights):
            raise ValueError("offsets and weights must have equal length")
        if self.axis not in _AXIS_INDEX:
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")

    @property
    def axis_index(self) -> int:
        return _AXIS_INDEX[self.axis]


def _central_offsets(deriv_order: int, accuracy_order: int) -> list[int]:
    if deriv_order == 0:
        return [0]
    half = (deriv_order + 1) // 2 + accuracy_order // 2 - 1
    return list(range(-half, half + 1))


def _rational_weights(deriv_order: int, offsets: list[int]) -> list[Fraction]:
    """Solve the Vandermonde moment system sum_j w_j o_j^i = i! delta_{i,m} exactly."""
    npts = len(offsets)
    rows = [[Fraction(o) ** i for o in offsets] for i in range(npts)]
    rhs = [Fraction(0)] * npts
    rhs[deriv_order] = Fraction(math.factorial(deriv_order))
    # Gaussian elimination over rationals.
    aug = [row + [r] for row, r in zip(rows, rhs)]
    for col in range(npts):
        pivot = next(r for r in range(col, npts) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(npts):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [aug[r][npts] for r in range(npts)]


def central_stencil(deriv_order: int, accuracy_order: int, h: float, axis: str = "x") -> Stencil:
    """Central stencil for d^m/dx^m with the given even accuracy order.

    deriv_order 0 returns the identity stencil.  Supported: deriv_order <= 4,
    accuracy_order in {2, 4}.
    """
    if deriv_order < 0 or deriv_order > MAX_DERIV_ORDER:
        raise ValueError(f"unsupported derivative order {deriv_order}")
    if accuracy_order not in SUPPORTED_ACCURACIES:
        raise ValueError(f"unsupported accuracy order {accuracy_order}")
    if h <= 0:
        raise ValueError("grid spacing must be positive")
    if deriv_order == 0:
        return Stencil(0, accuracy_order, (0,), (1.0,), axis)
    offsets = _central_offsets(deriv_order, accuracy_order)
    rational = _rational_weights(deriv_order, offsets)
    scale = 1.0 / h**deriv_order
    weights = tuple(float(w) * scale for w in rational)
    return Stencil(deriv_order, accuracy_order, tuple(offsets), weights, axis)


def correlate_array(u: np.ndarray, offsets, weights, axis_index: int) -> np.ndarray:
    """Circular correlation sum_j w_j * u[... i + o_j ...] along one axis."""
    out = weights[0] * np.roll(u, -offsets[0], axis=axis_index)
    for o, w in zip(offsets[1:], weights[1:]):
        out += w * np.roll(u, -o, axis=axis_index)
    return out


def apply_stencil(field: Field, stencil: Stencil) -> Field:
    """Apply a stencil to every component of a field (periodic wrap)."""
    return field.map(lambda c: correlate_array(c, stencil.offsets, stencil.weights, stencil.axis_index))


def derivative_array(
    u: np.ndarray, dx_order: int, dy_order: int, dx: float, dy: float, accuracy: int = 4
) -> np.ndarray:
    """Mixed partial d^(a+b) u / dx^a dy^b via composed axis stencils."""
    out = u
    if dx_order > 0:
        s = central_stencil(dx_order, accuracy, dx, axis="x")
        out = correlate_array(out, s.offsets, s.weights, 0)
    if dy_order > 0:
        s = central_stencil(dy_order, accuracy, dy, axis="y")
        out = correlate_array(out, s.offsets, s.weights, 1)
    return out
