"""Data-driven discovery of governing PDEs with invariance-constrained symbolic networks.

The package fits symbolic networks to gridded spatio-temporal data through
finite-difference time-stepping rollouts.  Three network variants are
provided: an unconstrained baseline whose candidate terms are arbitrary
monomials of the field and its spatial derivatives, a Galilean variant whose
wiring admits only boost-covariant terms (advective products plus pure
derivatives), and a Lorentz variant admitting only zero-derivative scalars
plus a linear Laplacian.  Trained networks expand into explicit candidate
term/coefficient tables, and numerical frame-boost checks verify covariance
of a recovered equation directly on data.
"""

from invariant_pde.grid import Field, GridSpec, Trajectory, read_trajectory, write_trajectory

__all__ = [
    "Field",
    "GridSpec",
    "Trajectory",
    "read_trajectory",
    "write_trajectory",
]

__version__ = "0.1.0"
