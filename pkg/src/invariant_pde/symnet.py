"""Symbolic networks over field/derivative channels, and their expansion.

Three variants share one multiplicative-layer engine:

* baseline: every channel (components and spatial derivatives) enters the
  fully connected hidden layers, so arbitrary monomials can form.
* galileo: component values are kept out of the hidden layers; they only
  occur inside advective products ``u_i * d(u_j)/d(x_i)`` that feed a single
  linear unit entering the readout.  Every representable term is therefore
  invariant under a uniform-velocity frame change.
* lorentz: second pure derivatives bypass the hidden layers and enter only
  the readout (linearly); hidden layers see only zero-derivative channels
  (component values and optional sin/exp wrappings), so derivative terms
  other than the linear Laplacian cannot form.

Hidden layer i computes f_i = alpha_i * beta_i with (alpha_i, beta_i) an
affine map of the fully connected channels plus f_1..f_{i-1}.  The readout
is affine.  Because every nonlinearity is a product, the network is an
explicit polynomial over its channels; ``expand_to_terms`` recovers it
exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from invariant_pde import autodiff as ad

KINDS = ("baseline", "galileo", "lorentz")

_COMP_NAMES = ("u", "v", "w")


class Atom(NamedTuple):
    """One atomic factor: a component value, spatial derivative, or wrapped value."""

    kind: str  # "comp" | "deriv" | "sin" | "exp"
    comp: int
    dx: int = 0
    dy: int = 0


def comp_name(i: int) -> str:
    return _COMP_NAMES[i] if i < len(_COMP_NAMES) else f"u{i + 1}"


def atom_name(a: Atom) -> str:
    base = comp_name(a.comp)
    if a.kind == "comp":
        return base
    if a.kind == "deriv":
        return base + "_" + "x" * a.dx + "y" * a.dy
    if a.kind in ("sin", "exp"):
        return f"{a.kind}({base})"
    raise ValueError(f"unknown atom kind {a.kind!r}")


_SIN_EXP_RE = re.compile(r"^(sin|exp)\((\w+)\)$")


def _parse_comp(tok: str) -> int:
    for i, nm in enumerate(_COMP_NAMES):
        if tok == nm:
            return i
    m = re.match(r"^u(\d+)$", tok)
    if m:
        return int(m.group(1)) - 1
    raise ValueError(f"unknown component name {tok!r}")


def parse_atom(tok: str) -> Atom:
    m = _SIN_EXP_RE.match(tok)
    if m:
        return Atom(m.group(1), _parse_comp(m.group(2)))
    if "_" in tok:
        base, sub = tok.split("_", 1)
        if not sub or sub.strip("xy"):
            raise ValueError(f"bad derivative suffix in {tok!r}")
        return Atom("deriv", _parse_comp(base), dx=sub.count("x"), dy=sub.count("y"))
    return Atom("comp", _parse_comp(tok))


@dataclass(frozen=True)
class CandidateTerm:
    """A product of atomic factors; the empty product is the constant term."""

    factors: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "factors", tuple(sorted(self.factors, key=atom_name))
        )

    @property
    def name(self) -> str:
        if not self.factors:
            return "1"
        return "*".join(atom_name(a) for a in self.factors)

    @property
    def degree(self) -> int:
        return len(self.factors)

    def __repr__(self):
        return f"CandidateTerm({self.name!r})"


CONSTANT_TERM = CandidateTerm(())


def parse_term(name: str) -> CandidateTerm:
    name = name.strip()
    if name == "1":
        return CONSTANT_TERM
    return CandidateTerm(tuple(parse_atom(tok) for tok in name.split("*")))


def derivative_atoms(n: int, max_deriv: int, ndim: int) -> tuple[Atom, ...]:
    """Spatial-derivative channels: pure derivatives up to max_deriv per axis,
    plus the single cross term d2/dxdy in 2D."""
    indices: list[tuple[int, int]] = []
    for order in range(1, max_deriv + 1):
        indices.append((order, 0))
        if ndim == 2:
            if order == 2:
                indices.append((1, 1))
            indices.append((0, order))
    atoms = []
    for ix, iy in indices:
        for c in range(n):
            atoms.append(Atom("deriv", c, dx=ix, dy=iy))
    return tuple(atoms)


@dataclass(frozen=True)
class InputLayout:
    """Channel wiring of one network instance.

    fc feeds the hidden multiplication layers, bypass enters only the
    readout, eta lists the advective product pairs (advecting component i
    along axis i, advected component j) whose weighted sum enters the
    readout through a single linear unit.
    """

    fc: tuple[Atom, ...]
    bypass: tuple[Atom, ...]
    eta: tuple[tuple[int, int], ...]
    comps: tuple[Atom, ...]

    @property
    def input_channels(self) -> tuple[Atom, ...]:
        return self.comps + self.bypass + self.fc

    def eta_factors(self, pair: tuple[int, int]) -> tuple[Atom, Atom]:
        i, j = pair
        deriv = Atom("deriv", j, dx=1, dy=0) if i == 0 else Atom("deriv", j, dx=0, dy=1)
        return (Atom("comp", i), deriv)


def enumerate_inputs(
    kind: str,
    n: int,
    max_deriv: int = 3,
    ndim: int = 2,
    include_sin_exp: bool | None = None,
) -> InputLayout:
    """Channel layout for one network kind.

    baseline: components plus all derivative channels, fully connected.
    galileo: derivative channels fully connected; components appear only in
    the advective products.  lorentz: per-axis second derivatives bypass to
    the readout; components (with sin/exp wrappings by default) are fully
    connected.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown network kind {kind!r}")
    if n < 1:
        raise ValueError("component count must be >= 1")
    if ndim not in (1, 2):
        raise ValueError("ndim must be 1 or 2")
    if max_deriv < 2:
        raise ValueError("max_deriv must be >= 2")
    if include_sin_exp is None:
        include_sin_exp = kind == "lorentz"

    comps = tuple(Atom("comp", c) for c in range(n))
    derivs = derivative_atoms(n, max_deriv, ndim)

    if kind == "baseline":
        fc = comps + derivs
        if include_sin_exp:
            fc = fc + tuple(Atom("exp", c) for c in range(n)) + tuple(
                Atom("sin", c) for c in range(n)
            )
        # components already sit in the fully connected list
        return InputLayout(fc=fc, bypass=(), eta=(), comps=())

    if kind == "galileo":
        pairs = tuple((i, j) for i in range(min(n, ndim)) for j in range(n))
        return InputLayout(fc=derivs, bypass=(), eta=pairs, comps=comps)

    # lorentz
    bypass = tuple(Atom("deriv", c, dx=2, dy=0) for c in range(n))
    if ndim == 2:
        bypass = bypass + tuple(Atom("deriv", c, dx=0, dy=2) for c in range(n))
    fc = comps
    if include_sin_exp:
        fc = fc + tuple(Atom("exp", c) for c in range(n)) + tuple(
            Atom("sin", c) for c in range(n)
        )
    return InputLayout(fc=fc, bypass=bypass, eta=(), comps=())


@dataclass(frozen=True)
class NetConfig:
    """Configuration of one network instance modelling one component's RHS."""

    kind: str
    n: int
    k: int = 2
    ndim: int = 2
    max_deriv: int = 3
    equation_index: int = 0
    include_sin_exp: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("depth k must be >= 1")
        if not (0 <= self.equation_index < self.n):
            raise ValueError("equation_index out of range")
        enumerate_inputs(self.kind, self.n, self.max_deriv, self.ndim, self.include_sin_exp)

    @property
    def layout(self) -> InputLayout:
        return enumerate_inputs(
            self.kind, self.n, self.max_deriv, self.ndim, self.include_sin_exp
        )

    @property
    def input_dim(self) -> int:
        return len(self.layout.input_channels)

    def hidden_width(self, i: int) -> int:
        """Input width of hidden layer i (1-based)."""
        return len(self.layout.fc) + i - 1

    @property
    def readout_width(self) -> int:
        lay = self.layout
        extra = 1 if self.kind == "galileo" else 0
        return extra + len(lay.bypass) + len(lay.fc) + self.k


@dataclass
class NetParams:
    """Weights of one network instance.

    hidden_w[i] has shape (2, hidden_width(i+1)); rows select alpha and
    beta.  eta_w/eta_b exist only for the galileo kind.
    """

    hidden_w: list
    hidden_b: list
    out_w: object
    out_b: object
    eta_w: object = None
    eta_b: object = None


def init_params(cfg: NetConfig, rng: np.random.Generator, scale: float = 0.1) -> NetParams:
    """Uniform [-scale, scale] initialization of every weight and bias.

    For the galileo kind the readout entry routing the advective unit starts
    at 1.0 (still trainable): with both that weight and the advective
    coefficients near zero, the product parametrization sits on a saddle
    where gradient descent stalls and the advective terms never grow.
    """
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)
    hidden_w = [u(2, cfg.hidden_width(i)) for i in range(1, cfg.k + 1)]
    hidden_b = [u(2) for _ in range(cfg.k)]
    out_w = u(cfg.readout_width)
    out_b = float(u())
    if cfg.kind == "galileo":
        out_w[0] = 1.0
        return NetParams(hidden_w, hidden_b, out_w, out_b, u(len(cfg.layout.eta)), float(u()))
    return NetParams(hidden_w, hidden_b, out_w, out_b)


def zero_params(cfg: NetConfig) -> NetParams:
    rng = np.random.default_rng(0)
    p = init_params(cfg, rng, scale=0.0)
    return p


def _check_dims(cfg: NetConfig, p: NetParams) -> None:
    if len(p.hidden_w) != cfg.k or len(p.hidden_b) != cfg.k:
        raise ValueError(f"expected {cfg.k} hidden layers")
    for i in range(cfg.k):
        if len(p.hidden_w[i][0]) != cfg.hidden_width(i + 1):
            raise ValueError(
                f"hidden layer {i + 1}: width {len(p.hidden_w[i][0])} != {cfg.hidden_width(i + 1)}"
            )
    if len(p.out_w) != cfg.readout_width:
        raise ValueError(f"readout width {len(p.out_w)} != {cfg.readout_width}")
    if cfg.kind == "galileo":
        if p.eta_w is None or len(p.eta_w) != len(cfg.layout.eta):
            raise ValueError("galileo parameters need one eta weight per advective product")


def forward_from_channels(cfg: NetConfig, p: NetParams, channels: dict):
    """Network output given a mapping Atom -> value (scalar, array, or Var)."""
    _check_dims(cfg, p)
    lay = cfg.layout
    fc_vals = [channels[a] for a in lay.fc]
    bypass_vals = [channels[a] for a in lay.bypass]

    f_vals = []
    for i in range(cfg.k):
        inputs = fc_vals + f_vals
        alpha = ad.lincomb(list(p.hidden_w[i][0]), inputs, p.hidden_b[i][0])
        beta = ad.lincomb(list(p.hidden_w[i][1]), inputs, p.hidden_b[i][1])
        f_vals.append(ad.mul(alpha, beta))

    readout = []
    if cfg.kind == "galileo":
        eta_vals = [
            ad.mul(channels[a], channels[b])
            for a, b in (lay.eta_factors(pair) for pair in lay.eta)
        ]
        readout.append(ad.lincomb(list(p.eta_w), eta_vals, p.eta_b))
    readout += bypass_vals + fc_vals + f_vals
    return ad.lincomb(list(p.out_w), readout, p.out_b)


def _channels_from_vector(cfg: NetConfig, x: Sequence) -> dict:
    chans = cfg.layout.input_channels
    if len(x) != len(chans):
        raise ValueError(f"input has {len(x)} values, expected {len(chans)}")
    return dict(zip(chans, x))


def gsnn_forward(cfg: NetConfig, p: NetParams, x: Sequence):
    """Galileo-constrained forward pass on one input vector.

    x is ordered as cfg.layout.input_channels: component values first, then
    derivative channels.  Advective products are formed internally.
    """
    if cfg.kind != "galileo":
        raise ValueError("gsnn_forward requires a galileo config")
    return forward_from_channels(cfg, p, _channels_from_vector(cfg, x))


def lsnn_forward(cfg: NetConfig, p: NetParams, x: Sequence):
    """Lorentz-constrained forward pass: x ordered as bypass then fc channels."""
    if cfg.kind != "lorentz":
        raise ValueError("lsnn_forward requires a lorentz config")
    return forward_from_channels(cfg, p, _channels_from_vector(cfg, x))


def snn_forward(cfg: NetConfig, p: NetParams, x: Sequence):
    """Unconstrained forward pass: every channel fully connected."""
    if cfg.kind != "baseline":
        raise ValueError("snn_forward requires a baseline config")
    return forward_from_channels(cfg, p, _channels_from_vector(cfg, x))


NET_FORWARDS = {"baseline": snn_forward, "galileo": gsnn_forward, "lorentz": lsnn_forward}


# ---------------------------------------------------------------------------
# symbolic expansion


def _poly_from_atom(a: Atom) -> dict:
    return {CandidateTerm((a,)): 1.0}


def _poly_axpy(acc: dict, poly: dict, c: float) -> None:
    if c == 0.0:
        return
    for t, v in poly.items():
        acc[t] = acc.get(t, 0.0) + c * v


def _poly_mul(pa: dict, pb: dict) -> dict:
    out: dict = {}
    for ta, ca in pa.items():
        if ca == 0.0:
            continue
        for tb, cb in pb.items():
            if cb == 0.0:
                continue
            t = CandidateTerm(ta.factors + tb.factors)
            out[t] = out.get(t, 0.0) + ca * cb
    return out


def _affine_poly(weights, polys, bias) -> dict:
    acc: dict = {}
    for w, p in zip(weights, polys):
        _poly_axpy(acc, p, float(w))
    b = float(bias)
    if b != 0.0:
        acc[CONSTANT_TERM] = acc.get(CONSTANT_TERM, 0.0) + b
    return acc


def expand_to_terms(cfg: NetConfig, p: NetParams) -> dict[CandidateTerm, float]:
    """Exact polynomial expansion of the network over its atomic symbols.

    Evaluating the returned term/coefficient mapping reproduces the forward
    pass at any input (up to float rounding).  Coefficients that are exactly
    zero are dropped.
    """
    _check_dims(cfg, p)
    lay = cfg.layout
    fc_polys = [_poly_from_atom(a) for a in lay.fc]
    bypass_polys = [_poly_from_atom(a) for a in lay.bypass]

    f_polys: list[dict] = []
    for i in range(cfg.k):
        inputs = fc_polys + f_polys
        alpha = _affine_poly(p.hidden_w[i][0], inputs, p.hidden_b[i][0])
        beta = _affine_poly(p.hidden_w[i][1], inputs, p.hidden_b[i][1])
        f_polys.append(_poly_mul(alpha, beta))

    readout_polys = []
    if cfg.kind == "galileo":
        eta_polys = [
            {CandidateTerm(lay.eta_factors(pair)): 1.0} for pair in lay.eta
        ]
        readout_polys.append(_affine_poly(p.eta_w, eta_polys, p.eta_b))
    readout_polys += bypass_polys + fc_polys + f_polys
    total = _affine_poly(p.out_w, readout_polys, p.out_b)
    return {t: c for t, c in total.items() if c != 0.0}


def evaluate_expansion(terms: dict[CandidateTerm, float], channels: dict):
    """Evaluate a term/coefficient mapping at channel values (scalars or arrays)."""
    total = 0.0
    for term, coeff in terms.items():
        val = coeff
        for a in term.factors:
            val = val * channels[a]
        total = total + val
    return total


def linear_readout_params(cfg: NetConfig, coeffs: dict) -> NetParams:
    """Parameters that realise a term set expressible linearly in the readout.

    Accepts term names or CandidateTerm keys.  Useful for encoding a known
    equation (for rollout oracles and covariance checks).  Terms must be
    single channels, advective pairs (galileo), or the constant.
    """
    p = zero_params(cfg)
    lay = cfg.layout
    n_g1 = 1 if cfg.kind == "galileo" else 0
    readout_atoms = list(lay.bypass) + list(lay.fc)
    out_w = np.zeros(cfg.readout_width)
    eta_w = np.zeros(len(lay.eta)) if cfg.kind == "galileo" else None
    out_b = 0.0
    for key, c in coeffs.items():
        term = parse_term(key) if isinstance(key, str) else key
        if term == CONSTANT_TERM:
            out_b = float(c)
            continue
        if term.degree == 1 and term.factors[0] in readout_atoms:
            out_w[n_g1 + readout_atoms.index(term.factors[0])] = float(c)
            continue
        if cfg.kind == "galileo" and term.degree == 2:
            for idx, pair in enumerate(lay.eta):
                if CandidateTerm(lay.eta_factors(pair)) == term:
                    eta_w[idx] = float(c)
                    break
            else:
                raise ValueError(f"term {term.name!r} is not an advective product")
            continue
        raise ValueError(f"term {term.name!r} is not linearly representable by kind {cfg.kind!r}")
    p.out_w = out_w
    p.out_b = out_b
    if cfg.kind == "galileo":
        p.eta_w = eta_w
        p.eta_b = 0.0
        out_w[0] = 1.0  # route the advective unit straight through
    return p
