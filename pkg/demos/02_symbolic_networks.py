"""The three symbolic network variants and their exact term expansions.

Shows how the wiring constrains which candidate terms each network can
express: the unconstrained baseline forms arbitrary monomials, the Galilean
variant only advective products and pure derivatives, the Lorentz variant
only zero-derivative scalars plus a linear Laplacian.
"""

import numpy as np

from invariant_pde.symnet import (
    NetConfig,
    atom_name,
    expand_to_terms,
    forward_from_channels,
    init_params,
)

rng = np.random.default_rng(0)

for kind in ("baseline", "galileo", "lorentz"):
    cfg = NetConfig(kind=kind, n=1, k=2, ndim=2, max_deriv=3)
    lay = cfg.layout
    print(f"== {kind} ==")
    print("  fully connected channels:", [atom_name(a) for a in lay.fc])
    if lay.bypass:
        print("  readout-only channels:  ", [atom_name(a) for a in lay.bypass])
    if lay.eta:
        from invariant_pde.symnet import CandidateTerm

        print(
            "  advective products:     ",
            [CandidateTerm(lay.eta_factors(p)).name for p in lay.eta],
        )

    params = init_params(cfg, rng)
    terms = expand_to_terms(cfg, params)
    biggest = sorted(terms.items(), key=lambda kv: -abs(kv[1]))[:6]
    print(f"  random network expands into {len(terms)} candidate terms; largest:")
    for t, c in biggest:
        print(f"    {c:+9.5f} * {t.name}")

    # the expansion reproduces the forward pass exactly
    chans = {a: rng.uniform(-1, 1) for a in lay.input_channels}
    fwd = forward_from_channels(cfg, params, chans)
    from invariant_pde.symnet import evaluate_expansion

    exp = evaluate_expansion(terms, chans)
    print(f"  forward {fwd:+.12f}  vs expansion {exp:+.12f}\n")
