"""Binary model files: network configuration header plus flat parameters.

Layout (little-endian): magic ``PDEM`` | version u32 | kind u32 | n u32 |
ndim u32 | k u32 | max_deriv u32 | flags u32 | n_params u32 | experiment
tag (16 bytes, NUL padded) | parameter vector f64, in canonical layer order
(hidden weights/biases per layer, readout weights/bias, advective unit).
"""

from __future__ import annotations

import struct

import numpy as np

from invariant_pde.symnet import KINDS, NetConfig, NetParams
from invariant_pde.train import flatten_params, unflatten_params

MODEL_MAGIC = b"PDEM"
MODEL_VERSION = 1
_HEAD = struct.Struct("<4sIIIIIIII16s")

_FLAG_SIN_EXP = 1


class ModelIOError(Exception):
    pass


def write_model(path, cfg: NetConfig, nets: list[NetParams], experiment: str) -> None:
    vec = flatten_params(nets, cfg)
    include = cfg.include_sin_exp
    if include is None:
        include = cfg.kind == "lorentz"
    head = _HEAD.pack(
        MODEL_MAGIC,
        MODEL_VERSION,
        KINDS.index(cfg.kind),
        cfg.n,
        cfg.ndim,
        cfg.k,
        cfg.max_deriv,
        _FLAG_SIN_EXP if include else 0,
        vec.size,
        experiment.encode()[:16].ljust(16, b"\0"),
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(vec.astype("<f8").tobytes())


def read_model(path) -> tuple[NetConfig, list[NetParams], str]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size or raw[:4] != MODEL_MAGIC:
        raise ModelIOError(f"{path}: not a model file")
    (_, version, kind_i, n, ndim, k, max_deriv, flags, n_params, tag) = _HEAD.unpack(
        raw[: _HEAD.size]
    )
    if version != MODEL_VERSION:
        raise ModelIOError(f"{path}: unsupported model version {version}")
    expected = _HEAD.size + 8 * n_params
    if len(raw) != expected:
        raise ModelIOError(f"{path}: expected {expected} bytes, got {len(raw)}")
    cfg = NetConfig(
        kind=KINDS[kind_i],
        n=n,
        k=k,
        ndim=ndim,
        max_deriv=max_deriv,
        include_sin_exp=bool(flags & _FLAG_SIN_EXP),
    )
    vec = np.frombuffer(raw, dtype="<f8", offset=_HEAD.size).copy()
    nets = unflatten_params(vec, cfg, n)
    experiment = tag.rstrip(b"\0").decode()
    return cfg, nets, experiment
