"""FFLP binary model files.

Layout (little-endian throughout; every half is its raw 16-bit pattern):

    magic   4 bytes  b"FFLP"
    version u16      currently 1
    n_in    u32
    n_hidden u32
    n_out   u32
    v_th    half
    lambda  half
    then for each of the two layers, as [post][pre] row-major half
    arrays: weights, alpha, beta, gamma, delta.

A rule trained offline is shipped as one of these files with the weight
blocks zeroed; online adaptation always starts from zero weights.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .network import F16, LayerRule, NetworkConfig, NetworkState, PlasticityRule

MAGIC = b"FFLP"
VERSION = 1

_HEADER = struct.Struct("<4sHIIIHH")


class ModelFormatError(ValueError):
    """Malformed or truncated FFLP file."""


@dataclass
class Model:
    config: NetworkConfig
    rule: PlasticityRule
    weights: tuple[np.ndarray, np.ndarray]

    @classmethod
    def from_rule(cls, config: NetworkConfig, rule: PlasticityRule) -> "Model":
        s1, s2 = config.layer_shapes
        return cls(config, rule, (np.zeros(s1, dtype=F16), np.zeros(s2, dtype=F16)))

    def make_network(self) -> NetworkState:
        net = NetworkState.zeros(self.config)
        net.layers[0].weights[:] = self.weights[0]
        net.layers[1].weights[:] = self.weights[1]
        return net


def _f16_bits(x) -> int:
    return int(np.float16(x).view(np.uint16))


def save_model(path, model: Model) -> None:
    cfg = model.config
    with open(path, "wb") as f:
        f.write(
            _HEADER.pack(
                MAGIC, VERSION, cfg.n_in, cfg.n_hidden, cfg.n_out,
                _f16_bits(cfg.v_th), _f16_bits(cfg.lam),
            )
        )
        for w, lr in zip(model.weights, model.rule.layers):
            for arr in (w, lr.alpha, lr.beta, lr.gamma, lr.delta):
                f.write(np.ascontiguousarray(arr, dtype="<f2").tobytes())


def load_model(path) -> Model:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise ModelFormatError("file shorter than the FFLP header")
    magic, version, n_in, n_hidden, n_out, vth_bits, lam_bits = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    try:
        cfg = NetworkConfig(
            n_in, n_hidden, n_out,
            v_th=np.uint16(vth_bits).view(F16),
            lam=np.uint16(lam_bits).view(F16),
        )
    except ValueError as e:
        raise ModelFormatError(f"invalid config block: {e}") from e

    expected = _HEADER.size + 2 * 5 * cfg.n_synapses
    if len(data) != expected:
        raise ModelFormatError(
            f"file length {len(data)} != expected {expected} for dims "
            f"{n_in}-{n_hidden}-{n_out}"
        )
    pos = _HEADER.size
    weights, layers = [], []
    for shape in cfg.layer_shapes:
        n = shape[0] * shape[1]
        blocks = []
        for _ in range(5):
            blocks.append(
                np.frombuffer(data, dtype="<f2", count=n, offset=pos).reshape(shape).copy()
            )
            pos += 2 * n
        weights.append(blocks[0])
        layers.append(LayerRule(*blocks[1:]))
    rule = PlasticityRule((layers[0], layers[1]), lam=cfg.lam)
    return Model(cfg, rule, (weights[0], weights[1]))


def packed_coefficients(rule: LayerRule) -> np.ndarray:
    """Interleave (alpha, beta, gamma, delta) per synapse, mirroring the
    accelerator's single-wide-access parameter layout.  Returns a flat
    [4 * n_synapses] half array ordered by row-major synapse index."""
    flat = [rule.alpha.ravel(), rule.beta.ravel(), rule.gamma.ravel(), rule.delta.ravel()]
    out = np.empty(4 * flat[0].size, dtype=F16)
    for k, arr in enumerate(flat):
        out[k::4] = arr
    return out


def unpack_coefficients(packed: np.ndarray, shape) -> LayerRule:
    packed = np.ascontiguousarray(packed, dtype=F16)
    n = shape[0] * shape[1]
    if packed.size != 4 * n:
        raise ModelFormatError(f"packed block size {packed.size} != 4 x {n}")
    return LayerRule(*(packed[k::4].reshape(shape).copy() for k in range(4)))
