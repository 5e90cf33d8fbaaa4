"""Golden functional model of the three-layer plastic SNN.

All state is binary16.  Two weight matrices connect input -> hidden ->
output populations of leaky integrate-and-fire neurons (membrane time
constant fixed at 2, so the leak is a halving).  Each synapse carries a
four-coefficient update rule applied every timestep from the pre/post
spike traces.

The per-element operation order is part of the contract: binary16
addition is not associative, and the cycle-level simulator must
reproduce this model bit for bit.
  * input current accumulates one addition per spiking presynaptic
    index, in ascending index order;
  * the membrane update is v + halve(i - v), no general multiply;
  * the four plasticity terms are rounded individually, the triple
    product as (alpha * S_pre) * S_post, and summed in the balanced
    tree order (t_a + t_b) + (t_c + t_d).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import fp16
from .fp16 import Half, vadd, vhalve, vmul, vsub

F16 = np.float16

TAU_M = 2  # membrane time constant; the leak is a plain halving

DEFAULT_LAMBDA = 0.5
DEFAULT_V_TH = 1.0


class DimensionError(ValueError):
    """Shape of an input or parameter tensor does not match the config."""


@dataclass(frozen=True)
class NetworkConfig:
    n_in: int
    n_hidden: int
    n_out: int
    v_th: F16 = F16(DEFAULT_V_TH)
    lam: F16 = F16(DEFAULT_LAMBDA)

    def __post_init__(self):
        if min(self.n_in, self.n_hidden, self.n_out) < 1:
            raise ValueError("neuron counts must be >= 1")
        object.__setattr__(self, "v_th", F16(self.v_th))
        object.__setattr__(self, "lam", F16(self.lam))
        if not (0.0 < float(self.lam) < 1.0):
            raise ValueError("lambda must lie in (0, 1)")
        if not float(self.v_th) > 0.0:
            raise ValueError("v_th must be positive")

    @property
    def layer_shapes(self) -> tuple[tuple[int, int], tuple[int, int]]:
        """Weight shapes [post][pre] for the two weight matrices."""
        return (self.n_hidden, self.n_in), (self.n_out, self.n_hidden)

    @property
    def n_synapses(self) -> int:
        return self.n_hidden * self.n_in + self.n_out * self.n_hidden

    @property
    def genome_size(self) -> int:
        return 4 * self.n_synapses


@dataclass
class LayerRule:
    """Per-synapse plasticity coefficients for one weight matrix."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        shapes = {t.shape for t in (self.alpha, self.beta, self.gamma, self.delta)}
        if len(shapes) != 1:
            raise DimensionError(f"coefficient tensors disagree on shape: {shapes}")
        for name in ("alpha", "beta", "gamma", "delta"):
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=F16))

    @property
    def shape(self):
        return self.alpha.shape

    def __iter__(self):
        return iter((self.alpha, self.beta, self.gamma, self.delta))

    @classmethod
    def zeros(cls, shape) -> "LayerRule":
        return cls(*(np.zeros(shape, dtype=F16) for _ in range(4)))


@dataclass
class PlasticityRule:
    """The evolved genome materialized in binary16: one LayerRule per
    weight matrix plus the shared trace decay constant."""

    layers: tuple[LayerRule, LayerRule]
    lam: F16 = F16(DEFAULT_LAMBDA)

    def __post_init__(self):
        self.lam = F16(self.lam)

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "PlasticityRule":
        s1, s2 = config.layer_shapes
        return cls((LayerRule.zeros(s1), LayerRule.zeros(s2)), lam=config.lam)

    @classmethod
    def from_genome(cls, config: NetworkConfig, genome: np.ndarray) -> "PlasticityRule":
        """Reshape a flat real-valued genome (planar alpha/beta/gamma/delta
        per layer) into binary16 coefficient tensors."""
        genome = np.asarray(genome, dtype=np.float64).ravel()
        if genome.size != config.genome_size:
            raise DimensionError(
                f"genome length {genome.size} != 4 x {config.n_synapses} synapses"
            )
        layers = []
        pos = 0
        with np.errstate(over="ignore"):
            for shape in config.layer_shapes:
                n = shape[0] * shape[1]
                coeffs = []
                for _ in range(4):
                    coeffs.append(genome[pos : pos + n].astype(F16).reshape(shape))
                    pos += n
                layers.append(LayerRule(*coeffs))
        return cls((layers[0], layers[1]), lam=config.lam)

    def to_genome(self) -> np.ndarray:
        parts = []
        for lr in self.layers:
            for t in (lr.alpha, lr.beta, lr.gamma, lr.delta):
                parts.append(t.astype(np.float64).ravel())
        return np.concatenate(parts)


@dataclass
class LayerState:
    """One weight matrix with its membrane and trace vectors.

    pre_trace / post_trace may alias arrays owned by the enclosing
    NetworkState (the hidden trace is stored once and shared).
    """

    weights: np.ndarray  # [post][pre]
    v: np.ndarray
    pre_trace: np.ndarray
    post_trace: np.ndarray
    out_spikes: np.ndarray = field(default=None)

    def __post_init__(self):
        n_post, n_pre = self.weights.shape
        if self.v.shape != (n_post,):
            raise DimensionError("membrane vector does not match weight rows")
        if self.pre_trace.shape != (n_pre,) or self.post_trace.shape != (n_post,):
            raise DimensionError("trace vectors do not match weight shape")
        if self.out_spikes is None:
            self.out_spikes = np.zeros(n_post, dtype=np.uint8)


@dataclass
class NetworkState:
    config: NetworkConfig
    layers: tuple[LayerState, LayerState]
    # canonical trace storage; layer views alias these
    trace_in: np.ndarray = None
    trace_hidden: np.ndarray = None
    trace_out: np.ndarray = None

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "NetworkState":
        t_in = np.zeros(config.n_in, dtype=F16)
        t_hid = np.zeros(config.n_hidden, dtype=F16)
        t_out = np.zeros(config.n_out, dtype=F16)
        s1, s2 = config.layer_shapes
        l1 = LayerState(
            weights=np.zeros(s1, dtype=F16),
            v=np.zeros(config.n_hidden, dtype=F16),
            pre_trace=t_in,
            post_trace=t_hid,
        )
        l2 = LayerState(
            weights=np.zeros(s2, dtype=F16),
            v=np.zeros(config.n_out, dtype=F16),
            pre_trace=t_hid,
            post_trace=t_out,
        )
        return cls(config, (l1, l2), trace_in=t_in, trace_hidden=t_hid, trace_out=t_out)

    def copy(self) -> "NetworkState":
        out = NetworkState.zeros(self.config)
        for dst, src in zip(out.layers, self.layers):
            dst.weights[:] = src.weights
            dst.v[:] = src.v
            dst.out_spikes[:] = src.out_spikes
        out.trace_in[:] = self.trace_in
        out.trace_hidden[:] = self.trace_hidden
        out.trace_out[:] = self.trace_out
        return out

    def digest(self) -> str:
        """SHA-256 over all state arrays; regression fingerprint."""
        h = hashlib.sha256()
        for layer in self.layers:
            h.update(layer.weights.tobytes())
            h.update(layer.v.tobytes())
            h.update(layer.out_spikes.tobytes())
        h.update(self.trace_in.tobytes())
        h.update(self.trace_hidden.tobytes())
        h.update(self.trace_out.tobytes())
        return h.hexdigest()

    def is_finite(self) -> bool:
        return all(
            np.isfinite(arr).all()
            for arr in (
                self.layers[0].weights,
                self.layers[1].weights,
                self.layers[0].v,
                self.layers[1].v,
                self.trace_in,
                self.trace_hidden,
                self.trace_out,
            )
        )


# ---------------------------------------------------------------------------
# Scalar operations (reference semantics on Half values)

def trace_step(trace: Half, spike: int, lam: Half) -> Half:
    """S <- lam * S + spike."""
    if spike not in (0, 1):
        raise ValueError("spike must be 0 or 1")
    decayed = lam * trace
    return decayed + Half(1.0) if spike else decayed + Half(0.0)


def lif_step(v: Half, i_in: Half, v_th: Half) -> tuple[Half, int]:
    """One LIF update: v + (i - v)/2, hard reset to 0 on threshold."""
    v_mid = v + (i_in + (-v)).halve()
    fired = not v_mid.is_nan() and float(v_mid) >= float(v_th)
    return (Half(0.0), 1) if fired else (v_mid, 0)


def plasticity_delta(alpha: Half, beta: Half, gamma: Half, delta: Half,
                     s_pre: Half, s_post: Half) -> Half:
    t_a = (alpha * s_pre) * s_post
    t_b = beta * s_pre
    t_c = gamma * s_post
    return (t_a + t_b) + (t_c + delta)


# ---------------------------------------------------------------------------
# Vectorized layer operations (bit-identical to the scalar forms)

def input_current(weights: np.ndarray, in_spikes: np.ndarray) -> np.ndarray:
    """Spike-gated accumulation, one binary16 add per spiking input,
    ascending presynaptic index."""
    n_post, n_pre = weights.shape
    if in_spikes.shape != (n_pre,):
        raise DimensionError("input spike vector does not match weight columns")
    acc = np.zeros(n_post, dtype=F16)
    for j in np.flatnonzero(in_spikes):
        acc = vadd(acc, weights[:, j])
    return acc


def lif_step_vec(v: np.ndarray, i_in: np.ndarray, v_th: F16) -> tuple[np.ndarray, np.ndarray]:
    v_mid = vadd(v, vhalve(vsub(i_in, v)))
    spikes = (v_mid >= v_th).astype(np.uint8)  # NaN compares false: no spike
    v_next = np.where(spikes, F16(0.0), v_mid)
    return v_next, spikes


def trace_step_vec(trace: np.ndarray, spikes: np.ndarray, lam: F16) -> np.ndarray:
    return vadd(vmul(np.asarray(lam, dtype=F16), trace), spikes.astype(F16))


def plasticity_delta_vec(rule: LayerRule, pre_trace: np.ndarray,
                         post_trace: np.ndarray) -> np.ndarray:
    s_pre = pre_trace[np.newaxis, :]
    s_post = post_trace[:, np.newaxis]
    t_a = vmul(vmul(rule.alpha, s_pre), s_post)
    t_b = vmul(rule.beta, s_pre)
    t_c = vmul(rule.gamma, s_post)
    return vadd(vadd(t_a, t_b), vadd(t_c, rule.delta))


def forward_layer(state: LayerState, in_spikes: np.ndarray, v_th: F16, lam: F16,
                  update_pre_trace: bool = True) -> np.ndarray:
    """Forward pass of one layer: psum accumulation, LIF update, trace
    update.  Rejects dimension mismatches before touching any state.

    update_pre_trace=False is used at network level for the second
    layer, whose presynaptic trace is the hidden trace already advanced
    by the first layer's postsynaptic update.
    """
    in_spikes = np.asarray(in_spikes, dtype=np.uint8)
    i_in = input_current(state.weights, in_spikes)  # validates dims
    v_next, spikes = lif_step_vec(state.v, i_in, v_th)
    state.v[:] = v_next
    if update_pre_trace:
        state.pre_trace[:] = trace_step_vec(state.pre_trace, in_spikes, lam)
    state.post_trace[:] = trace_step_vec(state.post_trace, spikes, lam)
    state.out_spikes[:] = spikes
    return spikes


def plasticity_layer(state: LayerState, rule: LayerRule) -> None:
    """w += delta for every synapse, from the current (already advanced)
    traces.  Deltas depend only on pre-update traces, so the per-synapse
    order is unobservable."""
    if rule.shape != state.weights.shape:
        raise DimensionError(
            f"rule shape {rule.shape} != weight shape {state.weights.shape}"
        )
    state.weights[:] = vadd(
        state.weights, plasticity_delta_vec(rule, state.pre_trace, state.post_trace)
    )


def network_timestep(net: NetworkState, rule: PlasticityRule,
                     in_spikes: np.ndarray) -> np.ndarray:
    """One full inference + adaptation step.

    Order L1 forward -> L1 update -> L2 forward -> L2 update matches the
    data dependencies of the accelerator's overlapped schedule; the
    resulting state is the reference the cycle simulator must hit
    bit-exactly.
    """
    cfg = net.config
    l1, l2 = net.layers
    with np.errstate(over="ignore", invalid="ignore"):
        hidden_spikes = forward_layer(l1, in_spikes, cfg.v_th, rule.lam)
        plasticity_layer(l1, rule.layers[0])
        out_spikes = forward_layer(
            l2, hidden_spikes, cfg.v_th, rule.lam, update_pre_trace=False
        )
        plasticity_layer(l2, rule.layers[1])
    return out_spikes


def run_stream(net: NetworkState, rule: PlasticityRule,
               spike_stream: np.ndarray) -> np.ndarray:
    """Apply network_timestep over a [T, n_in] spike stream; returns the
    [T, n_out] output spike matrix."""
    out = np.zeros((len(spike_stream), net.config.n_out), dtype=np.uint8)
    for t, s in enumerate(spike_stream):
        out[t] = network_timestep(net, rule, s)
    return out
