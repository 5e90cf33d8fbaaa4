import numpy as np
import pytest

from fflp import fp16, network
from fflp.fp16 import Half
from fflp.network import (
    DimensionError,
    LayerRule,
    NetworkConfig,
    NetworkState,
    PlasticityRule,
    forward_layer,
    lif_step,
    network_timestep,
    plasticity_delta,
    plasticity_layer,
    run_stream,
    trace_step,
)

F16 = np.float16


def random_rule(config, rng, scale=0.05):
    genome = rng.normal(scale=scale, size=config.genome_size)
    return PlasticityRule.from_genome(config, genome)


def random_stream(config, rng, steps, density=0.3):
    return (rng.random((steps, config.n_in)) < density).astype(np.uint8)


# --- scalar ops -------------------------------------------------------------

def test_trace_step_examples():
    lam = Half(0.5)
    assert trace_step(Half(0.0), 0, lam) == Half(0.0)
    assert trace_step(Half(1.0), 1, lam) == Half(1.5)
    s = Half(1.0)
    for _ in range(3):
        s = trace_step(s, 0, lam)
    assert s == Half(0.125)  # lambda^3 is exact in binary16


def test_trace_step_rejects_bad_spike():
    with pytest.raises(ValueError):
        trace_step(Half(0.0), 2, Half(0.5))


def test_lif_step_examples():
    v, spike = lif_step(Half(0.0), Half(0.0), Half(1.0))
    assert (v, spike) == (Half(0.0), 0)
    v, spike = lif_step(Half(0.0), Half(2.0), Half(1.0))
    assert (v, spike) == (Half(0.0), 1)  # v_mid hits exactly v_th
    v, spike = lif_step(Half(1.0), Half(0.0), Half(2.0))
    assert (v, spike) == (Half(0.5), 0)


def test_lif_step_uses_only_add_and_halve():
    # closed form with an explicit multiply by 0.5 must agree bit-exactly
    rng = np.random.default_rng(0)
    for _ in range(3000):
        vb, ib = rng.integers(0, 1 << 16, size=2)
        v, i = Half.from_bits(int(vb)), Half.from_bits(int(ib))
        via_halve = v + (i + (-v)).halve()
        via_mul = v + (i + (-v)) * Half(0.5)
        if via_halve.is_nan():
            assert via_mul.is_nan()
        else:
            assert via_halve == via_mul


def test_plasticity_delta_examples():
    z = Half(0.0)
    d = Half(0.25)
    assert plasticity_delta(Half(1.0), z, z, d, z, z) == d
    got = plasticity_delta(Half(1.0), z, z, z, Half(0.5), Half(0.25))
    assert got == Half(0.125)


def test_plasticity_delta_reductions():
    rng = np.random.default_rng(1)
    for _ in range(500):
        a, b, g, d, sj, si = (
            Half.from_bits(int(x)) for x in rng.integers(0, 0x7C00, size=6)
        )
        z = Half(0.0)
        # both traces zero -> delta only
        assert plasticity_delta(a, b, g, d, z, z) == (z + z) + (z + d)
        # post trace zero -> delta + beta*s_pre
        got = plasticity_delta(a, b, g, d, sj, z)
        want = ((a * sj) * z + b * sj) + (g * z + d)
        assert got == want or (got.is_nan() and want.is_nan())


def test_plasticity_delta_random_oracle():
    # big-float oracle with per-product RNE rounding and the tree order
    from oracle import oracle_add, oracle_mul

    def o(op, x, y):
        return int(op(np.array([x], dtype=np.uint16), np.array([y], dtype=np.uint16))[0])

    rng = np.random.default_rng(2)
    for _ in range(2000):
        bits = [int(x) for x in rng.integers(0, 1 << 16, size=6)]
        a, b, g, d, sj, si = bits
        t_a = o(oracle_mul, o(oracle_mul, a, sj), si)
        t_b = o(oracle_mul, b, sj)
        t_c = o(oracle_mul, g, si)
        want = o(oracle_add, o(oracle_add, t_a, t_b), o(oracle_add, t_c, d))
        got = plasticity_delta(*(Half.from_bits(x) for x in bits)).bits
        if fp16.is_nan_bits(want):
            assert fp16.is_nan_bits(got)
        else:
            assert got == want


# --- layer ops --------------------------------------------------------------

def make_layer(n_pre, n_post, rng=None, scale=0.5):
    w = np.zeros((n_post, n_pre), dtype=F16)
    if rng is not None:
        w[:] = rng.normal(scale=scale, size=(n_post, n_pre)).astype(F16)
    return network.LayerState(
        weights=w,
        v=np.zeros(n_post, dtype=F16),
        pre_trace=np.zeros(n_pre, dtype=F16),
        post_trace=np.zeros(n_post, dtype=F16),
    )


def test_forward_layer_zero_input():
    st = make_layer(4, 3)
    out = forward_layer(st, np.zeros(4, dtype=np.uint8), F16(1.0), F16(0.5))
    assert not out.any()
    assert not st.v.any()


def test_forward_layer_one_hot_drive():
    st = make_layer(4, 3)
    st.weights[1, 2] = F16(8.0)
    spikes = np.array([0, 0, 1, 0], dtype=np.uint8)
    out = forward_layer(st, spikes, F16(1.0), F16(0.5))
    assert out.tolist() == [0, 1, 0]
    assert st.pre_trace[2] == F16(1.0)
    assert st.post_trace[1] == F16(1.0)


def test_forward_layer_rejects_mismatch_without_mutation():
    st = make_layer(4, 3)
    st.v[:] = F16(0.25)
    with pytest.raises(DimensionError):
        forward_layer(st, np.zeros(5, dtype=np.uint8), F16(1.0), F16(0.5))
    assert (st.v == F16(0.25)).all()


def test_forward_layer_matches_scalar_oracle():
    # brute-force Half dot product with identical accumulation order
    rng = np.random.default_rng(3)
    st = make_layer(9, 7, rng)
    st.v[:] = rng.normal(scale=0.3, size=7).astype(F16)
    v_before = st.v.copy()
    spikes = (rng.random(9) < 0.6).astype(np.uint8)
    out = forward_layer(st, spikes, F16(1.0), F16(0.5))
    for i in range(7):
        acc = Half(0.0)
        for j in range(9):
            acc = fp16.fused_psum(acc, Half.from_bits(int(st.weights[i, j].view(np.uint16))), int(spikes[j]))
        v_next, spk = lif_step(
            Half.from_bits(int(v_before[i].view(np.uint16))), acc, Half(1.0)
        )
        assert spk == out[i]
        assert v_next.bits == int(st.v[i].view(np.uint16))


def test_plasticity_layer_zero_rule_is_identity():
    rng = np.random.default_rng(4)
    st = make_layer(5, 6, rng)
    before = st.weights.copy()
    plasticity_layer(st, LayerRule.zeros((6, 5)))
    assert np.array_equal(st.weights.view(np.uint16), before.view(np.uint16))


def test_plasticity_layer_uniform_decay():
    st = make_layer(3, 2)
    st.weights[:] = F16(1.0)
    rule = LayerRule.zeros((2, 3))
    rule.delta[:] = F16(-0.125)
    plasticity_layer(st, rule)
    assert (st.weights == F16(0.875)).all()


def test_plasticity_layer_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    st = make_layer(6, 4, rng)
    st.pre_trace[:] = rng.random(6).astype(F16)
    st.post_trace[:] = rng.random(4).astype(F16)
    rule = LayerRule(
        *(rng.normal(scale=0.1, size=(4, 6)).astype(F16) for _ in range(4))
    )
    before = st.weights.copy()
    plasticity_layer(st, rule)
    for i in range(4):
        for j in range(6):
            delta = plasticity_delta(
                *(Half.from_bits(int(getattr(rule, n)[i, j].view(np.uint16)))
                  for n in ("alpha", "beta", "gamma", "delta")),
                Half.from_bits(int(st.pre_trace[j].view(np.uint16))),
                Half.from_bits(int(st.post_trace[i].view(np.uint16))),
            )
            want = Half.from_bits(int(before[i, j].view(np.uint16))) + delta
            assert want.bits == int(st.weights[i, j].view(np.uint16))


# --- whole network ----------------------------------------------------------

def test_zero_everything_stays_silent():
    cfg = NetworkConfig(5, 4, 3)
    net = NetworkState.zeros(cfg)
    rule = PlasticityRule.zeros(cfg)
    rng = np.random.default_rng(6)
    for _ in range(20):
        out = network_timestep(net, rule, (rng.random(5) < 0.5).astype(np.uint8))
        assert not out.any()
    assert not net.layers[0].weights.any()
    assert not net.layers[1].weights.any()


def test_potentiating_rule_grows_weights_from_zero():
    cfg = NetworkConfig(4, 3, 2)
    net = NetworkState.zeros(cfg)
    rule = PlasticityRule.zeros(cfg)
    rule.layers[0].beta[:] = F16(0.125)  # presynaptic growth
    spikes = np.ones(4, dtype=np.uint8)
    for _ in range(5):
        network_timestep(net, rule, spikes)
    assert (net.layers[0].weights > 0).all()


def test_zero_rule_never_changes_weights():
    cfg = NetworkConfig(6, 5, 3)
    net = NetworkState.zeros(cfg)
    net.layers[0].weights[:] = F16(0.5)
    net.layers[1].weights[:] = F16(0.5)
    w1, w2 = net.layers[0].weights.copy(), net.layers[1].weights.copy()
    rule = PlasticityRule.zeros(cfg)
    rng = np.random.default_rng(7)
    run_stream(net, rule, random_stream(cfg, rng, 30, density=0.5))
    assert np.array_equal(net.layers[0].weights, w1)
    assert np.array_equal(net.layers[1].weights, w2)


def test_trace_geometric_decay_bit_exact():
    cfg = NetworkConfig(3, 2, 2, lam=F16(0.75))
    net = NetworkState.zeros(cfg)
    rule = PlasticityRule.zeros(cfg)
    rule.lam = F16(0.75)
    network_timestep(net, rule, np.ones(3, dtype=np.uint8))
    start = Half.from_bits(int(net.trace_in[0].view(np.uint16)))
    k = 9
    for _ in range(k):
        network_timestep(net, rule, np.zeros(3, dtype=np.uint8))
    want = start
    lam = Half(0.75)
    for _ in range(k):
        want = lam * want + Half(0.0)
    assert want.bits == int(net.trace_in[0].view(np.uint16))


def test_determinism_identical_trajectories():
    cfg = NetworkConfig(8, 6, 4)
    rng = np.random.default_rng(8)
    rule = random_rule(cfg, rng)
    stream = random_stream(cfg, rng, 50)
    n1, n2 = NetworkState.zeros(cfg), NetworkState.zeros(cfg)
    o1 = run_stream(n1, rule, stream)
    o2 = run_stream(n2, rule, stream)
    assert np.array_equal(o1, o2)
    assert n1.digest() == n2.digest()


def reference_case():
    cfg = NetworkConfig(10, 8, 4)
    rng = np.random.default_rng(123)
    rule = random_rule(cfg, rng)
    stream = random_stream(cfg, rng, 100)
    net = NetworkState.zeros(cfg)
    run_stream(net, rule, stream)
    return net


def test_reference_trajectory_digest():
    # frozen from the golden model; guards against accidental semantic drift
    net = reference_case()
    assert net.digest() == (
        "15d6c8a25fca58816471f7a5fc3f1e5aecebaf668d668a565376125085b0d60e"
    )


def test_shared_hidden_trace_storage():
    cfg = NetworkConfig(3, 4, 2)
    net = NetworkState.zeros(cfg)
    assert net.layers[0].post_trace is net.layers[1].pre_trace


def test_genome_roundtrip():
    cfg = NetworkConfig(3, 4, 2)
    rng = np.random.default_rng(9)
    rule = random_rule(cfg, rng)
    again = PlasticityRule.from_genome(cfg, rule.to_genome())
    for lr1, lr2 in zip(rule.layers, again.layers):
        for n in ("alpha", "beta", "gamma", "delta"):
            assert np.array_equal(getattr(lr1, n), getattr(lr2, n))


def test_config_validation():
    with pytest.raises(ValueError):
        NetworkConfig(0, 1, 1)
    with pytest.raises(ValueError):
        NetworkConfig(1, 1, 1, lam=F16(1.5))
    with pytest.raises(ValueError):
        NetworkConfig(1, 1, 1, v_th=F16(0.0))
