"""A plastic spiking network learning online, from zero weights.

The controller is a 3-layer LIF network whose weights start at zero and
are written exclusively by a local four-coefficient plasticity rule

    dw = alpha * S_pre * S_post + beta * S_pre + gamma * S_post + delta

where S are exponentially decaying spike traces.  This demo hand-picks
coefficients for the first layer (a Hebbian term plus presynaptic
drive) and watches weights and activity emerge from a spike stream.
"""

import numpy as np

from fflp.network import (
    NetworkConfig,
    NetworkState,
    PlasticityRule,
    network_timestep,
)

cfg = NetworkConfig(n_in=8, n_hidden=6, n_out=3)
print("network:", cfg.n_in, "->", cfg.n_hidden, "->", cfg.n_out,
      "| threshold", float(cfg.v_th), "| trace decay", float(cfg.lam))

rule = PlasticityRule.zeros(cfg)
rule.layers[0].alpha[:] = np.float16(0.02)   # fire-together wiring
rule.layers[0].beta[:] = np.float16(0.01)    # presynaptic drive
rule.layers[0].gamma[:] = np.float16(-0.005) # postsynaptic homeostasis
rule.layers[1].beta[:] = np.float16(0.015)

net = NetworkState.zeros(cfg)
rng = np.random.default_rng(7)

# inputs 0-3 fire often, 4-7 rarely: the rule should wire the active group
probs = np.array([0.6, 0.6, 0.5, 0.5, 0.05, 0.05, 0.05, 0.05])

for t in range(200):
    spikes_in = (rng.random(cfg.n_in) < probs).astype(np.uint8)
    out = network_timestep(net, rule, spikes_in)
    if t in (0, 9, 49, 199):
        w1 = net.layers[0].weights.astype(np.float64)
        print(f"\nt={t + 1:3d}  out spikes={out.tolist()}")
        print(f"  mean |w1| active inputs 0-3: {np.abs(w1[:, :4]).mean():.4f}")
        print(f"  mean |w1| quiet inputs 4-7:  {np.abs(w1[:, 4:]).mean():.4f}")
        print(f"  hidden membrane: {np.round(net.layers[0].v.astype(float), 3)}")

print("\ninput traces after the run (active vs quiet channels):")
print(" ", np.round(net.trace_in.astype(float), 3))

# weights, potentials, and traces all live in binary16
print("\nw1 dtype:", net.layers[0].weights.dtype,
      "| unique weight count:", len(np.unique(net.layers[0].weights)))
