"""The cycle-level accelerator model next to the functional one.

Two engines share banked memory: the forward engine computes currents,
membrane updates and traces; the plasticity engine streams packed
coefficient quads and read-modify-writes the weights.  The phased
schedule overlaps layer 1's synaptic update with layer 2's forward
pass (and vice versa).  Whatever the schedule does, the architectural
state must stay bit-identical to the plain functional model.
"""

import numpy as np

from fflp.accel import HardwareConfig, Simulator, golden_diff, latency_report
from fflp.network import NetworkConfig, PlasticityRule

rng = np.random.default_rng(42)
cfg = NetworkConfig(n_in=24, n_hidden=32, n_out=4)
rule = PlasticityRule.from_genome(
    cfg, rng.normal(scale=0.05, size=cfg.genome_size)
)
stream = (rng.random((50, cfg.n_in)) < 0.25).astype(np.uint8)

report = golden_diff(cfg, rule, stream)
trace = report["trace"]
print("bit-identical to the functional model:", report["equal"])
print(f"cycles: {trace.total_cycles}  "
      f"({trace.total_cycles / trace.timesteps:.0f} per timestep)")
print(f"overlap ratio: {trace.overlap_cycles / trace.total_cycles:.2f}")
print("weight-fetch events (spike-gated):", trace.weight_fetches)

# the same stream with the engines serialized inside each phase
serial = Simulator(cfg, rule, HardwareConfig())
serial.run_stream(stream, overlap=False)
print(f"\nserialized schedule: {serial.trace.total_cycles} cycles "
      f"({serial.trace.total_cycles / trace.total_cycles:.2f}x the "
      f"overlapped schedule)")

# a few lines of the per-cycle event trace
sim = Simulator(cfg, rule, HardwareConfig(), record_events=True)
sim.run_stream(stream[:2])
lines = sim.trace.to_text().splitlines()
print(f"\nevent trace ({len(lines)} events for 2 timesteps), first 10:")
print("cycle,engine,stage,layer,op,addr,stall_reason")
for line in lines[:10]:
    print(line)

print("\nlatency report:")
rep = latency_report(sim.trace, clock_mhz=200.0)
for key in ("cycles", "us", "us_per_timestep", "stalls", "overlap_ratio"):
    print(f"  {key}: {rep[key]}")
