"""Latency and throughput figures from the cycle model.

Two scales: a control-sized network (the kind that runs one SNN
timestep per few microseconds on the real part) and the 784-1024-10
classifier scale used for throughput comparisons.  The model's
assumptions are printed with the numbers -- these are order-of-
magnitude sanity checks, not RTL timing.

The large network takes half a minute or so to simulate.
"""

import numpy as np

from fflp.accel import HardwareConfig, Simulator, latency_report
from fflp.network import NetworkConfig, PlasticityRule

CLOCK_MHZ = 200.0
rng = np.random.default_rng(0)


def run(cfg, timesteps, density, frames=None):
    rule = PlasticityRule.from_genome(
        cfg, rng.normal(scale=0.02, size=cfg.genome_size)
    )
    sim = Simulator(cfg, rule, HardwareConfig(), monitor=False)
    for _ in range(frames or 1):
        stream = (rng.random((timesteps, cfg.n_in)) < density).astype(np.uint8)
        sim.run_stream(stream)
    return latency_report(sim.trace, CLOCK_MHZ, frames=frames)


print("control-scale network 32 -> 128 -> 4 (16 PEs, 200 MHz)")
rep = run(NetworkConfig(32, 128, 4), timesteps=32, density=0.3)
print(f"  {rep['cycles']} cycles over {rep['timesteps']} timesteps")
print(f"  {rep['us_per_timestep']:.2f} us per timestep "
      f"(an 8 us budget per timestep means {8.0 * CLOCK_MHZ:.0f} cycles)")
print(f"  overlap ratio {rep['overlap_ratio']:.2f}, stalls {rep['stalls']}")

print("\nclassifier-scale network 784 -> 1024 -> 10, one 16-timestep frame")
rep = run(NetworkConfig(784, 1024, 10), timesteps=16, density=0.13, frames=1)
print(f"  {rep['cycles']} cycles, {rep['us']:.0f} us, "
      f"{rep['fps']:.1f} frames/s with learning on")

print("\nmodel assumptions:")
for a in rep["assumptions"]:
    print(f"  - {a}")
