"""Phase 1: evolving plasticity coefficients with PEPG.

Nothing here trains weights directly.  The search space is the rule --
four coefficients per synapse -- and fitness is the return of a
zero-weight network that must wire itself up during the episode.
A short run on the point-mass direction task shows the fitness trend;
the held-out angles probe generalization (the rule never saw them).

Expect several minutes of wall time.
"""

import numpy as np

from fflp.control import run_episode
from fflp.evolution import PEPGConfig, train_rule
from fflp.tasks import default_network_config, make_task

task = make_task("point-mass-direction")
cfg = default_network_config(task)
print("task:", task.name, "| trained variants:", len(task.train_variants),
      "| held-out:", len(task.eval_variants))
print("network:", cfg.n_in, "->", cfg.n_hidden, "->", cfg.n_out,
      "| genome size:", cfg.genome_size)

pepg = PEPGConfig(eta_mu=2.0, eta_sigma=1.0, sigma_init=0.08)
rule, es = train_rule(
    cfg, task, generations=12, pop_size=24, seed=7, episodes=3,
    pepg=pepg, progress=True,
)

print("\nevaluating the final mean genome:")
trained = [
    run_episode(task, v, rule, cfg, seed=100 + i).total_return
    for i, v in enumerate(task.train_variants)
]
held_out = [
    run_episode(task, v, rule, cfg, seed=200 + i).total_return
    for i, v in enumerate(task.eval_variants[::9])
]
print("trained-angle returns:  ", np.round(trained, 1))
print("held-out sample returns:", np.round(held_out, 1))
print(f"medians: trained {np.median(trained):.1f}, "
      f"held-out {np.median(held_out):.1f}")
print("\n(the acceptance run uses 20 generations x 32 candidates; this "
      "short budget already shows the trend)")
