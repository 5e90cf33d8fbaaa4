"""Offline rule search with parameter-exploring policy gradients.

The genome is the flat vector of plasticity coefficients (4 per
synapse).  Search runs in float64; a genome is only rounded to binary16
when materialized into a PlasticityRule for evaluation or export.

Each generation draws pop_size/2 Gaussian perturbations and evaluates
the mirrored pair (mu + eps, mu - eps).  Fitness values are rank
normalized to [-0.5, 0.5] before the mean/stddev updates, and the
stddev baseline is a running mean of the shaped fitness.  Candidate
evaluations share a per-generation seed so every genome sees the same
episodes (common random numbers).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkConfig, PlasticityRule


@dataclass
class PEPGConfig:
    eta_mu: float = 0.2
    eta_sigma: float = 0.1
    sigma_init: float = 0.05
    sigma_min: float = 1e-3
    baseline_decay: float = 0.9


@dataclass
class FitnessReport:
    candidate_id: int
    returns: list  # per-episode returns, in episode order
    fitness: float  # aggregate: mean of returns (or the task floor)
    failed: bool = False  # non-finite state/reward encountered


@dataclass
class EvolutionState:
    mu: np.ndarray
    sigma: np.ndarray
    generation: int = 0
    rng_seed: int = 0
    baseline: float = 0.0
    history: list = field(default_factory=list)  # (gen, best, mean, std)
    last_eps: np.ndarray = None  # perturbations of the pending generation

    @classmethod
    def init(cls, dim: int, seed: int, pepg: PEPGConfig = None) -> "EvolutionState":
        pepg = pepg or PEPGConfig()
        return cls(
            mu=np.zeros(dim),
            sigma=np.full(dim, pepg.sigma_init),
            rng_seed=int(seed),
        )


def sample_population(es: EvolutionState, pop_size: int) -> list[np.ndarray]:
    """Mirrored genomes [mu+e0, mu-e0, mu+e1, ...], reproducible from
    (rng_seed, generation)."""
    if pop_size % 2 != 0:
        raise ValueError("population size must be even")
    n_pairs = pop_size // 2
    rng = np.random.default_rng((es.rng_seed, es.generation))
    eps = rng.normal(size=(n_pairs, es.mu.size)) * es.sigma
    es.last_eps = eps
    genomes = []
    for k in range(n_pairs):
        genomes.append(es.mu + eps[k])
        genomes.append(es.mu - eps[k])
    return genomes


def _rank_normalize(values: np.ndarray) -> np.ndarray:
    """Average-rank shaping onto [-0.5, 0.5]; ties get equal weight, so a
    flat population maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 1:
        return np.zeros(1)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    sorted_vals = values[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0  # 0-based average rank
        i = j + 1
    return ranks / (n - 1) - 0.5


def pepg_update(es: EvolutionState, pairs, pepg: PEPGConfig = None) -> EvolutionState:
    """Apply one mean/stddev update from mirrored fitness pairs.

    ``pairs`` is an iterable of (pair_index, fitness_plus, fitness_minus).
    The update sums in pair-index order, so permuting the iterable leaves
    the result bit-identical.
    """
    pepg = pepg or PEPGConfig()
    pairs = sorted(pairs, key=lambda p: p[0])
    if es.last_eps is None or len(pairs) != len(es.last_eps):
        raise ValueError(
            f"expected {0 if es.last_eps is None else len(es.last_eps)} "
            f"fitness pairs, got {len(pairs)}"
        )
    idx = np.array([p[0] for p in pairs])
    if not np.array_equal(idx, np.arange(len(pairs))):
        raise ValueError("fitness pairs must cover every pair index exactly once")

    f_plus = np.array([p[1] for p in pairs], dtype=np.float64)
    f_minus = np.array([p[2] for p in pairs], dtype=np.float64)
    shaped = _rank_normalize(np.concatenate([f_plus, f_minus]))
    s_plus, s_minus = shaped[: len(pairs)], shaped[len(pairs) :]

    eps = es.last_eps
    grad_mu = ((s_plus - s_minus) / 2.0) @ eps / len(pairs)
    mu = es.mu + pepg.eta_mu * grad_mu

    pair_mean = (s_plus + s_minus) / 2.0
    grad_sigma = (pair_mean - es.baseline) @ ((eps**2 - es.sigma**2) / es.sigma) / len(pairs)
    sigma = np.maximum(es.sigma + pepg.eta_sigma * grad_sigma, pepg.sigma_min)

    baseline = (
        pepg.baseline_decay * es.baseline
        + (1.0 - pepg.baseline_decay) * float(shaped.mean())
    )

    return EvolutionState(
        mu=mu,
        sigma=sigma,
        generation=es.generation + 1,
        rng_seed=es.rng_seed,
        baseline=baseline,
        history=es.history,
        last_eps=None,
    )


def evaluate_candidate(genome, task, config: NetworkConfig, episodes: int,
                       seed: int, candidate_id: int = 0) -> FitnessReport:
    """Phase-2 style evaluation: a zero-weight network with this genome's
    rule runs full episodes with plasticity active."""
    from .control import run_episode  # late import; control depends on tasks

    genome = np.asarray(genome, dtype=np.float64)
    if genome.size != config.genome_size:
        raise ValueError("genome length does not match the network config")
    rule = PlasticityRule.from_genome(config, genome)
    rng = np.random.default_rng((seed, 0xE7A1))
    variants = task.train_variants
    # spread the episode variants evenly across the training set so one
    # evaluation covers distinct task conditions
    base = int(rng.integers(len(variants)))
    stride = max(1, len(variants) // max(1, episodes))
    returns = []
    failed = False
    for ep in range(episodes):
        variant = variants[(base + ep * stride) % len(variants)]
        ep_seed = int(rng.integers(2**63))
        result = run_episode(task, variant, rule, config, ep_seed)
        if not np.isfinite(result.total_return) or not result.state_finite:
            failed = True
            returns.append(task.fitness_floor)
        else:
            returns.append(result.total_return)
    fitness = task.fitness_floor if failed else float(np.mean(returns))
    return FitnessReport(candidate_id, returns, fitness, failed)


def _eval_star(args):
    return evaluate_candidate(*args)


def evaluate_population(genomes, task, config, episodes, seed, workers=1):
    """FitnessReports for every genome; identical results for any worker
    count (work items are fully determined by their index)."""
    jobs = [
        (g, task, config, episodes, seed, cid) for cid, g in enumerate(genomes)
    ]
    if workers <= 1:
        return [_eval_star(j) for j in jobs]
    import multiprocessing as mp

    with mp.get_context("spawn").Pool(workers) as pool:
        return pool.map(_eval_star, jobs)


def train_rule(config: NetworkConfig, task, generations: int, pop_size: int,
               seed: int, pepg: PEPGConfig = None, episodes: int = 2,
               workers: int = 1, log_path=None, progress=False):
    """Full offline search; returns (PlasticityRule from final mu,
    EvolutionState).  Writes the per-generation CSV log row by row so a
    partial log survives interruption."""
    pepg = pepg or PEPGConfig()
    es = EvolutionState.init(config.genome_size, seed, pepg)
    log_file = open(log_path, "w", newline="") if log_path else None
    writer = None
    if log_file:
        writer = csv.writer(log_file)
        writer.writerow(["generation", "best", "mean", "std", "wallclock_s"])
    t0 = time.monotonic()
    try:
        for gen in range(generations):
            genomes = sample_population(es, pop_size)
            eval_seed = int(
                np.random.default_rng((seed, 0x5EED, gen)).integers(2**63)
            )
            reports = evaluate_population(
                genomes, task, config, episodes, eval_seed, workers=workers
            )
            fits = np.array([r.fitness for r in reports])
            pairs = [
                (k, fits[2 * k], fits[2 * k + 1]) for k in range(pop_size // 2)
            ]
            stats = (gen, float(fits.max()), float(fits.mean()), float(fits.std()))
            es = pepg_update(es, pairs, pepg)
            es.history.append(stats)
            if writer:
                writer.writerow(
                    [stats[0], f"{stats[1]:.6g}", f"{stats[2]:.6g}",
                     f"{stats[3]:.6g}", f"{time.monotonic() - t0:.3f}"]
                )
                log_file.flush()
            if progress:
                print(
                    f"gen {gen:3d}  best {stats[1]:9.4f}  mean {stats[2]:9.4f}",
                    flush=True,
                )
    finally:
        if log_file:
            log_file.close()
    rule = PlasticityRule.from_genome(config, es.mu)
    return rule, es
