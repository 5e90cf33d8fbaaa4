"""Episode runner: wires a plastic network between a task's spike
encoder and decoder, on either the functional model or the cycle-level
simulator backend.

Per control step the current observation is rate-encoded for
``task.timesteps_per_step`` SNN timesteps, output spikes are counted
over that window, and the decoded action drives the environment.
Weights always start from zero; all adaptation happens online through
the rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkConfig, NetworkState, PlasticityRule, network_timestep


class BackendMismatch(AssertionError):
    """Functional and cycle backends disagreed bit-for-bit."""


class _FunctionalStepper:
    def __init__(self, config, rule):
        self.net = NetworkState.zeros(config)
        self.rule = rule

    def run_block(self, spike_block):
        counts = np.zeros(self.net.config.n_out, dtype=np.int64)
        for s in spike_block:
            counts += network_timestep(self.net, self.rule, s)
        return counts

    def state(self):
        return self.net

    def is_finite(self):
        return self.net.is_finite()


class _CycleStepper:
    def __init__(self, config, rule, hw=None):
        from .accel import HardwareConfig, Simulator

        self.sim = Simulator(config, rule, hw or HardwareConfig())
        self.n_out = config.n_out

    def run_block(self, spike_block):
        outs, _ = self.sim.run_stream(spike_block)
        return np.asarray(outs, dtype=np.int64).sum(axis=0)

    def state(self):
        return self.sim.export_state()

    def is_finite(self):
        return self.state().is_finite()

    @property
    def trace(self):
        return self.sim.trace


@dataclass
class EpisodeResult:
    rewards: np.ndarray
    total_return: float
    state_finite: bool
    records: list = None  # (step, obs, action, reward) when recording
    trace: object = None  # CycleTrace for the cycle backend
    accuracy: float = None  # mini-classify only
    clipped_samples: int = 0


def run_episode(task, variant, rule: PlasticityRule, config: NetworkConfig,
                seed: int, backend: str = "functional", hw=None,
                record: bool = False, check: bool = False) -> EpisodeResult:
    """Run one episode from zero weights.  ``check`` runs both backends
    on the identical spike stream and raises BackendMismatch on any
    bit-level divergence of outputs or final state."""
    encoder = task.make_encoder()
    decoder = task.make_decoder()
    if encoder.n_channels != config.n_in or decoder.n_out != config.n_out:
        raise ValueError(
            f"network config {config.n_in}->{config.n_out} does not match task "
            f"coding {encoder.n_channels}->{decoder.n_out}"
        )
    if backend not in ("functional", "cycle"):
        raise ValueError(f"unknown backend {backend!r}")

    steppers = {}
    if backend == "functional" or check:
        steppers["functional"] = _FunctionalStepper(config, rule)
    if backend == "cycle" or check:
        steppers["cycle"] = _CycleStepper(config, rule, hw)

    enc_rng = np.random.default_rng((seed, 0xE2C0DE))
    obs = task.reset(seed, variant)
    T = task.timesteps_per_step
    rewards = []
    records = [] if record else None
    done = False
    step = 0
    while not done:
        block = encoder.encode_block(obs, enc_rng, T)
        counts = {name: s.run_block(block) for name, s in steppers.items()}
        if check:
            _compare_states(steppers, counts, step)
        action = decoder.decode(counts[backend], T)
        obs, reward, done = task.step(action)
        rewards.append(reward)
        if record:
            records.append((step, np.array(obs), np.array(action), reward))
        step += 1

    primary = steppers[backend]
    return EpisodeResult(
        rewards=np.array(rewards),
        total_return=float(np.sum(rewards)),
        state_finite=primary.is_finite(),
        records=records,
        trace=getattr(primary, "trace", None),
        accuracy=getattr(task, "last_accuracy", None),
        clipped_samples=encoder.clipped_samples,
    )


def _compare_states(steppers, counts, step):
    if not np.array_equal(counts["functional"], counts["cycle"]):
        raise BackendMismatch(f"output spike counts diverged at control step {step}")
    a, b = steppers["functional"].state(), steppers["cycle"].state()
    for name, x, y in (
        ("w1", a.layers[0].weights, b.layers[0].weights),
        ("w2", a.layers[1].weights, b.layers[1].weights),
        ("v_hidden", a.layers[0].v, b.layers[0].v),
        ("v_out", a.layers[1].v, b.layers[1].v),
        ("trace_in", a.trace_in, b.trace_in),
        ("trace_hidden", a.trace_hidden, b.trace_hidden),
        ("trace_out", a.trace_out, b.trace_out),
    ):
        if not np.array_equal(x.view(np.uint16), y.view(np.uint16)):
            raise BackendMismatch(f"{name} diverged at control step {step}")


def recovery_fraction(rewards: np.ndarray, perturb_step: int,
                      pre_window: int = 50, drop_window: int = 20,
                      window: int = 30, horizon: int = 200) -> float:
    """How much of the pre-perturbation reward level is regained within
    ``horizon`` steps: (best post window - immediate post level) /
    (pre level - immediate post level), clipped to [0, 1].  Returns 0
    when the perturbation caused no measurable drop."""
    rewards = np.asarray(rewards, dtype=np.float64)
    pre = rewards[max(0, perturb_step - pre_window) : perturb_step].mean()
    drop = rewards[perturb_step : perturb_step + drop_window].mean()
    if not pre - drop > 1e-6:
        return 0.0
    post = rewards[perturb_step : perturb_step + horizon]
    best = max(
        post[i : i + window].mean() for i in range(0, max(1, len(post) - window + 1))
    )
    return float(np.clip((best - drop) / (pre - drop), 0.0, 1.0))
