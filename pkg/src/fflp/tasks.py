"""Desk-scale evaluation environments and spike coding.

Closed-form dynamics only (point mass, 1-D mass, analytic two-joint
arm, 8x8 image classification): deterministic, dependency-free, and
fast enough to sit inside an evolution-strategy inner loop.  Direction
and velocity tasks mirror an 8-trained / 72-held-out variant split.

Observations are encoded as Bernoulli rate spikes (antithetic channel
pairs for signed features); actions are decoded from output spike
counts over the control window.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np


class EpisodeDone(RuntimeError):
    """step() called after the episode finished."""


class DatasetFormatError(ValueError):
    """Malformed FFDS dataset file; message carries the offending position."""


# ---------------------------------------------------------------------------
# Spike coding

@dataclass(frozen=True)
class FeatureSpec:
    name: str
    low: float
    high: float
    signed: bool = True


class RateEncoder:
    """Bernoulli rate coder.

    Each unsigned feature maps to one channel with spike probability
    (x - low) / (high - low).  Each signed feature maps to an antithetic
    pair: positive part and negative part, each normalized by its bound.
    ``repeat`` tiles the whole channel set with independent draws, which
    cuts the rate-estimate variance of downstream populations.

    Out-of-bounds observations are clipped and counted in
    ``clipped_samples``.
    """

    def __init__(self, specs: list[FeatureSpec], repeat: int = 1):
        self.specs = list(specs)
        self.repeat = int(repeat)
        self.base_channels = sum(2 if s.signed else 1 for s in self.specs)
        self.n_channels = self.base_channels * self.repeat
        self.clipped_samples = 0

    def probabilities(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (len(self.specs),):
            raise ValueError(
                f"observation has {obs.shape} features, encoder expects "
                f"{len(self.specs)}"
            )
        probs = np.empty(self.base_channels)
        k = 0
        for x, spec in zip(obs, self.specs):
            if x < spec.low or x > spec.high:
                self.clipped_samples += 1
                x = min(max(x, spec.low), spec.high)
            if spec.signed:
                probs[k] = max(x, 0.0) / spec.high
                probs[k + 1] = max(-x, 0.0) / -spec.low
                k += 2
            else:
                probs[k] = (x - spec.low) / (spec.high - spec.low)
                k += 1
        return probs

    def encode(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        probs = np.tile(self.probabilities(obs), self.repeat)
        return (rng.random(self.n_channels) < probs).astype(np.uint8)

    def encode_block(self, obs: np.ndarray, rng: np.random.Generator,
                     timesteps: int) -> np.ndarray:
        """[timesteps, n_channels] of independent draws for one held
        observation; equivalent to ``timesteps`` encode() calls."""
        probs = np.tile(self.probabilities(obs), self.repeat)
        return (rng.random((timesteps, self.n_channels)) < probs).astype(np.uint8)


class SpikeCountDecoder:
    """Stateless map from output spike counts to an action vector.

    Signed mode pairs output neurons antithetically: action_i =
    (rate_pos - rate_neg) * scale, with the pairs tiled ``repeat``
    times and averaged.  Unsigned mode returns plain rates (used as
    class scores).
    """

    def __init__(self, n_actions: int, scale: float = 1.0, signed: bool = True,
                 repeat: int = 1):
        self.n_actions = int(n_actions)
        self.scale = float(scale)
        self.signed = bool(signed)
        self.repeat = int(repeat)
        per = 2 if signed else 1
        self.n_out = n_actions * per * repeat

    def decode(self, counts: np.ndarray, window: int) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != (self.n_out,):
            raise ValueError(
                f"counts vector has shape {counts.shape}, decoder expects "
                f"({self.n_out},)"
            )
        rates = counts / float(window)
        per = (2 if self.signed else 1) * self.n_actions
        rates = rates.reshape(self.repeat, per).mean(axis=0)
        if self.signed:
            return (rates[0::2] - rates[1::2]) * self.scale
        return rates * self.scale


def rate_encode(obs, specs, rng, repeat=1):
    """One-shot form of RateEncoder.encode."""
    return RateEncoder(specs, repeat=repeat).encode(obs, rng)


def spike_count_decode(counts, window, n_actions, scale=1.0, signed=True, repeat=1):
    """One-shot form of SpikeCountDecoder.decode."""
    return SpikeCountDecoder(n_actions, scale, signed, repeat).decode(counts, window)


# ---------------------------------------------------------------------------
# Task base

class Task:
    """Episodic environment contract: reset(seed, variant) -> obs;
    step(action) -> (obs, reward, done).  Deterministic given
    (seed, variant)."""

    name: str = "task"
    episode_len: int = 50
    fitness_floor: float = -1e6
    timesteps_per_step: int = 16  # SNN timesteps per control action
    obs_specs: list = []
    n_actions: int = 1
    action_scale: float = 1.0
    encoder_repeat: int = 1
    train_variants: list = []
    eval_variants: list = []

    def reset(self, seed: int, variant) -> np.ndarray:
        raise NotImplementedError

    def step(self, action: np.ndarray):
        raise NotImplementedError

    def make_encoder(self) -> RateEncoder:
        return RateEncoder(self.obs_specs, repeat=self.encoder_repeat)

    def make_decoder(self) -> SpikeCountDecoder:
        return SpikeCountDecoder(self.n_actions, scale=self.action_scale)

    def manifest(self) -> dict:
        enc, dec = self.make_encoder(), self.make_decoder()
        return {
            "name": self.name,
            "episode_len": self.episode_len,
            "timesteps_per_step": self.timesteps_per_step,
            "features": [s.name for s in self.obs_specs],
            "n_in": enc.n_channels,
            "n_out": dec.n_out,
            "n_actions": self.n_actions,
            "train_variants": len(self.train_variants),
            "eval_variants": len(self.eval_variants),
        }

    def _guard(self):
        if self._done:
            raise EpisodeDone(f"{self.name}: step() after episode end")


def _train_eval_split(n_total: int, n_train: int):
    """Every (n_total//n_train)-th variant is a training variant."""
    stride = n_total // n_train
    train = [k for k in range(0, n_total, stride)][:n_train]
    evals = [k for k in range(n_total) if k not in set(train)]
    return train, evals


# ---------------------------------------------------------------------------
# Point-mass direction task

class PointMassDirectionTask(Task):
    """2-D point mass with linear drag must travel along a target
    direction.  Variants are 80 evenly spaced angles: 8 trained compass
    headings, 72 held-out intermediates.  Reward per step is the
    velocity component along the target."""

    name = "point-mass-direction"
    episode_len = 50
    fitness_floor = -100.0
    n_actions = 2
    action_scale = 1.0
    encoder_repeat = 2
    obs_specs = [
        FeatureSpec("dir_x", -1.0, 1.0),
        FeatureSpec("dir_y", -1.0, 1.0),
        FeatureSpec("vel_x", -1.5, 1.5),
        FeatureSpec("vel_y", -1.5, 1.5),
        FeatureSpec("verr_x", -2.0, 2.0),
        FeatureSpec("verr_y", -2.0, 2.0),
    ]

    N_ANGLES = 80
    DT = 0.1
    DRAG = 1.0

    def __init__(self):
        self.train_variants, self.eval_variants = _train_eval_split(self.N_ANGLES, 8)
        self._done = True

    def _angle(self, variant) -> float:
        return 2.0 * math.pi * (int(variant) % self.N_ANGLES) / self.N_ANGLES

    def reset(self, seed: int, variant) -> np.ndarray:
        a = self._angle(variant)
        self.direction = np.array([math.cos(a), math.sin(a)])
        self.vel = np.zeros(2)
        self._t = 0
        self._done = False
        return self._obs()

    def _obs(self):
        return np.concatenate([self.direction, self.vel, self.direction - self.vel])

    def step(self, action):
        self._guard()
        a = np.clip(np.asarray(action, dtype=np.float64)[: 2], -1.0, 1.0)
        self.vel += self.DT * (a - self.DRAG * self.vel)
        reward = float(self.vel @ self.direction)
        self._t += 1
        self._done = self._t >= self.episode_len
        return self._obs(), reward, self._done


# ---------------------------------------------------------------------------
# Velocity tracking task

class VelocityTrackingTask(Task):
    """1-D mass with drag must hold a target speed.  80 target speeds on
    a uniform grid; 8 trained, 72 held out.  Reward per step is
    -|speed - target|."""

    name = "velocity-tracking"
    episode_len = 50
    fitness_floor = -200.0
    n_actions = 1
    action_scale = 1.0
    encoder_repeat = 2
    obs_specs = [
        FeatureSpec("speed", -2.5, 2.5),
        FeatureSpec("target", 0.0, 2.0, signed=False),
        FeatureSpec("err", -2.5, 2.5),
    ]

    N_TARGETS = 80
    SPEED_LO, SPEED_HI = 0.2, 1.8
    DT = 0.1
    DRAG = 1.0
    THRUST_GAIN = 2.0

    def __init__(self):
        self.train_variants, self.eval_variants = _train_eval_split(self.N_TARGETS, 8)
        self._done = True

    def _target(self, variant) -> float:
        k = int(variant) % self.N_TARGETS
        return self.SPEED_LO + (self.SPEED_HI - self.SPEED_LO) * k / (self.N_TARGETS - 1)

    def reset(self, seed: int, variant) -> np.ndarray:
        self.target = self._target(variant)
        self.v = 0.0
        self._t = 0
        self._done = False
        return self._obs()

    def _obs(self):
        return np.array([self.v, self.target, self.target - self.v])

    def step(self, action):
        self._guard()
        thrust = float(np.clip(np.asarray(action, dtype=np.float64).ravel()[0], -1.0, 1.0))
        self.v += self.DT * (self.THRUST_GAIN * thrust - self.DRAG * self.v)
        reward = -abs(self.v - self.target)
        self._t += 1
        self._done = self._t >= self.episode_len
        return self._obs(), reward, self._done


# ---------------------------------------------------------------------------
# Reaching task (two-joint planar arm, analytic kinematics)

@dataclass(frozen=True)
class Perturbation:
    """At ``step``, multiply joint ``joint``'s velocity gain by ``scale``."""

    step: int
    joint: int
    scale: float

    @classmethod
    def parse(cls, text: str) -> "Perturbation":
        try:
            s, j, g = text.split(":")
            return cls(int(s), int(j), float(g))
        except Exception as e:
            raise ValueError(
                f"perturbation must be 'step:joint:scale', got {text!r}"
            ) from e


class ReachingTask(Task):
    """Two-joint planar arm reaching sampled goal positions.  Action is
    the commanded joint velocities; a perturbation schedule can rescale
    a joint's gain mid-episode to probe online adaptation.  Reward per
    step is -distance(end effector, goal)."""

    name = "reaching"
    episode_len = 200
    fitness_floor = -1000.0
    n_actions = 2
    action_scale = 1.0
    encoder_repeat = 2
    obs_specs = [
        FeatureSpec("cos_q1", -1.0, 1.0),
        FeatureSpec("sin_q1", -1.0, 1.0),
        FeatureSpec("cos_q2", -1.0, 1.0),
        FeatureSpec("sin_q2", -1.0, 1.0),
        FeatureSpec("err_x", -2.0, 2.0),
        FeatureSpec("err_y", -2.0, 2.0),
        FeatureSpec("err_along_j1", -2.0, 2.0),
        FeatureSpec("err_along_j2", -2.0, 2.0),
    ]

    L1 = 0.5
    L2 = 0.5
    DT = 0.1
    GAIN = 1.0
    N_GOALS = 64

    def __init__(self, episode_len: int = None,
                 perturbations: tuple[Perturbation, ...] = ()):
        if episode_len is not None:
            self.episode_len = int(episode_len)
        self.perturbations = tuple(perturbations)
        self.train_variants = list(range(self.N_GOALS))
        self.eval_variants = list(range(self.N_GOALS, 2 * self.N_GOALS))
        self._done = True

    def goal_for(self, variant) -> np.ndarray:
        rng = np.random.default_rng((0xF1A7, int(variant)))
        r = rng.uniform(0.35, 0.9)
        a = rng.uniform(0.15 * math.pi, 0.85 * math.pi)
        return np.array([r * math.cos(a), r * math.sin(a)])

    def reset(self, seed: int, variant) -> np.ndarray:
        self.q = np.array([math.pi / 2, math.pi / 2])
        self.goal = self.goal_for(variant)
        self.gains = np.array([self.GAIN, self.GAIN])
        self._t = 0
        self._done = False
        return self._obs()

    def _kinematics(self):
        q1, q2 = self.q
        elbow = np.array([self.L1 * math.cos(q1), self.L1 * math.sin(q1)])
        ee = elbow + np.array(
            [self.L2 * math.cos(q1 + q2), self.L2 * math.sin(q1 + q2)]
        )
        # Jacobian columns: instantaneous end-effector motion per joint
        j1 = np.array([-ee[1], ee[0]])
        j2 = np.array(
            [-self.L2 * math.sin(q1 + q2), self.L2 * math.cos(q1 + q2)]
        )
        return ee, j1, j2

    def _obs(self):
        ee, j1, j2 = self._kinematics()
        err = self.goal - ee
        return np.array(
            [
                math.cos(self.q[0]), math.sin(self.q[0]),
                math.cos(self.q[1]), math.sin(self.q[1]),
                err[0], err[1],
                float(err @ j1), float(err @ j2),
            ]
        )

    def step(self, action):
        self._guard()
        for p in self.perturbations:
            if p.step == self._t:
                self.gains[p.joint] = self.GAIN * p.scale
        a = np.clip(np.asarray(action, dtype=np.float64)[: 2], -1.0, 1.0)
        self.q = self.q + self.DT * self.gains * a
        ee, _, _ = self._kinematics()
        reward = -float(np.linalg.norm(self.goal - ee))
        self._t += 1
        self._done = self._t >= self.episode_len
        return self._obs(), reward, self._done


# ---------------------------------------------------------------------------
# Mini classification task (8x8 rate-coded images)

FFDS_MAGIC = b"FFDS"
_FFDS_HEADER = struct.Struct("<4sIII")
N_CLASSES = 10


def save_dataset(path, images: np.ndarray, labels: np.ndarray) -> None:
    """FFDS file: header (magic, count, rows, cols), then per record the
    image bytes row-major followed by one label byte."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    if labels.shape != (count,):
        raise ValueError("label count does not match image count")
    with open(path, "wb") as f:
        f.write(_FFDS_HEADER.pack(FFDS_MAGIC, count, rows, cols))
        for img, lab in zip(images, labels):
            f.write(img.tobytes())
            f.write(bytes([int(lab)]))


def load_dataset(path):
    """Returns (images [count, rows, cols] uint8, labels [count] uint8).
    Rejects malformed files with the position of the first bad record."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _FFDS_HEADER.size:
        raise DatasetFormatError("truncated header at offset 0")
    magic, count, rows, cols = _FFDS_HEADER.unpack_from(data)
    if magic != FFDS_MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r} at offset 0")
    rec = rows * cols + 1
    expected = _FFDS_HEADER.size + count * rec
    if len(data) != expected:
        bad = (len(data) - _FFDS_HEADER.size) // rec
        raise DatasetFormatError(
            f"file length {len(data)} != {expected}; first incomplete record "
            f"index {bad} at offset {_FFDS_HEADER.size + bad * rec}"
        )
    images = np.empty((count, rows, cols), dtype=np.uint8)
    labels = np.empty(count, dtype=np.uint8)
    pos = _FFDS_HEADER.size
    for i in range(count):
        images[i] = np.frombuffer(data, np.uint8, rows * cols, pos).reshape(rows, cols)
        lab = data[pos + rows * cols]
        if lab >= N_CLASSES:
            raise DatasetFormatError(
                f"label {lab} out of range at record {i}, offset "
                f"{pos + rows * cols}"
            )
        labels[i] = lab
        pos += rec
    return images, labels


_GLYPHS = [
    "01111110 01100110 01100110 01100110 01100110 01100110 01100110 01111110",
    "00011000 00111000 00011000 00011000 00011000 00011000 00011000 01111110",
    "01111110 00000110 00000110 01111110 01100000 01100000 01100000 01111110",
    "01111110 00000110 00000110 00111110 00000110 00000110 00000110 01111110",
    "01100110 01100110 01100110 01111110 00000110 00000110 00000110 00000110",
    "01111110 01100000 01100000 01111110 00000110 00000110 00000110 01111110",
    "01111110 01100000 01100000 01111110 01100110 01100110 01100110 01111110",
    "01111110 00000110 00001100 00011000 00011000 00110000 00110000 00110000",
    "01111110 01100110 01100110 01111110 01100110 01100110 01100110 01111110",
    "01111110 01100110 01100110 01111110 00000110 00000110 00000110 01111110",
]


def make_synthetic_digits(per_class: int, seed: int, classes=range(N_CLASSES)):
    """Procedural 8x8 digit glyphs with pixel noise and 1-pixel jitter."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in classes:
        glyph = np.array(
            [[int(ch) for ch in row] for row in _GLYPHS[c].split()], dtype=np.float64
        )
        for _ in range(per_class):
            img = glyph * 255.0
            dx, dy = rng.integers(-1, 2, size=2)
            img = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
            noise = rng.normal(scale=24.0, size=img.shape)
            img = np.clip(img * rng.uniform(0.75, 1.0) + noise, 0, 255)
            images.append(img.astype(np.uint8))
            labels.append(c)
    order = rng.permutation(len(images))
    return np.array(images)[order], np.array(labels, dtype=np.uint8)[order]


class MiniClassifyTask(Task):
    """Sequential presentation of rate-coded 8x8 images.  Each env step
    shows one image; the action vector is read as per-class scores and
    the reward is the classification margin of the true class."""

    name = "mini-classify"
    fitness_floor = -32.0
    encoder_repeat = 1
    timesteps_per_step = 16

    def __init__(self, images: np.ndarray, labels: np.ndarray,
                 images_per_episode: int = 16, holdout_fraction: float = 0.25):
        self.images = np.ascontiguousarray(images, dtype=np.uint8)
        self.labels = np.ascontiguousarray(labels, dtype=np.uint8)
        rows, cols = self.images.shape[1:]
        self.obs_specs = [
            FeatureSpec(f"px{r}_{c}", 0.0, 1.0, signed=False)
            for r in range(rows) for c in range(cols)
        ]
        self.n_actions = N_CLASSES
        self.episode_len = int(images_per_episode)
        n_hold = int(round(len(self.images) * holdout_fraction))
        self.split = {
            "train": list(range(len(self.images) - n_hold)),
            "test": list(range(len(self.images) - n_hold, len(self.images))),
        }
        self.train_variants = ["train"]
        self.eval_variants = ["test"]
        self._done = True
        self.last_accuracy = None

    @classmethod
    def from_file(cls, path, **kw) -> "MiniClassifyTask":
        images, labels = load_dataset(path)
        return cls(images, labels, **kw)

    def make_decoder(self) -> SpikeCountDecoder:
        return SpikeCountDecoder(self.n_actions, scale=1.0, signed=False)

    def reset(self, seed: int, variant) -> np.ndarray:
        if variant not in self.split:
            raise ValueError(f"unknown split {variant!r}; use 'train' or 'test'")
        rng = np.random.default_rng((seed, 0xD161))
        pool = self.split[variant]
        self.order = [pool[int(i)] for i in rng.integers(len(pool), size=self.episode_len)]
        self._t = 0
        self._correct = 0
        self._done = False
        self.last_accuracy = None
        return self._obs()

    def _obs(self):
        return self.images[self.order[self._t]].astype(np.float64).ravel() / 255.0

    def step(self, action):
        self._guard()
        scores = np.asarray(action, dtype=np.float64)
        label = int(self.labels[self.order[self._t]])
        others = np.delete(scores, label)
        reward = float(scores[label] - others.max())
        if int(scores.argmax()) == label:
            self._correct += 1
        self._t += 1
        self._done = self._t >= self.episode_len
        if self._done:
            self.last_accuracy = self._correct / self.episode_len
            return np.zeros(len(self.obs_specs)), reward, True
        return self._obs(), reward, False


# ---------------------------------------------------------------------------
# Registry

def make_task(name: str, dataset_path=None, episode_len=None, perturbations=()):
    if name == "point-mass-direction":
        return PointMassDirectionTask()
    if name == "velocity-tracking":
        return VelocityTrackingTask()
    if name == "reaching":
        return ReachingTask(episode_len=episode_len, perturbations=perturbations)
    if name == "mini-classify":
        if dataset_path is None:
            raise ValueError("mini-classify needs a dataset file (FFDS)")
        return MiniClassifyTask.from_file(dataset_path)
    raise KeyError(name)


TASK_NAMES = [
    "point-mass-direction", "velocity-tracking", "reaching", "mini-classify",
]

DEFAULT_HIDDEN = {
    "point-mass-direction": 16,
    "velocity-tracking": 12,
    "reaching": 16,
    "mini-classify": 24,
}


def default_network_config(task: Task, n_hidden: int = None):
    from .network import NetworkConfig

    enc, dec = task.make_encoder(), task.make_decoder()
    hidden = n_hidden or DEFAULT_HIDDEN.get(task.name, 16)
    return NetworkConfig(enc.n_channels, hidden, dec.n_out)
