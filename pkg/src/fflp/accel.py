"""Cycle-level simulator of the dual-engine plastic-SNN accelerator.

Two engines share banked on-chip memory through a scheduler:

* the forward engine runs a three-stage layer pipeline (psum
  accumulation over PE tiles, neuron dynamics, trace update) with
  spike-gated weight fetches;
* the plasticity engine streams packed per-synapse coefficient quads,
  computes the four rule terms in parallel, folds them through a
  two-stage adder tree and read-modify-writes the weights.

Engines are Python generators that yield one request bundle per cycle;
the scheduler arbitrates bank ports with write priority (a read that
collides with a same-cycle overlapping write stalls one cycle and then
observes the written value).  The phased schedule overlaps one layer's
synaptic update with the other layer's forward pass; the end-of-stream
state is bit-identical to the functional model in fflp.network.

This is a cycle-level model, not RTL: one architectural action per
bank port per cycle, configurable stage latencies, no place-and-route
timing.  See MODEL_ASSUMPTIONS.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .fp16 import vadd, vhalve, vmul, vsub
from .network import F16, NetworkConfig, NetworkState, PlasticityRule

MODEL_ASSUMPTIONS = [
    "cycle-level fidelity: one architectural action per bank port per cycle",
    "stage latencies are parameters (defaults: read 1, fp16 add 1, fp16 mul 1, "
    "adder tree 2, writeback 1); real FPGA IP may pipeline deeper",
    "PE tile waves issue at one per cycle; stage drains separate the forward "
    "pipeline stages",
    "all network state is resident in on-chip banks; no external memory traffic",
    "phase boundaries (prologue / A / B / epilogue) act as barriers; overlap "
    "happens inside each phase",
]


class SimulatorAssertion(AssertionError):
    """Internal scheduling invariant violated (e.g. double write)."""


class SimulatorDeadlock(RuntimeError):
    """No engine made progress for a full bank-scan worth of cycles."""


@dataclass
class HardwareConfig:
    pe_count: int = 16
    clock_mhz: float = 200.0
    mem_read_latency: int = 1
    add_latency: int = 1
    mul_latency: int = 1
    adder_tree_latency: int = 2
    writeback_latency: int = 1

    def __post_init__(self):
        if self.pe_count < 1:
            raise ValueError("pe_count must be >= 1")
        for f in fields(self):
            if f.name in ("pe_count", "clock_mhz"):
                continue
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.clock_mhz <= 0:
            raise ValueError("clock_mhz must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "HardwareConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown hardware config keys: {sorted(unknown)}")
        return cls(**d)


class Bank:
    """One dual-port memory bank: one read and one write per cycle."""

    __slots__ = ("name", "data")

    def __init__(self, name: str, data: np.ndarray):
        self.name = name
        self.data = data

    @property
    def words(self) -> int:
        return self.data.size


# Request tuples:
#   read:  ("r", bank, lo, hi, index, stage)
#   write: ("w", bank, lo, hi, index, values, stage)
# (lo, hi) is the flat word-address envelope used for conflict checks;
# index is the concrete numpy index used to move data.


def _overlap(a_lo, a_hi, b_lo, b_hi) -> bool:
    return a_lo < b_hi and b_lo < a_hi


def arbitrate(read_reqs, write_reqs):
    """Single-cycle bank arbitration.

    Returns (granted_reads, granted_writes, stalled_reads) where each
    stalled read is (request, reason).  Writes always commit (write
    priority); a read overlapping a same-cycle write to the same bank
    stalls, as does a read losing the one-read-per-bank port to an
    earlier request.  Two overlapping writes raise SimulatorAssertion.
    """
    for i, w1 in enumerate(write_reqs):
        for w2 in write_reqs[i + 1 :]:
            if w1[1] is w2[1] and _overlap(w1[2], w1[3], w2[2], w2[3]):
                raise SimulatorAssertion(
                    f"two writes to bank {w1[1].name} words "
                    f"[{max(w1[2], w2[2])}, {min(w1[3], w2[3])}) in one cycle"
                )
    write_port = {}
    granted_writes = []
    stalled_writes = []
    for w in write_reqs:
        if w[1] in write_port:
            stalled_writes.append((w, "write-port"))
        else:
            write_port[w[1]] = w
            granted_writes.append(w)
    granted_reads, stalled_reads = [], []
    read_port = set()
    for r in read_reqs:
        bank = r[1]
        conflict = bank in write_port and _overlap(
            r[2], r[3], write_port[bank][2], write_port[bank][3]
        )
        if conflict:
            stalled_reads.append((r, "write-priority"))
        elif bank in read_port:
            stalled_reads.append((r, "read-port"))
        else:
            read_port.add(bank)
            granted_reads.append(r)
    return granted_reads, granted_writes, stalled_reads + stalled_writes


@dataclass
class CycleTrace:
    """Event log plus aggregate counters for one or more simulated runs."""

    record_events: bool = False
    events: list = field(default_factory=list)
    total_cycles: int = 0
    stall_cycles: dict = field(default_factory=dict)
    overlap_cycles: int = 0
    busy_cycles: dict = field(default_factory=dict)  # engine -> active cycles
    weight_fetches: int = 0
    timesteps: int = 0

    def add_stall(self, reason: str):
        self.stall_cycles[reason] = self.stall_cycles.get(reason, 0) + 1

    @property
    def total_stalls(self) -> int:
        return sum(self.stall_cycles.values())

    def to_text(self) -> str:
        """One line per recorded cycle event:
        cycle,engine,stage,layer,op,addr,stall_reason"""
        lines = [
            f"{c},{eng},{stage},{layer},{op},{addr},{reason}"
            for (c, eng, stage, layer, op, addr, reason) in self.events
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def fold_counters(self):
        """Recompute aggregate counters from the event list (only valid
        with record_events=True); used to check counter consistency."""
        stalls = {}
        fetches = 0
        busy = {}
        for (c, eng, stage, layer, op, addr, reason) in self.events:
            if op == "stall":
                stalls[reason] = stalls.get(reason, 0) + 1
            else:
                busy.setdefault(eng, set()).add(c)
                if op == "read" and stage == "psum":
                    fetches += 1
        return stalls, fetches


class _EngineProc:
    __slots__ = ("name", "stage_layer", "gen", "pending", "inbox", "done",
                 "result", "trace_guard", "prefetch_done")

    def __init__(self, name, gen):
        self.name = name
        self.gen = gen
        self.pending = None
        self.inbox = None
        self.done = False
        self.result = None
        self.trace_guard = frozenset()  # trace banks this engine will prefetch
        self.prefetch_done = True


class Simulator:
    """Cycle-level model of the accelerator running one network.

    State lives in per-layer weight / coefficient / membrane banks and
    three shared trace banks.  run_stream() consumes a [T, n_in] spike
    block and may be called repeatedly; state and the cycle trace carry
    across calls.
    """

    def __init__(self, config: NetworkConfig, rule: PlasticityRule,
                 hw: HardwareConfig = None, weights=None,
                 record_events: bool = False, monitor: bool = None):
        from .model_io import packed_coefficients

        self.config = config
        self.rule = rule
        self.hw = hw or HardwareConfig()
        self.trace = CycleTrace(record_events=record_events)
        if monitor is None:
            monitor = config.n_synapses <= 16384
        self.monitor_enabled = monitor
        self._bank_ops = {}  # bank name -> list of (cycle, kind, lo, hi)
        self._read_versions = []  # (bank, cycle, lo, hi, version_seen)

        shapes = config.layer_shapes
        self.w_banks = []
        self.c_banks = []
        self.v_banks = []
        for L, shape in enumerate(shapes):
            w = np.zeros(shape, dtype=F16)
            if weights is not None:
                w[:] = weights[L]
            self.w_banks.append(Bank(f"w{L + 1}", w))
            self.c_banks.append(
                Bank(f"coeff{L + 1}", packed_coefficients(rule.layers[L]))
            )
            self.v_banks.append(Bank(f"v{L + 1}", np.zeros(shape[0], dtype=F16)))
        self.t_banks = {
            "in": Bank("trace_in", np.zeros(config.n_in, dtype=F16)),
            "hidden": Bank("trace_hidden", np.zeros(config.n_hidden, dtype=F16)),
            "out": Bank("trace_out", np.zeros(config.n_out, dtype=F16)),
        }
        self._layer_traces = [
            (self.t_banks["in"], self.t_banks["hidden"]),
            (self.t_banks["hidden"], self.t_banks["out"]),
        ]
        self._last_spikes = [
            np.zeros(config.n_hidden, dtype=np.uint8),
            np.zeros(config.n_out, dtype=np.uint8),
        ]
        self._deadlock_limit = 4 * max(
            b.words for b in self.w_banks + list(self.t_banks.values())
        ) + 64

    # -- engine generators --------------------------------------------------

    def _tiles(self, n: int):
        pe = self.hw.pe_count
        return [(lo, min(lo + pe, n)) for lo in range(0, n, pe)]

    def _forward_gen(self, L: int, in_spikes: np.ndarray,
                     update_pre_trace: bool):
        """Forward engine for layer L; returns the output spike vector."""
        hw = self.hw
        w_bank = self.w_banks[L]
        v_bank = self.v_banks[L]
        pre_bank, post_bank = self._layer_traces[L]
        n_post, n_pre = w_bank.data.shape
        if in_spikes.shape != (n_pre,):
            raise ValueError(f"layer {L + 1} expects {n_pre} input spikes")
        tiles = self._tiles(n_post)
        lam = F16(self.rule.lam)

        # Stage 1: psum accumulation (spike gated: silent inputs fetch nothing)
        psum = np.zeros(n_post, dtype=F16)
        spiking = np.flatnonzero(in_spikes)
        for j in spiking:
            j = int(j)
            for (lo, hi) in tiles:
                (col,) = yield [
                    ("r", w_bank, lo * n_pre + j, (hi - 1) * n_pre + j + 1,
                     (slice(lo, hi), j), "psum")
                ]
                psum[lo:hi] = vadd(psum[lo:hi], col)
        if len(spiking):
            for _ in range(hw.add_latency):
                yield []  # accumulator drain

        # Stage 2: neuron dynamics (v + halve(i - v), threshold, hard reset)
        spikes = np.zeros(n_post, dtype=np.uint8)
        dyn_depth = hw.mem_read_latency + 2 * hw.add_latency + 1
        pending = []
        slot = 0
        n_tiles = len(tiles)
        while pending or slot < n_tiles:
            bundle = []
            if slot < n_tiles:
                lo, hi = tiles[slot]
                bundle.append(("r", v_bank, lo, hi, slice(lo, hi), "dyn"))
            if pending and pending[0][0] <= slot - dyn_depth:
                _, wlo, whi, vals = pending.pop(0)
                bundle.append(("w", v_bank, wlo, whi, slice(wlo, whi), vals, "dyn"))
            data = yield bundle
            if slot < n_tiles:
                lo, hi = tiles[slot]
                v = data[0]
                v_mid = vadd(v, vhalve(vsub(psum[lo:hi], v)))
                spk = (v_mid >= self.config.v_th).astype(np.uint8)
                v_next = np.where(spk, F16(0.0), v_mid)
                spikes[lo:hi] = spk
                pending.append((slot, lo, hi, v_next))
            slot += 1
        for _ in range(hw.writeback_latency):
            yield []

        # Stage 3: trace update (lam * S + s) for pre and post populations
        trace_jobs = []
        if update_pre_trace:
            trace_jobs.append((pre_bank, in_spikes))
        trace_jobs.append((post_bank, spikes))
        trc_depth = hw.mem_read_latency + hw.mul_latency + hw.add_latency
        for bank, spk_vec in trace_jobs:
            tiles_t = self._tiles(bank.words)
            pending = []
            slot = 0
            while pending or slot < len(tiles_t):
                bundle = []
                if slot < len(tiles_t):
                    lo, hi = tiles_t[slot]
                    bundle.append(("r", bank, lo, hi, slice(lo, hi), "trace"))
                if pending and pending[0][0] <= slot - trc_depth:
                    _, wlo, whi, vals = pending.pop(0)
                    bundle.append(
                        ("w", bank, wlo, whi, slice(wlo, whi), vals, "trace")
                    )
                data = yield bundle
                if slot < len(tiles_t):
                    lo, hi = tiles_t[slot]
                    new = vadd(vmul(lam, data[0]), spk_vec[lo:hi].astype(F16))
                    pending.append((slot, lo, hi, new))
                slot += 1
        for _ in range(hw.writeback_latency):
            yield []
        return spikes

    def _plasticity_gen(self, L: int, proc: "_EngineProc"):
        """Plasticity engine for layer L: packed coefficient fetch, four
        parallel products, adder tree, read-modify-write of the weights."""
        hw = self.hw
        w_bank = self.w_banks[L]
        c_bank = self.c_banks[L]
        pre_bank, post_bank = self._layer_traces[L]
        n_post, n_pre = w_bank.data.shape
        n_syn = n_post * n_pre

        # trace prefetch into engine registers; the scheduler holds off
        # concurrent writers of these banks until the prefetch completes
        pre_regs = np.empty(n_pre, dtype=F16)
        post_regs = np.empty(n_post, dtype=F16)
        for bank, regs in ((pre_bank, pre_regs), (post_bank, post_regs)):
            for lo, hi in self._tiles(bank.words):
                (data,) = yield [("r", bank, lo, hi, slice(lo, hi), "prefetch")]
                regs[lo:hi] = data
        proc.prefetch_done = True

        depth = (hw.mem_read_latency + hw.mul_latency
                 + hw.adder_tree_latency + hw.add_latency)
        waves = self._tiles(n_syn)
        pe = self.hw.pe_count
        writes_due = []  # (due_cycle, lo, hi, values)
        local = 0
        for lo, hi in waves:
            # the coefficient bank port is pe halves wide, like every other
            # bank, so the 4-per-synapse quad block takes several beats
            quad = np.empty(4 * (hi - lo), dtype=F16)
            w = None
            beats = range(0, 4 * (hi - lo), pe)
            for b, off in enumerate(beats):
                clo = 4 * lo + off
                chi = min(4 * hi, clo + pe)
                bundle = [("r", c_bank, clo, chi, slice(clo, chi), "update")]
                if b == 0:
                    bundle.append(("r", w_bank, lo, hi, None, "update"))
                if writes_due and writes_due[0][0] <= local:
                    _, wlo, whi, vals = writes_due.pop(0)
                    bundle.append(("w", w_bank, wlo, whi, None, vals, "update"))
                inbox = yield bundle
                local += 1
                quad[off : off + (chi - clo)] = inbox[0]
                if b == 0:
                    w = inbox[1]
            alpha, beta, gamma, delta = (quad[k::4] for k in range(4))
            syn = np.arange(lo, hi)
            sj = pre_regs[syn % n_pre]
            si = post_regs[syn // n_pre]
            t_a = vmul(vmul(alpha, sj), si)
            t_b = vmul(beta, sj)
            t_c = vmul(gamma, si)
            dw = vadd(vadd(t_a, t_b), vadd(t_c, delta))
            writes_due.append((local + depth, lo, hi, vadd(w, dw)))
        while writes_due:
            bundle = []
            if writes_due[0][0] <= local:
                _, wlo, whi, vals = writes_due.pop(0)
                bundle.append(("w", w_bank, wlo, whi, None, vals, "update"))
            yield bundle
            local += 1
        for _ in range(hw.writeback_latency):
            yield []
        return None

    # -- scheduler ----------------------------------------------------------

    def _commit(self, req):
        kind, bank = req[0], req[1]
        if kind == "r":
            idx = req[4]
            if idx is None:
                return bank.data.reshape(-1)[req[2] : req[3]].copy()
            return bank.data[idx].copy()
        idx = req[4]
        if idx is None:
            bank.data.reshape(-1)[req[2] : req[3]] = req[5]
        else:
            bank.data[idx] = req[5]
        return None

    def _run_procs(self, procs: list, phase: str):
        """Advance the global clock until every engine in this phase is
        done.  Engines are listed in priority order."""
        trace = self.trace
        no_progress = 0
        while any(not p.done for p in procs):
            cycle = trace.total_cycles
            active = []
            for p in procs:
                if p.done:
                    continue
                if p.pending is None:
                    try:
                        p.pending = p.gen.send(p.inbox)
                    except StopIteration as stop:
                        p.done = True
                        p.result = stop.value
                        continue
                    p.inbox = None
                active.append(p)
            if not active:
                break
            if len(active) > 1:
                trace.overlap_cycles += 1

            # interlock: writes to a trace bank another engine is still
            # prefetching wait until that prefetch completes (WAR guard)
            stalled = {}
            for p in active:
                for other in active:
                    if other is p or other.prefetch_done:
                        continue
                    for req in p.pending:
                        if req[0] == "w" and req[1].name in other.trace_guard:
                            stalled[p.name] = "war-interlock"
            reads, writes, owner = [], [], {}
            for p in active:
                if p.name in stalled:
                    continue
                for req in p.pending:
                    owner[id(req)] = p
                    (reads if req[0] == "r" else writes).append(req)
            granted_r, granted_w, losers = arbitrate(reads, writes)
            for req, reason in losers:
                stalled.setdefault(owner[id(req)].name, reason)

            stalled_names = set(stalled)
            progressed = False
            for p in active:
                if p.name in stalled_names:
                    trace.add_stall(stalled[p.name])
                    if trace.record_events:
                        trace.events.append(
                            (cycle, p.name, p.stage_layer[0], p.stage_layer[1],
                             "stall", "", stalled[p.name])
                        )
                    continue
                progressed = True
                trace.busy_cycles[p.name] = trace.busy_cycles.get(p.name, 0) + 1
                inbox = []
                for req in p.pending:
                    data = self._commit(req)
                    if req[0] == "r":
                        inbox.append(data)
                        if req[5] == "psum":
                            trace.weight_fetches += 1
                    if self.monitor_enabled:
                        self._bank_ops.setdefault(req[1].name, []).append(
                            (cycle, req[0], req[2], req[3])
                        )
                    if trace.record_events:
                        trace.events.append(
                            (cycle, p.name, req[5 if req[0] == "r" else 6],
                             p.stage_layer[1],
                             "read" if req[0] == "r" else "write",
                             f"{req[1].name}[{req[2]}:{req[3]}]", "")
                        )
                p.inbox = inbox
                p.pending = None

            if progressed:
                no_progress = 0
            else:
                no_progress += 1
                if no_progress > self._deadlock_limit:
                    blocked = {
                        p.name: [
                            f"{r[0]} {r[1].name}[{r[2]}:{r[3]}]" for r in p.pending
                        ]
                        for p in active
                    }
                    raise SimulatorDeadlock(
                        f"no engine progressed for {no_progress} cycles in "
                        f"phase {phase}; blocked requests: {blocked}"
                    )
            trace.total_cycles += 1
        return [p.result for p in procs]

    def _make_forward(self, L, in_spikes, update_pre_trace):
        p = _EngineProc(f"forward-L{L + 1}", None)
        p.gen = self._forward_gen(L, in_spikes, update_pre_trace)
        p.stage_layer = ("forward", L + 1)
        return p

    def _make_plasticity(self, L):
        p = _EngineProc(f"plasticity-L{L + 1}", None)
        p.gen = self._plasticity_gen(L, p)
        p.stage_layer = ("plasticity", L + 1)
        pre_bank, post_bank = self._layer_traces[L]
        p.trace_guard = frozenset((pre_bank.name, post_bank.name))
        p.prefetch_done = False
        return p

    # -- public API ----------------------------------------------------------

    def run_stream(self, spike_stream, overlap: bool = True):
        """Execute the phased schedule over a [T, n_in] spike block.

        Prologue (L1 forward), then per timestep Phase A (L1 update in
        parallel with L2 forward) and Phase B (L2 update in parallel
        with the next input's L1 forward); the final Phase B carries no
        forward pass and is the epilogue.  overlap=False serializes the
        engines inside each phase (reference schedule for the overlap
        property).

        Returns (list of output spike vectors, the cumulative trace).
        """
        stream = np.asarray(spike_stream, dtype=np.uint8)
        if stream.ndim != 2 or stream.shape[1] != self.config.n_in:
            raise ValueError(
                f"spike stream must be [T, {self.config.n_in}], got {stream.shape}"
            )
        outs = []
        with np.errstate(over="ignore", invalid="ignore"):
            if len(stream) == 0:
                return outs, self.trace
            (hidden,) = self._run_phase(
                [self._make_forward(0, stream[0], True)], "prologue", overlap
            )
            self._last_spikes[0] = hidden
            for t in range(len(stream)):
                results = self._run_phase(
                    [self._make_plasticity(0),
                     self._make_forward(1, self._last_spikes[0], False)],
                    "A", overlap,
                )
                out = results[1]
                self._last_spikes[1] = out
                outs.append(out)
                procs = [self._make_plasticity(1)]
                if t + 1 < len(stream):
                    procs.append(self._make_forward(0, stream[t + 1], True))
                results = self._run_phase(procs, "B" if t + 1 < len(stream) else "epilogue", overlap)
                if t + 1 < len(stream):
                    self._last_spikes[0] = results[1]
                self.trace.timesteps += 1
        if self.monitor_enabled:
            self.check_raw_safety()
        return outs, self.trace

    def _run_phase(self, procs, phase, overlap):
        if overlap:
            return self._run_procs(procs, phase)
        return [self._run_procs([p], phase)[0] for p in procs]

    def forward_engine_run(self, L: int, in_spikes):
        """Run the layer-L forward engine standalone; returns
        (out_spikes, cycles)."""
        start = self.trace.total_cycles
        with np.errstate(over="ignore", invalid="ignore"):
            (spikes,) = self._run_procs(
                [self._make_forward(L, np.asarray(in_spikes, dtype=np.uint8), True)],
                "standalone-forward",
            )
        return spikes, self.trace.total_cycles - start

    def plasticity_engine_run(self, L: int):
        """Run the layer-L plasticity engine standalone; returns cycles."""
        start = self.trace.total_cycles
        with np.errstate(over="ignore", invalid="ignore"):
            self._run_procs([self._make_plasticity(L)], "standalone-plasticity")
        return self.trace.total_cycles - start

    def export_state(self) -> NetworkState:
        net = NetworkState.zeros(self.config)
        net.layers[0].weights[:] = self.w_banks[0].data
        net.layers[1].weights[:] = self.w_banks[1].data
        net.layers[0].v[:] = self.v_banks[0].data
        net.layers[1].v[:] = self.v_banks[1].data
        net.trace_in[:] = self.t_banks["in"].data
        net.trace_hidden[:] = self.t_banks["hidden"].data
        net.trace_out[:] = self.t_banks["out"].data
        net.layers[0].out_spikes[:] = self._last_spikes[0]
        net.layers[1].out_spikes[:] = self._last_spikes[1]
        return net

    def check_raw_safety(self):
        """Address-versioning monitor: every read must observe exactly the
        writes committed in earlier-or-same cycles.  With single-copy
        storage a stale read can only happen if a read and an overlapping
        write were granted in the same cycle, which write priority must
        prevent; any such pair is a violation."""
        for name, ops in self._bank_ops.items():
            by_cycle = {}
            for op in ops:
                by_cycle.setdefault(op[0], []).append(op)
            for c, group in by_cycle.items():
                writes = [op for op in group if op[1] == "w"]
                if not writes:
                    continue
                for op in group:
                    if op[1] != "r":
                        continue
                    for w in writes:
                        if _overlap(op[2], op[3], w[2], w[3]):
                            raise SimulatorAssertion(
                                f"stale-read hazard: bank {name} read "
                                f"[{op[2]}:{op[3]}] granted in the same cycle "
                                f"{c} as write [{w[2]}:{w[3]}]"
                            )
        self._bank_ops = {}
        return True


def latency_report(trace: CycleTrace, clock_mhz: float, frames: int = None) -> dict:
    """Summary with the fixed key set {cycles, us, fps, stalls,
    overlap_ratio} plus per-timestep figures under both readings of an
    end-to-end latency budget (one SNN timestep vs one control window)."""
    cycles = trace.total_cycles
    us = cycles / clock_mhz
    report = {
        "cycles": cycles,
        "us": us,
        "fps": None,
        "stalls": dict(trace.stall_cycles),
        "overlap_ratio": (trace.overlap_cycles / cycles) if cycles else 0.0,
        "timesteps": trace.timesteps,
        "us_per_timestep": (us / trace.timesteps) if trace.timesteps else 0.0,
        "weight_fetches": trace.weight_fetches,
        "assumptions": list(MODEL_ASSUMPTIONS),
    }
    if frames:
        report["fps"] = frames / (us * 1e-6) if us else None
        report["us_per_frame"] = us / frames
    return report


def golden_diff(config: NetworkConfig, rule: PlasticityRule, stream,
                hw: HardwareConfig = None, weights=None) -> dict:
    """Run the cycle simulator and the functional model on the same
    stream and compare everything bit for bit.  Returns {'equal': bool,
    'mismatches': [...], 'trace': CycleTrace}."""
    from .network import network_timestep

    sim = Simulator(config, rule, hw, weights=weights)
    sim_outs, trace = sim.run_stream(stream)

    net = NetworkState.zeros(config)
    if weights is not None:
        net.layers[0].weights[:] = weights[0]
        net.layers[1].weights[:] = weights[1]
    gold_outs = []
    for s in np.asarray(stream, dtype=np.uint8):
        gold_outs.append(network_timestep(net, rule, s))

    mismatches = []
    for t, (a, b) in enumerate(zip(sim_outs, gold_outs)):
        if not np.array_equal(a, b):
            mismatches.append(f"output spikes differ at timestep {t}")
            break
    sim_net = sim.export_state()
    for name, x, y in (
        ("w1", sim_net.layers[0].weights, net.layers[0].weights),
        ("w2", sim_net.layers[1].weights, net.layers[1].weights),
        ("v_hidden", sim_net.layers[0].v, net.layers[0].v),
        ("v_out", sim_net.layers[1].v, net.layers[1].v),
        ("trace_in", sim_net.trace_in, net.trace_in),
        ("trace_hidden", sim_net.trace_hidden, net.trace_hidden),
        ("trace_out", sim_net.trace_out, net.trace_out),
    ):
        if not np.array_equal(x.view(np.uint16), y.view(np.uint16)):
            mismatches.append(f"final {name} differs")
    return {"equal": not mismatches, "mismatches": mismatches, "trace": trace}


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
