"""Simulation assembly and the event-skipping main loop.

The whole system is a deterministic single-threaded state machine: cores,
the shared cache, one controller+device per channel, the mitigation, and the
throttler advance on one integer clock. The loop jumps to the next cycle at
which anything can happen (core wake, command legality, completion, refresh
due, window boundary), so idle stretches cost nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import ExperimentConfig, trace_paths
from .controller import ControllerConfig, MemController, NEVER
from .cores import (
    LINE_BITS, MISS_ALLOCATED, MISS_MERGED, Core, SharedCache, Trace, load_trace,
)
from .dram import CMD_ACT, CMD_RD, CMD_VRR, CMD_WR, DramAddress, DramCommand, DramDevice
from .mapping import mop_mapping, parse_mapping
from .mitigations import MitigationConfig, build_mitigation, needs_row_counters
from .throttle import ThreadThrottler, ThrottlerConfig

QUEUE_FULL = "queue_full"


class SimulationError(RuntimeError):
    pass


@dataclass
class RunResult:
    cycles: int
    warmup_cycle: int
    retired: list[int]
    retired_at_warmup: list[int]
    ipc: list[float]
    read_latencies: list[int]
    command_counts: dict
    per_thread_acts: list[int]
    per_thread_rd: list[int]
    per_thread_wr: list[int]
    action_counts: dict
    vrr_victims: int
    ever_marked: list[bool]
    total_marks: int
    telemetry: list
    oracle_peak: int
    oracle_peak_loc: tuple
    refresh_max_gap: int
    refresh_sweeps: int
    derived_params: dict
    checks: dict = field(default_factory=dict)
    command_log: list | None = None
    retire_logs: list | None = None
    rbmpki: list[float] = field(default_factory=list)

    def ipc_of(self, thread: int) -> float:
        return self.ipc[thread]


class Engine:
    def __init__(self, cfg: ExperimentConfig, traces: list[Trace] | None = None):
        self.cfg = cfg
        raw = cfg.raw
        geo = cfg.geometry
        timing = cfg.timing

        if traces is None:
            traces = [load_trace(p) for p in trace_paths(cfg)]
        if not traces:
            raise SimulationError("no traces configured")
        n_threads = len(traces)
        attackers = set(raw["workload"]["attacker_threads"])

        ctrl_raw = raw["controller"]
        if "mapping" in ctrl_raw and ctrl_raw.get("mapping"):
            self.mapping = parse_mapping(ctrl_raw["mapping"])
        else:
            self.mapping = mop_mapping(geo, ctrl_raw["mop_blocks_per_chunk"])

        mit_raw = dict(raw["mitigation"])
        mechanism = mit_raw.pop("mechanism")
        nrh = mit_raw.pop("nrh")
        self.mitigation_cfg = MitigationConfig(
            mechanism=mechanism, nrh=nrh, seed=raw["seeds"]["mitigation"],
            **{k: v for k, v in mit_raw.items() if v is not None})

        self.devices: list[DramDevice] = []
        self.controllers: list[MemController] = []
        self.mitigations = []
        ctrl_cfg = ControllerConfig(
            read_queue_depth=ctrl_raw["read_queue_depth"],
            write_queue_depth=ctrl_raw["write_queue_depth"],
            cap=ctrl_raw["cap"],
            write_drain_high=ctrl_raw["write_drain_high"],
            write_drain_low=ctrl_raw["write_drain_low"],
        )
        for ch in range(geo.channels):
            device = DramDevice(geo, timing,
                                blast_radius=raw["sim"]["blast_radius"],
                                track_row_counters=needs_row_counters(mechanism),
                                victims_per_side=raw["sim"].get("victims_per_side"))
            mitigation = build_mitigation(self.mitigation_cfg, geo, timing, device)
            self.devices.append(device)
            self.mitigations.append(mitigation)
            self.controllers.append(MemController(ch, device, mitigation, ctrl_cfg, self))

        thr_raw = raw["throttler"]
        self.throttling = thr_raw["enabled"]
        self.throttlers: list[ThreadThrottler] = []
        total_mshrs = raw["llc"]["total_mshrs"]
        if self.throttling:
            tcfg = ThrottlerConfig(
                window_cycles=cfg.window_cycles,
                threat_threshold=thr_raw["threat_threshold"],
                outlier_ratio=thr_raw["outlier_ratio"],
                old_suspect_penalty=thr_raw["old_suspect_penalty"],
                new_suspect_divisor=thr_raw["new_suspect_divisor"],
                total_mshrs=total_mshrs,
                action_weights=dict(thr_raw["action_weights"]),
            )
            self.throttlers = [ThreadThrottler(tcfg, n_threads) for _ in range(geo.channels)]
            if geo.channels == 1:
                thr0 = self.throttlers[0]
                quota_fn = thr0.quota
            else:
                throttlers = self.throttlers
                quota_fn = lambda t: min(th.quota(t) for th in throttlers)
        else:
            quota_fn = lambda t: total_mshrs

        self.cache = SharedCache(
            size_bytes=raw["llc"]["size_bytes"], ways=raw["llc"]["ways"],
            hit_latency=raw["llc"]["hit_latency"], total_mshrs=total_mshrs,
            quota_fn=quota_fn)

        attacker_mlp = raw["cores"].get("attacker_max_outstanding") or raw["cores"]["max_outstanding_misses"]
        self.cores = [
            Core(i, trace, issue_width=raw["cores"]["issue_width"],
                 max_outstanding=attacker_mlp if i in attackers
                 else raw["cores"]["max_outstanding_misses"],
                 is_attacker=i in attackers,
                 keep_retire_log=raw["sim"]["keep_retire_log"])
            for i, trace in enumerate(traces)
        ]
        self.benign = [c for c in self.cores if not c.is_attacker]
        self.target = raw["cores"]["instruction_target"]
        self.warmup = raw["measurement"]["warmup_cycles"]
        self.max_cycles = raw["sim"]["max_cycles"]

        # counters
        self.command_counts: dict[str, int] = {}
        self.per_thread_acts = [0] * n_threads
        self.per_thread_rd = [0] * n_threads
        self.per_thread_wr = [0] * n_threads
        self.action_counts: dict[str, int] = {}
        self.vrr_victims = 0
        self.read_latencies: list[int] = []
        self.command_log: list | None = [] if raw["sim"]["collect_command_log"] else None
        self._broadcast = False
        self.now = 0

    # -- hooks called by controller/cores ---------------------------------------

    def issue_command(self, controller: MemController, kind, rank, bg, bank, row, now,
                      thread=-1, column=0, victim_rows=()):
        device = controller.device
        addr = DramAddress(controller.channel, rank, bg, bank, row, column)
        cmd = DramCommand(kind, addr, now, victim_rows=tuple(victim_rows))
        cmd = device.issue(cmd, now)
        self.command_counts[kind] = self.command_counts.get(kind, 0) + 1
        if self.command_log is not None:
            n_victims = len(cmd.victim_rows) if kind == CMD_VRR else 0
            self.command_log.append((now, kind, rank, bg, bank, row, n_victims))
        if kind == CMD_ACT:
            self.per_thread_acts[thread] += 1
            self._on_demand_act(controller, thread,
                                device.geometry.flat_bank(rank, bg, bank), row, now)
        elif kind == CMD_RD:
            self.per_thread_rd[thread] += 1
        elif kind == CMD_WR:
            self.per_thread_wr[thread] += 1
        elif kind == CMD_VRR:
            self.vrr_victims += len(cmd.victim_rows)
        return cmd

    def _on_demand_act(self, controller, thread, flat_bank, row, now):
        ch = controller.channel
        if self.throttling:
            self.throttlers[ch].record_activation(thread)
        actions = controller.mitigation.on_activation(thread, flat_bank, row, now)
        for action in actions:
            self.action_counts[action.kind] = self.action_counts.get(action.kind, 0) + 1
            controller.add_priv(action)
            if self.throttling:
                self.throttlers[ch].on_preventive_action(action.kind)

    def on_read_complete(self, thread, line, arrival, finish):
        if arrival >= self.warmup:
            self.read_latencies.append(finish - arrival)
        for waiter in self.cache.fill(line):
            self.cores[waiter].on_fill(finish)
        self._broadcast = True

    def note_dequeue(self):
        self._broadcast = True

    def core_access(self, core: Core, address: int, is_write: bool, now: int) -> str:
        """LLC access plus memory-request enqueue, honoring queue back-pressure."""
        line = address >> LINE_BITS
        addr = self.mapping.decode(address)
        controller = self.controllers[addr.channel]
        if is_write:
            if not controller.write_space():
                return QUEUE_FULL
            status = self.cache.access(core.thread_id, line, True)
            if status != MISS_MERGED:
                req = controller.make_request(core.thread_id, line, addr, now, True)
                controller.enqueue(req)
                controller.dirty = True
            return status
        if not controller.read_space():
            in_cache = line in self.cache.sets[line & (self.cache.num_sets - 1)]
            if not in_cache and line not in self.cache.mshrs:
                return QUEUE_FULL
        status = self.cache.access(core.thread_id, line, False)
        if status == MISS_ALLOCATED:
            req = controller.make_request(core.thread_id, line, addr, now, False)
            accepted = controller.enqueue(req)
            assert accepted == "accepted", "read queue overflow despite space check"
            controller.dirty = True
        return status

    # -- main loop -------------------------------------------------------------------

    def _done(self) -> bool:
        return all(c.retired >= self.target for c in self.benign)

    def run(self) -> RunResult:
        cores = self.cores
        controllers = self.controllers
        for ctrl in controllers:
            ctrl.dirty = False
        ctrl_wake = [0] * len(controllers)
        warmup_snapshot: list[int] | None = None
        next_window = self.throttlers[0].next_window_end if self.throttling else NEVER
        now = 0

        while not self._done():
            t = NEVER
            for c in cores:
                if c.next_event < t:
                    t = c.next_event
            for i, ctrl in enumerate(controllers):
                w = ctrl_wake[i]
                comp = ctrl.next_completion()
                if comp < w:
                    w = comp
                if w < t:
                    t = w
            if self.throttling and next_window < t:
                t = next_window
            if warmup_snapshot is None and self.warmup < t:
                t = self.warmup
            if t >= NEVER:
                raise SimulationError(f"deadlock: no future events at cycle {now}")
            if t > self.max_cycles:
                raise SimulationError(f"exceeded sim.max_cycles={self.max_cycles}")
            now = t

            if warmup_snapshot is None and now >= self.warmup:
                warmup_snapshot = [c.retired for c in cores]

            for ctrl in controllers:
                ctrl.process_completions(now)

            if self.throttling and now >= next_window:
                for thr in self.throttlers:
                    thr.on_window_end(now)
                next_window = self.throttlers[0].next_window_end
                self._broadcast = True

            for i, ctrl in enumerate(controllers):
                # between scans, controller legality only relaxes with time;
                # enqueues pull the wake forward via the dirty flag below
                if now >= ctrl_wake[i]:
                    ctrl_wake[i] = ctrl.try_issue(now)

            if self._broadcast:
                self._broadcast = False
                for c in cores:
                    c.wake(now)

            for c in cores:
                if c.next_event <= now:
                    c.step(now, self)

            for i, ctrl in enumerate(controllers):
                if ctrl.dirty:
                    ctrl.dirty = False
                    if ctrl_wake[i] > now + 1:
                        ctrl_wake[i] = now + 1

        self.now = now
        if warmup_snapshot is None:
            warmup_snapshot = [0] * len(cores)
            self.warmup = 0
        return self._build_result(now, warmup_snapshot)

    def _build_result(self, end: int, warmup_snapshot: list[int]) -> RunResult:
        span = max(1, end - self.warmup)
        ipc = [(c.retired - warmup_snapshot[i]) / span for i, c in enumerate(self.cores)]
        peak_loc, peak = (0, 0), 0
        for device in self.devices:
            loc, val = device.oracle.peak_damage()
            if val > peak:
                peak, peak_loc = val, loc
        max_gap, sweeps = self._refresh_audit(end)
        telemetry = []
        ever_marked = [False] * len(self.cores)
        total_marks = 0
        derived = {}
        for ch, mit in enumerate(self.mitigations):
            for k, v in mit.derived.items():
                derived[k] = v
        if self.throttling:
            for ch, thr in enumerate(self.throttlers):
                for rec in thr.telemetry:
                    telemetry.append({"channel": ch, "window": rec.window,
                                      "end_cycle": rec.end_cycle, "scores": rec.scores,
                                      "suspects": rec.suspects, "quotas": rec.quotas})
                total_marks += thr.total_marks
                for i, m in enumerate(thr.ever_marked):
                    ever_marked[i] = ever_marked[i] or m
        rbmpki = []
        for i, c in enumerate(self.cores):
            kilo_instr = max(c.retired, 1) / 1000.0
            rbmpki.append(self.per_thread_acts[i] / kilo_instr)
        return RunResult(
            cycles=end, warmup_cycle=self.warmup,
            retired=[c.retired for c in self.cores],
            retired_at_warmup=warmup_snapshot, ipc=ipc,
            read_latencies=self.read_latencies,
            command_counts=dict(sorted(self.command_counts.items())),
            per_thread_acts=self.per_thread_acts,
            per_thread_rd=self.per_thread_rd,
            per_thread_wr=self.per_thread_wr,
            action_counts=dict(sorted(self.action_counts.items())),
            vrr_victims=self.vrr_victims,
            ever_marked=ever_marked, total_marks=total_marks,
            telemetry=telemetry, oracle_peak=peak, oracle_peak_loc=peak_loc,
            refresh_max_gap=max_gap, refresh_sweeps=sweeps,
            derived_params=derived,
            command_log=self.command_log,
            retire_logs=[c.retire_log for c in self.cores] if self.cfg.raw["sim"]["keep_retire_log"] else None,
            rbmpki=rbmpki,
        )

    def _refresh_audit(self, end: int) -> tuple[int, int]:
        """Worst refresh gap seen for any REF group, and completed sweep count."""
        max_gap = 0
        total_refs = min(ctrl.stat_ref_count for ctrl in self.controllers) if self.controllers else 0
        for device in self.devices:
            max_gap = max(max_gap, device.max_ref_gap)
            for rank in device.ranks:
                for last in rank.last_ref_start:
                    gap = end - last
                    if gap > max_gap:
                        max_gap = gap
        sweeps = total_refs // self.devices[0].n_ref_groups if self.devices else 0
        return max_gap, sweeps
