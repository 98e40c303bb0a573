"""Preventive-action-aware thread throttling.

Observes the preventive actions a mitigation mechanism performs, attributes a
per-thread score proportional to each thread's share of row activations since
the previous action, marks threads whose accumulated score is both large and
an outlier above the mean, and shrinks a marked thread's cache-miss-buffer
quota. Scores live in two time-interleaved counter sets so that resetting at
a window boundary never discards a full window of history.

Scores use 16.16 fixed point (32-bit counter semantics: 16 integer bits,
16 fractional bits); activation counters saturate at 16 bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

FIXED_ONE = 1 << 16
ACT_MAX = 0xFFFF

DEFAULT_ACTION_WEIGHTS = {
    "victim_refresh": 1.0,
    "rfm": 1.0,
    "backoff_burst": 1.0,
}


@dataclass
class ThrottlerConfig:
    window_cycles: int                      # throttling-window length
    threat_threshold: float = 32.0          # minimum score to consider a thread
    outlier_ratio: float = 0.65             # allowed divergence above the mean
    old_suspect_penalty: int = 1            # quota units removed per repeat window
    new_suspect_divisor: int = 10           # quota divisor on a fresh marking
    total_mshrs: int = 64
    action_weights: dict = field(default_factory=lambda: dict(DEFAULT_ACTION_WEIGHTS))

    def __post_init__(self):
        if self.window_cycles <= 0:
            raise ValueError("window_cycles must be positive")
        if self.outlier_ratio < 0:
            raise ValueError("outlier_ratio must be >= 0")
        if self.new_suspect_divisor < 1:
            raise ValueError("new_suspect_divisor must be >= 1")


@dataclass
class WindowRecord:
    """Telemetry exported at each window boundary."""
    window: int
    end_cycle: int
    scores: list[float]
    suspects: list[bool]
    quotas: list[int]


class ThreadThrottler:
    def __init__(self, config: ThrottlerConfig, num_threads: int):
        self.config = config
        self.num_threads = num_threads
        self.activations = [0] * num_threads
        # two interleaved score sets; `active` answers suspect queries
        self.scores = [[0] * num_threads, [0] * num_threads]
        self.suspect_flags = [[False] * num_threads, [False] * num_threads]
        self.active = 0
        self.quotas = [config.total_mshrs] * num_threads
        self.recent_suspect = [False] * num_threads
        self.window_index = 0
        self.next_window_end = config.window_cycles
        self.telemetry: list[WindowRecord] = []
        self.total_marks = 0
        self.ever_marked = [False] * num_threads
        self._threat_fp = int(round(config.threat_threshold * FIXED_ONE))

    # -- observation ---------------------------------------------------------

    def record_activation(self, thread: int) -> None:
        """Count one demand activation for `thread` (saturating at 16 bits)."""
        a = self.activations[thread]
        if a < ACT_MAX:
            self.activations[thread] = a + 1

    def on_preventive_action(self, kind: str = "victim_refresh", weight: float | None = None) -> list[int]:
        """Attribute one action's score and re-run suspect detection.

        Returns the threads newly marked suspect in the current window.
        """
        if weight is None:
            weight = self.config.action_weights.get(kind, 1.0)
        activations = self.activations
        total = sum(activations)
        if total == 0:
            return []
        weight_fp = int(round(weight * FIXED_ONE))
        for s in (0, 1):
            scores = self.scores[s]
            for i in range(self.num_threads):
                if activations[i]:
                    scores[i] += weight_fp * activations[i] // total
        for i in range(self.num_threads):
            activations[i] = 0

        scores = self.scores[self.active]
        flags = self.suspect_flags[self.active]
        mean_fp = sum(scores) / self.num_threads
        max_deviation = (1.0 + self.config.outlier_ratio) * mean_fp
        newly_marked = []
        for i in range(self.num_threads):
            if flags[i]:
                continue
            score = scores[i]
            if score < self._threat_fp:
                continue
            if score > max_deviation:
                flags[i] = True
                self.ever_marked[i] = True
                self.total_marks += 1
                self.apply_quota(i)
                newly_marked.append(i)
        return newly_marked

    # -- quota control --------------------------------------------------------

    def apply_quota(self, thread: int) -> int:
        """Shrink a freshly marked thread's quota; returns the new value."""
        if self.recent_suspect[thread]:
            q = max(self.quotas[thread] - self.config.old_suspect_penalty, 0)
        else:
            q = self.quotas[thread] // self.config.new_suspect_divisor
        self.quotas[thread] = q
        return q

    def quota(self, thread: int) -> int:
        return self.quotas[thread]

    # -- windows ---------------------------------------------------------------

    def on_window_end(self, now: int) -> WindowRecord:
        """Close the current throttling window at cycle `now`.

        Carries the active set's suspect verdicts into recent_suspect, restores
        quotas of threads that stayed clean, resets the active set, and swaps
        sets so the retained one (with a full window of history) answers next.
        """
        active = self.active
        flags = self.suspect_flags[active]
        for i in range(self.num_threads):
            self.recent_suspect[i] = flags[i]
            if not flags[i]:
                self.quotas[i] = self.config.total_mshrs
        record = WindowRecord(
            window=self.window_index,
            end_cycle=now,
            scores=[s / FIXED_ONE for s in self.scores[active]],
            suspects=list(flags),
            quotas=list(self.quotas),
        )
        self.telemetry.append(record)
        self.scores[active] = [0] * self.num_threads
        self.suspect_flags[active] = [False] * self.num_threads
        self.active = 1 - active
        self.window_index += 1
        self.next_window_end += self.config.window_cycles
        return record

    # -- introspection -----------------------------------------------------------

    def active_scores(self) -> list[float]:
        return [s / FIXED_ONE for s in self.scores[self.active]]

    def suspects(self) -> list[bool]:
        return list(self.suspect_flags[self.active])
