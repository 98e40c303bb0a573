"""Trace-driven cores and the shared last-level cache.

Trace format (one record per line, ASCII):

    <bubble_count> <hex_address> <R|W>

`bubble_count` non-memory instructions execute before the access; `#` starts
a comment. Addresses are truncated to 64-byte line alignment. Traces wrap
around when a core reaches the end, so instruction targets, not trace length,
bound a run.

The cache is write-through/no-write-allocate: write misses go straight to the
write queue and hold no miss buffer (the write completes for the issuing core
at enqueue). Read misses allocate an MSHR subject to the per-thread quota
published by the throttler; reads to a line already in flight merge onto the
existing MSHR without consuming quota.
"""

from __future__ import annotations

from dataclasses import dataclass

HIT = "hit"
MISS_ALLOCATED = "miss_allocated"
MISS_MERGED = "miss_merged"
BLOCKED_QUOTA = "blocked_quota"
BLOCKED_POOL = "blocked_pool"
MISS_WRITETHROUGH = "miss_writethrough"

LINE_BITS = 6
LINE_BYTES = 1 << LINE_BITS


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceEntry:
    bubble_count: int
    address: int
    is_write: bool


class Trace:
    """Parsed trace held as parallel arrays for the simulation hot path."""

    def __init__(self, bubbles: list[int], addresses: list[int], writes: list[bool], path: str = "<mem>"):
        if not bubbles:
            raise TraceError(f"{path}: empty trace")
        self.bubbles = bubbles
        self.addresses = addresses
        self.writes = writes
        self.path = path

    def __len__(self):
        return len(self.bubbles)

    def entries(self):
        for b, a, w in zip(self.bubbles, self.addresses, self.writes):
            yield TraceEntry(b, a, w)


def parse_trace_line(line: str, where: str) -> TraceEntry | None:
    text = line.split("#", 1)[0].strip()
    if not text:
        return None
    parts = text.split()
    if len(parts) != 3:
        raise TraceError(f"{where}: expected '<bubbles> <hex_addr> <R|W>', got {line!r}")
    try:
        bubbles = int(parts[0])
        addr = int(parts[1], 16)
    except ValueError as exc:
        raise TraceError(f"{where}: {exc}") from exc
    if bubbles < 0:
        raise TraceError(f"{where}: negative bubble count")
    op = parts[2].upper()
    if op not in ("R", "W"):
        raise TraceError(f"{where}: op must be R or W, got {parts[2]!r}")
    return TraceEntry(bubbles, addr & ~(LINE_BYTES - 1), op == "W")


def load_trace(path: str) -> Trace:
    bubbles, addresses, writes = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            entry = parse_trace_line(line, f"{path}:{lineno}")
            if entry is None:
                continue
            bubbles.append(entry.bubble_count)
            addresses.append(entry.address)
            writes.append(entry.is_write)
    return Trace(bubbles, addresses, writes, path)


def write_trace(path: str, entries) -> None:
    with open(path, "w") as fh:
        for e in entries:
            fh.write(f"{e.bubble_count} 0x{e.address:x} {'W' if e.is_write else 'R'}\n")


class SharedCache:
    """Set-associative LRU cache with a shared, quota-limited MSHR pool."""

    def __init__(self, size_bytes: int = 8 << 20, ways: int = 8, hit_latency: int = 20,
                 total_mshrs: int = 64, quota_fn=None):
        num_sets = size_bytes // (LINE_BYTES * ways)
        if num_sets < 1 or num_sets & (num_sets - 1):
            raise ValueError(f"cache must have a power-of-two set count, got {num_sets}")
        self.num_sets = num_sets
        self.ways = ways
        self.hit_latency = hit_latency
        self.total_mshrs = total_mshrs
        self.quota_fn = quota_fn or (lambda thread: total_mshrs)
        self.sets: list[list[int]] = [[] for _ in range(num_sets)]
        self.mshrs: dict[int, list[int]] = {}      # line -> waiter threads
        self.mshr_owner: dict[int, int] = {}       # line -> allocating thread
        self.per_thread: dict[int, int] = {}
        self.stat_hits = 0
        self.stat_misses = 0

    def lookup(self, line: int) -> bool:
        s = self.sets[line & (self.num_sets - 1)]
        try:
            s.remove(line)
        except ValueError:
            return False
        s.append(line)
        return True

    def access(self, thread: int, line: int, is_write: bool) -> str:
        """Classify one access and update cache/MSHR state accordingly.

        Caller is responsible for enqueueing the resulting memory request when
        the status is miss_allocated or miss_writethrough.
        """
        if self.lookup(line):
            self.stat_hits += 1
            return HIT
        self.stat_misses += 1
        if line in self.mshrs:
            if not is_write:
                self.mshrs[line].append(thread)
            return MISS_MERGED
        if is_write:
            return MISS_WRITETHROUGH
        if self.per_thread.get(thread, 0) >= self.quota_fn(thread):
            return BLOCKED_QUOTA
        if len(self.mshrs) >= self.total_mshrs:
            return BLOCKED_POOL
        self.mshrs[line] = [thread]
        self.mshr_owner[line] = thread
        self.per_thread[thread] = self.per_thread.get(thread, 0) + 1
        return MISS_ALLOCATED

    def fill(self, line: int) -> list[int]:
        """Complete an outstanding read fill; returns the waiting threads."""
        waiters = self.mshrs.pop(line)
        owner = self.mshr_owner.pop(line)
        self.per_thread[owner] -= 1
        s = self.sets[line & (self.num_sets - 1)]
        if line not in s:
            s.append(line)
            if len(s) > self.ways:
                s.pop(0)
        return waiters

    def outstanding(self, thread: int) -> int:
        return self.per_thread.get(thread, 0)


# Core phases
_P_BUBBLES = 0      # waiting for the current bubble chunk to retire
_P_ACCESS = 1       # attempt the current entry's memory access
_P_HIT_WAIT = 2     # hit latency elapsing; retire access on wake
_P_BLOCKED = 3      # access blocked (quota/pool/queue); retry on wake
_P_FILL_WAIT = 4    # at max outstanding reads; continue on any fill

NEVER = 1 << 62


class Core:
    """In-order, trace-driven core with bounded outstanding read misses."""

    __slots__ = (
        "thread_id", "trace", "issue_width", "max_outstanding", "idx", "phase",
        "retired", "outstanding", "next_event", "pending_bubbles", "is_attacker",
        "blocked_status", "retire_log",
    )

    def __init__(self, thread_id: int, trace: Trace, issue_width: int = 4,
                 max_outstanding: int = 4, is_attacker: bool = False,
                 keep_retire_log: bool = False):
        self.thread_id = thread_id
        self.trace = trace
        self.issue_width = issue_width
        self.max_outstanding = max_outstanding
        self.idx = 0
        self.phase = _P_BUBBLES
        self.retired = 0
        self.outstanding = 0
        self.pending_bubbles = trace.bubbles[0]
        self.next_event = (self.pending_bubbles + issue_width - 1) // issue_width
        self.is_attacker = is_attacker
        self.blocked_status = ""
        self.retire_log: list[tuple[int, int]] | None = [] if keep_retire_log else None

    def _retire(self, count: int, now: int) -> None:
        self.retired += count
        if self.retire_log is not None:
            self.retire_log.append((now, count))

    def _advance_entry(self, now: int) -> None:
        """Move to the next trace entry (wrapping) and schedule its bubbles."""
        self.idx = (self.idx + 1) % len(self.trace)
        self.pending_bubbles = self.trace.bubbles[self.idx]
        self.phase = _P_BUBBLES
        if self.pending_bubbles:
            self.next_event = now + 1 + (self.pending_bubbles + self.issue_width - 1) // self.issue_width
        else:
            self.next_event = now + 1  # at most one memory access per cycle

    def on_fill(self, now: int) -> None:
        """One of this core's outstanding reads completed."""
        self.outstanding -= 1
        self._retire(1, now)
        if self.phase == _P_FILL_WAIT:
            self.phase = _P_ACCESS
            self.next_event = now

    def wake(self, now: int) -> None:
        """Blocked-resource broadcast: retry the pending access."""
        if self.phase == _P_BLOCKED:
            self.next_event = now

    def step(self, now: int, engine) -> None:
        """Advance through bubbles and at most one access attempt at `now`."""
        if self.phase == _P_BUBBLES:
            if self.pending_bubbles:
                self._retire(self.pending_bubbles, now)
                self.pending_bubbles = 0
            self.phase = _P_ACCESS
        if self.phase == _P_HIT_WAIT:
            self._retire(1, now)
            self._advance_entry(now)
            return
        if self.phase in (_P_ACCESS, _P_BLOCKED):
            self._attempt_access(now, engine)

    def _attempt_access(self, now: int, engine) -> None:
        trace = self.trace
        idx = self.idx
        address = trace.addresses[idx]
        is_write = trace.writes[idx]
        if not is_write and self.outstanding >= self.max_outstanding:
            self.phase = _P_FILL_WAIT     # retry this entry when a fill frees a slot
            self.next_event = NEVER
            return
        status = engine.core_access(self, address, is_write, now)
        if status == HIT:
            if is_write:
                self._retire(1, now)      # write hit completes at enqueue
                self._advance_entry(now)
            else:
                self.phase = _P_HIT_WAIT
                self.next_event = now + engine.cache.hit_latency
        elif status in (MISS_ALLOCATED, MISS_MERGED) and not is_write:
            self.outstanding += 1
            self._advance_entry(now)
        elif is_write and status in (MISS_WRITETHROUGH, MISS_MERGED, MISS_ALLOCATED):
            self._retire(1, now)
            self._advance_entry(now)
        else:  # blocked_quota / blocked_pool / queue_full
            self.phase = _P_BLOCKED
            self.blocked_status = status
            self.next_event = NEVER
