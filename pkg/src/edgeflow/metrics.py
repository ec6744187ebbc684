"""Run metrics: per-frame event records, link liveness events, summaries.

The frame-event CSV schema is stable: ``frame,stream,node,actor,event,t_us``
with events submit, fire_start, fire_end and complete. Summaries are always
recomputed from the raw rows, never accumulated separately, so the CSV is
the single source of truth.
"""

from __future__ import annotations

import csv
import io
import statistics
import threading
import time
from dataclasses import dataclass, field

__all__ = [
    "FrameEvent",
    "LivenessEvent",
    "StreamSummary",
    "RunMetrics",
    "MetricsCollector",
    "now_us",
    "EVENTS",
]

EVENTS = ("submit", "fire_start", "fire_end", "complete")

CSV_HEADER = ["frame", "stream", "node", "actor", "event", "t_us"]


def now_us() -> int:
    """Monotone microsecond clock shared by all runtime components."""
    return time.perf_counter_ns() // 1000


@dataclass(frozen=True)
class FrameEvent:
    frame: int
    stream: str
    node: str
    actor: str
    event: str
    t_us: int


@dataclass(frozen=True)
class LivenessEvent:
    fifo: str
    old: str
    new: str
    t_us: int


@dataclass
class StreamSummary:
    stream: str
    submitted: int
    completed: int
    stalled: int
    mean_us: float
    p95_us: float


@dataclass
class RunMetrics:
    """Everything one run produced: raw events plus run configuration labels."""

    events: list[FrameEvent] = field(default_factory=list)
    liveness: list[LivenessEvent] = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    def ordered_events(self) -> list[FrameEvent]:
        return sorted(self.events, key=lambda e: (e.t_us, e.frame, e.actor, e.event))

    # -- accounting ----------------------------------------------------

    def submits(self) -> dict[str, dict[int, int]]:
        """stream -> {frame -> submit t_us} (first submit per frame)."""
        out: dict[str, dict[int, int]] = {}
        for e in self.events:
            if e.event == "submit":
                out.setdefault(e.stream, {}).setdefault(e.frame, e.t_us)
        return out

    def completions(self) -> dict[str, dict[int, int]]:
        """stream -> {frame -> t_us of first completion} (dedup by stream+frame)."""
        out: dict[str, dict[int, int]] = {}
        for e in self.ordered_events():
            if e.event == "complete":
                frames = out.setdefault(e.stream, {})
                if e.frame not in frames:
                    frames[e.frame] = e.t_us
        return out

    def completed_count(self, stream: str) -> int:
        return len(self.completions().get(stream, {}))

    def summaries(self) -> list[StreamSummary]:
        subs = self.submits()
        comps = self.completions()
        out = []
        for stream in sorted(subs):
            sub = subs[stream]
            comp = comps.get(stream, {})
            durations = [comp[f] - sub[f] for f in comp if f in sub]
            mean = statistics.fmean(durations) if durations else 0.0
            if len(durations) >= 2:
                p95 = statistics.quantiles(durations, n=20, method="inclusive")[18]
            else:
                p95 = float(durations[0]) if durations else 0.0
            out.append(
                StreamSummary(
                    stream=stream,
                    submitted=len(sub),
                    completed=len(comp),
                    stalled=len(sub) - len(comp),
                    mean_us=mean,
                    p95_us=p95,
                )
            )
        return out

    def render_summary(self) -> str:
        lines = []
        for s in self.summaries():
            lines.append(
                f"stream {s.stream}: {s.completed}/{s.submitted} frames "
                f"({s.stalled} stalled), mean {s.mean_us / 1000:.3f} ms, "
                f"p95 {s.p95_us / 1000:.3f} ms"
            )
        for key, val in sorted(self.labels.items()):
            lines.append(f"# {key}: {val}")
        return "\n".join(lines)

    # -- CSV -------------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(CSV_HEADER)
        for e in self.ordered_events():
            w.writerow([e.frame, e.stream, e.node, e.actor, e.event, e.t_us])
        return buf.getvalue()

    def liveness_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["fifo", "old", "new", "t_us"])
        for e in sorted(self.liveness, key=lambda e: e.t_us):
            w.writerow([e.fifo, e.old, e.new, e.t_us])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunMetrics":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != CSV_HEADER:
            raise ValueError(f"metrics CSV header mismatch: {rows[0] if rows else 'empty'}")
        events = [
            FrameEvent(int(r[0]), r[1], r[2], r[3], r[4], int(r[5])) for r in rows[1:] if r
        ]
        return cls(events=events)


class MetricsCollector:
    """Thread-safe append-only sink shared by all engines of one run."""

    def __init__(self):
        self._lock = threading.Lock()
        self._events: list[FrameEvent] = []
        self._liveness: list[LivenessEvent] = []
        self.labels: dict = {}

    def record(self, frame: int, stream: str, node: str, actor: str, event: str,
               t_us: int | None = None) -> None:
        e = FrameEvent(frame, stream, node, actor, event, now_us() if t_us is None else t_us)
        with self._lock:
            self._events.append(e)

    def record_liveness(self, fifo: str, old: str, new: str, t_us: int | None = None) -> None:
        e = LivenessEvent(fifo, old, new, now_us() if t_us is None else t_us)
        with self._lock:
            self._liveness.append(e)

    def completed_frames(self, stream: str) -> set[int]:
        with self._lock:
            return {e.frame for e in self._events if e.event == "complete" and e.stream == stream}

    def submitted_count(self, stream: str) -> int:
        with self._lock:
            return len({e.frame for e in self._events if e.event == "submit" and e.stream == stream})

    def max_submitted_frame(self) -> int:
        with self._lock:
            frames = [e.frame for e in self._events if e.event == "submit"]
        return max(frames) if frames else -1

    def finish(self) -> RunMetrics:
        with self._lock:
            return RunMetrics(events=list(self._events), liveness=list(self._liveness),
                              labels=dict(self.labels))
