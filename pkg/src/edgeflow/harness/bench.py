"""K_{m,n} scaling bench: per-frame endpoint and server times per cell.

For every (m, n) cell the bench runs the vehicle-style templates
virtually and reports two medians per stream:

* endpoint time: submit until the last endpoint-side actor finished the
  frame (the device's own per-frame work);
* server time: from that hand-off until the frame completes on a server
  (transfer, queueing behind the other streams, and service).

Endpoints free-run against backpressure, so the server stays loaded and
every added endpoint lengthens each frame's wait behind its peers; the
per-frame scaling is then visible far above scheduler noise (the shape is
qualitative: absolute values depend on the synthetic cost regime). The
output table mirrors the classic scaling layout: one row per (side,
server count), one column per endpoint count.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field

from ..engine import EngineConfig
from ..kernels import KernelRegistry
from ..link import TransportConfig
from ..metrics import RunMetrics
from .virtual import RunResult, run_virtual

__all__ = ["ScalingCell", "ScalingTable", "bench_scaling", "per_frame_times"]


@dataclass
class ScalingCell:
    m: int
    n: int
    endpoint_us: float
    server_us: float
    completed: int
    stalled: int


@dataclass
class ScalingTable:
    frames: int
    cells: dict[tuple[int, int], ScalingCell] = field(default_factory=dict)

    def cell(self, m: int, n: int) -> ScalingCell:
        return self.cells[(m, n)]

    def m_values(self) -> list[int]:
        return sorted({m for m, _ in self.cells})

    def n_values(self) -> list[int]:
        return sorted({n for _, n in self.cells})

    def to_csv(self) -> str:
        """Upper half endpoint rows, lower half server rows, columns by n."""
        buf = io.StringIO()
        w = csv.writer(buf)
        ns = self.n_values()
        w.writerow(["side", "servers"] + [f"n{n}" for n in ns])
        for side in ("endpoint", "server"):
            for m in self.m_values():
                row = [side, m]
                for n in ns:
                    cell = self.cells.get((m, n))
                    value = getattr(cell, f"{side}_us") if cell else ""
                    row.append(f"{value / 1000:.3f}" if value != "" else "")
                w.writerow(row)
        return buf.getvalue()

    def server_monotone_in_n(self, m: int) -> bool:
        values = [self.cells[(m, n)].server_us for n in self.n_values() if (m, n) in self.cells]
        return all(a <= b for a, b in zip(values, values[1:]))

    def dual_single_gap(self, side: str = "server") -> dict[int, float]:
        """Relative |dual - single| / single per n, for cells present in both."""
        ms = self.m_values()
        if len(ms) < 2:
            return {}
        lo, hi = ms[0], ms[-1]
        out = {}
        for n in self.n_values():
            if (lo, n) in self.cells and (hi, n) in self.cells:
                a = getattr(self.cells[(lo, n)], f"{side}_us")
                b = getattr(self.cells[(hi, n)], f"{side}_us")
                out[n] = abs(b - a) / a if a else 0.0
        return out


def per_frame_times(metrics: RunMetrics, endpoint_nodes: set[str]) -> tuple[float, float]:
    """Median endpoint-side and server-side per-frame time over all streams.

    Server time samples every server's completion of a frame (each replica
    measures its own service), not just the first arrival, so the figure is
    comparable between single- and dual-server runs; the median keeps one
    contended outlier tail from skewing a cell.
    """
    submits = metrics.submits()
    handoff: dict[tuple[str, int], int] = {}
    for e in metrics.events:
        if e.event == "fire_end" and e.node in endpoint_nodes and e.stream:
            key = (e.stream, e.frame)
            if key not in handoff or e.t_us > handoff[key]:
                handoff[key] = e.t_us
    ep_times, srv_times = [], []
    seen_ep: set[tuple[str, int]] = set()
    for e in metrics.events:
        if e.event != "complete":
            continue
        key = (e.stream, e.frame)
        sub = submits.get(e.stream, {})
        if e.frame not in sub or key not in handoff:
            continue
        srv_times.append(e.t_us - handoff[key])
        if key not in seen_ep:
            seen_ep.add(key)
            ep_times.append(handoff[key] - sub[e.frame])
    return (
        statistics.median(ep_times) if ep_times else 0.0,
        statistics.median(srv_times) if srv_times else 0.0,
    )


def bench_scaling(
    m_values: list[int],
    n_values: list[int],
    endpoint_template,
    server_template,
    frames: int = 1000,
    registry: KernelRegistry | None = None,
    engine_config: EngineConfig | None = None,
    watchdog_s: float = 240.0,
) -> ScalingTable:
    """Run every (m, n) cell and collect the scaling table."""
    if not m_values or not n_values:
        raise ValueError("bench ranges must be non-empty")
    table = ScalingTable(frames=frames)
    for m in m_values:
        for n in n_values:
            result: RunResult = run_virtual(
                m,
                n,
                endpoint_template,
                server_template,
                frames=frames,
                engine_config=engine_config,
                registry=registry,
                watchdog_s=watchdog_s,
                transport=TransportConfig(flow_window_tokens=16),
            )
            endpoint_nodes = {f"ep{i}" for i in range(1, n + 1)}
            ep_us, srv_us = per_frame_times(result.metrics, endpoint_nodes)
            summaries = result.metrics.summaries()
            table.cells[(m, n)] = ScalingCell(
                m=m,
                n=n,
                endpoint_us=ep_us,
                server_us=srv_us,
                completed=sum(s.completed for s in summaries),
                stalled=sum(s.stalled for s in summaries),
            )
    return table
