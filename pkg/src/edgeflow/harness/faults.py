"""Fault scripts: frame-indexed kill / drop-link / restore-link schedules.

Spec grammar (one spec per --fault flag):

    kill:<node>@frame=<k>
    drop-link:<fifo>@frame=<k>,restore=<j>

Timing is frame-indexed rather than wall-clock so scripted failures land
at reproducible points: an endpoint kill triggers once that endpoint's own
stream has submitted its k-th frame; every other event triggers once any
stream has.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["FaultEvent", "FaultScript", "FaultSpecError", "parse_fault_spec",
           "KILL", "DROP_LINK", "RESTORE_LINK"]

KILL = "kill"
DROP_LINK = "drop_link"
RESTORE_LINK = "restore_link"


class FaultSpecError(ValueError):
    pass


@dataclass(frozen=True)
class FaultEvent:
    action: str  # kill | drop_link | restore_link
    target: str  # node id (kill) or fifo id (links)
    at_frame: int

    def __post_init__(self) -> None:
        if self.action not in (KILL, DROP_LINK, RESTORE_LINK):
            raise FaultSpecError(f"unknown fault action {self.action!r}")
        if self.at_frame < 1:
            raise FaultSpecError(f"at_frame must be >= 1, got {self.at_frame}")


class FaultScript:
    """Ordered fault events with the structural rules enforced:
    restore only follows a drop on the same target, and kill is terminal."""

    def __init__(self, events: list[FaultEvent] | tuple[FaultEvent, ...] = ()):
        self.events = sorted(events, key=lambda e: (e.at_frame, e.target))
        dropped: set[str] = set()
        killed: set[str] = set()
        for e in self.events:
            if e.target in killed:
                raise FaultSpecError(f"{e.target!r}: event after kill (kill is terminal)")
            if e.action == KILL:
                killed.add(e.target)
            elif e.action == DROP_LINK:
                if e.target in dropped:
                    raise FaultSpecError(f"{e.target!r}: dropped twice without restore")
                dropped.add(e.target)
            elif e.action == RESTORE_LINK:
                if e.target not in dropped:
                    raise FaultSpecError(f"{e.target!r}: restore without a prior drop")
                dropped.discard(e.target)

    def __iter__(self):
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def kill_targets(self) -> set[str]:
        return {e.target for e in self.events if e.action == KILL}


_KILL_RE = re.compile(r"^kill:(?P<node>[\w.-]+)@frame=(?P<k>\d+)$")
_DROP_RE = re.compile(
    r"^drop-link:(?P<fifo>[\w.-]+)@frame=(?P<k>\d+),restore=(?P<j>\d+)$"
)


def parse_fault_spec(spec: str) -> list[FaultEvent]:
    """Parse one CLI fault spec into its events."""
    m = _KILL_RE.match(spec.strip())
    if m:
        return [FaultEvent(KILL, m.group("node"), int(m.group("k")))]
    m = _DROP_RE.match(spec.strip())
    if m:
        drop_at, restore_at = int(m.group("k")), int(m.group("j"))
        if restore_at <= drop_at:
            raise FaultSpecError(f"restore frame {restore_at} must follow drop frame {drop_at}")
        return [
            FaultEvent(DROP_LINK, m.group("fifo"), drop_at),
            FaultEvent(RESTORE_LINK, m.group("fifo"), restore_at),
        ]
    raise FaultSpecError(
        f"bad fault spec {spec!r}; expected kill:<node>@frame=<k> or "
        f"drop-link:<fifo>@frame=<k>,restore=<j>"
    )
