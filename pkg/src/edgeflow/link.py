"""Per-FIFO link reliability: liveness state machine, resend buffer,
receiver-side dedup.

Delivery is at-least-once on the wire and exactly-once at the buffer
boundary: the sender keeps every token until its sequence is acknowledged
and retransmits on timeout or RESUME; the receiver accepts only the next
expected sequence and drops duplicates, so delivered streams are gap-free
and duplicate-free across any pattern of transient breaks.

Liveness follows alive -> degraded -> (alive | dead); dead is terminal.
A link degrades on any transport error, on silence past the idle
threshold, or on acknowledgment starvation (peer stopped draining), and
dies once the reconnect budget is spent.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

__all__ = ["TransportConfig", "LinkState", "SendState", "RecvState",
            "ALIVE", "DEGRADED", "DEAD", "LinkStateError"]

ALIVE = "alive"
DEGRADED = "degraded"
DEAD = "dead"

_LEGAL = {
    (ALIVE, DEGRADED),
    (DEGRADED, ALIVE),
    (DEGRADED, DEAD),
}


class LinkStateError(RuntimeError):
    """Illegal liveness transition (e.g. resurrecting a dead link)."""


@dataclass
class TransportConfig:
    """Timing knobs; defaults resolve failures within a few seconds."""

    heartbeat_interval_s: float = 0.5
    silence_degraded_s: float = 1.5
    rto_s: float = 0.5  # retransmit / ack-starvation timeout
    reconnect_attempts: int = 5
    backoff_base_s: float = 0.1  # attempt k waits base * 2**k, capped
    backoff_cap_s: float = 3.2
    resend_buffer_bytes: int = 4 * 2**20
    max_tokens_per_frame: int = 64
    ack_every_tokens: int = 4  # cumulative-ack batching
    ack_interval_s: float = 0.05
    flow_window_tokens: int = 64  # unacked tokens an active link may hold

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_base_s * (2 ** attempt), self.backoff_cap_s)


class LinkState:
    """Liveness bookkeeping for one FIFO link to one peer node."""

    def __init__(self, fifo_id: str, peer: str, config: TransportConfig,
                 on_transition: Callable[[str, str, str], None] | None = None):
        self.fifo_id = fifo_id
        self.peer = peer
        self.config = config
        self.status = ALIVE
        self.retry_count = 0
        self.last_rx: float = 0.0
        self.last_tx: float = 0.0
        self.next_retry_at: float = 0.0
        self._on_transition = on_transition

    def transition(self, new_status: str) -> None:
        if new_status == self.status:
            return
        if (self.status, new_status) not in _LEGAL:
            raise LinkStateError(f"{self.fifo_id}: illegal transition {self.status} -> {new_status}")
        old = self.status
        self.status = new_status
        if new_status == ALIVE:
            self.retry_count = 0
        if self._on_transition is not None:
            self._on_transition(self.fifo_id, old, new_status)

    def mark_rx(self, now: float) -> None:
        self.last_rx = now

    def on_transport_error(self, now: float) -> None:
        if self.status == ALIVE:
            self.transition(DEGRADED)
            self.retry_count = 0
            self.next_retry_at = now  # first reconnect immediately

    def poll(self, now: float, ack_starved: bool = False) -> str:
        """Advance the liveness state machine; returns the current status.

        Degrades on silence or ack starvation; while degraded, paces
        reconnect attempts by exponential backoff until the budget is
        spent, then goes dead (terminal).
        """
        if self.status == DEAD:
            return DEAD
        if self.status == ALIVE:
            silent = now - max(self.last_rx, 0.0) > self.config.silence_degraded_s
            if (silent and self.last_rx > 0.0) or ack_starved:
                self.transition(DEGRADED)
                self.retry_count = 0
                self.next_retry_at = now
        return self.status

    def reconnect_due(self, now: float) -> bool:
        return self.status == DEGRADED and now >= self.next_retry_at

    def record_reconnect_attempt(self, now: float, success: bool) -> None:
        if self.status != DEGRADED:
            return
        if success:
            self.mark_rx(now)
            self.transition(ALIVE)
            return
        self.retry_count += 1
        if self.retry_count >= self.config.reconnect_attempts:
            self.transition(DEAD)
        else:
            self.next_retry_at = now + self.config.backoff(self.retry_count)


@dataclass
class _Entry:
    seq: int
    payload: bytes
    sent_at: float


@dataclass
class SendState:
    """Sender side of one FIFO: sequence allocation plus the resend buffer."""

    fifo_id: str
    token_bytes: int
    limit_bytes: int
    next_seq: int = 0
    acked: int = 0  # everything below this sequence is acknowledged
    _entries: deque = field(default_factory=deque)
    _buffered: int = 0

    def room_for(self, count: int) -> bool:
        return self._buffered + count * self.token_bytes <= self.limit_bytes

    @property
    def unacked_bytes(self) -> int:
        return self._buffered

    @property
    def unacked_count(self) -> int:
        return len(self._entries)

    def append(self, payloads: list[bytes], now: float) -> int:
        """Buffer tokens for (re)transmission; returns the first sequence."""
        first = self.next_seq
        for p in payloads:
            self._entries.append(_Entry(self.next_seq, p, now))
            self._buffered += len(p)
            self.next_seq += 1
        return first

    def ack(self, horizon: int) -> None:
        """Drop everything below ``horizon`` (cumulative acknowledgment)."""
        while self._entries and self._entries[0].seq < horizon:
            self._buffered -= len(self._entries[0].payload)
            self._entries.popleft()
        if horizon > self.acked:
            self.acked = horizon

    def pending_from(self, seq: int) -> list[tuple[int, bytes]]:
        return [(e.seq, e.payload) for e in self._entries if e.seq >= seq]

    def stale(self, now: float, rto_s: float) -> bool:
        return bool(self._entries) and now - self._entries[0].sent_at > rto_s

    def touch_all(self, now: float) -> None:
        for e in self._entries:
            e.sent_at = now


@dataclass
class RecvState:
    """Receiver side: in-order delivery with duplicate suppression."""

    fifo_id: str
    token_bytes: int
    next_expected: int = 0
    saw_gap: bool = False

    def accept(self, sequence: int, payloads: list[bytes]) -> list[tuple[int, bytes]]:
        """Filter a frame's tokens down to the in-order, never-seen ones.

        A frame starting beyond ``next_expected`` signals lost traffic; it
        is discarded entirely and ``saw_gap`` is raised so the caller can
        request a RESUME from the sender.
        """
        if sequence > self.next_expected:
            self.saw_gap = True
            return []
        accepted = []
        for i, payload in enumerate(payloads):
            seq = sequence + i
            if seq < self.next_expected:
                continue  # duplicate
            accepted.append((seq, payload))
            self.next_expected = seq + 1
        if accepted:
            self.saw_gap = False
        return accepted
