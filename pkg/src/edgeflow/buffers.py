"""Bounded FIFO token buffers.

Each buffer has exactly one producer and one consumer; push/pop are
serialized by a per-buffer lock so counters stay consistent when actors
fire from worker threads.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

__all__ = ["Token", "TokenBuffer", "BufferOverrun"]


class BufferOverrun(RuntimeError):
    """A push would exceed capacity; firings must reserve space up front."""


@dataclass(frozen=True)
class Token:
    """Fixed-size payload tagged with the inference frame it belongs to."""

    payload: bytes
    frame: int = -1


class TokenBuffer:
    """FIFO of fixed-size tokens with monotone produced/consumed counters."""

    __slots__ = ("fifo_id", "capacity", "token_bytes", "_items", "_lock",
                 "produced_total", "consumed_total")

    def __init__(self, fifo_id: str, capacity: int, token_bytes: int):
        self.fifo_id = fifo_id
        self.capacity = capacity
        self.token_bytes = token_bytes
        self._items: deque[Token] = deque()
        self._lock = threading.Lock()
        self.produced_total = 0
        self.consumed_total = 0

    @property
    def occupancy(self) -> int:
        return len(self._items)

    @property
    def free(self) -> int:
        return self.capacity - len(self._items)

    def push(self, tokens: list[Token] | tuple[Token, ...]) -> None:
        with self._lock:
            if len(self._items) + len(tokens) > self.capacity:
                raise BufferOverrun(
                    f"fifo {self.fifo_id!r}: push of {len(tokens)} exceeds capacity "
                    f"{self.capacity} (occupancy {len(self._items)})"
                )
            for t in tokens:
                if len(t.payload) != self.token_bytes:
                    raise ValueError(
                        f"fifo {self.fifo_id!r}: token payload {len(t.payload)} B, "
                        f"expected {self.token_bytes} B"
                    )
                self._items.append(t)
            self.produced_total += len(tokens)

    def pop(self, count: int) -> list[Token]:
        with self._lock:
            if count > len(self._items):
                raise RuntimeError(
                    f"fifo {self.fifo_id!r}: pop of {count} from occupancy {len(self._items)}"
                )
            out = [self._items.popleft() for _ in range(count)]
            self.consumed_total += count
            return out

    def peek(self) -> Token | None:
        with self._lock:
            return self._items[0] if self._items else None

    def snapshot(self) -> list[Token]:
        with self._lock:
            return list(self._items)

    def clone(self) -> "TokenBuffer":
        c = TokenBuffer(self.fifo_id, self.capacity, self.token_bytes)
        c._items = deque(self._items)
        c.produced_total = self.produced_total
        c.consumed_total = self.consumed_total
        return c

    def __repr__(self) -> str:
        return (
            f"TokenBuffer({self.fifo_id!r}, {self.occupancy}/{self.capacity}, "
            f"+{self.produced_total}/-{self.consumed_total})"
        )
