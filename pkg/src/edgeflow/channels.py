"""Byte channels carrying encoded frames between nodes.

Two implementations behind one duck-typed interface: in-memory duplex
queues for the virtual single-process environment (with fault-injection
hooks: per-FIFO silent drops, node kills, bandwidth shaping) and TCP
sockets for physically distributed runs. Framing and everything above it
is identical in both, which is what makes virtual and multi-process runs
directly comparable.
"""

from __future__ import annotations

import queue
import socket
import threading
import time

__all__ = ["ChannelClosed", "MemoryChannel", "VirtualNetwork", "TcpChannel", "TcpListener"]


class ChannelClosed(ConnectionError):
    """Write or dial on a closed/killed peer; the broken-pipe class of errors."""


class _Lane:
    def __init__(self, wake: threading.Event | None = None):
        self._q: queue.Queue = queue.Queue()
        self.closed = False
        self._wake = wake  # set on delivery so the consumer node wakes promptly

    def put(self, data: bytes) -> None:
        self._q.put(data)
        if self._wake is not None:
            self._wake.set()

    def get(self, timeout: float | None) -> bytes | None:
        try:
            return self._q.get(timeout=timeout) if timeout else self._q.get_nowait()
        except queue.Empty:
            return None


class MemoryChannel:
    """One endpoint of an in-memory duplex connection."""

    def __init__(self, network: "VirtualNetwork", local: str, peer: str,
                 rx: _Lane, tx: _Lane):
        self._network = network
        self.local = local
        self.peer = peer
        self._rx = rx
        self._tx = tx
        self.closed = False

    def send_bytes(self, data: bytes, fifo_wire_id: int | None = None) -> None:
        if self.closed or self._tx.closed:
            raise ChannelClosed(f"{self.local}->{self.peer}: connection closed")
        delay = self._network.transmit_delay_s(len(data))
        if delay > 0:
            # Serialize onto the shaped link; spin the tail so the modelled
            # transfer time is exact instead of sleep-granularity late.
            deadline = time.perf_counter() + delay
            if delay > 0.001:
                time.sleep(delay - 0.0005)
            while time.perf_counter() < deadline:
                pass
        if fifo_wire_id is not None and self._network.is_dropping(fifo_wire_id):
            return  # cable pulled: bytes vanish silently
        if self.closed or self._tx.closed:
            raise ChannelClosed(f"{self.local}->{self.peer}: connection closed")
        self._tx.put(data)

    def recv_bytes(self, timeout: float = 0.0) -> bytes | None:
        if self.closed:
            return None
        return self._rx.get(timeout)

    def close(self) -> None:
        self.closed = True
        self._tx.closed = True
        self._rx.closed = True


class VirtualNetwork:
    """Loopback-style fabric connecting in-process nodes by name."""

    def __init__(self, bandwidth_bps: float | None = None):
        self.bandwidth_bps = bandwidth_bps
        self._accept: dict[str, queue.Queue] = {}
        self._wakes: dict[str, threading.Event] = {}
        self._channels: list[MemoryChannel] = []
        self._killed: set[str] = set()
        self._dropped: set[int] = set()
        self._lock = threading.Lock()

    def transmit_delay_s(self, nbytes: int) -> float:
        if not self.bandwidth_bps:
            return 0.0
        return nbytes * 8.0 / self.bandwidth_bps

    def register(self, node_id: str, wake: threading.Event | None = None) -> queue.Queue:
        with self._lock:
            q = self._accept.setdefault(node_id, queue.Queue())
            if wake is not None:
                self._wakes[node_id] = wake
        return q

    def connect(self, src: str, dst: str) -> MemoryChannel:
        """Dial ``dst`` from ``src``; the peer side lands in dst's accept queue."""
        with self._lock:
            if dst in self._killed or src in self._killed:
                raise ChannelClosed(f"{src}->{dst}: peer is down")
            if dst not in self._accept:
                raise ChannelClosed(f"{src}->{dst}: peer not listening")
            a, b = _Lane(self._wakes.get(src)), _Lane(self._wakes.get(dst))
            near = MemoryChannel(self, src, dst, rx=a, tx=b)
            far = MemoryChannel(self, dst, src, rx=b, tx=a)
            self._channels.extend((near, far))
            self._accept[dst].put(far)
            wake = self._wakes.get(dst)
            if wake is not None:
                wake.set()
        return near

    def kill(self, node_id: str) -> None:
        """Power the node down: existing connections break, dials fail."""
        with self._lock:
            self._killed.add(node_id)
            for ch in self._channels:
                if node_id in (ch.local, ch.peer):
                    ch.close()

    def is_killed(self, node_id: str) -> bool:
        return node_id in self._killed

    def drop_fifo(self, fifo_wire_id: int) -> None:
        self._dropped.add(fifo_wire_id)

    def restore_fifo(self, fifo_wire_id: int) -> None:
        self._dropped.discard(fifo_wire_id)

    def is_dropping(self, fifo_wire_id: int) -> bool:
        return fifo_wire_id in self._dropped


class TcpChannel:
    """Socket-backed channel; the fifo hint is ignored (no fault injection)."""

    def __init__(self, sock: socket.socket, local: str = "?", peer: str = "?"):
        self._sock = sock
        self.local = local
        self.peer = peer
        self.closed = False
        self._send_lock = threading.Lock()
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send_bytes(self, data: bytes, fifo_wire_id: int | None = None) -> None:
        if self.closed:
            raise ChannelClosed(f"{self.local}->{self.peer}: socket closed")
        try:
            with self._send_lock:
                self._sock.sendall(data)
        except OSError as exc:
            self.close()
            raise ChannelClosed(f"{self.local}->{self.peer}: {exc}") from exc

    def recv_bytes(self, timeout: float = 0.0) -> bytes | None:
        if self.closed:
            return None
        try:
            self._sock.settimeout(timeout if timeout > 0 else 0.000001)
            data = self._sock.recv(65536)
        except socket.timeout:
            return None
        except OSError:
            self.close()
            return None
        if data == b"":
            self.close()
            return None
        return data

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            try:
                self._sock.close()
            except OSError:
                pass


class TcpListener:
    def __init__(self, host: str, port: int, node_id: str = "?"):
        self.node_id = node_id
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(16)
        self.address = self._sock.getsockname()

    def accept(self, timeout: float) -> TcpChannel | None:
        self._sock.settimeout(timeout)
        try:
            conn, addr = self._sock.accept()
        except socket.timeout:
            return None
        except OSError:
            return None
        return TcpChannel(conn, local=self.node_id, peer=f"{addr[0]}:{addr[1]}")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


def dial_tcp(address: str, local: str = "?", timeout: float = 1.0) -> TcpChannel:
    host, _, port = address.rpartition(":")
    sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
    return TcpChannel(sock, local=local, peer=address)
