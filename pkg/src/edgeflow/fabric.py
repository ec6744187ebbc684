"""Node runtime: one engine plus the transport fabric serving its links.

The same class drives both deployment styles. In the virtual environment
every node gets a thread and channels are in-memory queues; in a physical
deployment each node is an OS process and channels are TCP sockets. All
framing, handshakes, reliability and redundancy logic sits here, above the
channel, so the two styles execute identical code paths.

Handshake: the dialing side sends HELLO (graph hash, node id, wire fifo
ids); the acceptor verifies the hash and answers HELLO_ACK, then both
sides send RESUME per consumed FIFO announcing the next expected sequence,
which arms (re)transmission on the producing side without duplicates.

Redundancy: under ``replicate`` every group server receives every token
and dead links are simply dropped (their egress drains to nowhere so the
engine never stalls); under ``failover`` only the first live group member
receives tokens and the backlog is replayed to the next member on death.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .buffers import Token, TokenBuffer
from .channels import ChannelClosed
from .engine import Engine, EngineConfig
from .kernels import KernelRegistry
from .link import ALIVE, DEAD, DEGRADED, LinkState, RecvState, SendState, TransportConfig
from .metrics import MetricsCollector, now_us
from .model import FAILOVER, GraphSpec, MappingSpec, cross_fifos
from .wire import (
    BYE,
    DATA,
    HEARTBEAT,
    HELLO,
    HELLO_ACK,
    RESUME,
    FrameError,
    FrameParser,
    TokenFrame,
    decode_hello_payload,
    decode_resume_payload,
    encode_frame,
    encode_hello_payload,
    encode_resume_payload,
)

__all__ = ["NodeRuntime", "NodeReport", "dialer_of_pair"]


def dialer_of_pair(mapping: MappingSpec, a: str, b: str) -> str:
    """Which node of a pair dials: endpoints dial servers, ties by id."""
    ra, rb = mapping.node(a).role, mapping.node(b).role
    if ra != rb:
        return a if ra == "endpoint" else b
    return min(a, b)


@dataclass
class NodeReport:
    node_id: str
    clean: bool = True
    stalled_streams: list[str] = field(default_factory=list)
    kernel_failures: list[tuple[str, str]] = field(default_factory=list)
    adaptations: list[str] = field(default_factory=list)


class _Session:
    """One connection to a peer, multiplexing its FIFOs."""

    def __init__(self, channel, peer: str):
        self.channel = channel
        self.peer = peer
        self.parser = FrameParser()
        self.broken = False
        self.established = False  # handshake (HELLO/HELLO_ACK) completed

    def send(self, frame: TokenFrame, wire_id: int | None = None) -> None:
        self.channel.send_bytes(encode_frame(frame), wire_id)


class _OutLink:
    """Producer side of one cross-node FIFO."""

    def __init__(self, fifo_id, wire_id, peer, buffer, token_bytes, link, send):
        self.fifo_id = fifo_id
        self.wire_id = wire_id
        self.peer = peer
        self.buffer: TokenBuffer = buffer
        self.token_bytes = token_bytes
        self.link: LinkState = link
        self.send: SendState = send
        self.active = True  # failover standbys are built inactive
        self.discarding = False  # dead under replicate: drain and drop
        self.armed = False  # a RESUME told us where the peer wants us to start
        self.bye_sent = False


class _InLink:
    """Consumer side of one cross-node FIFO."""

    def __init__(self, fifo_id, wire_id, peer, buffer, tokens_per_frame, link, recv):
        self.fifo_id = fifo_id
        self.wire_id = wire_id
        self.peer = peer
        self.buffer: TokenBuffer = buffer
        self.tokens_per_frame = max(1, tokens_per_frame)
        self.link: LinkState = link
        self.recv: RecvState = recv
        self.pending: deque[TokenFrame] = deque()  # frames awaiting buffer space
        self.done = False  # peer sent BYE
        self.last_acked_seq = 0
        self.last_ack_at = 0.0

    def frame_of(self, seq: int) -> int:
        return seq // self.tokens_per_frame


class NodeRuntime:
    """Runs one node's subgraph and services its inter-node links."""

    def __init__(
        self,
        graph: GraphSpec,
        mapping: MappingSpec,
        node_id: str,
        registry: KernelRegistry,
        engine_config: EngineConfig,
        connector,
        collector: MetricsCollector | None = None,
        transport: TransportConfig | None = None,
    ):
        if not mapping.has_node(node_id):
            raise ValueError(f"node {node_id!r} does not appear in the mapping")
        self.graph = graph
        self.mapping = mapping
        self.node_id = node_id
        self.connector = connector
        self.transport = transport or TransportConfig()
        self.collector = collector or MetricsCollector()
        actor_ids = mapping.actors_on(node_id)
        if not actor_ids:
            raise ValueError(f"node {node_id!r} has no actors assigned")
        self.engine = Engine(
            graph,
            registry,
            engine_config,
            collector=self.collector,
            node_id=node_id,
            actor_ids=actor_ids,
        )
        self.graph_hash = graph.graph_hash()
        self.wire_ids = graph.wire_fifo_ids()
        self._by_wire = {v: k for k, v in self.wire_ids.items()}

        self.out_links: dict[str, _OutLink] = {}
        self.in_links: dict[str, _InLink] = {}
        self._peers: set[str] = set()
        here = set(actor_ids)
        for f in cross_fifos(graph, mapping):
            if f.src[0] in here:
                peer = mapping.node_of_actor(f.dst[0])
                link = LinkState(f.id, peer, self.transport, self._liveness_event)
                send = SendState(f.id, f.token_bytes, self.transport.resend_buffer_bytes)
                self.out_links[f.id] = _OutLink(
                    f.id, self.wire_ids[f.id], peer, self.engine.buffers[f.id],
                    f.token_bytes, link, send,
                )
                self._peers.add(peer)
            elif f.dst[0] in here:
                peer = mapping.node_of_actor(f.src[0])
                link = LinkState(f.id, peer, self.transport, self._liveness_event)
                recv = RecvState(f.id, f.token_bytes)
                rate = graph.port(f.src).rate
                self.in_links[f.id] = _InLink(
                    f.id, self.wire_ids[f.id], peer, self.engine.buffers[f.id],
                    rate, link, recv,
                )
                self._peers.add(peer)

        self._sessions: dict[str, _Session] = {}
        self._unidentified: list[_Session] = []
        self._peer_retry_at: dict[str, float] = {}
        self._apply_failover_standby()

        self.report = NodeReport(self.node_id)
        self._stop = threading.Event()
        self._killed = threading.Event()
        self._thread: threading.Thread | None = None
        self.errors: list[str] = []
        # Wake promptly on inbound traffic when the connector supports it.
        self._wake: threading.Event = getattr(connector, "wake", None) or threading.Event()

    # -- redundancy wiring ------------------------------------------------

    def _group_links(self) -> dict[str, list[_OutLink]]:
        """Outbound links grouped per producing boundary actor (one group
        per stream), ordered by the redundancy group's server order."""
        groups: dict[str, list[_OutLink]] = {}
        for ol in self.out_links.values():
            groups.setdefault(self.graph.fifo(ol.fifo_id).src[0], []).append(ol)
        order = {}
        for g in self.mapping.redundancy.groups:
            for i, server in enumerate(g):
                order[server] = i
        for links in groups.values():
            links.sort(key=lambda ol: order.get(ol.peer, len(order)))
        return groups

    def _apply_failover_standby(self) -> None:
        if self.mapping.redundancy.mode != FAILOVER:
            return
        for links in self._group_links().values():
            for i, ol in enumerate(links):
                ol.active = i == 0

    # -- liveness plumbing -------------------------------------------------

    def _liveness_event(self, fifo: str, old: str, new: str) -> None:
        self.collector.record_liveness(fifo, old, new)

    def _now(self) -> float:
        return time.monotonic()

    # -- session management --------------------------------------------------

    def _dials_to(self, peer: str) -> bool:
        return dialer_of_pair(self.mapping, self.node_id, peer) == self.node_id

    def _fifos_with(self, peer: str) -> list[int]:
        ids = [ol.wire_id for ol in self.out_links.values() if ol.peer == peer]
        ids += [il.wire_id for il in self.in_links.values() if il.peer == peer]
        return sorted(ids)

    def _ensure_sessions(self) -> None:
        now = self._now()
        for peer in sorted(self._peers):
            if not self._dials_to(peer):
                continue
            session = self._sessions.get(peer)
            if session is not None and not session.broken:
                continue
            if now < self._peer_retry_at.get(peer, 0.0):
                continue
            links = self._links_of_peer(peer)
            if links and all(l.status == DEAD for l in links):
                continue
            try:
                channel = self.connector.dial(peer)
            except (ChannelClosed, OSError):
                self._record_peer_attempt(peer, now, success=False)
                continue
            session = _Session(channel, peer)
            try:
                session.send(
                    TokenFrame(HELLO, 0, 0, 0,
                               encode_hello_payload(self.graph_hash, self.node_id,
                                                    self._fifos_with(peer))))
            except ChannelClosed:
                self._record_peer_attempt(peer, now, success=False)
                continue
            # Success is recorded only when HELLO_ACK confirms the peer;
            # a dial that answers but never completes the handshake still
            # burns reconnect budget.
            self._sessions[peer] = session
            self._send_resumes(session)

    def _links_of_peer(self, peer: str) -> list[LinkState]:
        out = [ol.link for ol in self.out_links.values() if ol.peer == peer]
        out += [il.link for il in self.in_links.values() if il.peer == peer]
        return out

    def _record_peer_attempt(self, peer: str, now: float, success: bool) -> None:
        links = self._links_of_peer(peer)
        for link in links:
            if link.status == DEGRADED:
                link.record_reconnect_attempt(now, success)
            elif link.status == ALIVE:
                if success:
                    link.mark_rx(now)
                else:
                    link.on_transport_error(now)  # dial refused: degrade, start budget
        if not success:
            attempts = [l.retry_count for l in links if l.status == DEGRADED]
            backoff = self.transport.backoff(max(attempts, default=0))
            self._peer_retry_at[peer] = now + backoff
            for link in links:
                if link.status == DEAD:
                    self._on_link_dead(link.fifo_id)
        else:
            self._peer_retry_at.pop(peer, None)

    def _send_resumes(self, session: _Session) -> None:
        for il in self.in_links.values():
            if il.peer == session.peer and not il.done:
                try:
                    session.send(
                        TokenFrame(RESUME, il.wire_id, il.recv.next_expected, 0,
                                   encode_resume_payload(il.recv.next_expected)),
                        il.wire_id,
                    )
                except ChannelClosed:
                    session.broken = True
                    return

    def _session_error(self, session: _Session) -> None:
        was_established = session.established
        session.broken = True
        now = self._now()
        for link in self._links_of_peer(session.peer):
            if link.status == ALIVE:
                link.on_transport_error(now)
        if not was_established and session.peer in self._peers:
            # handshake never completed: count it against the budget
            self._record_peer_attempt(session.peer, now, success=False)

    # -- rx path ---------------------------------------------------------------

    def _service_rx(self) -> bool:
        progressed = False
        # Newly accepted, not yet identified connections.
        while True:
            channel = self.connector.poll_accept()
            if channel is None:
                break
            self._unidentified.append(_Session(channel, peer="?"))
        for session in list(self._unidentified):
            if self._pump_session(session, identified=False):
                progressed = True
            if session.broken:
                self._unidentified.remove(session)
        for session in list(self._sessions.values()):
            if self._pump_session(session, identified=True):
                progressed = True
        # Frames parked while the ingress buffer was full.
        for il in self.in_links.values():
            if il.pending and self._flush_pending(il):
                progressed = True
        return progressed

    def _pump_session(self, session: _Session, identified: bool) -> bool:
        progressed = False
        while True:
            try:
                data = session.channel.recv_bytes(timeout=0)
            except ChannelClosed:
                self._session_error(session)
                return progressed
            if data is None:
                if session.channel.closed and identified:
                    self._session_error(session)
                break
            try:
                frames = session.parser.feed(data)
            except FrameError as exc:
                self.errors.append(f"{session.peer}: corrupt stream: {exc}")
                session.channel.close()
                self._session_error(session)
                return progressed
            for frame in frames:
                progressed = True
                self._dispatch(session, frame)
                if session.broken:
                    return progressed
        return progressed

    def _dispatch(self, session: _Session, frame: TokenFrame) -> None:
        now = self._now()
        if frame.frame_type == HELLO:
            self._on_hello(session, frame)
            return
        if frame.frame_type == HELLO_ACK:
            try:
                graph_hash, peer_id, _fifos = decode_hello_payload(frame.payload)
            except FrameError as exc:
                self.errors.append(f"bad HELLO_ACK: {exc}")
                session.broken = True
                return
            if graph_hash != self.graph_hash:
                self.errors.append(
                    f"graph hash mismatch with {peer_id}: "
                    f"{graph_hash:#018x} != {self.graph_hash:#018x}")
                session.broken = True
                self._record_peer_attempt(session.peer, now, success=False)
                return
            session.established = True
            self._record_peer_attempt(session.peer, now, success=True)
            return
        fifo_id = self._by_wire.get(frame.fifo_id)
        if fifo_id is None:
            self.errors.append(f"{session.peer}: frame for unknown fifo {frame.fifo_id}")
            return
        if frame.frame_type == DATA:
            il = self.in_links.get(fifo_id)
            if il is None:
                return
            il.link.mark_rx(now)
            if il.link.status == DEGRADED:
                il.link.record_reconnect_attempt(now, success=True)
            il.pending.append(frame)
            self._flush_pending(il)
        elif frame.frame_type == HEARTBEAT:
            ol = self.out_links.get(fifo_id)
            if ol is not None:
                ol.link.mark_rx(now)
                ol.send.ack(frame.sequence)
                if ol.link.status == DEGRADED:
                    ol.link.record_reconnect_attempt(now, success=True)
            il = self.in_links.get(fifo_id)
            if il is not None:
                il.link.mark_rx(now)
                self._ack(il)  # answer keepalives so idle senders see liveness
        elif frame.frame_type == RESUME:
            ol = self.out_links.get(fifo_id)
            if ol is None:
                return
            ol.link.mark_rx(now)
            try:
                resume_from = decode_resume_payload(frame.payload)
            except FrameError:
                return
            ol.send.ack(resume_from)
            ol.armed = True
            if ol.active and not ol.discarding:
                self._retransmit(ol, resume_from)
        elif frame.frame_type == BYE:
            il = self.in_links.get(fifo_id)
            if il is not None:
                il.done = True
                il.link.mark_rx(now)
                self._ack(il)  # final horizon so the peer can flush and exit

    def _on_hello(self, session: _Session, frame: TokenFrame) -> None:
        try:
            graph_hash, peer_id, _fifos = decode_hello_payload(frame.payload)
        except FrameError as exc:
            self.errors.append(f"bad HELLO: {exc}")
            session.broken = True
            return
        if graph_hash != self.graph_hash:
            self.errors.append(
                f"graph hash mismatch with {peer_id}: "
                f"{graph_hash:#018x} != {self.graph_hash:#018x}")
            session.channel.close()
            session.broken = True
            return
        session.peer = peer_id
        session.established = True
        if session in self._unidentified:
            self._unidentified.remove(session)
        old = self._sessions.get(peer_id)
        if old is not None and not old.broken:
            old.channel.close()
            old.broken = True
        self._sessions[peer_id] = session
        now = self._now()
        for link in self._links_of_peer(peer_id):
            if link.status == DEGRADED:
                link.record_reconnect_attempt(now, success=True)
            else:
                link.mark_rx(now)
        try:
            session.send(
                TokenFrame(HELLO_ACK, 0, 0, 0,
                           encode_hello_payload(self.graph_hash, self.node_id,
                                                self._fifos_with(peer_id))))
            self._send_resumes(session)
        except ChannelClosed:
            self._session_error(session)

    def _flush_pending(self, il: _InLink) -> bool:
        progressed = False
        while il.pending:
            frame = il.pending[0]
            free = il.buffer.free
            if frame.token_count > free:
                if free == 0 or frame.token_count <= il.buffer.capacity:
                    break  # backpressure: leave unacked until the engine drains
                # Oversized frame (misbehaving sender): take what fits now.
                head = frame.payload[: free * il.buffer.token_bytes]
                tail = frame.payload[free * il.buffer.token_bytes:]
                il.pending[0] = TokenFrame(frame.frame_type, frame.fifo_id,
                                           frame.sequence + free,
                                           frame.token_count - free, tail)
                frame = TokenFrame(frame.frame_type, frame.fifo_id, frame.sequence,
                                   free, head)
            else:
                il.pending.popleft()
            payloads = [
                frame.payload[i * il.buffer.token_bytes:(i + 1) * il.buffer.token_bytes]
                for i in range(frame.token_count)
            ]
            accepted = il.recv.accept(frame.sequence, payloads)
            if accepted:
                il.buffer.push(
                    [Token(p, il.frame_of(seq)) for seq, p in accepted]
                )
                progressed = True
            self._maybe_ack(il)
            if il.recv.saw_gap:
                self._request_resume(il)
        return progressed

    def _maybe_ack(self, il: _InLink) -> None:
        """Cumulative acks are batched: senders only need them to trim the
        resend buffer and to suppress retransmit timeouts."""
        now = self._now()
        behind = il.recv.next_expected - il.last_acked_seq
        if behind >= self.transport.ack_every_tokens or (
            behind > 0 and now - il.last_ack_at > self.transport.ack_interval_s
        ):
            self._ack(il)

    def _ack(self, il: _InLink) -> None:
        session = self._sessions.get(il.peer)
        if session is None or session.broken:
            return
        try:
            session.send(
                TokenFrame(HEARTBEAT, il.wire_id, il.recv.next_expected, 0), il.wire_id)
            il.last_acked_seq = il.recv.next_expected
            il.last_ack_at = self._now()
        except ChannelClosed:
            self._session_error(session)

    def _request_resume(self, il: _InLink) -> None:
        session = self._sessions.get(il.peer)
        if session is None or session.broken:
            return
        try:
            session.send(
                TokenFrame(RESUME, il.wire_id, il.recv.next_expected, 0,
                           encode_resume_payload(il.recv.next_expected)), il.wire_id)
        except ChannelClosed:
            self._session_error(session)

    # -- tx path -----------------------------------------------------------------

    def _service_tx(self) -> bool:
        progressed = False
        for ol in self.out_links.values():
            if ol.discarding or (ol.link.status == DEAD and not ol.active):
                if ol.buffer.occupancy:
                    ol.buffer.pop(ol.buffer.occupancy)
                    progressed = True
                continue
            if not ol.active:
                # Failover standby: absorb tokens into the resend buffer so a
                # later activation can replay the full history.
                while ol.buffer.occupancy and ol.send.room_for(1):
                    tok = ol.buffer.pop(1)[0]
                    ol.send.append([tok.payload], self._now())
                    progressed = True
                continue
            session = self._sessions.get(ol.peer)
            while (
                ol.buffer.occupancy
                and ol.send.room_for(1)
                and ol.send.unacked_count < self.transport.flow_window_tokens
            ):
                batch = min(
                    ol.buffer.occupancy,
                    self.transport.max_tokens_per_frame,
                    ol.buffer.capacity,  # a frame must fit the consumer FIFO
                    self.transport.flow_window_tokens - ol.send.unacked_count,
                )
                while batch and not ol.send.room_for(batch):
                    batch -= 1
                if batch <= 0:
                    break
                tokens = ol.buffer.pop(batch)
                first = ol.send.append([t.payload for t in tokens], self._now())
                self._transmit(ol, session, first, [t.payload for t in tokens])
                progressed = True
        return progressed

    def _transmit(self, ol: _OutLink, session: _Session | None, seq: int,
                  payloads: list[bytes]) -> None:
        if session is None or session.broken or not ol.armed:
            return  # tokens stay in the resend buffer for later replay
        frame = TokenFrame(DATA, ol.wire_id, seq, len(payloads), b"".join(payloads))
        try:
            session.send(frame, ol.wire_id)
            ol.link.last_tx = self._now()
        except ChannelClosed:
            self._session_error(session)

    def _retransmit(self, ol: _OutLink, from_seq: int) -> None:
        session = self._sessions.get(ol.peer)
        if session is None or session.broken:
            return
        pending = ol.send.pending_from(from_seq)
        step = min(self.transport.max_tokens_per_frame, ol.buffer.capacity)
        for i in range(0, len(pending), step):
            chunk = pending[i:i + step]
            frame = TokenFrame(DATA, ol.wire_id, chunk[0][0], len(chunk),
                               b"".join(p for _, p in chunk))
            try:
                session.send(frame, ol.wire_id)
            except ChannelClosed:
                self._session_error(session)
                return
        ol.send.touch_all(self._now())

    # -- liveness / redundancy ------------------------------------------------

    def _liveness_tick(self) -> None:
        now = self._now()
        for ol in self.out_links.values():
            if not ol.active or ol.discarding or ol.link.status == DEAD:
                continue
            starved = ol.send.stale(now, self.transport.rto_s)
            status = ol.link.poll(now, ack_starved=starved)
            if status == ALIVE and starved:
                pass  # poll() already degraded on starvation
            if ol.link.status == DEGRADED and starved:
                self._retransmit(ol, max(ol.send.acked, 0))
            if status == ALIVE and ol.armed:
                session = self._sessions.get(ol.peer)
                if (
                    session is not None
                    and not session.broken
                    and now - ol.link.last_tx > self.transport.heartbeat_interval_s
                ):
                    try:
                        session.send(
                            TokenFrame(HEARTBEAT, ol.wire_id, ol.send.next_seq, 0),
                            ol.wire_id)
                        ol.link.last_tx = now
                    except ChannelClosed:
                        self._session_error(session)
        for il in self.in_links.values():
            if il.done or il.link.status == DEAD:
                continue
            il.link.poll(now)
            if il.recv.next_expected > il.last_acked_seq and \
                    now - il.last_ack_at > self.transport.ack_interval_s:
                self._ack(il)
        self._ensure_sessions()
        # Passive side: a degraded link with no dial responsibility burns its
        # reconnect budget waiting for the peer to come back.
        for peer in sorted(self._peers):
            if self._dials_to(peer):
                continue
            links = [l for l in self._links_of_peer(peer) if l.status == DEGRADED]
            for link in links:
                if link.reconnect_due(now):
                    link.next_retry_at = now + self.transport.backoff(link.retry_count)
                    link.record_reconnect_attempt(now, success=False)
        for ol in self.out_links.values():
            if ol.link.status == DEAD and not ol.discarding:
                self._on_link_dead(ol.fifo_id)
        for il in self.in_links.values():
            if il.link.status == DEAD and il.fifo_id not in self.engine.dead_fifos:
                self._on_link_dead(il.fifo_id)

    def _on_link_dead(self, fifo_id: str) -> str:
        """Adapt to a permanently dead link per the redundancy policy."""
        ol = self.out_links.get(fifo_id)
        if ol is not None:
            if ol.discarding:
                return "already adapted"
            mode = self.mapping.redundancy.mode
            if mode == FAILOVER and ol.active:
                ol.active = False
                ol.discarding = True
                report = self._activate_next(ol)
            else:
                ol.discarding = True
                report = f"{fifo_id}: dead {ol.peer} link dropped ({mode})"
            group = self._stream_group_of(ol)
            if group and all(l.link.status == DEAD or l.discarding for l in group):
                stream = self._stream_of_out(ol)
                if all(l.link.status == DEAD for l in group):
                    if stream not in self.report.stalled_streams:
                        self.report.stalled_streams.append(stream)
                    report += f"; stream {stream} stalled: group exhausted"
            self.report.adaptations.append(report)
            return report
        il = self.in_links.get(fifo_id)
        if il is not None:
            self.engine.mark_dead_input(fifo_id)
            report = f"{fifo_id}: dead inbound link, downstream actors disabled"
            self.report.adaptations.append(report)
            return report
        return "unknown link"

    def _stream_group_of(self, ol: _OutLink) -> list[_OutLink]:
        for links in self._group_links().values():
            if ol in links:
                return links
        return [ol]

    def _stream_of_out(self, ol: _OutLink) -> str:
        src_actor = self.graph.fifo(ol.fifo_id).src[0]
        return self.engine.actor_streams.get(src_actor) or src_actor

    def _activate_next(self, dead: _OutLink) -> str:
        group = self._stream_group_of(dead)
        for candidate in group:
            if candidate.link.status != DEAD and not candidate.discarding:
                candidate.active = True
                if candidate.armed:
                    self._retransmit(candidate, candidate.send.acked)
                return (
                    f"{dead.fifo_id}: failover {dead.peer} -> {candidate.peer}, "
                    f"{candidate.send.unacked_count} token(s) replayed"
                )
        return f"{dead.fifo_id}: failover exhausted"

    # -- main loop -------------------------------------------------------------

    def _sources_exhausted(self) -> bool:
        budget = self.engine.config.frame_budget
        for aid in self.engine.actor_ids:
            if self.engine.is_source(aid):
                if budget is None:
                    return False
                if self.engine.states[aid].emitted_frames < budget and \
                        self.engine.states[aid].status not in ("failed",):
                    return False
        return True

    def _tx_flushed(self) -> bool:
        for ol in self.out_links.values():
            if ol.discarding:
                continue
            if not ol.active:
                continue
            if ol.buffer.occupancy or ol.send.unacked_count:
                return False
        return True

    def _inbound_finished(self) -> bool:
        return all(
            il.done or il.link.status == DEAD for il in self.in_links.values()
        )

    def _work_done(self) -> bool:
        return (
            self._sources_exhausted()
            and self.engine.quiescent
            and self._tx_flushed()
            and self._inbound_finished()
        )

    def _send_byes(self) -> None:
        for ol in self.out_links.values():
            if ol.bye_sent or ol.link.status == DEAD:
                continue
            session = self._sessions.get(ol.peer)
            if session is None or session.broken:
                continue
            try:
                session.send(TokenFrame(BYE, ol.wire_id, ol.send.next_seq, 0), ol.wire_id)
                ol.bye_sent = True
            except ChannelClosed:
                self._session_error(session)

    def run(self) -> NodeReport:
        """Service the node until its work completes or it is stopped/killed."""
        start = self._now()
        for il in self.in_links.values():
            il.link.mark_rx(start)  # arm the silence clock for absent peers
        self._ensure_sessions()
        idle_spins = 0
        while not self._killed.is_set():
            if self._stop.is_set():
                break
            progressed = False
            progressed |= self._service_rx()
            fired = self.engine.step_round()
            progressed |= fired > 0
            progressed |= self._service_tx()
            self._liveness_tick()
            if self._work_done():
                self._send_byes()
                # Give final acks a beat to drain to peers, then leave.
                self._service_rx()
                if self._tx_flushed():
                    break
            if progressed:
                idle_spins = 0
            else:
                idle_spins += 1
                self._wake.wait(0.002)
                self._wake.clear()
        self.report.kernel_failures = list(self.engine.failures)
        self.report.clean = not self.report.stalled_streams and not self.engine.failures
        for stream in sorted(self.engine.dead_streams):
            if stream not in self.report.stalled_streams:
                self.report.stalled_streams.append(stream)
        return self.report

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, name=f"node-{self.node_id}", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._wake.set()

    def kill(self) -> None:
        """Abrupt power-down: no BYE, no draining."""
        self._killed.set()
        self._wake.set()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()
