"""Integration tests for the node runtime and redundancy behavior, all on
the in-memory virtual network. Fault-window timings use a fast transport
config so the suite stays quick; defaults are exercised in acceptance."""

import struct

import pytest

from edgeflow.bipartite import build_complete_bipartite
from edgeflow.engine import EngineConfig
from edgeflow.fabric import NodeRuntime
from edgeflow.harness import FaultScript, parse_fault_spec, run_mapped, run_virtual
from edgeflow.harness.virtual import VirtualConnector
from edgeflow.channels import VirtualNetwork
from edgeflow.kernels import builtin_registry
from edgeflow.link import ALIVE, DEAD, DEGRADED, TransportConfig
from edgeflow.templates import vehicle_endpoint_template, vehicle_server_template

FAST = TransportConfig(
    heartbeat_interval_s=0.05,
    silence_degraded_s=0.15,
    rto_s=0.05,
    backoff_base_s=0.02,
    backoff_cap_s=0.1,
)


def _sink_frames(result, node):
    """Frames delivered to a node's sinks, in arrival order per port."""
    out = {}
    for e in result.metrics.ordered_events():
        if e.event == "complete" and e.node == node:
            out.setdefault(e.stream, []).append(e.frame)
    return out


def test_k11_clean_run_delivers_every_frame(fast_endpoint, fast_server):
    result = run_virtual(1, 1, fast_endpoint, fast_server, frames=40, transport=FAST)
    assert result.completed("ep1") == 40
    assert not result.deadlocked
    assert all(r.clean for r in result.reports.values())
    summary, = result.metrics.summaries()
    assert summary.stalled == 0


def test_graph_hash_mismatch_refuses_link(fast_endpoint, fast_server):
    g1, m1 = build_complete_bipartite(1, 1, fast_endpoint, fast_server)
    g2, _ = build_complete_bipartite(1, 1, vehicle_endpoint_template(123.0), fast_server)
    network = VirtualNetwork()
    reg = builtin_registry()
    srv = NodeRuntime(g1, m1, "srv1", reg, EngineConfig(frame_budget=5),
                      VirtualConnector(network, "srv1"), transport=FAST)
    ep = NodeRuntime(g2, m1, "ep1", reg, EngineConfig(frame_budget=5),
                     VirtualConnector(network, "ep1"), transport=FAST)
    srv.start()
    ep.start()
    ep.join(timeout=10)
    srv.stop()
    srv.join(timeout=5)
    assert any("graph hash mismatch" in err for err in srv.errors + ep.errors)
    assert ep.collector.completed_frames("ep1") == set()


def test_transient_break_recovery_gap_free(fast_endpoint, fast_server):
    result = run_virtual(
        1, 1, fast_endpoint, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("drop-link:x_ep1_srv1@frame=20,restore=40")),
        transport=FAST,
    )
    assert result.completed("ep1") == 60
    frames = _sink_frames(result, "srv1")["ep1"]
    assert frames == list(range(60))  # gap-free, duplicate-free, in order


def test_drop_window_trace_alive_degraded_alive(fast_server):
    # slow frames so the drop window spans the ack-starvation timeout
    ep = vehicle_endpoint_template(3000.0)
    result = run_virtual(
        1, 1, ep, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("drop-link:x_ep1_srv1@frame=20,restore=40")),
        transport=FAST,
    )
    assert result.completed("ep1") == 60
    transitions = [(e.old, e.new) for e in result.metrics.liveness if e.fifo == "x_ep1_srv1"]
    assert (ALIVE, DEGRADED) in transitions
    assert (DEGRADED, ALIVE) in transitions
    assert (DEGRADED, DEAD) not in transitions


def test_k24_replicate_survives_server_kill(fast_endpoint, fast_server):
    result = run_virtual(
        2, 4, fast_endpoint, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("kill:srv2@frame=20")),
        transport=FAST,
    )
    for i in range(1, 5):
        assert result.completed(f"ep{i}") == 60
    assert not result.deadlocked
    dead = [e for e in result.metrics.liveness if e.new == DEAD]
    assert {e.fifo for e in dead} == {f"x_ep{i}_srv2" for i in range(1, 5)}


def test_k12_endpoint_kill_leaves_other_stream_unaffected(fast_endpoint, fast_server):
    result = run_virtual(
        1, 2, fast_endpoint, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("kill:ep1@frame=20")),
        transport=FAST,
    )
    assert result.completed("ep2") == 60
    assert result.completed("ep1") <= 20
    assert not result.deadlocked
    srv_report = result.reports["srv1"]
    assert any("downstream actors disabled" in a for a in srv_report.adaptations)


def test_k21_failover_server_kill_replays_backlog(fast_endpoint, fast_server):
    result = run_virtual(
        2, 1, fast_endpoint, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("kill:srv1@frame=20")),
        redundancy="failover",
        transport=FAST,
    )
    assert result.completed("ep1") == 60
    ep_report = result.reports["ep1"]
    assert any("failover srv1 -> srv2" in a for a in ep_report.adaptations)
    # the backup server's sink saw a gap-free stream from frame 0
    frames = _sink_frames(result, "srv2")["ep1"]
    assert frames == sorted(frames)
    assert frames[0] == 0 and frames[-1] == 59


def test_k11_kill_only_server_stalls_but_stays_alive(fast_endpoint, fast_server):
    result = run_virtual(
        1, 1, fast_endpoint, fast_server, frames=60,
        fault_script=FaultScript(parse_fault_spec("kill:srv1@frame=10")),
        transport=FAST, watchdog_s=30,
    )
    ep_report = result.reports["ep1"]
    assert "ep1" in ep_report.stalled_streams
    assert any("group exhausted" in a for a in ep_report.adaptations)
    assert result.completed("ep1") <= 60
    assert not result.watchdog_fired  # endpoint exits cleanly, no hang


def test_backpressure_no_token_dropped_with_tiny_window(fast_endpoint, fast_server):
    tight = TransportConfig(
        heartbeat_interval_s=0.05, silence_degraded_s=0.3, rto_s=0.1,
        backoff_base_s=0.02, backoff_cap_s=0.1,
        flow_window_tokens=2, max_tokens_per_frame=2,
    )
    result = run_virtual(1, 1, fast_endpoint, fast_server, frames=50, transport=tight)
    assert result.completed("ep1") == 50
    frames = _sink_frames(result, "srv1")["ep1"]
    assert frames == list(range(50))


def test_virtual_run_metrics_are_merge_ordered(fast_endpoint, fast_server):
    result = run_virtual(1, 1, fast_endpoint, fast_server, frames=10, transport=FAST)
    ordered = result.metrics.ordered_events()
    assert all(a.t_us <= b.t_us for a, b in zip(ordered, ordered[1:]))
    nodes = {e.node for e in ordered}
    assert nodes == {"ep1", "srv1"}
