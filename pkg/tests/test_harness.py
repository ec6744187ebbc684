import pytest

from edgeflow.harness import (
    FaultScript,
    FaultSpecError,
    bench_scaling,
    parse_fault_spec,
    run_virtual,
)
from edgeflow.harness.faults import DROP_LINK, KILL, RESTORE_LINK, FaultEvent
from edgeflow.link import TransportConfig
from edgeflow.metrics import RunMetrics
from edgeflow.templates import vehicle_endpoint_template, vehicle_server_template

FAST = TransportConfig(
    heartbeat_interval_s=0.05, silence_degraded_s=0.15, rto_s=0.05,
    backoff_base_s=0.02, backoff_cap_s=0.1,
)


# -- fault script grammar ------------------------------------------------------


def test_parse_kill_spec():
    assert parse_fault_spec("kill:srv2@frame=50") == [FaultEvent(KILL, "srv2", 50)]


def test_parse_drop_restore_spec():
    events = parse_fault_spec("drop-link:x_ep1_srv1@frame=20,restore=40")
    assert events == [
        FaultEvent(DROP_LINK, "x_ep1_srv1", 20),
        FaultEvent(RESTORE_LINK, "x_ep1_srv1", 40),
    ]


@pytest.mark.parametrize("bad", [
    "kill:srv2",
    "kill:srv2@frame=0",
    "drop-link:f@frame=9,restore=9",
    "drop-link:f@frame=9",
    "explode:f@frame=1",
])
def test_bad_fault_specs_rejected(bad):
    with pytest.raises(FaultSpecError):
        parse_fault_spec(bad)


def test_restore_without_drop_rejected():
    with pytest.raises(FaultSpecError, match="restore without a prior drop"):
        FaultScript([FaultEvent(RESTORE_LINK, "f", 5)])


def test_event_after_kill_rejected():
    with pytest.raises(FaultSpecError, match="terminal"):
        FaultScript([FaultEvent(KILL, "n", 5), FaultEvent(KILL, "n", 9)])


def test_unknown_fault_targets_rejected(fast_endpoint, fast_server):
    with pytest.raises(FaultSpecError, match="not a node"):
        run_virtual(1, 1, fast_endpoint, fast_server, frames=5,
                    fault_script=FaultScript([FaultEvent(KILL, "nope", 1)]))
    with pytest.raises(FaultSpecError, match="not a fifo"):
        run_virtual(1, 1, fast_endpoint, fast_server, frames=5,
                    fault_script=FaultScript([FaultEvent(DROP_LINK, "nope", 1)]))


# -- virtual runs ---------------------------------------------------------------


def test_k11_no_faults_zero_stalled(fast_endpoint, fast_server):
    result = run_virtual(1, 1, fast_endpoint, fast_server, frames=100, transport=FAST)
    summary, = result.metrics.summaries()
    assert summary.completed == 100 and summary.stalled == 0


def test_metrics_csv_roundtrip_and_summary_recompute(fast_endpoint, fast_server):
    result = run_virtual(1, 2, fast_endpoint, fast_server, frames=15, transport=FAST)
    text = result.metrics.to_csv()
    assert text.splitlines()[0] == "frame,stream,node,actor,event,t_us"
    reparsed = RunMetrics.from_csv(text)
    orig = {s.stream: (s.completed, s.stalled, s.mean_us, s.p95_us)
            for s in result.metrics.summaries()}
    again = {s.stream: (s.completed, s.stalled, s.mean_us, s.p95_us)
             for s in reparsed.summaries()}
    assert orig == again


def test_events_restricted_to_schema(fast_endpoint, fast_server):
    result = run_virtual(1, 1, fast_endpoint, fast_server, frames=10, transport=FAST)
    assert {e.event for e in result.metrics.events} <= {
        "submit", "fire_start", "fire_end", "complete"
    }


def test_shared_server_variant_runs(fast_endpoint, fast_server):
    result = run_virtual(2, 3, fast_endpoint, fast_server, frames=20,
                         shared_server_actor=True, transport=FAST)
    for i in (1, 2, 3):
        assert result.completed(f"ep{i}") == 20


def test_engine_config_text_roundtrip():
    from edgeflow.engine import EngineConfig

    config = EngineConfig.from_text("mode: concurrent\nseed: 9\nframes: 42\ncost_mode: busywait\n")
    assert config.mode == "concurrent"
    assert config.seed == 9
    assert config.frame_budget == 42
    assert config.cost_mode == "busywait"
    with pytest.raises(Exception, match="unknown key"):
        EngineConfig.from_text("wat: 1\n")


# -- scaling bench -----------------------------------------------------------------


def test_bench_smoke_and_consistency():
    ep = vehicle_endpoint_template(100.0)
    srv = vehicle_server_template(400.0)
    table = bench_scaling([1, 2], [1, 2], ep, srv, frames=40)
    assert set(table.cells) == {(1, 1), (1, 2), (2, 1), (2, 2)}
    for cell in table.cells.values():
        assert cell.stalled == 0
        assert cell.endpoint_us > 0 and cell.server_us > 0
    csv_lines = table.to_csv().strip().splitlines()
    assert csv_lines[0] == "side,servers,n1,n2"
    assert [l.split(",")[0] for l in csv_lines[1:]] == [
        "endpoint", "endpoint", "server", "server"
    ]


def test_bench_rejects_empty_ranges(fast_endpoint, fast_server):
    with pytest.raises(ValueError):
        bench_scaling([], [1], fast_endpoint, fast_server, frames=5)
