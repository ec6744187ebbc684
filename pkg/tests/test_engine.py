import struct

import pytest

from edgeflow.buffers import Token
from edgeflow.engine import (
    DEAD_INPUT_DISABLED,
    Engine,
    EngineConfig,
    EngineError,
    PayloadSizeError,
)
from edgeflow.kernels import KernelError, KernelRegistry, builtin_registry
from edgeflow.model import ActorSpec, FifoSpec, GraphSpec, PortSpec
from edgeflow.templates import chain_graph, fig2_dpg


def _wrap_chain(n, token_bytes=4, capacity=8, kernel="identity"):
    """source -> n-stage chain -> sink, ready to execute."""
    chain = chain_graph(n, token_bytes=token_bytes, kernel=kernel, capacity=capacity)
    actors = [
        ActorSpec("src", "source", (PortSpec("out", "out", 1, token_bytes),),
                  params={"stream": "s"}),
        *chain.actors,
        ActorSpec("snk", "sink", (PortSpec("inp", "in", 1, token_bytes),)),
    ]
    fifos = [
        FifoSpec("f_src", ("src", "out"), ("c1", "in"), capacity),
        *chain.fifos,
        FifoSpec("f_snk", (f"c{n}", "out"), ("snk", "inp"), capacity),
    ]
    return GraphSpec(f"wrapped{n}", actors, fifos)


# -- kernel registry -------------------------------------------------------


def test_register_synthetic_kernel_resolvable():
    reg = KernelRegistry()
    reg.register("synthetic_cost", lambda ctx: None)
    assert "synthetic_cost" in reg


def test_register_matmul_toy_resolvable_and_correct():
    reg = builtin_registry()
    assert "matmul_toy" in reg
    g = _wrap_chain(1, token_bytes=16, kernel="matmul_toy")
    eng = Engine(g, reg)
    eng.run_until(1)
    a = [1.0, 2.0, 3.0, 4.0]
    # source emits frame 0 stamped into 16 bytes: [0, 0, 0, 0] floats are zeros
    (frame, payload), = eng.sink_log[("snk", "inp")]
    assert struct.unpack(">4f", payload) == (0.0, 0.0, 0.0, 0.0)


def test_duplicate_kernel_name_rejected():
    reg = KernelRegistry()
    reg.register("k", lambda ctx: None)
    with pytest.raises(KernelError, match="already registered"):
        reg.register("k", lambda ctx: None)


def test_unregistered_kernel_fails_engine_construction():
    g = _wrap_chain(1, kernel="no_such_kernel")
    with pytest.raises(EngineError, match="not registered"):
        Engine(g, builtin_registry())


# -- enablement -------------------------------------------------------------


def test_enabled_with_one_token_each(fig2_engine):
    eng = fig2_engine
    eng.config.frame_budget = 1
    assert eng.enabled("x")
    assert not eng.enabled("a")  # no control token yet
    eng.fire("x")
    assert eng.enabled("a")
    assert eng.enabled("b")


def test_not_enabled_when_rate_exceeds_occupancy():
    g = _wrap_chain(1)
    # consumer needs 2 tokens per firing
    actors = [a if a.id != "snk" else ActorSpec("snk", "sink", (PortSpec("inp", "in", 2, 4),))
              for a in g.actors]
    g2 = GraphSpec("rate2", actors, g.fifos)
    eng = Engine(g2, builtin_registry())
    eng.config.frame_budget = 1
    eng.fire("src")
    eng.fire("c1")
    assert eng.buffers["f_snk"].occupancy == 1
    assert not eng.enabled("snk")


def test_noop_enabled_with_zero_rates_and_pending_control(fig2_engine):
    eng = fig2_engine
    eng.config.frame_budget = 2
    eng.fire("x")  # emits setting 1 (pattern starts at 1)
    eng.fire("a")
    eng.fire("b")
    eng.fire("y")
    eng.fire("x")  # emits setting 0: a's rates drop to 0 when it peeks
    assert eng.enabled("a")  # no-op firing allowed with just the control token
    record = eng.fire("a")
    assert record.noop
    assert record.consumed == {}
    assert eng.buffers["cxa"].occupancy == 0  # control token consumed


def test_output_space_required_for_enablement():
    g = _wrap_chain(1, capacity=1)
    eng = Engine(g, builtin_registry())
    eng.config.frame_budget = 10
    eng.fire("src")
    assert not eng.enabled("src")  # f_src is full at capacity 1
    eng.fire("c1")
    assert eng.enabled("src")


# -- firing ------------------------------------------------------------------


def test_static_fire_shifts_occupancies():
    g = _wrap_chain(1, token_bytes=4096)
    eng = Engine(g, builtin_registry())
    eng.config.frame_budget = 1
    eng.fire("src")
    assert eng.buffers["f_src"].occupancy == 1
    record = eng.fire("c1")
    assert record.consumed == {"in": 1}
    assert record.produced == {"out": 1}
    assert eng.buffers["f_src"].occupancy == 0
    assert eng.buffers["f_snk"].occupancy == 1
    tok = eng.buffers["f_snk"].peek()
    assert len(tok.payload) == 4096


def test_fig2_control_output_sets_downstream_rates(fig2_engine):
    eng = fig2_engine
    eng.config.frame_budget = 1
    eng.fire("x")  # pattern (1, 0): first firing emits setting 1
    # control tokens pending; consumers apply on their next enablement check
    assert eng.effective_rates("a")["pa1"] == 1
    assert eng.effective_rates("y")["py1"] == 1
    eng.fire("a")
    assert eng.rates[("a", "pa1")] == 1


def test_fig2_setting_zero_noop_consumes_only_control(fig2_engine):
    eng = fig2_engine
    eng.config.frame_budget = 2
    eng.fire("x")
    eng.fire("x")  # second firing emits setting 0
    eng.fire("a")  # consumes setting-1 token, processes data
    record = eng.fire("a")  # setting-0: no-op
    assert record.noop and record.produced == {}
    assert eng.states["a"].fire_count == 2


def test_kernel_failure_marks_actor_failed():
    reg = builtin_registry()
    g = _wrap_chain(1, kernel="failing")
    eng = Engine(g, reg)
    eng.config.frame_budget = 1
    eng.fire("src")
    record = eng.fire("c1")
    assert record.failed
    assert eng.states["c1"].status == "failed"
    assert eng.failures and eng.failures[0][0] == "c1"
    assert not eng.enabled("c1")


def test_payload_size_mismatch_raises():
    reg = builtin_registry()
    reg.register("wrong_size", lambda ctx: {"out": [b"xx"]})
    g = _wrap_chain(1, kernel="wrong_size")
    eng = Engine(g, reg)
    eng.config.frame_budget = 1
    eng.fire("src")
    with pytest.raises(PayloadSizeError):
        eng.fire("c1")


# -- scheduling ---------------------------------------------------------------


def test_deterministic_step_fires_topological_first():
    g = _wrap_chain(3)
    eng = Engine(g, builtin_registry())
    eng.config.frame_budget = 1
    report = eng.step()
    assert report.fired == ["src"]


def test_quiescent_when_sources_exhausted():
    g = _wrap_chain(2)
    eng = Engine(g, builtin_registry())
    eng.run_until(1)
    assert eng.step().quiescent


def test_concurrent_step_fires_independent_actors_together():
    # diamond: src -> (left, right) -> join
    actors = [
        ActorSpec("src", "source",
                  (PortSpec("o1", "out", 1, 4), PortSpec("o2", "out", 1, 4)),
                  params={"stream": "s"}),
        ActorSpec("left", "scale", (PortSpec("i", "in", 1, 4), PortSpec("o", "out", 1, 4)),
                  params={"factor": 2}),
        ActorSpec("right", "add_const", (PortSpec("i", "in", 1, 4), PortSpec("o", "out", 1, 4)),
                  params={"const": 1}),
        ActorSpec("join", "sink", (PortSpec("i1", "in", 1, 4), PortSpec("i2", "in", 1, 4))),
    ]
    fifos = [
        FifoSpec("fl", ("src", "o1"), ("left", "i")),
        FifoSpec("fr", ("src", "o2"), ("right", "i")),
        FifoSpec("gl", ("left", "o"), ("join", "i1")),
        FifoSpec("gr", ("right", "o"), ("join", "i2")),
    ]
    g = GraphSpec("diamond", actors, fifos)
    eng = Engine(g, builtin_registry(), EngineConfig(mode="concurrent"))
    eng.config.frame_budget = 1
    eng.step()  # src
    report = eng.step()
    assert sorted(report.fired) == ["left", "right"]


# -- run_until ----------------------------------------------------------------


def test_identity_chain_completes_in_order():
    g = _wrap_chain(3)
    eng = Engine(g, builtin_registry())
    collector, diagnosis = eng.run_until(10)
    assert diagnosis is None
    metrics = collector.finish()
    completions = metrics.completions()["s"]
    assert sorted(completions) == list(range(10))
    order = [f for f, _ in sorted(completions.items(), key=lambda kv: kv[1])]
    assert order == list(range(10))


def test_fig2_alternating_pattern_oracle(fig2_engine):
    """Hand simulation: settings 1,0,1,0... over 8 frames.

    The b-path is static so y consumes/completes every frame; the a-path
    carries only even frames, doubled by the scale kernel; a fires every
    epoch (no-ops on odd frames) consuming one control token each.
    """
    eng = fig2_engine
    _, diagnosis = eng.run_until(8)
    assert diagnosis is None
    assert eng.states["x"].fire_count == 8
    assert eng.states["a"].fire_count == 8
    assert eng.states["b"].fire_count == 8
    assert eng.states["y"].fire_count == 8
    a_path = eng.sink_log[("y", "py1")]
    b_path = eng.sink_log[("y", "py2")]
    assert [f for f, _ in a_path] == [0, 2, 4, 6]
    assert [struct.unpack(">I", p)[0] for _, p in a_path] == [0, 4, 8, 12]
    assert [f for f, _ in b_path] == list(range(8))
    assert [struct.unpack(">I", p)[0] for _, p in b_path] == [f + 1 for f in range(8)]
    assert len(eng.completed["x"]) == 8


def test_zero_frames_runs_nothing(fig2_engine):
    collector, diagnosis = fig2_engine.run_until(0)
    assert diagnosis is None
    assert collector.finish().events == []


# -- deadlock -----------------------------------------------------------------


def test_structural_deadlock_names_consumer_and_fifo():
    g = _wrap_chain(1, capacity=1)
    actors = [a if a.id != "snk" else ActorSpec("snk", "sink", (PortSpec("inp", "in", 2, 4),))
              for a in g.actors]
    g2 = GraphSpec("starved", actors, g.fifos)
    eng = Engine(g2, builtin_registry())
    _, diagnosis = eng.run_until(4)
    assert diagnosis is not None
    blocked = {b.actor_id: b for b in diagnosis.blocked}
    assert "snk" in blocked
    assert any("f_snk" in reason for reason in blocked["snk"].reasons)
    assert diagnosis.buffer_census["f_snk"] == 1


def test_healthy_graph_reports_no_deadlock(fig2_engine):
    eng = fig2_engine
    eng.config.frame_budget = 4
    eng.fire("x")
    assert eng.detect_deadlock() is None  # actors still enabled


def test_dead_link_marks_only_that_stream():
    # two independent source->sink streams in one engine
    actors = [
        ActorSpec("s1", "source", (PortSpec("o", "out", 1, 4),), params={"stream": "one"}),
        ActorSpec("k1", "sink", (PortSpec("i", "in", 1, 4),)),
        ActorSpec("s2", "source", (PortSpec("o", "out", 1, 4),), params={"stream": "two"}),
        ActorSpec("k2", "sink", (PortSpec("i", "in", 1, 4),)),
    ]
    fifos = [FifoSpec("f1", ("s1", "o"), ("k1", "i")), FifoSpec("f2", ("s2", "o"), ("k2", "i"))]
    g = GraphSpec("twostreams", actors, fifos)
    eng = Engine(g, builtin_registry())
    eng.mark_dead_input("f1")
    assert eng.states["k1"].status == DEAD_INPUT_DISABLED
    assert eng.states["k2"].status != DEAD_INPUT_DISABLED
    assert eng.dead_streams == {"one"}
    _, diagnosis = eng.run_until(5)
    assert diagnosis is None  # stream two completed; stream one is dead, not deadlocked
    assert len(eng.completed["two"]) == 5
    diag = eng.detect_deadlock()
    assert diag is not None
    assert all(b.dead_input for b in diag.blocked if b.actor_id == "k1")
