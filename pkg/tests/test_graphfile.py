import pytest
from hypothesis import given, settings, strategies as st

from edgeflow.bipartite import build_complete_bipartite
from edgeflow.graphfile import (
    GraphParseError,
    parse_graph,
    parse_mapping,
    serialize_graph,
    serialize_mapping,
)
from edgeflow.model import graph_stats
from edgeflow.templates import (
    chain_graph,
    early_exit_chain,
    fig2_dpg,
    ssd_like_53,
    vehicle_endpoint_template,
    vehicle_server_template,
)

FIG2_FILE = """
graph: fig2-dpg
actors:
  - id: x
    kernel: ctrl_route
    kind: dynamic
    params: {pattern: [1, 0]}
    ports:
      - {id: pxc, dir: control-out, rate: 1, token_bytes: 1}
      - {id: px1, dir: out, rate: 1, token_bytes: 4, dynamic: true}
      - {id: px2, dir: out, rate: 1, token_bytes: 4}
  - id: a
    kernel: scale
    kind: dynamic-processing
    params: {factor: 2}
    ports:
      - {id: pac, dir: control-in, rate: 1, token_bytes: 1}
      - {id: pa1, dir: in, rate: 1, token_bytes: 4, dynamic: true}
      - {id: pa2, dir: out, rate: 1, token_bytes: 4, dynamic: true}
  - id: b
    kernel: add_const
    ports:
      - {id: pb1, dir: in, rate: 1, token_bytes: 4}
      - {id: pb2, dir: out, rate: 1, token_bytes: 4}
  - id: y
    kernel: sink
    kind: dynamic
    ports:
      - {id: pyc, dir: control-in, rate: 1, token_bytes: 1}
      - {id: py1, dir: in, rate: 1, token_bytes: 4, dynamic: true}
      - {id: py2, dir: in, rate: 1, token_bytes: 4}
fifos:
  - {id: cxa, from: x.pxc, to: a.pac, capacity: 8}
  - {id: cxy, from: x.pxc, to: y.pyc, capacity: 8}
  - {id: fxa, from: x.px1, to: a.pa1, capacity: 8}
  - {id: fay, from: a.pa2, to: y.py1, capacity: 8}
  - {id: fxb, from: x.px2, to: b.pb1, capacity: 8}
  - {id: fby, from: b.pb2, to: y.py2, capacity: 8}
control_tables:
  - control_port: x.pxc
    controlled: [x.px1, a.pa1, a.pa2, y.py1]
    settings:
      - {index: 0, rates: [0, 0, 0, 0]}
      - {index: 1, rates: [1, 1, 1, 1]}
"""


def test_parse_fig2_file():
    g = parse_graph(FIG2_FILE)
    assert graph_stats(g) == (4, 6)
    assert g.actor("a").kind == "dynamic-processing"
    assert g.actor("x").kind == "dynamic"
    assert len(g.control_tables) == 1


def test_parse_empty_actor_list():
    with pytest.raises(GraphParseError, match="graph has no actors"):
        parse_graph("graph: empty\nactors: []\n")


def test_parse_fifo_with_undeclared_port():
    text = """
graph: bad
actors:
  - id: a
    kernel: identity
    ports: [{id: out, dir: out, rate: 1, token_bytes: 4}]
  - id: b
    kernel: sink
    ports: [{id: inp, dir: in, rate: 1, token_bytes: 4}]
fifos:
  - {id: f, from: a.nope, to: b.inp}
"""
    with pytest.raises(GraphParseError, match="a.nope"):
        parse_graph(text)


def test_parse_rejects_unknown_keys():
    with pytest.raises(GraphParseError, match="unknown key"):
        parse_graph("graph: g\nactors:\n  - {id: a, kernel: k, ports: [], wat: 1}\n")


def test_parse_missing_required_field():
    with pytest.raises(GraphParseError, match="missing required field 'kernel'"):
        parse_graph("graph: g\nactors:\n  - {id: a, ports: []}\n")


def test_parse_duplicate_actor_id():
    text = (
        "graph: g\nactors:\n"
        "  - {id: a, kernel: k, ports: []}\n"
        "  - {id: a, kernel: k, ports: []}\n"
    )
    with pytest.raises(GraphParseError, match="duplicate actor id"):
        parse_graph(text)


def test_parse_syntax_error_reports_position():
    with pytest.raises(GraphParseError, match=r"line \d+"):
        parse_graph("graph: g\nactors:\n  - {id: a, kernel: [unclosed\n")


def test_fifo_capacity_defaults_to_eight():
    text = """
graph: g
actors:
  - id: a
    kernel: identity
    ports: [{id: out, dir: out, rate: 1, token_bytes: 4}]
  - id: b
    kernel: sink
    ports: [{id: inp, dir: in, rate: 1, token_bytes: 4}]
fifos:
  - {id: f, from: a.out, to: b.inp}
"""
    g = parse_graph(text)
    assert g.fifo("f").capacity == 8
    assert g.fifo("f").token_bytes == 4


@pytest.mark.parametrize(
    "builder",
    [
        fig2_dpg,
        lambda: chain_graph(5),
        ssd_like_53,
        lambda: early_exit_chain(3),
        lambda: vehicle_endpoint_template(100.0),
        lambda: build_complete_bipartite(
            2, 3, vehicle_endpoint_template(100.0), vehicle_server_template(100.0)
        )[0],
    ],
)
def test_graph_roundtrip(builder):
    g = builder()
    twin = parse_graph(serialize_graph(g))
    assert serialize_graph(twin) == serialize_graph(g)
    assert twin.graph_hash() == g.graph_hash()
    assert graph_stats(twin) == graph_stats(g)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=12),
    token_bytes=st.integers(min_value=1, max_value=64),
    capacity=st.integers(min_value=1, max_value=32),
)
def test_chain_roundtrip_randomized(n, token_bytes, capacity):
    g = chain_graph(n, token_bytes=token_bytes, capacity=capacity)
    twin = parse_graph(serialize_graph(g))
    assert serialize_graph(twin) == serialize_graph(g)


def test_mapping_roundtrip(fast_endpoint, fast_server):
    _, mapping = build_complete_bipartite(2, 4, fast_endpoint, fast_server, redundancy="failover")
    twin = parse_mapping(serialize_mapping(mapping))
    assert twin.assignments == mapping.assignments
    assert twin.links.keys() == mapping.links.keys()
    assert twin.redundancy.mode == "failover"
    assert twin.redundancy.groups == mapping.redundancy.groups


def test_mapping_duplicate_assignment_rejected():
    text = """
nodes:
  - {id: ep, role: endpoint}
assignments:
  - {actor: a, node: ep}
  - {actor: a, node: ep}
"""
    with pytest.raises(GraphParseError, match="assigned more than once"):
        parse_mapping(text)
