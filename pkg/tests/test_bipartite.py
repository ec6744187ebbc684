import pytest
from hypothesis import given, settings, strategies as st

from edgeflow.bipartite import build_complete_bipartite
from edgeflow.model import GraphError, cross_fifos, graph_stats
from edgeflow.templates import vehicle_endpoint_template, vehicle_server_template
from edgeflow.validate import validate_graph, validate_mapping


def test_k26_shared_matches_published_counts(fast_endpoint, fast_server):
    g, _ = build_complete_bipartite(2, 6, fast_endpoint, fast_server, shared_server_actor=True)
    assert graph_stats(g) == (26, 30)


def test_k11_single_cross_fifo(fast_endpoint, fast_server):
    g, m = build_complete_bipartite(1, 1, fast_endpoint, fast_server)
    assert len(cross_fifos(g, m)) == 1


def test_k24_eight_cross_fifos(fast_endpoint, fast_server):
    g, m = build_complete_bipartite(2, 4, fast_endpoint, fast_server)
    assert len(cross_fifos(g, m)) == 8


def test_zero_counts_rejected(fast_endpoint, fast_server):
    with pytest.raises(GraphError):
        build_complete_bipartite(0, 1, fast_endpoint, fast_server)
    with pytest.raises(GraphError):
        build_complete_bipartite(1, 0, fast_endpoint, fast_server)


def test_template_without_boundary_rejected(fast_endpoint):
    from edgeflow.templates import fig2_dpg

    # fig2's sink has no unbound out-port, so it cannot act as an endpoint
    with pytest.raises(GraphError, match="boundary"):
        build_complete_bipartite(1, 1, fig2_dpg(), vehicle_server_template(10.0))


def test_shared_wrapping_requires_single_actor_server(fast_endpoint):
    from edgeflow.model import ActorSpec, FifoSpec, GraphSpec, PortSpec

    two_stage = GraphSpec(
        "srv2stage",
        [
            ActorSpec("s1", "identity", (PortSpec("i", "in", 1, 1024),
                                         PortSpec("o", "out", 1, 1024))),
            ActorSpec("s2", "sink", (PortSpec("i", "in", 1, 1024),)),
        ],
        [FifoSpec("f", ("s1", "o"), ("s2", "i"))],
    )
    with pytest.raises(GraphError, match="single-actor"):
        build_complete_bipartite(1, 2, fast_endpoint, two_stage, shared_server_actor=True)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(min_value=1, max_value=4), n=st.integers(min_value=1, max_value=6),
       shared=st.booleans())
def test_closed_form_counts_and_validity(m, n, shared):
    ep = vehicle_endpoint_template(10.0)
    srv = vehicle_server_template(10.0)
    g, mp = build_complete_bipartite(m, n, ep, srv, shared_server_actor=shared)
    ep_actors, ep_fifos = len(ep.actors), len(ep.fifos)
    if shared:
        expected_actors = n * ep_actors + m
    else:
        expected_actors = n * ep_actors + m * n * len(srv.actors)
    assert graph_stats(g) == (expected_actors, n * ep_fifos + m * n)
    assert len(cross_fifos(g, mp)) == m * n
    assert validate_graph(g).ok, validate_graph(g).render()
    assert validate_mapping(g, mp).ok
    # every actor lands on exactly one node, nodes are distinct per instance
    nodes = {mp.node_of_actor(a.id) for a in g.actors}
    assert nodes == {f"ep{i}" for i in range(1, n + 1)} | {f"srv{j}" for j in range(1, m + 1)}


def test_redundancy_group_covers_all_servers(fast_endpoint, fast_server):
    _, m = build_complete_bipartite(3, 2, fast_endpoint, fast_server)
    assert m.redundancy.groups == (("srv1", "srv2", "srv3"),)


def test_streams_tagged_per_endpoint(fast_endpoint, fast_server):
    g, _ = build_complete_bipartite(2, 3, fast_endpoint, fast_server)
    assert g.stream_names() == ["ep1", "ep2", "ep3"]
