"""Complete-bipartite topology builder.

Instantiates n endpoint subgraphs and wires every endpoint's boundary
output to all m servers, producing one graph plus the node mapping. Two
server-side variants exist:

* per-stream (default): each server gets its own instance of the server
  template per endpoint stream, so one stream's death cannot stall the
  others' firings on that server;
* shared: one server actor per server wraps the per-stream work, with one
  boundary input port per stream. Only single-actor server templates can
  be wrapped this way.
"""

from __future__ import annotations

from .model import (
    ENDPOINT,
    IN,
    OUT,
    SERVER,
    ActorSpec,
    ControlTable,
    FifoSpec,
    GraphSpec,
    GraphError,
    LinkBinding,
    MappingSpec,
    NodeDecl,
    PortSpec,
    RedundancySpec,
)

__all__ = ["build_complete_bipartite", "boundary_out_port", "boundary_in_port"]

CROSS_FIFO_CAPACITY = 8


def boundary_out_port(template: GraphSpec) -> tuple[str, str]:
    """The template's single unbound data out-port (its stream boundary)."""
    unbound = [
        (a.id, p.id)
        for a in template.actors
        for p in a.ports_by_direction(OUT)
        if (a.id, p.id) not in template.fifos_of_output
    ]
    if len(unbound) != 1:
        raise GraphError(
            f"template {template.name!r}: expected exactly one boundary out-port, "
            f"found {len(unbound)}"
        )
    return unbound[0]


def boundary_in_port(template: GraphSpec) -> tuple[str, str]:
    """The template's single unbound data in-port."""
    unbound = [
        (a.id, p.id)
        for a in template.actors
        for p in a.ports_by_direction(IN)
        if (a.id, p.id) not in template.fifo_of_input
    ]
    if len(unbound) != 1:
        raise GraphError(
            f"template {template.name!r}: expected exactly one boundary in-port, "
            f"found {len(unbound)}"
        )
    return unbound[0]


def _prefixed_actor(a: ActorSpec, prefix: str, extra_params: dict | None = None) -> ActorSpec:
    params = dict(a.params)
    if extra_params:
        params.update(extra_params)
    return ActorSpec(
        id=prefix + a.id, kernel=a.kernel, ports=a.ports, kind=a.kind, params=params
    )


def _prefixed_fifo(f: FifoSpec, prefix: str) -> FifoSpec:
    return FifoSpec(
        id=prefix + f.id,
        src=(prefix + f.src[0], f.src[1]),
        dst=(prefix + f.dst[0], f.dst[1]),
        capacity=f.capacity,
        token_bytes=f.token_bytes,
    )


def _prefixed_table(t: ControlTable, prefix: str) -> ControlTable:
    return ControlTable(
        control_port=(prefix + t.control_port[0], t.control_port[1]),
        controlled=tuple((prefix + a, p) for a, p in t.controlled),
        settings=t.settings,
    )


def _instantiate(template: GraphSpec, prefix: str, stream: str | None):
    """Copy a template with prefixed ids; tag source actors with the stream."""
    sources = {a.id for a in template.sources()}
    actors = []
    for a in template.actors:
        extra = {"stream": stream} if stream is not None and a.id in sources else None
        actors.append(_prefixed_actor(a, prefix, extra))
    fifos = [_prefixed_fifo(f, prefix) for f in template.fifos]
    tables = [_prefixed_table(t, prefix) for t in template.control_tables]
    return actors, fifos, tables


def _replicate_port(port: PortSpec, suffix: str) -> PortSpec:
    return PortSpec(
        id=f"{port.id}_{suffix}",
        direction=port.direction,
        rate=port.rate,
        token_bytes=port.token_bytes,
        dynamic=port.dynamic,
    )


def _with_ports(actor: ActorSpec, ports: tuple[PortSpec, ...]) -> ActorSpec:
    return ActorSpec(
        id=actor.id, kernel=actor.kernel, ports=ports, kind=actor.kind, params=actor.params
    )


def build_complete_bipartite(
    m: int,
    n: int,
    endpoint_template: GraphSpec,
    server_template: GraphSpec,
    redundancy: str = "replicate",
    shared_server_actor: bool = False,
    cross_capacity: int = CROSS_FIFO_CAPACITY,
) -> tuple[GraphSpec, MappingSpec]:
    """Build the K_{m,n} graph and mapping for m servers and n endpoints.

    Every endpoint's boundary out-port is linked to all m servers, giving
    exactly m*n cross-node FIFOs. Endpoint i maps to node ``ep{i}``, server
    j to ``srv{j}``; all servers form one redundancy group.
    """
    if m < 1 or n < 1:
        raise GraphError(f"K_{{m,n}} requires m >= 1 and n >= 1, got m={m}, n={n}")
    ep_boundary = boundary_out_port(endpoint_template)
    srv_boundary = boundary_in_port(server_template)
    if shared_server_actor and len(server_template.actors) != 1:
        raise GraphError(
            "shared server wrapping requires a single-actor server template, "
            f"got {len(server_template.actors)} actors"
        )

    actors: list[ActorSpec] = []
    fifos: list[FifoSpec] = []
    tables: list[ControlTable] = []
    assignments: dict[str, tuple[str, str]] = {}
    links: dict[str, LinkBinding] = {}

    ep_names = [f"ep{i}" for i in range(1, n + 1)]
    srv_names = [f"srv{j}" for j in range(1, m + 1)]

    # Endpoint instances, with the boundary out-port fanned out per server.
    boundary_port_spec = endpoint_template.port(ep_boundary)
    for ep in ep_names:
        prefix = f"{ep}_"
        a_list, f_list, t_list = _instantiate(endpoint_template, prefix, stream=ep)
        for idx, a in enumerate(a_list):
            if a.id == prefix + ep_boundary[0]:
                ports = tuple(p for p in a.ports if p.id != ep_boundary[1]) + tuple(
                    _replicate_port(boundary_port_spec, srv) for srv in srv_names
                )
                a_list[idx] = _with_ports(a, ports)
        actors.extend(a_list)
        fifos.extend(f_list)
        tables.extend(t_list)
        for a in a_list:
            assignments[a.id] = (ep, "cpu0")

    # Server instances plus the cross links.
    if shared_server_actor:
        base = server_template.actors[0]
        for srv in srv_names:
            ports = tuple(p for p in base.ports if p.id != srv_boundary[1]) + tuple(
                _replicate_port(base.port(srv_boundary[1]), ep) for ep in ep_names
            )
            inst = _with_ports(_prefixed_actor(base, f"{srv}_"), ports)
            actors.append(inst)
            assignments[inst.id] = (srv, "cpu0")
            for ep in ep_names:
                fid = f"x_{ep}_{srv}"
                fifos.append(
                    FifoSpec(
                        id=fid,
                        src=(f"{ep}_{ep_boundary[0]}", f"{ep_boundary[1]}_{srv}"),
                        dst=(inst.id, f"{srv_boundary[1]}_{ep}"),
                        capacity=cross_capacity,
                        token_bytes=boundary_port_spec.token_bytes,
                    )
                )
                links[fid] = LinkBinding("mem")
    else:
        for srv in srv_names:
            for ep in ep_names:
                prefix = f"{srv}_{ep}_"
                a_list, f_list, t_list = _instantiate(server_template, prefix, stream=None)
                actors.extend(a_list)
                fifos.extend(f_list)
                tables.extend(t_list)
                for a in a_list:
                    assignments[a.id] = (srv, "cpu0")
                fid = f"x_{ep}_{srv}"
                fifos.append(
                    FifoSpec(
                        id=fid,
                        src=(f"{ep}_{ep_boundary[0]}", f"{ep_boundary[1]}_{srv}"),
                        dst=(prefix + srv_boundary[0], srv_boundary[1]),
                        capacity=cross_capacity,
                        token_bytes=boundary_port_spec.token_bytes,
                    )
                )
                links[fid] = LinkBinding("mem")

    graph = GraphSpec(
        name=f"k{m}x{n}-{endpoint_template.name}-{server_template.name}",
        actors=actors,
        fifos=fifos,
        control_tables=tables,
    )
    nodes = [NodeDecl(ep, ENDPOINT, "endpoint") for ep in ep_names] + [
        NodeDecl(srv, SERVER, "server") for srv in srv_names
    ]
    mapping = MappingSpec(
        nodes=nodes,
        assignments=assignments,
        links=links,
        redundancy=RedundancySpec(mode=redundancy, groups=(tuple(srv_names),)),
    )
    return graph, mapping
