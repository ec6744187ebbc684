"""Graph and mapping file I/O.

Files are UTF-8 YAML. Graph files carry top-level keys ``graph``,
``actors[]``, ``fifos[]`` and ``control_tables[]``; mapping files carry
``nodes[]``, ``assignments[]``, ``links[]`` and ``redundancy``. Unknown
keys are rejected so that typos fail loudly instead of silently skewing
an experiment.
"""

from __future__ import annotations

from typing import Any

import yaml

from .model import (
    DEFAULT_FIFO_CAPACITY,
    ActorSpec,
    ControlTable,
    FifoSpec,
    GraphSpec,
    LinkBinding,
    MappingSpec,
    NodeDecl,
    PortSpec,
    RateSetting,
    RedundancySpec,
)

__all__ = [
    "GraphParseError",
    "parse_graph",
    "serialize_graph",
    "parse_mapping",
    "serialize_mapping",
    "load_graph",
    "load_mapping",
]


class GraphParseError(ValueError):
    """Syntax or schema error in a graph/mapping file."""


def _load_yaml(text: str, what: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise GraphParseError(
                f"{what}: syntax error at line {mark.line + 1}, column {mark.column + 1}: "
                f"{getattr(exc, 'problem', exc)}"
            ) from exc
        raise GraphParseError(f"{what}: syntax error: {exc}") from exc


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise GraphParseError(f"{where}: missing required field {key!r}")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise GraphParseError(f"{where}: unknown key(s) {sorted(unknown)}")


def _as_dict(obj: Any, where: str) -> dict:
    if not isinstance(obj, dict):
        raise GraphParseError(f"{where}: expected a mapping, got {type(obj).__name__}")
    return obj


def _as_list(obj: Any, where: str) -> list:
    if obj is None:
        return []
    if not isinstance(obj, list):
        raise GraphParseError(f"{where}: expected a list, got {type(obj).__name__}")
    return obj


def _port_ref(text: Any, where: str) -> tuple[str, str]:
    if not isinstance(text, str) or text.count(".") != 1:
        raise GraphParseError(f"{where}: expected 'actor.port', got {text!r}")
    actor, port = text.split(".")
    if not actor or not port:
        raise GraphParseError(f"{where}: expected 'actor.port', got {text!r}")
    return actor, port


def parse_graph(text: str) -> GraphSpec:
    """Parse graph-file content into a validated-for-references GraphSpec."""
    doc = _as_dict(_load_yaml(text, "graph file") or {}, "graph file")
    _reject_unknown(doc, {"graph", "actors", "fifos", "control_tables"}, "graph file")
    name = _require(doc, "graph", "graph file")
    if not isinstance(name, str) or not name:
        raise GraphParseError("graph file: 'graph' must be a non-empty name")

    actor_items = _as_list(_require(doc, "actors", "graph file"), "actors")
    if not actor_items:
        raise GraphParseError("graph has no actors")

    actors = []
    seen_actor_ids = set()
    for i, item in enumerate(actor_items):
        where = f"actors[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"id", "kernel", "params", "kind", "ports"}, where)
        aid = str(_require(item, "id", where))
        if aid in seen_actor_ids:
            raise GraphParseError(f"{where}: duplicate actor id {aid!r}")
        seen_actor_ids.add(aid)
        kernel = str(_require(item, "kernel", where))
        params = item.get("params") or {}
        if not isinstance(params, dict):
            raise GraphParseError(f"{where}: params must be a mapping")
        ports = []
        for j, pitem in enumerate(_as_list(item.get("ports"), f"{where}.ports")):
            pwhere = f"{where}.ports[{j}]"
            pitem = _as_dict(pitem, pwhere)
            _reject_unknown(pitem, {"id", "dir", "rate", "token_bytes", "dynamic"}, pwhere)
            try:
                ports.append(
                    PortSpec(
                        id=str(_require(pitem, "id", pwhere)),
                        direction=str(_require(pitem, "dir", pwhere)),
                        rate=_require(pitem, "rate", pwhere),
                        token_bytes=_require(pitem, "token_bytes", pwhere),
                        dynamic=bool(pitem.get("dynamic", False)),
                    )
                )
            except ValueError as exc:
                raise GraphParseError(f"{pwhere}: {exc}") from None
        try:
            actors.append(
                ActorSpec(
                    id=aid,
                    kernel=kernel,
                    ports=tuple(ports),
                    kind=str(item.get("kind", "static")),
                    params=params,
                )
            )
        except ValueError as exc:
            raise GraphParseError(f"{where}: {exc}") from None

    fifos = []
    seen_fifo_ids = set()
    for i, item in enumerate(_as_list(doc.get("fifos"), "fifos")):
        where = f"fifos[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"id", "from", "to", "capacity", "token_bytes"}, where)
        fid = str(_require(item, "id", where))
        if fid in seen_fifo_ids:
            raise GraphParseError(f"{where}: duplicate fifo id {fid!r}")
        seen_fifo_ids.add(fid)
        fifos.append(
            FifoSpec(
                id=fid,
                src=_port_ref(_require(item, "from", where), f"{where}.from"),
                dst=_port_ref(_require(item, "to", where), f"{where}.to"),
                capacity=int(item.get("capacity", DEFAULT_FIFO_CAPACITY)),
                token_bytes=int(item.get("token_bytes", 0)),
            )
        )

    tables = []
    for i, item in enumerate(_as_list(doc.get("control_tables"), "control_tables")):
        where = f"control_tables[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"control_port", "controlled", "settings"}, where)
        controlled = tuple(
            _port_ref(c, f"{where}.controlled[{j}]")
            for j, c in enumerate(_as_list(_require(item, "controlled", where), where))
        )
        settings = []
        for j, sitem in enumerate(_as_list(_require(item, "settings", where), where)):
            swhere = f"{where}.settings[{j}]"
            sitem = _as_dict(sitem, swhere)
            _reject_unknown(sitem, {"index", "rates"}, swhere)
            rates = _as_list(_require(sitem, "rates", swhere), swhere)
            settings.append(RateSetting(int(_require(sitem, "index", swhere)), tuple(int(r) for r in rates)))
        tables.append(
            ControlTable(
                control_port=_port_ref(_require(item, "control_port", where), where),
                controlled=controlled,
                settings=tuple(settings),
            )
        )

    try:
        return GraphSpec(name=name, actors=actors, fifos=fifos, control_tables=tables)
    except ValueError as exc:
        raise GraphParseError(str(exc)) from None


def serialize_graph(g: GraphSpec) -> str:
    """Inverse of :func:`parse_graph`; round-trips any valid GraphSpec."""
    doc: dict[str, Any] = {"graph": g.name, "actors": []}
    for a in g.actors:
        item: dict[str, Any] = {"id": a.id, "kernel": a.kernel}
        if a.params:
            item["params"] = dict(a.params)
        if a.kind != "static":
            item["kind"] = a.kind
        item["ports"] = []
        for p in a.ports:
            pitem: dict[str, Any] = {
                "id": p.id,
                "dir": p.direction,
                "rate": p.rate,
                "token_bytes": p.token_bytes,
            }
            if p.dynamic:
                pitem["dynamic"] = True
            item["ports"].append(pitem)
        doc["actors"].append(item)
    if g.fifos:
        doc["fifos"] = [
            {
                "id": f.id,
                "from": f"{f.src[0]}.{f.src[1]}",
                "to": f"{f.dst[0]}.{f.dst[1]}",
                "capacity": f.capacity,
            }
            for f in g.fifos
        ]
    if g.control_tables:
        doc["control_tables"] = [
            {
                "control_port": f"{t.control_port[0]}.{t.control_port[1]}",
                "controlled": [f"{a}.{p}" for a, p in t.controlled],
                "settings": [{"index": s.index, "rates": list(s.rates)} for s in t.settings],
            }
            for t in g.control_tables
        ]
    return yaml.safe_dump(doc, sort_keys=False)


def parse_mapping(text: str) -> MappingSpec:
    """Parse mapping-file content: nodes, assignments, links, redundancy."""
    doc = _as_dict(_load_yaml(text, "mapping file") or {}, "mapping file")
    _reject_unknown(doc, {"nodes", "assignments", "links", "redundancy"}, "mapping file")

    nodes = []
    for i, item in enumerate(_as_list(_require(doc, "nodes", "mapping file"), "nodes")):
        where = f"nodes[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"id", "role", "platform_class"}, where)
        try:
            nodes.append(
                NodeDecl(
                    id=str(_require(item, "id", where)),
                    role=str(_require(item, "role", where)),
                    platform_class=str(item.get("platform_class", "generic")),
                )
            )
        except ValueError as exc:
            raise GraphParseError(f"{where}: {exc}") from None

    assignments: dict[str, tuple[str, str]] = {}
    for i, item in enumerate(
        _as_list(_require(doc, "assignments", "mapping file"), "assignments")
    ):
        where = f"assignments[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"actor", "node", "unit"}, where)
        actor = str(_require(item, "actor", where))
        if actor in assignments:
            raise GraphParseError(f"{where}: actor {actor!r} assigned more than once")
        assignments[actor] = (str(_require(item, "node", where)), str(item.get("unit", "cpu0")))

    links: dict[str, LinkBinding] = {}
    for i, item in enumerate(_as_list(doc.get("links"), "links")):
        where = f"links[{i}]"
        item = _as_dict(item, where)
        _reject_unknown(item, {"fifo", "transport", "address"}, where)
        fifo = str(_require(item, "fifo", where))
        try:
            links[fifo] = LinkBinding(
                transport=str(_require(item, "transport", where)),
                address=item.get("address"),
            )
        except ValueError as exc:
            raise GraphParseError(f"{where}: {exc}") from None

    redundancy = None
    if doc.get("redundancy") is not None:
        item = _as_dict(doc["redundancy"], "redundancy")
        _reject_unknown(item, {"mode", "groups"}, "redundancy")
        try:
            redundancy = RedundancySpec(
                mode=str(item.get("mode", "replicate")),
                groups=tuple(tuple(str(s) for s in g) for g in _as_list(item.get("groups"), "redundancy.groups")),
            )
        except ValueError as exc:
            raise GraphParseError(f"redundancy: {exc}") from None

    try:
        return MappingSpec(nodes=nodes, assignments=assignments, links=links, redundancy=redundancy)
    except ValueError as exc:
        raise GraphParseError(str(exc)) from None


def serialize_mapping(m: MappingSpec) -> str:
    doc: dict[str, Any] = {
        "nodes": [
            {"id": n.id, "role": n.role, "platform_class": n.platform_class} for n in m.nodes
        ],
        "assignments": [
            {"actor": a, "node": node, "unit": unit}
            for a, (node, unit) in sorted(m.assignments.items())
        ],
    }
    if m.links:
        doc["links"] = []
        for fifo, binding in sorted(m.links.items()):
            item = {"fifo": fifo, "transport": binding.transport}
            if binding.address is not None:
                item["address"] = binding.address
            doc["links"].append(item)
    doc["redundancy"] = {
        "mode": m.redundancy.mode,
        "groups": [list(g) for g in m.redundancy.groups],
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_graph(path) -> GraphSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def load_mapping(path) -> MappingSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_mapping(fh.read())
