"""Bundled demo graphs and cost models.

These are the fixtures the CLI, scripts and tests share: the four-actor
dynamic-processing example, plain pipeline chains, a 53-stage detection-
network-shaped chain with a matching cost model, the vehicle-classifier
endpoint/server templates used by the K_{m,n} bench, and an early-exit
conditional chain.
"""

from __future__ import annotations

from .explore import CostModel
from .model import (
    CONTROL_IN,
    CONTROL_OUT,
    DYNAMIC,
    DYNAMIC_PROCESSING,
    IN,
    OUT,
    ActorSpec,
    ControlTable,
    FifoSpec,
    GraphSpec,
    PortSpec,
    RateSetting,
)

__all__ = [
    "fig2_dpg",
    "chain_graph",
    "ssd_like_53",
    "detection_chain_53",
    "fig3_like_cost_model",
    "five_actor_chain",
    "five_actor_cost_model",
    "vehicle_endpoint_template",
    "vehicle_server_template",
    "early_exit_chain",
]


def fig2_dpg(pattern: tuple[int, ...] = (1, 0), capacity: int = 8) -> GraphSpec:
    """The minimal dynamic-processing graph: x gates the a-path on and off
    per frame while the b-path stays static.

    x emits a control setting per firing (cycling ``pattern``); setting 1
    routes a token through a (which doubles it), setting 0 disables a and
    y consumes only the b-path token that firing.
    """
    x = ActorSpec(
        id="x",
        kernel="ctrl_route",
        kind=DYNAMIC,
        params={"pattern": list(pattern)},
        ports=(
            PortSpec("pxc", CONTROL_OUT, 1, 1),
            PortSpec("px1", OUT, 1, 4, dynamic=True),
            PortSpec("px2", OUT, 1, 4),
        ),
    )
    a = ActorSpec(
        id="a",
        kernel="scale",
        kind=DYNAMIC_PROCESSING,
        params={"factor": 2},
        ports=(
            PortSpec("pac", CONTROL_IN, 1, 1),
            PortSpec("pa1", IN, 1, 4, dynamic=True),
            PortSpec("pa2", OUT, 1, 4, dynamic=True),
        ),
    )
    b = ActorSpec(
        id="b",
        kernel="add_const",
        params={"const": 1},
        ports=(PortSpec("pb1", IN, 1, 4), PortSpec("pb2", OUT, 1, 4)),
    )
    y = ActorSpec(
        id="y",
        kernel="sink",
        kind=DYNAMIC,
        ports=(
            PortSpec("pyc", CONTROL_IN, 1, 1),
            PortSpec("py1", IN, 1, 4, dynamic=True),
            PortSpec("py2", IN, 1, 4),
        ),
    )
    fifos = [
        FifoSpec("cxa", ("x", "pxc"), ("a", "pac"), capacity),
        FifoSpec("cxy", ("x", "pxc"), ("y", "pyc"), capacity),
        FifoSpec("fxa", ("x", "px1"), ("a", "pa1"), capacity),
        FifoSpec("fay", ("a", "pa2"), ("y", "py1"), capacity),
        FifoSpec("fxb", ("x", "px2"), ("b", "pb1"), capacity),
        FifoSpec("fby", ("b", "pb2"), ("y", "py2"), capacity),
    ]
    table = ControlTable(
        control_port=("x", "pxc"),
        controlled=(("x", "px1"), ("a", "pa1"), ("a", "pa2"), ("y", "py1")),
        settings=(RateSetting(0, (0, 0, 0, 0)), RateSetting(1, (1, 1, 1, 1))),
    )
    return GraphSpec("fig2-dpg", [x, a, b, y], fifos, [table])


def chain_graph(
    n: int,
    name: str | None = None,
    token_bytes: int | list[int] = 4,
    kernel: str = "identity",
    cost_us: float | list[float] = 0.0,
    capacity: int = 8,
) -> GraphSpec:
    """A bare n-actor pipeline chain c1 -> ... -> cN.

    The first actor's in-port and the last actor's out-port stay unbound
    (stream boundaries); useful directly for exploration or wrapped with a
    source/sink for execution.
    """
    if n < 1:
        raise ValueError("chain needs at least one actor")
    sizes = token_bytes if isinstance(token_bytes, list) else [token_bytes] * (n + 1)
    costs = cost_us if isinstance(cost_us, list) else [cost_us] * n
    actors = []
    fifos = []
    for i in range(1, n + 1):
        actors.append(
            ActorSpec(
                id=f"c{i}",
                kernel=kernel,
                params={"cost_us": costs[i - 1]} if costs[i - 1] else {},
                ports=(
                    PortSpec("in", IN, 1, sizes[i - 1]),
                    PortSpec("out", OUT, 1, sizes[i]),
                ),
            )
        )
        if i > 1:
            fifos.append(FifoSpec(f"f{i - 1}", (f"c{i - 1}", "out"), (f"c{i}", "in"),
                                  capacity, sizes[i - 1]))
    return GraphSpec(name or f"chain{n}", actors, fifos)


def ssd_like_53() -> GraphSpec:
    """A 53-actor detection-style pipeline with 69 links.

    The backbone is a chain (52 links); 17 of the consecutive hops carry a
    second, parallel link standing in for feature taps, so the total link
    count matches a detection network while the actor order stays linear
    (parallel edges keep it explorable as a chain).
    """
    doubled = set(range(10, 44, 2))  # 17 hops with a parallel tap link
    actors = []
    fifos = []
    for i in range(1, 54):
        ports = [PortSpec("in", IN, 1, 4), PortSpec("out", OUT, 1, 4)]
        if i in doubled:
            ports.append(PortSpec("tap_out", OUT, 1, 4))
        if i - 1 in doubled:
            ports.append(PortSpec("tap_in", IN, 1, 4))
        actors.append(ActorSpec(id=f"c{i}", kernel="identity", ports=tuple(ports)))
        if i > 1:
            fifos.append(FifoSpec(f"f{i - 1}", (f"c{i - 1}", "out"), (f"c{i}", "in"), 8, 4))
            if i - 1 in doubled:
                fifos.append(
                    FifoSpec(f"t{i - 1}", (f"c{i - 1}", "tap_out"), (f"c{i}", "tap_in"), 8, 4)
                )
    return GraphSpec("ssd-like-53", actors, fifos)


def detection_chain_53() -> GraphSpec:
    """Pure 53-stage chain used for partition exploration."""
    return chain_graph(53, name="detection-chain-53")


def fig3_like_cost_model(chain: GraphSpec, bandwidth_bps: float = 100e6) -> CostModel:
    """Synthetic cost model shaped like a mobile detection network sweep:
    boundary bytes fall steeply through the early layers then plateau,
    per-layer endpoint cost is roughly flat, so endpoint time dips at an
    intermediate cut and climbs again as compute accumulates."""
    n = len(chain.actors)
    actor_us = {}
    fifo_bytes = {}
    for i, a in enumerate(chain.actors, start=1):
        actor_us[a.id] = {"endpoint": 2500.0 + 45.0 * i, "server": 250.0 + 4.0 * i}
    for i, f in enumerate(chain.fifos, start=1):
        if i <= 12:
            size = 1_080_000 / (1.55 ** i)  # steep early decay
        elif i <= 30:
            size = 9_000.0  # mid-network plateau
        else:
            size = 4_000.0
        fifo_bytes[f.id] = float(int(size))
    return CostModel(
        actor_us=actor_us,
        fifo_bytes=fifo_bytes,
        bandwidth_bps=bandwidth_bps,
        input_bytes=1_080_000.0,  # 300x300x3 RGB + framing
        output_bytes=3_000.0,
    )


def five_actor_chain() -> GraphSpec:
    return chain_graph(5, name="chain5")


def five_actor_cost_model() -> CostModel:
    """The worked five-actor example: costs 4/3/6/2/5 ms on the endpoint,
    boundary bytes 600k/300k/150k/80k/20k/4k at 100 Mbit/s."""
    chain = five_actor_chain()
    costs = [4000.0, 3000.0, 6000.0, 2000.0, 5000.0]
    boundary = [300000.0, 150000.0, 80000.0, 20000.0]
    return CostModel(
        actor_us={
            a.id: {"endpoint": costs[i], "server": costs[i] / 10.0}
            for i, a in enumerate(chain.actors)
        },
        fifo_bytes={f.id: boundary[i] for i, f in enumerate(chain.fifos)},
        bandwidth_bps=100e6,
        input_bytes=600000.0,
        output_bytes=4000.0,
    )


def vehicle_endpoint_template(
    actor_cost_us: float = 300.0,
    token_bytes: int = 1024,
    capacity: int = 8,
    period_us: float = 0.0,
    jitter_us: float = 0.0,
) -> GraphSpec:
    """Endpoint side of the vehicle-classifier bench: a capture source plus
    three feature stages (4 actors, 3 internal FIFOs), boundary out-port on
    the last stage. An unpaced source (default) free-runs against
    backpressure; pass period/jitter for a frame-rate-limited camera."""
    params = {"cost_us": actor_cost_us}
    if period_us:
        params["period_us"] = period_us
    if jitter_us:
        params["jitter_us"] = jitter_us
    e1 = ActorSpec(
        id="e1",
        kernel="source",
        params=params,
        ports=(PortSpec("out", OUT, 1, token_bytes),),
    )
    stages = []
    for i in (2, 3, 4):
        stages.append(
            ActorSpec(
                id=f"e{i}",
                kernel="synthetic_cost",
                params={"cost_us": actor_cost_us},
                ports=(
                    PortSpec("in", IN, 1, token_bytes),
                    PortSpec("out", OUT, 1, token_bytes),
                ),
            )
        )
    fifos = [
        FifoSpec("fe1", ("e1", "out"), ("e2", "in"), capacity),
        FifoSpec("fe2", ("e2", "out"), ("e3", "in"), capacity),
        FifoSpec("fe3", ("e3", "out"), ("e4", "in"), capacity),
    ]
    return GraphSpec("vehicle-endpoint", [e1] + stages, fifos)


def vehicle_server_template(actor_cost_us: float = 2500.0, token_bytes: int = 1024) -> GraphSpec:
    """Server side: the classifier tail wrapped in one sink actor."""
    s1 = ActorSpec(
        id="s1",
        kernel="sink",
        params={"cost_us": actor_cost_us},
        ports=(PortSpec("in", IN, 1, token_bytes),),
    )
    return GraphSpec("vehicle-server", [s1])


def early_exit_chain(deep_stages: int = 3, capacity: int = 8,
                     pattern: tuple[int, ...] = (1, 0)) -> GraphSpec:
    """Early-exit-style conditional chain built from one DPG.

    A gate actor always forwards a cheap summary to the sink and decides
    per frame whether the expensive deep stages run (setting 1) or are
    skipped entirely (setting 0, their rates drop to 0).
    """
    gate = ActorSpec(
        id="gate",
        kernel="ctrl_route",
        kind=DYNAMIC,
        params={"pattern": list(pattern)},
        ports=(
            PortSpec("gc", CONTROL_OUT, 1, 1),
            PortSpec("deep_out", OUT, 1, 4, dynamic=True),
            PortSpec("early_out", OUT, 1, 4),
        ),
    )
    actors = [gate]
    fifos = []
    controlled = [("gate", "deep_out")]
    for i in range(1, deep_stages + 1):
        # Every deep stage takes the gate's control fan-out so their epochs
        # stay aligned with the gate's decisions.
        actors.append(
            ActorSpec(
                id=f"d{i}",
                kernel="scale",
                kind=DYNAMIC_PROCESSING,
                params={"factor": 3},
                ports=(
                    PortSpec("dc", CONTROL_IN, 1, 1),
                    PortSpec("in", IN, 1, 4, dynamic=True),
                    PortSpec("out", OUT, 1, 4, dynamic=True),
                ),
            )
        )
        controlled += [(f"d{i}", "in"), (f"d{i}", "out")]
        src = ("gate", "deep_out") if i == 1 else (f"d{i - 1}", "out")
        fifos.append(FifoSpec(f"fd{i}", src, (f"d{i}", "in"), capacity))
        fifos.append(FifoSpec(f"cd{i}", ("gate", "gc"), (f"d{i}", "dc"), capacity))
    sink = ActorSpec(
        id="out",
        kernel="sink",
        kind=DYNAMIC,
        ports=(
            PortSpec("oc", CONTROL_IN, 1, 1),
            PortSpec("deep_in", IN, 1, 4, dynamic=True),
            PortSpec("early_in", IN, 1, 4),
        ),
    )
    actors.append(sink)
    fifos.append(FifoSpec("fdo", (f"d{deep_stages}", "out"), ("out", "deep_in"), capacity))
    fifos.append(FifoSpec("feo", ("gate", "early_out"), ("out", "early_in"), capacity))
    fifos.append(FifoSpec("cgo", ("gate", "gc"), ("out", "oc"), capacity))
    controlled.append(("out", "deep_in"))
    table = ControlTable(
        control_port=("gate", "gc"),
        controlled=tuple(controlled),
        settings=(
            RateSetting(0, tuple(0 for _ in controlled)),
            RateSetting(1, tuple(1 for _ in controlled)),
        ),
    )
    return GraphSpec(f"early-exit-{deep_stages}", actors, fifos, [table])
