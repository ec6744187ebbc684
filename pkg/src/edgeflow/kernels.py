"""Kernel registry and the built-in synthetic kernels.

A kernel is the computation an actor performs per firing. The runtime
hands it the consumed payloads and expects per-port outputs back:

* ``None`` — no outputs (sinks);
* ``list[bytes]`` — broadcast to every bound data out-port (all must share
  the same current rate);
* ``dict[port_id, list]`` — explicit per-port outputs. Data ports take
  ``bytes`` payloads; control-out ports take ``int`` setting indices.

Synthetic kernels model compute cost by sleeping (default) or busy-waiting
for ``cost_us`` microseconds; the mode is recorded in run metrics so a
measurement states how its time was burned.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "FiringContext",
    "KernelError",
    "KernelRegistry",
    "builtin_registry",
    "burn",
]


class KernelError(RuntimeError):
    """Raised by a kernel to signal a failed firing."""


@dataclass
class FiringContext:
    """Everything a kernel may look at during one firing."""

    actor_id: str
    params: dict
    inputs: dict[str, list[bytes]]  # data in-port -> consumed payloads
    frame: int
    fire_index: int
    out_rates: dict[str, int]  # data out-port -> current rate
    out_token_bytes: dict[str, int]
    control_out_ports: tuple[str, ...] = ()
    cost_mode: str = "sleep"  # sleep | busywait
    state: dict = field(default_factory=dict)  # per-actor scratch, survives firings


KernelFn = Callable[[FiringContext], "dict | list | None"]


class KernelRegistry:
    """Name -> kernel function table; names are claimed once."""

    def __init__(self):
        self._kernels: dict[str, KernelFn] = {}

    def register(self, name: str, fn: KernelFn) -> str:
        if name in self._kernels:
            raise KernelError(f"kernel {name!r} already registered")
        self._kernels[name] = fn
        return name

    def resolve(self, name: str) -> KernelFn:
        try:
            return self._kernels[name]
        except KeyError:
            raise KernelError(f"kernel {name!r} is not registered") from None

    def __contains__(self, name: str) -> bool:
        return name in self._kernels

    def copy(self) -> "KernelRegistry":
        reg = KernelRegistry()
        reg._kernels = dict(self._kernels)
        return reg


def burn(cost_us: float, mode: str = "sleep") -> None:
    """Burn approximately cost_us microseconds of wall time.

    ``sleep`` releases the interpreter lock (right choice when many node
    threads share cores), ``busywait`` holds it but is exact, ``hybrid``
    sleeps most of the interval and spins the last stretch: near-exact
    timing with a bounded lock-holding tail, used by measurement runs.
    """
    if cost_us <= 0:
        return
    if mode == "sleep":
        time.sleep(cost_us / 1e6)
        return
    deadline = time.perf_counter() + cost_us / 1e6
    if mode == "hybrid":
        slack = deadline - time.perf_counter() - 1500e-6
        if slack > 0:
            time.sleep(slack)
    while time.perf_counter() < deadline:
        pass


def _fit(payload: bytes, size: int) -> bytes:
    if len(payload) == size:
        return payload
    if len(payload) > size:
        return payload[:size]
    return payload + b"\x00" * (size - len(payload))


def _first_input(ctx: FiringContext) -> list[bytes]:
    for payloads in ctx.inputs.values():
        if payloads:
            return payloads
    return []


def _frame_payload(frame: int, size: int) -> bytes:
    """Frame index stamped into however many bytes the port carries."""
    return _fit((frame % (1 << (8 * min(size, 8)))).to_bytes(min(size, 8), "big"), size)


# -- built-ins -----------------------------------------------------------


def _fit_cached(payload: bytes, size: int, state: dict) -> bytes:
    """Like _fit but reuses one zero-pad buffer per size (hot on big tokens)."""
    if len(payload) == size:
        return payload
    if len(payload) > size:
        return payload[:size]
    pad = state.get(("pad", size))
    if pad is None or len(pad) < size - len(payload):
        pad = b"\x00" * size
        state[("pad", size)] = pad
    return payload + pad[: size - len(payload)]


def _constant_payload(size: int, state: dict) -> bytes:
    buf = state.get(("const", size))
    if buf is None:
        buf = b"\x00" * size
        state[("const", size)] = buf
    return buf


def source_kernel(ctx: FiringContext):
    """Emit fresh tokens for this frame; payload starts with the frame index.

    ``payload: constant`` emits one cached buffer instead (content-free
    tokens for timing runs, where per-frame megabyte copies would pollute
    the measurement; the frame tag still rides on the token).
    """
    burn(float(ctx.params.get("cost_us", 0)), ctx.cost_mode)
    constant = ctx.params.get("payload") == "constant"
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        if constant:
            out[port] = [_constant_payload(size, ctx.state)] * rate
            continue
        stamp = (ctx.frame % (1 << (8 * min(size, 8)))).to_bytes(min(size, 8), "big")
        out[port] = [_fit_cached(stamp, size, ctx.state) for _ in range(rate)]
    return out


def synthetic_cost_kernel(ctx: FiringContext):
    """Burn the declared cost, then pass inputs through resized to the output.

    ``payload: constant`` skips the resize copy (see source_kernel).
    """
    burn(float(ctx.params.get("cost_us", 0)), ctx.cost_mode)
    constant = ctx.params.get("payload") == "constant"
    payloads = _first_input(ctx)
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        if constant:
            out[port] = [_constant_payload(size, ctx.state)] * rate
            continue
        src = payloads or [b""]
        out[port] = [_fit_cached(src[i % len(src)], size, ctx.state) for i in range(rate)]
    return out


def identity_kernel(ctx: FiringContext):
    payloads = _first_input(ctx)
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        out[port] = [_fit(payloads[i % len(payloads)] if payloads else b"", size)
                     for i in range(rate)]
    return out


def sink_kernel(ctx: FiringContext):
    burn(float(ctx.params.get("cost_us", 0)), ctx.cost_mode)
    return None


def scale_kernel(ctx: FiringContext):
    """Multiply each big-endian uint32 payload by params['factor'] (mod 2^32)."""
    factor = int(ctx.params.get("factor", 2))
    payloads = _first_input(ctx)
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        vals = []
        for i in range(rate):
            raw = payloads[i % len(payloads)] if payloads else b"\x00\x00\x00\x00"
            v = struct.unpack(">I", _fit(raw, 4))[0]
            vals.append(_fit(struct.pack(">I", (v * factor) & 0xFFFFFFFF), size))
        out[port] = vals
    return out


def add_const_kernel(ctx: FiringContext):
    """Add params['const'] to each big-endian uint32 payload (mod 2^32)."""
    const = int(ctx.params.get("const", 1))
    payloads = _first_input(ctx)
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        vals = []
        for i in range(rate):
            raw = payloads[i % len(payloads)] if payloads else b"\x00\x00\x00\x00"
            v = struct.unpack(">I", _fit(raw, 4))[0]
            vals.append(_fit(struct.pack(">I", (v + const) & 0xFFFFFFFF), size))
        out[port] = vals
    return out


def ctrl_route_kernel(ctx: FiringContext):
    """Source-style dynamic actor: emits a control setting per firing.

    params['pattern'] is the cyclic list of setting indices; data outputs
    follow the chosen setting's rates (the engine applies the setting to
    this actor's own controlled ports before production).
    """
    burn(float(ctx.params.get("cost_us", 0)), ctx.cost_mode)
    pattern = list(ctx.params.get("pattern", [1]))
    setting = int(pattern[ctx.fire_index % len(pattern)])
    out: dict = {port: [setting] for port in ctx.control_out_ports}
    payloads = _first_input(ctx)
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        src = payloads or [_frame_payload(ctx.frame, size)]
        out[port] = [_fit(src[i % len(src)], size) for i in range(rate)]
    return out


def matmul_toy_kernel(ctx: FiringContext):
    """Square f32 matrix product A @ A on each consumed token payload."""
    payloads = _first_input(ctx)
    out = {}
    for port, rate in ctx.out_rates.items():
        size = ctx.out_token_bytes[port]
        dim = int(round((size // 4) ** 0.5))
        if dim * dim * 4 != size:
            raise KernelError(f"matmul_toy: token_bytes {size} is not a square f32 matrix")
        vals = []
        for i in range(rate):
            raw = _fit(payloads[i % len(payloads)] if payloads else b"\x00" * size, size)
            a = struct.unpack(f">{dim * dim}f", raw)
            prod = [
                sum(a[r * dim + k] * a[k * dim + c] for k in range(dim))
                for r in range(dim)
                for c in range(dim)
            ]
            vals.append(struct.pack(f">{dim * dim}f", *prod))
        out[port] = vals
    return out


def failing_kernel(ctx: FiringContext):
    raise KernelError(ctx.params.get("message", "kernel failure injected"))


def builtin_registry() -> KernelRegistry:
    reg = KernelRegistry()
    reg.register("source", source_kernel)
    reg.register("synthetic_cost", synthetic_cost_kernel)
    reg.register("identity", identity_kernel)
    reg.register("sink", sink_kernel)
    reg.register("scale", scale_kernel)
    reg.register("add_const", add_const_kernel)
    reg.register("ctrl_route", ctrl_route_kernel)
    reg.register("matmul_toy", matmul_toy_kernel)
    reg.register("failing", failing_kernel)
    return reg
