"""Bottleneck interface: fluid demand aggregation and token-bucket shaping."""

from __future__ import annotations

from dataclasses import dataclass

from mbac.errors import ConfigError
from mbac.traffic import flow_rate_at


@dataclass(frozen=True)
class LinkConfig:
    capacity: float = 1e7       # bits/s, also the physical line rate
    tbf_rate: float = 1e7       # bits/s
    tbf_burst: float = 1_250_000.0  # bytes
    tbf_limit: float = 1_250_000.0  # bytes
    mtu: int = 1540             # bytes; informational only

    def validate(self) -> None:
        if not self.capacity > 0:
            raise ConfigError("link.capacity", "a positive rate in bits/s", self.capacity)
        if not self.tbf_rate > 0:
            raise ConfigError("link.tbf_rate", "a positive rate in bits/s", self.tbf_rate)
        if not self.tbf_burst > 0:
            raise ConfigError("link.tbf_burst", "a positive size in bytes", self.tbf_burst)
        if not self.tbf_limit >= 0:
            raise ConfigError("link.tbf_limit", "a non-negative size in bytes", self.tbf_limit)
        if not self.mtu > 0:
            raise ConfigError("link.mtu", "a positive size in bytes", self.mtu)


@dataclass(frozen=True)
class ShaperState:
    tokens: float   # bytes
    backlog: float  # bytes

    @classmethod
    def full(cls, config: LinkConfig) -> ShaperState:
        return cls(tokens=float(config.tbf_burst), backlog=0.0)


def shape_tick(state: ShaperState, demand: float, dt: float, config: LinkConfig):
    """Advance the shaper by one tick.

    ``demand`` is the number of bits offered during the tick. Returns
    ``(new_state, output_bits, dropped_bits)``. Output is bounded by the
    token supply and by the line rate ``capacity * dt``.
    """
    assert dt > 0 and demand >= 0, (dt, demand)
    tokens = min(float(config.tbf_burst), state.tokens + config.tbf_rate * dt / 8.0)

    queued = state.backlog * 8.0 + demand
    limit_bits = config.tbf_limit * 8.0
    if queued > limit_bits:
        dropped = queued - limit_bits
        queued = limit_bits
    else:
        dropped = 0.0

    output = min(queued, tokens * 8.0, config.capacity * dt)
    tokens = max(0.0, tokens - output / 8.0)
    backlog = max(0.0, (queued - output) / 8.0)
    return ShaperState(tokens=tokens, backlog=backlog), output, dropped


def aggregate_demand(active_flows, t: float, dt: float) -> float:
    """Bits offered during ``[t, t + dt)`` by ``(flow, emission_state)`` pairs."""
    assert dt > 0, dt
    total = 0.0
    for flow, emission in active_flows:
        total += flow_rate_at(flow, t, emission) * dt
    return total
