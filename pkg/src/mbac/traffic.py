"""Flow population generator.

Flows arrive as a Poisson process, live for an exponentially distributed
time and emit a fluid rate, either constant at the average rate or as a
two-state ON/OFF process that alternates between the peak rate and silence.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from mbac.errors import ConfigError, OutOfIntervalError


class EmissionModel(enum.Enum):
    CONSTANT = "CONSTANT"
    ON_OFF = "ON_OFF"


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    arrival_time: float
    lifetime: float
    avg_rate: float
    peak_rate: float
    source_tag: str = ""
    departure_time: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "departure_time", self.arrival_time + self.lifetime)

    def is_active(self, t: float) -> bool:
        return self.arrival_time <= t < self.departure_time


@dataclass(frozen=True)
class TrafficConfig:
    mean_interarrival: float = 9.0
    lifetime_min_mean: float = 30.0
    lifetime_max_mean: float = 120.0
    avg_rate: float = 1e6
    peak_rate: float = 1.2e6
    emission_model: EmissionModel = EmissionModel.ON_OFF
    on_mean: float = 2.0
    source_tags: tuple[str, ...] = ("edge0",)
    rng_seed: int = 0

    @property
    def mean_lifetime(self) -> float:
        # per-flow means are mixed uniformly over [min, max]
        return 0.5 * (self.lifetime_min_mean + self.lifetime_max_mean)

    @property
    def off_mean(self) -> float:
        return self.on_mean * (self.peak_rate - self.avg_rate) / self.avg_rate

    def validate(self) -> None:
        if not self.mean_interarrival > 0:
            raise ConfigError("traffic.mean_interarrival", "a positive number of seconds",
                              self.mean_interarrival)
        if not self.lifetime_min_mean > 0:
            raise ConfigError("traffic.lifetime_min_mean", "a positive number of seconds",
                              self.lifetime_min_mean)
        if not self.lifetime_max_mean >= self.lifetime_min_mean:
            raise ConfigError("traffic.lifetime_max_mean", ">= traffic.lifetime_min_mean",
                              self.lifetime_max_mean)
        if not self.avg_rate > 0:
            raise ConfigError("traffic.avg_rate", "a positive rate in bits/s", self.avg_rate)
        if not self.peak_rate >= self.avg_rate:
            raise ConfigError("traffic.peak_rate", ">= traffic.avg_rate", self.peak_rate)
        if self.emission_model is EmissionModel.ON_OFF and not self.on_mean > 0:
            raise ConfigError("traffic.on_mean", "a positive number of seconds", self.on_mean)
        if not self.source_tags:
            raise ConfigError("traffic.source_tags", "at least one tag", self.source_tags)


def generate_arrivals(config: TrafficConfig, horizon: float) -> list[FlowSpec]:
    """Draw every flow arriving in ``[0, horizon)``, sorted by arrival time."""
    config.validate()
    if not horizon > 0:
        raise ConfigError("horizon", "a positive number of seconds", horizon)
    rng = np.random.default_rng(config.rng_seed)
    tags = config.source_tags
    flows = []
    t = 0.0
    while True:
        t += rng.exponential(config.mean_interarrival)
        if t >= horizon:
            break
        lifetime_mean = rng.uniform(config.lifetime_min_mean, config.lifetime_max_mean)
        lifetime = 0.0
        while lifetime <= 0.0:
            lifetime = rng.exponential(lifetime_mean)
        tag = tags[int(rng.integers(len(tags)))]
        flows.append(FlowSpec(
            flow_id=len(flows),
            arrival_time=float(t),
            lifetime=float(lifetime),
            avg_rate=config.avg_rate,
            peak_rate=config.peak_rate,
            source_tag=tag,
        ))
    return flows


class ConstantEmission:
    def rate_at(self, flow: FlowSpec, t: float) -> float:
        return flow.avg_rate


class OnOffEmission:
    """Lazily unrolled ON/OFF sojourn sequence for one flow.

    The sojourn sequence is a pure function of ``(seed, flow_id)``, so
    querying an earlier time than the last one simply replays it.
    """

    def __init__(self, flow: FlowSpec, on_mean: float, seed: int):
        self.on_mean = on_mean
        self.off_mean = on_mean * (flow.peak_rate - flow.avg_rate) / flow.avg_rate
        self._seed_key = (int(seed), int(flow.flow_id))
        self._origin = flow.arrival_time
        self._reset(flow)

    def _reset(self, flow: FlowSpec) -> None:
        self._rng = np.random.default_rng(np.random.SeedSequence(self._seed_key))
        duty = flow.avg_rate / flow.peak_rate
        # start in the stationary phase distribution; exponential sojourns are memoryless
        self.on = bool(self._rng.random() < duty)
        self.phase_end = self._origin + self._draw()
        self._last_t = self._origin

    def _draw(self) -> float:
        mean = self.on_mean if self.on else self.off_mean
        if mean <= 0.0:
            return 0.0
        return float(self._rng.exponential(mean))

    def rate_at(self, flow: FlowSpec, t: float) -> float:
        if t < self._last_t:
            self._reset(flow)
        self._last_t = t
        while t >= self.phase_end:
            self.on = not self.on
            self.phase_end += self._draw()
        return flow.peak_rate if self.on else 0.0


def new_emission_state(flow: FlowSpec, config: TrafficConfig):
    if config.emission_model is EmissionModel.CONSTANT:
        return ConstantEmission()
    return OnOffEmission(flow, config.on_mean, config.rng_seed)


def flow_rate_at(flow: FlowSpec, t: float, emission_state) -> float:
    """Instantaneous emission rate of ``flow`` at time ``t`` in bits/s."""
    if not flow.arrival_time <= t < flow.departure_time:
        raise OutOfIntervalError(
            f"t={t} outside active interval [{flow.arrival_time}, {flow.departure_time}) "
            f"of flow {flow.flow_id}")
    return emission_state.rate_at(flow, t)
