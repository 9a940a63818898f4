"""Link usage monitor.

Shaper output is integrated per tick and turned into one usage sample per
sample period. Samples feed a sliding window (mean, variance, standard
deviation) and an exponentially weighted moving average.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from mbac.errors import ConfigError

# population variance: the window is the whole measurement state, not a sample of it
VARIANCE_DDOF = 0


@dataclass(frozen=True)
class SamplerConfig:
    sample_period: float = 1.0
    window_samples: int = 10

    def validate(self) -> None:
        if not self.sample_period > 0:
            raise ConfigError("sampler.sample_period", "a positive number of seconds",
                              self.sample_period)
        if not (isinstance(self.window_samples, int) and self.window_samples >= 1):
            raise ConfigError("sampler.window_samples", "an integer >= 1", self.window_samples)


@dataclass(frozen=True)
class MeasurementSample:
    timestamp: float
    usage: float  # bits/s


@dataclass(frozen=True)
class WindowStats:
    mean: float = 0.0
    variance: float = 0.0
    stddev: float = 0.0
    count: int = 0


class SampleWindow:
    """The most recent ``size`` usage samples."""

    def __init__(self, size: int = 10):
        if size < 1:
            raise ValueError("window size must be at least 1")
        self.size = size
        self.samples: deque[float] = deque(maxlen=size)
        self.stats = WindowStats()

    def __len__(self):
        return len(self.samples)

    def push(self, sample: MeasurementSample) -> WindowStats:
        if sample.usage < 0:
            raise ValueError(f"negative usage {sample.usage}")
        self.samples.append(float(sample.usage))
        self.stats = window_stats(self.samples)
        return self.stats


def window_stats(values) -> WindowStats:
    n = len(values)
    if n == 0:
        return WindowStats()
    lo, hi = min(values), max(values)
    if lo == hi:
        return WindowStats(mean=lo, variance=0.0, stddev=0.0, count=n)
    mean = math.fsum(values) / n
    # keep the mean inside the sample range despite rounding
    mean = min(max(mean, lo), hi)
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - VARIANCE_DDOF)
    return WindowStats(mean=mean, variance=variance, stddev=math.sqrt(variance), count=n)


def push_sample(window: SampleWindow, s: MeasurementSample) -> WindowStats:
    return window.push(s)


@dataclass(frozen=True)
class EwmaState:
    m_t: float = 0.0
    beta: float = 0.2
    initialized: bool = False

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("ewma.beta", "a real in (0, 1)", self.beta)


def ewma_update(state: EwmaState, m: float) -> EwmaState:
    """Fold measurement ``m`` into the estimate; the first measurement seeds it."""
    if m < 0:
        raise ValueError(f"negative measurement {m}")
    if not state.initialized:
        return EwmaState(m_t=float(m), beta=state.beta, initialized=True)
    m_t = state.beta * m + (1.0 - state.beta) * state.m_t
    return EwmaState(m_t=m_t, beta=state.beta, initialized=True)


class Sampler:
    """Turns per-tick shaper output into periodic usage samples.

    Ticks are counted as integers so sample timestamps are exactly
    ``start + k * sample_period`` with no accumulated float drift.
    """

    def __init__(self, config: SamplerConfig, tick_dt: float, beta: float = 0.2,
                 start: float = 0.0):
        config.validate()
        ratio = config.sample_period / tick_dt
        self.ticks_per_sample = round(ratio)
        if self.ticks_per_sample < 1 or abs(ratio - self.ticks_per_sample) > 1e-9:
            raise ConfigError("experiment.tick_dt", "a divisor of sampler.sample_period",
                              tick_dt)
        self.config = config
        self.start = start
        self.window = SampleWindow(config.window_samples)
        self.ewma = EwmaState(beta=beta)
        self.samples: list[MeasurementSample] = []
        self._bits = 0.0
        self._ticks = 0

    @property
    def stats(self) -> WindowStats:
        return self.window.stats

    def feed(self, output_bits: float) -> MeasurementSample | None:
        """Account one tick of output; returns a sample when a period closes."""
        self._bits += output_bits
        self._ticks += 1
        if self._ticks % self.ticks_per_sample:
            return None
        k = self._ticks // self.ticks_per_sample
        sample = MeasurementSample(
            timestamp=self.start + k * self.config.sample_period,
            usage=self._bits / self.config.sample_period,
        )
        self._bits = 0.0
        self.window.push(sample)
        self.ewma = ewma_update(self.ewma, sample.usage)
        self.samples.append(sample)
        return sample
