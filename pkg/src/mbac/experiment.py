"""End-to-end experiment runner.

A run is a fixed-tick loop over one traffic trace: departures, then
arrivals (each decided against the latest completed telemetry snapshot),
then demand aggregation, shaping and sampling. Metrics only count what
happens after the warm-up period.
"""

from __future__ import annotations

import heapq
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from scipy import stats as sps

from mbac.admission import (
    AdmissionDecision,
    AdmissionRequest,
    GebConfig,
    Scheme,
    SchemePolicy,
    SchemeState,
    decide,
    on_admit,
    on_depart,
    select_scheme,
)
from mbac.errors import ConfigError
from mbac.link import LinkConfig, ShaperState, aggregate_demand, shape_tick
from mbac.telemetry import Sampler, SamplerConfig
from mbac.traffic import TrafficConfig, generate_arrivals, new_emission_state

ALL_SCHEMES = (Scheme.EWMA_PBAC, Scheme.PBAC_ES, Scheme.GEB, Scheme.SWMSA)


@dataclass(frozen=True)
class ExperimentConfig:
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    schemes: tuple[Scheme, ...] = ALL_SCHEMES
    theta: float = 1.0
    geb: GebConfig = field(default_factory=GebConfig)
    beta: float = 0.2
    # (source_tag, scheme) rules consulted before each run's own scheme
    policy_rules: tuple[tuple[str, Scheme], ...] = ()
    tick_dt: float = 0.1
    horizon: float = 7200.0
    warmup_discard: float = 60.0
    runs: int = 10
    base_seed: int = 0
    coupled_mode: bool = False
    authoritative_scheme: Scheme = Scheme.EWMA_PBAC
    gains_target: Scheme = Scheme.EWMA_PBAC
    ma_window: int = 10

    def validate(self) -> None:
        self.traffic.validate()
        self.link.validate()
        self.sampler.validate()
        self.geb.validate()
        if not self.schemes:
            raise ConfigError("admission.schemes", "at least one scheme", self.schemes)
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("admission.schemes", "distinct schemes", self.schemes)
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("admission.theta", "a real in (0, 1]", self.theta)
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("ewma.beta", "a real in (0, 1)", self.beta)
        if not self.tick_dt > 0:
            raise ConfigError("experiment.tick_dt", "a positive number of seconds",
                              self.tick_dt)
        ratio = self.sampler.sample_period / self.tick_dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("experiment.tick_dt", "a divisor of sampler.sample_period",
                              self.tick_dt)
        if not self.warmup_discard >= 0:
            raise ConfigError("experiment.warmup_discard", "a non-negative number of seconds",
                              self.warmup_discard)
        if not self.horizon > self.warmup_discard:
            raise ConfigError("experiment.horizon", "> experiment.warmup_discard", self.horizon)
        if not (isinstance(self.runs, int) and self.runs >= 1):
            raise ConfigError("experiment.runs", "an integer >= 1", self.runs)
        if not (isinstance(self.ma_window, int) and self.ma_window >= 1):
            raise ConfigError("experiment.ma_window", "an integer >= 1", self.ma_window)
        for tag, _ in self.policy_rules:
            if not tag or tag == "*":
                raise ConfigError("policy.rules", "explicit source tags (the run's scheme is "
                                  "the default)", tag)


@dataclass(frozen=True)
class DecisionRecord:
    time: float
    flow_id: int
    source_tag: str
    decision: AdmissionDecision
    counted: bool  # arrived after warm-up


@dataclass(frozen=True)
class CoupledRecord:
    time: float
    flow_id: int
    decisions: tuple[AdmissionDecision, ...]

    def by_scheme(self) -> dict[Scheme, AdmissionDecision]:
        return {d.scheme: d for d in self.decisions}


@dataclass(frozen=True)
class RunReport:
    scheme: Scheme
    seed: int
    requests: int
    admitted: int
    rejected: int
    blocking_probability: float
    avg_utilization: float
    usage_series: tuple[tuple[float, float, float], ...]
    decisions: tuple[DecisionRecord, ...] = ()
    coupled_log: tuple[CoupledRecord, ...] = ()
    dropped_bits: float = 0.0


def moving_average(series, window: int) -> list[float]:
    """Trailing mean over the last ``min(window, available)`` values."""
    if window < 1:
        raise ValueError("window must be at least 1")
    values = [float(v) for v in series]
    out = []
    for i, v in enumerate(values):
        n = min(window, i + 1)
        out.append(v if n == 1 else math.fsum(values[i + 1 - n:i + 1]) / n)
    return out


class Simulation:
    """One run over one traffic trace.

    ``policy`` may be replaced between steps; flows admitted earlier stay
    admitted until their lifetime ends.
    """

    def __init__(self, config: ExperimentConfig, seed: int, policy: SchemePolicy,
                 coupled: bool = False):
        config.validate()
        self.config = config
        self.seed = seed
        self.policy = policy
        self.coupled = coupled
        self.traffic = replace(config.traffic, rng_seed=seed)
        self.flows = generate_arrivals(self.traffic, config.horizon)
        self.state = SchemeState(scheme=policy.default, theta=config.theta,
                                 link=config.link, geb=config.geb)
        self.shaper = ShaperState.full(config.link)
        self.sampler = Sampler(config.sampler, config.tick_dt, beta=config.beta)
        self.active = {}
        self._departures = []
        self._next_arrival = 0
        self.tick = 0
        self.n_ticks = math.ceil(config.horizon / config.tick_dt - 1e-9)
        self.decisions: list[DecisionRecord] = []
        self.coupled_log: list[CoupledRecord] = []
        self.dropped_bits = 0.0

    @property
    def now(self) -> float:
        return self.tick * self.config.tick_dt

    @property
    def done(self) -> bool:
        return self.tick >= self.n_ticks

    def _depart_due(self, t: float) -> None:
        while self._departures and self._departures[0][0] <= t:
            _, fid = heapq.heappop(self._departures)
            flow, _ = self.active.pop(fid)
            on_depart(self.state, flow)

    def _arrive(self, flow, t: float) -> None:
        req = AdmissionRequest.for_flow(flow)
        scheme = select_scheme(self.policy, flow.source_tag)
        stats, ewma = self.sampler.stats, self.sampler.ewma
        decision = decide(scheme, self.state, stats, ewma, req)
        if self.coupled:
            self.coupled_log.append(CoupledRecord(
                time=t, flow_id=flow.flow_id,
                decisions=tuple(decide(s, self.state, stats, ewma, req) for s in ALL_SCHEMES),
            ))
        self.decisions.append(DecisionRecord(
            time=t, flow_id=flow.flow_id, source_tag=flow.source_tag, decision=decision,
            counted=flow.arrival_time >= self.config.warmup_discard,
        ))
        if decision.admit:
            on_admit(self.state, req)
            self.active[flow.flow_id] = (flow, new_emission_state(flow, self.traffic))
            heapq.heappush(self._departures, (flow.departure_time, flow.flow_id))

    def step(self) -> None:
        t = self.now
        dt = self.config.tick_dt
        self._depart_due(t)
        while (self._next_arrival < len(self.flows)
               and self.flows[self._next_arrival].arrival_time <= t):
            self._arrive(self.flows[self._next_arrival], t)
            self._next_arrival += 1
        # flows shorter than the tick quantum leave immediately
        self._depart_due(t)
        demand = aggregate_demand(self.active.values(), t, dt)
        self.shaper, output, dropped = shape_tick(self.shaper, demand, dt, self.config.link)
        self.dropped_bits += dropped
        self.sampler.feed(output)
        self.tick += 1

    def run(self) -> Simulation:
        while not self.done:
            self.step()
        return self

    def report(self) -> RunReport:
        cfg = self.config
        counted = [r for r in self.decisions if r.counted]
        admitted = sum(1 for r in counted if r.decision.admit)
        requests = len(counted)
        samples = self.sampler.samples
        usages = [s.usage for s in samples]
        ma = moving_average(usages, cfg.ma_window)
        return RunReport(
            scheme=self.policy.default,
            seed=self.seed,
            requests=requests,
            admitted=admitted,
            rejected=requests - admitted,
            blocking_probability=(requests - admitted) / requests if requests else 0.0,
            avg_utilization=utilization(samples, cfg.warmup_discard, cfg.sampler.sample_period,
                                        cfg.link.capacity),
            usage_series=tuple((s.timestamp, s.usage, m) for s, m in zip(samples, ma)),
            decisions=tuple(self.decisions),
            coupled_log=tuple(self.coupled_log),
            dropped_bits=self.dropped_bits,
        )


def utilization(samples, warmup: float, sample_period: float, capacity: float) -> float:
    """Mean usage over the sample periods lying wholly after warm-up, over ``capacity``."""
    post = [s.usage for s in samples if s.timestamp - sample_period >= warmup - 1e-9]
    if not post:
        return 0.0
    return math.fsum(post) / len(post) / capacity


def run_once(config: ExperimentConfig, seed: int) -> dict[Scheme, RunReport]:
    """Run every configured scheme on the trace drawn from ``seed``.

    In coupled mode only the authoritative scheme drives the admitted set and
    its report carries every scheme's decision at each arrival.
    """
    config.validate()
    if config.coupled_mode:
        policy = SchemePolicy.single(config.authoritative_scheme, config.policy_rules)
        sim = Simulation(config, seed, policy, coupled=True).run()
        return {config.authoritative_scheme: sim.report()}
    reports = {}
    for scheme in config.schemes:
        policy = SchemePolicy.single(scheme, config.policy_rules)
        reports[scheme] = Simulation(config, seed, policy).run().report()
    return reports


def t_critical(df: int, confidence: float = 0.95) -> float:
    return float(sps.t.ppf(0.5 + confidence / 2.0, df))


def ci_half_width(values, confidence: float = 0.95) -> float | None:
    """Student's t confidence-interval half-width; None for fewer than two values."""
    values = list(values)
    n = len(values)
    if n < 2:
        return None
    s = statistics.stdev(values)
    return t_critical(n - 1, confidence) * s / math.sqrt(n)


@dataclass(frozen=True)
class SchemeSummary:
    scheme: Scheme
    runs: int
    mean_blocking: float
    ci95_blocking: float | None
    mean_utilization: float
    ci95_utilization: float | None


@dataclass(frozen=True)
class GainRow:
    target: Scheme
    baseline: Scheme
    blocking_decrease_pct: float | None
    utilization_increase_pct: float | None


def compute_gains(metrics, target: Scheme) -> list[GainRow]:
    """Relative gains of ``target`` over every other scheme.

    ``metrics`` maps scheme to ``(blocking, utilization)``. Both gains are
    relative: blocking decrease ``(P_b - P_t) / P_b`` and utilization
    increase ``(U_t - U_b) / U_b``, in percent. A zero baseline makes the
    gain undefined (None).
    """
    if target not in metrics:
        raise KeyError(f"target scheme {target.label} missing from metrics")
    p_t, u_t = metrics[target]
    rows = []
    for scheme, (p_b, u_b) in metrics.items():
        if scheme is target:
            continue
        rows.append(GainRow(
            target=target,
            baseline=scheme,
            blocking_decrease_pct=(p_b - p_t) / p_b * 100.0 if p_b else None,
            utilization_increase_pct=(u_t - u_b) / u_b * 100.0 if u_b else None,
        ))
    return rows


@dataclass(frozen=True)
class AggregateReport:
    summaries: tuple[SchemeSummary, ...]
    gains: tuple[GainRow, ...]
    runs: dict = field(default_factory=dict)  # scheme -> list[RunReport], seed order
    seeds: tuple[int, ...] = ()

    def summary(self, scheme: Scheme) -> SchemeSummary:
        return next(s for s in self.summaries if s.scheme is scheme)


def summarize(scheme: Scheme, reports) -> SchemeSummary:
    blocking = [r.blocking_probability for r in reports]
    util = [r.avg_utilization for r in reports]
    return SchemeSummary(
        scheme=scheme,
        runs=len(reports),
        mean_blocking=math.fsum(blocking) / len(blocking),
        ci95_blocking=ci_half_width(blocking),
        mean_utilization=math.fsum(util) / len(util),
        ci95_utilization=ci_half_width(util),
    )


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> AggregateReport:
    """Run seeds ``base_seed .. base_seed + runs - 1`` and aggregate per scheme."""
    config.validate()
    seeds = tuple(config.base_seed + i for i in range(config.runs))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(run_once, [config] * len(seeds), seeds))
    else:
        per_seed = [run_once(config, s) for s in seeds]

    schemes = list(per_seed[0])
    runs = {s: [r[s] for r in per_seed] for s in schemes}
    summaries = tuple(summarize(s, runs[s]) for s in schemes)
    gains = ()
    if config.gains_target in runs and len(runs) > 1:
        metrics = {s.scheme: (s.mean_blocking, s.mean_utilization) for s in summaries}
        gains = tuple(compute_gains(metrics, config.gains_target))
    return AggregateReport(summaries=summaries, gains=gains, runs=runs, seeds=seeds)
