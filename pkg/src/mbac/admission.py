"""Admission-control schemes and the scheme-selection policy.

Every scheme checks ``request + estimate < rhs`` and differs only in the
load estimate:

* PBAC-ES: sum of declared peaks of admitted flows, rhs ``theta * T``.
* SWMSA: mean of the sliding measurement window, rhs ``theta * T``.
* GEB: Gaussian equivalent bandwidth ``mean + alpha(eps) * dispersion``, rhs ``T``.
* EWMA-PBAC: ``min(ewma estimate, peak sum)``, rhs ``T``.

Ties reject. Before the first measurement exists the measured estimate is 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from mbac.errors import BookkeepingError, ConfigError
from mbac.link import LinkConfig
from mbac.telemetry import EwmaState, WindowStats
from mbac.traffic import FlowSpec

SQRT_2PI = math.sqrt(2.0 * math.pi)
MAX_EPSILON = 1.0 / SQRT_2PI


class Scheme(enum.Enum):
    PBAC_ES = "PBAC-ES"
    SWMSA = "SWMSA"
    GEB = "GEB"
    EWMA_PBAC = "EWMA-PBAC"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> Scheme:
        key = text.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            names = ", ".join(s.label for s in cls)
            raise ConfigError("scheme", f"one of {names}", text) from None


class Dispersion(enum.Enum):
    STDDEV = "STDDEV"
    VARIANCE = "VARIANCE"


def alpha(epsilon: float) -> float:
    """Gaussian quantile factor ``sqrt(2 ln(1/eps) - ln(2 pi))``.

    Real only for ``0 < eps <= 1/sqrt(2 pi)``; it reaches 0 at the upper end.
    """
    if not 0.0 < epsilon <= MAX_EPSILON:
        raise ConfigError("geb.epsilon", f"a real in (0, 1/sqrt(2*pi) = {MAX_EPSILON:.6f}]",
                          epsilon)
    radicand = -2.0 * math.log(epsilon * SQRT_2PI)
    if radicand <= 0.0:
        return 0.0
    return math.sqrt(radicand)


@dataclass(frozen=True)
class GebConfig:
    epsilon: float = 0.3
    dispersion_mode: Dispersion = Dispersion.STDDEV

    def validate(self) -> None:
        alpha(self.epsilon)


@dataclass(frozen=True)
class AdmissionRequest:
    flow: FlowSpec
    requested_peak: float
    requested_avg: float

    @classmethod
    def for_flow(cls, flow: FlowSpec) -> AdmissionRequest:
        return cls(flow=flow, requested_peak=flow.peak_rate, requested_avg=flow.avg_rate)


@dataclass(frozen=True)
class AdmissionDecision:
    admit: bool
    scheme: Scheme
    estimate: float
    criterion_rhs: float
    request: float

    def consistent(self) -> bool:
        return self.admit == (self.request + self.estimate < self.criterion_rhs)


@dataclass
class SchemeState:
    """Admission bookkeeping shared by all schemes on one link."""

    scheme: Scheme = Scheme.EWMA_PBAC
    theta: float = 1.0
    link: LinkConfig = field(default_factory=LinkConfig)
    geb: GebConfig = field(default_factory=GebConfig)
    admitted: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("admission.theta", "a real in (0, 1]", self.theta)

    @property
    def admitted_peak_sum(self) -> float:
        # recomputed so admit/depart sequences never accumulate rounding error
        return math.fsum(self.admitted.values())


def on_admit(state: SchemeState, req: AdmissionRequest) -> SchemeState:
    fid = req.flow.flow_id
    if fid in state.admitted:
        raise BookkeepingError(f"flow {fid} admitted twice")
    state.admitted[fid] = req.requested_peak
    return state


def on_depart(state: SchemeState, flow: FlowSpec) -> SchemeState:
    try:
        del state.admitted[flow.flow_id]
    except KeyError:
        raise BookkeepingError(f"flow {flow.flow_id} is not in the admitted set") from None
    return state


def _decision(scheme, request, estimate, rhs):
    return AdmissionDecision(admit=request + estimate < rhs, scheme=scheme,
                             estimate=estimate, criterion_rhs=rhs, request=request)


def decide_pbac_es(state: SchemeState, req: AdmissionRequest) -> AdmissionDecision:
    return _decision(Scheme.PBAC_ES, req.requested_peak, state.admitted_peak_sum,
                     state.theta * state.link.capacity)


def decide_swmsa(state: SchemeState, stats: WindowStats,
                 req: AdmissionRequest) -> AdmissionDecision:
    return _decision(Scheme.SWMSA, req.requested_peak, stats.mean,
                     state.theta * state.link.capacity)


def equivalent_bandwidth(stats: WindowStats, geb: GebConfig) -> float:
    if geb.dispersion_mode is Dispersion.VARIANCE:
        dispersion = stats.variance
    else:
        dispersion = stats.stddev
    return stats.mean + alpha(geb.epsilon) * dispersion


def decide_geb(state: SchemeState, stats: WindowStats,
               req: AdmissionRequest) -> AdmissionDecision:
    return _decision(Scheme.GEB, req.requested_peak, equivalent_bandwidth(stats, state.geb),
                     state.link.capacity)


def decide_ewma_pbac(state: SchemeState, ewma: EwmaState,
                     req: AdmissionRequest) -> AdmissionDecision:
    measured = ewma.m_t if ewma.initialized else 0.0
    return _decision(Scheme.EWMA_PBAC, req.requested_peak,
                     min(measured, state.admitted_peak_sum), state.link.capacity)


def decide(scheme: Scheme, state: SchemeState, stats: WindowStats, ewma: EwmaState,
           req: AdmissionRequest) -> AdmissionDecision:
    if scheme is Scheme.PBAC_ES:
        return decide_pbac_es(state, req)
    if scheme is Scheme.SWMSA:
        return decide_swmsa(state, stats, req)
    if scheme is Scheme.GEB:
        return decide_geb(state, stats, req)
    return decide_ewma_pbac(state, ewma, req)


DEFAULT_TAG = "*"


@dataclass(frozen=True)
class SchemePolicy:
    """Ordered ``(match_tag, scheme)`` rules; tag ``*`` is the default rule."""

    rules: tuple[tuple[str, Scheme], ...]

    def __post_init__(self):
        if not any(tag == DEFAULT_TAG for tag, _ in self.rules):
            raise ConfigError("policy", "an ordered rule list ending in a default ('*') rule",
                              self.rules)

    @classmethod
    def single(cls, scheme: Scheme, overrides=()) -> SchemePolicy:
        return cls(tuple(overrides) + ((DEFAULT_TAG, scheme),))

    @property
    def default(self) -> Scheme:
        return next(s for tag, s in self.rules if tag == DEFAULT_TAG)


def select_scheme(policy: SchemePolicy, source_tag: str) -> Scheme:
    for tag, scheme in policy.rules:
        if tag == DEFAULT_TAG or tag == source_tag:
            return scheme
    raise ConfigError("policy", "a default ('*') rule")
