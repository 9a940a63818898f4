"""Exit criteria. Each test logs one PASS/FAIL line, shown in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import hashlib
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LOG
from mbac.admission import MAX_EPSILON, Scheme, alpha
from mbac.config import dump_config
from mbac.experiment import ExperimentConfig, compute_gains, run_experiment, run_once, t_critical
from mbac.link import LinkConfig, ShaperState, shape_tick
from mbac.reports import emit_reports
from mbac.telemetry import EwmaState, MeasurementSample, SampleWindow, ewma_update
from oracles import student_t_quantile


def record(number, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}"
    ACCEPTANCE_LOG.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_run():
    start = time.perf_counter()
    report = run_experiment(ExperimentConfig())
    return report, time.perf_counter() - start


def test_1_alpha_fidelity():
    a = alpha(0.3)
    grid = [MAX_EPSILON * (k + 1) / 100 for k in range(100)]
    values = [alpha(e) for e in grid]
    monotone = all(x > y for x, y in zip(values, values[1:]))
    edge = alpha(1 / math.sqrt(2 * math.pi))
    ok = 0.75 <= a <= 0.76 and edge == 0.0 and monotone
    record(1, "alpha", ok, f"alpha(0.3)={a:.6f}, alpha(1/sqrt(2pi))={edge}, "
                           f"strictly decreasing on 100-point grid={monotone}")


def test_2_gain_table():
    table1 = {Scheme.EWMA_PBAC: 0.1691, Scheme.PBAC_ES: 0.2164, Scheme.GEB: 0.2182,
              Scheme.SWMSA: 0.1918}
    table2 = {Scheme.PBAC_ES: 21.9, Scheme.GEB: 22.5, Scheme.SWMSA: 11.8}
    rows = {g.baseline: g.blocking_decrease_pct
            for g in compute_gains({s: (p, 1.0) for s, p in table1.items()}, Scheme.EWMA_PBAC)}
    ok = all(abs(rows[s] - pct) <= 0.1 for s, pct in table2.items())
    detail = ", ".join(f"{s.label} {rows[s]:.2f}% (want {pct}%)" for s, pct in table2.items())
    record(2, "gain table", ok, detail)


def test_3_qualitative_ordering(default_run):
    report, elapsed = default_run
    s = {x.scheme: x for x in report.summaries}
    b = {k: v.mean_blocking for k, v in s.items()}
    u = {k: v.mean_utilization for k, v in s.items()}
    e, g = s[Scheme.EWMA_PBAC], s[Scheme.GEB]
    checks = {
        "B(EWMA)<B(SWMSA)": b[Scheme.EWMA_PBAC] < b[Scheme.SWMSA],
        "B(SWMSA)<B(PBAC-ES)": b[Scheme.SWMSA] < b[Scheme.PBAC_ES],
        "B(EWMA)<B(GEB)": b[Scheme.EWMA_PBAC] < b[Scheme.GEB],
        "U(EWMA) highest": all(u[Scheme.EWMA_PBAC] > v for k, v in u.items()
                               if k is not Scheme.EWMA_PBAC),
        "CI(EWMA) disjoint from CI(GEB)":
            e.mean_blocking + e.ci95_blocking < g.mean_blocking - g.ci95_blocking,
        "runtime<60s": elapsed < 60.0,
    }
    table = "; ".join(f"{k.label} B={v.mean_blocking:.4f}±{v.ci95_blocking:.4f} "
                      f"U={v.mean_utilization:.4f}" for k, v in s.items())
    failed = [k for k, ok in checks.items() if not ok]
    record(3, "end-to-end ordering", not failed,
           f"{table}; {elapsed:.1f}s; failed={failed or 'none'}")


def test_4_coupled_dominance():
    cfg = replace(ExperimentConfig(), coupled_mode=True)
    records = []
    seed = cfg.base_seed
    while len(records) < 1000:
        records += run_once(cfg, seed)[cfg.authoritative_scheme].coupled_log
        seed += 1
    geb_viol = pbac_viol = 0
    for rec in records:
        d = rec.by_scheme()
        geb_viol += d[Scheme.GEB].admit and not d[Scheme.SWMSA].admit
        pbac_viol += d[Scheme.PBAC_ES].admit and not d[Scheme.EWMA_PBAC].admit
    record(4, "coupled dominance", geb_viol == 0 and pbac_viol == 0 and len(records) >= 1000,
           f"{len(records)} decision instants, GEB=>SWMSA violations={geb_viol}, "
           f"PBAC-ES=>EWMA-PBAC violations={pbac_viol}")


def test_5_oracle_suites():
    rng = np.random.default_rng(20)

    # sliding window vs brute force, 1e-9 relative
    w = SampleWindow(10)
    kept = []
    window_bad = 0
    for i in range(10_000):
        v = float(rng.uniform(0, 1.2e7))
        st = w.push(MeasurementSample(float(i + 1), v))
        kept = (kept + [v])[-10:]
        ref = np.array(kept)
        scale = max(ref.mean(), 1.0)
        window_bad += abs(st.mean - ref.mean()) > 1e-9 * scale
        window_bad += abs(st.variance - ref.var()) > 1e-9 * max(ref.var(), scale * scale * 1e-12)

    # EWMA recurrence vs closed form, 1e-9 relative
    beta, m0 = 0.2, 5e6
    ms = rng.uniform(0, 1e7, 300)
    s = EwmaState(m_t=m0, beta=beta, initialized=True)
    ewma_bad = 0
    for t in range(1, len(ms) + 1):
        s = ewma_update(s, ms[t - 1])
        closed = beta * math.fsum((1 - beta) ** k * ms[t - 1 - k] for k in range(t)) \
            + (1 - beta) ** t * m0
        ewma_bad += abs(s.m_t - closed) > 1e-9 * closed

    # token-bucket envelope and per-tick conservation on random demand traces
    envelope_bad = conservation_bad = 0
    dt = 0.1
    for cfg in (LinkConfig(), LinkConfig(capacity=1e8)):
        for _ in range(30):
            n = 120
            demand = rng.exponential(cfg.tbf_rate * dt * rng.uniform(0.3, 3.0), n)
            state = ShaperState(tokens=rng.uniform(0, cfg.tbf_burst),
                                backlog=rng.uniform(0, cfg.tbf_limit))
            outs = []
            for d in demand:
                new, out, drop = shape_tick(state, d, dt, cfg)
                conservation_bad += abs(d - out - drop - (new.backlog - state.backlog) * 8) \
                    > 1e-6 * d
                outs.append(out)
                state = new
            cum = np.concatenate([[0.0], np.cumsum(outs)])
            for i in range(n):
                tau = np.arange(1, n - i + 1) * dt
                envelope_bad += int(np.sum(cum[i + 1:] - cum[i]
                                           > cfg.tbf_burst * 8 + cfg.tbf_rate * tau + 1e-6))
    ok = window_bad == ewma_bad == envelope_bad == conservation_bad == 0
    record(5, "oracle suites", ok,
           f"window mismatches={window_bad}/10000, ewma mismatches={ewma_bad}/300, "
           f"envelope violations={envelope_bad}, conservation violations={conservation_bad}")


def test_6_determinism(tmp_path):
    cfg = replace(ExperimentConfig(), runs=3, horizon=1800.0, base_seed=42)
    digests = []
    for name in ("first", "second"):
        bundle = emit_reports(run_experiment(cfg), tmp_path / name, dump_config(cfg))
        files = sorted(bundle.out_dir.iterdir())
        digests.append({p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in files})
    ok = digests[0] == digests[1] and len(digests[0]) >= 3
    record(6, "determinism", ok, f"{len(digests[0])} files byte-identical={ok}")


def test_7_accounting(default_run):
    report, _ = default_run
    bad = [r for runs in report.runs.values() for r in runs
           if r.admitted + r.rejected != r.requests or not 0.0 <= r.blocking_probability <= 1.0]
    quantile = student_t_quantile(0.975, 9)
    t_ok = abs(t_critical(9) - quantile) <= 1e-9 * quantile
    ci_ok = True
    for summary in report.summaries:
        runs = report.runs[summary.scheme]
        sd = np.std([r.blocking_probability for r in runs], ddof=1)
        ci_ok &= math.isclose(summary.ci95_blocking, quantile * sd / math.sqrt(len(runs)),
                              rel_tol=1e-9)
    ok = not bad and t_ok and ci_ok and all(s.runs == 10 for s in report.summaries)
    record(7, "accounting", ok, f"runs with bad counts={len(bad)}, t(0.975, 9)={t_critical(9):.9f} "
                                f"vs oracle {quantile:.9f}, CI recomputed={ci_ok}")
