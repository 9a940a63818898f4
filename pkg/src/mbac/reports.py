"""CSV and manifest output for experiment results.

Numbers are written as fixed-point with six decimals; undefined values
(no CI for a single run, gain over a zero baseline) are written as ``NA``.
Nothing time- or host-dependent is written, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from mbac.admission import Scheme

USAGE_COLUMNS = ("timestamp_s", "usage_bps", "moving_avg_bps", "scheme", "run_seed")
SUMMARY_COLUMNS = ("scheme", "runs", "mean_blocking", "ci95_blocking",
                   "mean_utilization", "ci95_utilization")
GAINS_COLUMNS = ("target_scheme", "baseline_scheme", "blocking_decrease_pct",
                 "utilization_increase_pct")
DECISION_COLUMNS = ("run_seed", "time_s", "flow_id", "source_tag", "scheme", "admit",
                    "estimate_bps", "criterion_rhs_bps", "request_bps", "counted")

GAIN_NOTE = ("blocking_decrease_pct = (P_baseline - P_target) / P_baseline * 100; "
             "utilization_increase_pct = (U_target - U_baseline) / U_baseline * 100 "
             "(relative, not percentage points)")


def fmt(value) -> str:
    if value is None:
        return "NA"
    return f"{value:.6f}"


def summary_line(summary) -> str:
    """Human-readable row, e.g. ``EWMA-PBAC 0.1691 ±0.0140``."""
    ci = "" if summary.ci95_blocking is None else f" ±{summary.ci95_blocking:.4f}"
    return f"{summary.scheme.label} {summary.mean_blocking:.4f}{ci}"


@dataclass
class OutputBundle:
    out_dir: Path
    usage_series_csv: dict = field(default_factory=dict)  # scheme -> path
    decisions_csv: dict = field(default_factory=dict)     # scheme -> path
    summary_csv: Path | None = None
    gains_csv: Path | None = None
    manifest: Path | None = None


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _slug(scheme: Scheme) -> str:
    return scheme.label.lower().replace("-", "_")


def usage_rows(scheme: Scheme, run_reports):
    for rep in run_reports:
        for ts, usage, ma in rep.usage_series:
            yield (fmt(ts), fmt(usage), fmt(ma), scheme.label, rep.seed)


def decision_rows(run_reports):
    for rep in run_reports:
        for rec in rep.decisions:
            d = rec.decision
            yield (rep.seed, fmt(rec.time), rec.flow_id, rec.source_tag, d.scheme.label,
                   int(d.admit), fmt(d.estimate), fmt(d.criterion_rhs), fmt(d.request),
                   int(rec.counted))


def summary_rows(summaries):
    for s in summaries:
        yield (s.scheme.label, s.runs, fmt(s.mean_blocking), fmt(s.ci95_blocking),
               fmt(s.mean_utilization), fmt(s.ci95_utilization))


def gain_rows(gains):
    for g in gains:
        yield (g.target.label, g.baseline.label, fmt(g.blocking_decrease_pct),
               fmt(g.utilization_increase_pct))


def emit_reports(report, out_dir, config_text: str | None = None) -> OutputBundle:
    """Write the report bundle for an ``AggregateReport`` (or None) into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    bundle = OutputBundle(out_dir=out)
    files: dict[str, str] = {}

    def write(name, text):
        path = out / name
        try:
            path.write_text(text, encoding="utf-8", newline="")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return path

    summaries = report.summaries if report is not None else ()
    gains = report.gains if report is not None else ()
    runs = report.runs if report is not None else {}
    seeds = list(report.seeds) if report is not None else []

    for scheme, run_reports in runs.items():
        bundle.usage_series_csv[scheme] = write(
            f"usage_{_slug(scheme)}.csv", _csv_text(USAGE_COLUMNS, usage_rows(scheme, run_reports)))
        bundle.decisions_csv[scheme] = write(
            f"decisions_{_slug(scheme)}.csv", _csv_text(DECISION_COLUMNS, decision_rows(run_reports)))
    bundle.summary_csv = write("summary.csv", _csv_text(SUMMARY_COLUMNS, summary_rows(summaries)))
    bundle.gains_csv = write("gains.csv", _csv_text(GAINS_COLUMNS, gain_rows(gains)))

    manifest = {
        "config": config_text,
        "seeds": seeds,
        "schemes": [s.label for s in runs],
        "gain_formula": GAIN_NOTE,
        "files": dict(sorted(files.items())),
    }
    bundle.manifest = write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return bundle
