"""CSV output: raw per-prefix measurements, percentile summary and a CDF table."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .experiments import BgpRecord, OspfEvent

RAW_HEADER = ["prefix", "t_injected_us", "t_r2_us", "t_r3_us", "latency_us"]
SUMMARY_HEADER = ["count", "missing", "p10", "p50", "p90", "p99", "max", "mean"]
CDF_HEADER = ["latency_us", "cumulative_fraction"]
CDF_POINTS = 100

RAW_FILE = "raw.csv"
SUMMARY_FILE = "summary.csv"
CDF_FILE = "cdf.csv"
EVENTS_FILE = "convergence.csv"


class ReportError(OSError):
    pass


def _cell(v) -> str:
    return "" if v is None else str(v)


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def summarize(latencies) -> dict[str, float]:
    lat = np.asarray(latencies, dtype=np.int64)
    if lat.size == 0:
        return {}
    p10, p50, p90, p99 = np.percentile(lat, [10, 50, 90, 99])
    return {"p10": float(p10), "p50": float(p50), "p90": float(p90), "p99": float(p99),
            "max": float(lat.max()), "mean": float(lat.mean())}


def cdf_table(latencies, points: int = CDF_POINTS) -> list[tuple[int, float]]:
    """Latency at each of ``points`` evenly spaced cumulative fractions (last is 1.0)."""
    lat = np.sort(np.asarray(latencies, dtype=np.int64))
    if lat.size == 0:
        return []
    fractions = np.arange(1, points + 1) / points
    values = np.quantile(lat, fractions, method="inverted_cdf")
    return [(int(v), float(f)) for v, f in zip(values, fractions)]


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_bgp(records: list[BgpRecord]) -> dict[str, str]:
    raw = [(str(r.prefix), r.t_injected_us, _cell(r.t_r2_us), _cell(r.t_r3_us), _cell(r.latency_us))
           for r in records]
    lat = [r.latency_us for r in records if r.complete]
    s = summarize(lat)
    summary = [[len(lat), len(records) - len(lat)] + [_fmt(s[k]) if s else "" for k in SUMMARY_HEADER[2:]]]
    cdf = [(v, f"{f:.2f}") for v, f in cdf_table(lat)]
    return {RAW_FILE: _csv(raw, RAW_HEADER), SUMMARY_FILE: _csv(summary, SUMMARY_HEADER),
            CDF_FILE: _csv(cdf, CDF_HEADER)}


def render_ospf(events: list[OspfEvent]) -> dict[str, str]:
    return {EVENTS_FILE: _csv([(e.event, e.t_us) for e in events], ["event", "t_us"])}


def emit_report(records, out: str | Path) -> list[Path]:
    """Write the CSV files for ``records`` into directory ``out``; return their paths."""
    records = list(records)
    if not records:
        raise ValueError("no records to report")
    if isinstance(records[0], BgpRecord):
        files = render_bgp(records)
    elif isinstance(records[0], OspfEvent):
        files = render_ospf(records)
    else:
        raise TypeError(f"cannot report {type(records[0]).__name__} records")
    out = Path(out)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return written


def read_summary(directory: str | Path) -> dict[str, float]:
    """Numeric metrics from a report directory (BGP summary or OSPF events)."""
    d = Path(directory)
    if (d / SUMMARY_FILE).exists():
        with open(d / SUMMARY_FILE, newline="") as fh:
            row = next(csv.DictReader(fh))
        return {k: float(v) for k, v in row.items() if v != ""}
    if (d / EVENTS_FILE).exists():
        with open(d / EVENTS_FILE, newline="") as fh:
            return {r["event"]: float(r["t_us"]) for r in csv.DictReader(fh)}
    raise ReportError(f"{d} holds neither {SUMMARY_FILE} nor {EVENTS_FILE}")


def compare(dir_a: str | Path, dir_b: str | Path) -> list[tuple[str, float, float, float | None]]:
    """(metric, a, b, b/a) for every metric present in both reports."""
    a, b = read_summary(dir_a), read_summary(dir_b)
    out = []
    for key in a:
        if key in b:
            ratio = b[key] / a[key] if a[key] else None
            out.append((key, a[key], b[key], ratio))
    return out
