"""CSV tables of simulator runs.

One row per (config, format).  Gain columns repeat on both rows of a run:
count and coverage gains are compressed / standard, the download-time gain
is standard / compressed.  Floats use ``repr`` so output is byte-stable.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable

from .config import SimConfig
from .engine import FORMATS, SimMetrics, run

CSV_COLUMNS = (
    "seed", "rsu_count", "vehicle_count", "revoked_per_hour", "duration", "format",
    "list_bytes", "fragments", "bursts", "packets_sent", "packets_received",
    "total_crls_received", "coverage", "mean_download_time",
    "received_gain", "coverage_gain", "download_time_gain",
    "filter_load", "filter_m", "filter_k", "filter_fp_at_revoked",
)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def metrics_rows(metrics: SimMetrics) -> list[dict]:
    cfg = metrics.config
    rows = []
    for fm in metrics.per_format():
        rows.append({
            "seed": cfg.seed,
            "rsu_count": cfg.rsu_count,
            "vehicle_count": cfg.vehicle_count,
            "revoked_per_hour": cfg.revoked_per_hour,
            "duration": cfg.duration,
            "format": fm.fmt,
            "list_bytes": fm.list_bytes,
            "fragments": fm.fragments,
            "bursts": fm.bursts,
            "packets_sent": fm.packets_sent,
            "packets_received": fm.packets_received,
            "total_crls_received": fm.total_crls_received,
            "coverage": fm.coverage,
            "mean_download_time": fm.mean_download_time,
            "received_gain": metrics.received_gain,
            "coverage_gain": metrics.coverage_gain,
            "download_time_gain": metrics.download_time_gain,
            "filter_load": metrics.filter.design_load,
            "filter_m": metrics.filter.m,
            "filter_k": metrics.filter.k,
            "filter_fp_at_revoked": metrics.filter.fp_at_revoked,
        })
    return rows


def to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def sweep(configs: Iterable[SimConfig], formats: tuple[str, ...] = FORMATS) -> str:
    rows = []
    for cfg in configs:
        rows.extend(metrics_rows(run(cfg, formats)))
    return to_csv(rows)
