"""Scenario parameters for the dissemination simulator.

Config files are flat ``key = value`` text, one field per line, ``#``
starting a comment.  Keys are the :class:`SimConfig` field names; ``area``
is accepted as shorthand for ``width`` and ``height`` (``area = 3000x2000``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

FILTER_LOADS = ("exact", "vehicles")


@dataclass(frozen=True)
class SimConfig:
    width: float = 3000.0
    height: float = 2000.0
    rsu_count: int = 28
    vehicle_count: int = 200
    radio_range: float = 300.0
    packet_payload: int = 1024
    crl_tx_interval: float = 300.0
    # 0 means "same as crl_tx_interval"
    crl_issue_interval: float = 0.0
    duration: float = 3600.0
    per_packet_loss: float = 0.02
    channel_rate: float = 1.0e6
    speed_min: float = 5.0
    speed_max: float = 15.0
    time_step: float = 1.0
    seed: int = 0
    revoked_per_hour: int = 100
    pseudonyms_per_vehicle: int = 1000
    delta_hat: float = 1e-3
    filter_load: str = "exact"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("area must have positive width and height")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for name in ("rsu_count", "vehicle_count", "revoked_per_hour", "pseudonyms_per_vehicle"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.per_packet_loss <= 1.0:
            raise ValueError("per_packet_loss must lie in [0, 1]")
        if not 0.0 < self.delta_hat < 1.0:
            raise ValueError("delta_hat must lie in (0, 1)")
        if self.radio_range < 0 or self.channel_rate <= 0 or self.time_step <= 0:
            raise ValueError("radio_range must be >= 0, channel_rate and time_step > 0")
        if self.crl_tx_interval <= 0 or self.crl_issue_interval < 0:
            raise ValueError("crl_tx_interval must be > 0 and crl_issue_interval >= 0")
        if not 0 <= self.speed_min <= self.speed_max:
            raise ValueError("need 0 <= speed_min <= speed_max")
        if self.filter_load not in FILTER_LOADS:
            raise ValueError(f"filter_load must be one of {FILTER_LOADS}")

    @property
    def issue_interval(self) -> float:
        return self.crl_issue_interval or self.crl_tx_interval

    @property
    def revoked_certificates(self) -> int:
        """Live revoked certificates: one hour of evictions at the configured rate."""
        return self.revoked_per_hour * self.pseudonyms_per_vehicle

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


def _convert(field_type, raw: str):
    if field_type in (int, "int"):
        return int(raw)
    if field_type in (float, "float"):
        return float(raw)
    return raw


def parse_config(text: str, base: SimConfig | None = None) -> SimConfig:
    types = {f.name: f.type for f in fields(SimConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "area":
            w, _, h = raw.lower().partition("x")
            values["width"], values["height"] = float(w), float(h)
        elif key in types:
            try:
                values[key] = _convert(types[key], raw)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return dataclasses.replace(base or SimConfig(), **values)


def load_config(path: str | Path) -> SimConfig:
    return parse_config(Path(path).read_text())


def dump_config(config: SimConfig) -> str:
    return "".join(f"{f.name} = {getattr(config, f.name)}\n" for f in fields(SimConfig))
