"""Discrete-event simulation of RSU revocation-list broadcasts.

RSUs sit at uniform-random spots in the area and start a broadcast burst
every ``crl_tx_interval`` seconds from a private random phase.  A burst sends
every fragment of the epoch current at its start, back to back, each packet
taking ``packet_payload / channel_rate`` seconds.  Vehicles follow random
waypoint mobility.  A vehicle within ``radio_range`` of the RSU hears each
packet independently with probability ``1 - per_packet_loss``; fragments
accumulate across bursts and RSUs until the epoch is superseded.

Both formats are simulated in one pass over the same mobility trace and
RSU layout so that their metrics are directly comparable.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..bloom import false_positive_prob
from ..codec import c2rl_wire_size, crl_size
from ..optimizer import optimize
from ..revocation import EMPTY_FILTER_K, EMPTY_FILTER_M
from .config import SimConfig
from .fragment import packet_count

STANDARD = "crl"
COMPRESSED = "c2rl"
FORMATS = (STANDARD, COMPRESSED)

# event priorities at equal timestamps
_ISSUE, _BURST, _TICK = 0, 1, 2


@dataclass
class FormatMetrics:
    fmt: str
    list_bytes: int
    fragments: int
    bursts: int = 0
    packets_sent: int = 0
    packets_received: int = 0
    total_crls_received: int = 0
    vehicles_covered: int = 0
    coverage: float = 0.0
    download_times: list[float] = field(default_factory=list, repr=False)

    @property
    def mean_download_time(self) -> float:
        return float(np.mean(self.download_times)) if self.download_times else math.nan


@dataclass
class FilterInfo:
    design_load: int
    revoked: int
    m: int
    k: int
    fp_at_revoked: float


@dataclass
class SimMetrics:
    config: SimConfig
    standard: FormatMetrics | None
    compressed: FormatMetrics | None
    filter: FilterInfo | None = None

    def per_format(self) -> list[FormatMetrics]:
        return [f for f in (self.standard, self.compressed) if f is not None]

    @property
    def total_crls_received(self) -> dict[str, int]:
        return {f.fmt: f.total_crls_received for f in self.per_format()}

    @property
    def received_gain(self) -> float:
        return _ratio(self._get("total_crls_received", COMPRESSED), self._get("total_crls_received", STANDARD))

    @property
    def coverage_gain(self) -> float:
        return _ratio(self._get("coverage", COMPRESSED), self._get("coverage", STANDARD))

    @property
    def download_time_gain(self) -> float:
        return _ratio(self._get("mean_download_time", STANDARD), self._get("mean_download_time", COMPRESSED))

    def _get(self, attr: str, fmt: str) -> float:
        src = self.standard if fmt == STANDARD else self.compressed
        return math.nan if src is None else float(getattr(src, attr))


def _ratio(num: float, den: float) -> float:
    if math.isnan(num) or math.isnan(den):
        return math.nan
    if den == 0:
        return math.inf if num > 0 else math.nan
    return num / den


def list_sizes(config: SimConfig) -> tuple[int, int, FilterInfo]:
    """Encoded bytes of the standard and compressed list for ``config``."""
    revoked = config.revoked_certificates
    load = revoked if config.filter_load == "exact" else config.vehicle_count
    if load == 0:
        m, k = EMPTY_FILTER_M, EMPTY_FILTER_K
    else:
        sol = optimize(load, config.delta_hat)
        m, k = sol.m_star, sol.k_star
    info = FilterInfo(load, revoked, m, k, false_positive_prob(m, k, revoked))
    return crl_size(revoked), c2rl_wire_size(m), info


class _Mobility:
    """Random waypoint inside the area, advanced in fixed steps."""

    def __init__(self, config: SimConfig, rng: np.random.Generator):
        self.rng = rng
        self.cfg = config
        v = config.vehicle_count
        self.size = np.array([config.width, config.height])
        self.pos = rng.uniform(0.0, 1.0, (v, 2)) * self.size
        self.static = config.speed_max == 0
        self.target = rng.uniform(0.0, 1.0, (v, 2)) * self.size
        self.speed = rng.uniform(config.speed_min, config.speed_max, v)

    def step(self, dt: float) -> None:
        if self.static or len(self.pos) == 0:
            return
        delta = self.target - self.pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        travel = self.speed * dt
        arrived = dist <= travel
        moving = ~arrived
        self.pos[moving] += delta[moving] * (travel[moving] / dist[moving])[:, None]
        self.pos[arrived] = self.target[arrived]
        count = int(arrived.sum())
        if count:
            self.target[arrived] = self.rng.uniform(0.0, 1.0, (count, 2)) * self.size
            self.speed[arrived] = self.rng.uniform(self.cfg.speed_min, self.cfg.speed_max, count)


class _Receivers:
    """Per-vehicle fragment bookkeeping for one list format."""

    def __init__(self, metrics: FormatMetrics, vehicles: int, loss: float, rng: np.random.Generator):
        self.m = metrics
        self.total = metrics.fragments
        self.loss = loss
        self.rng = rng
        self.have = np.zeros((vehicles, self.total), dtype=bool)
        self.count = np.zeros(vehicles, dtype=np.int64)
        self.epoch = np.zeros(vehicles, dtype=np.int64)
        self.done = np.zeros(vehicles, dtype=bool)
        self.first = np.full(vehicles, math.nan)
        self.covered = np.zeros(vehicles, dtype=bool)

    def deliver(self, rows: np.ndarray, epoch: int, lo: int, hi: int, start: float, airtime: float) -> None:
        rows = rows[self.epoch[rows] <= epoch]
        stale = rows[self.epoch[rows] < epoch]
        if stale.size:
            self.have[stale] = False
            self.count[stale] = 0
            self.done[stale] = False
            self.first[stale] = math.nan
            self.epoch[stale] = epoch
        rows = rows[~self.done[rows]]
        if rows.size == 0:
            return
        width = hi - lo
        heard = self.rng.random((rows.size, width)) >= self.loss
        self.m.packets_received += int(heard.sum())
        fresh = heard & ~self.have[rows, lo:hi]
        self.have[rows, lo:hi] |= heard
        self.count[rows] += fresh.sum(axis=1)

        any_heard = heard.any(axis=1)
        starting = any_heard & np.isnan(self.first[rows])
        if starting.any():
            first_idx = heard[starting].argmax(axis=1)
            self.first[rows[starting]] = start + (lo + first_idx) * airtime

        finished = self.count[rows] == self.total
        if finished.any():
            last_idx = width - 1 - fresh[finished][:, ::-1].argmax(axis=1)
            t_done = start + (lo + last_idx + 1) * airtime
            fin_rows = rows[finished]
            self.m.download_times.extend((t_done - self.first[fin_rows]).tolist())
            self.m.total_crls_received += int(fin_rows.size)
            self.done[fin_rows] = True
            self.covered[fin_rows] = True


def run(config: SimConfig, formats: tuple[str, ...] = FORMATS) -> SimMetrics:
    """Simulate ``config``; deterministic for a given ``config.seed``."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown formats {sorted(unknown)}")
    std_bytes, c2_bytes, finfo = list_sizes(config)
    sizes = {STANDARD: std_bytes, COMPRESSED: c2_bytes}

    seeds = np.random.SeedSequence(config.seed).spawn(3 + len(FORMATS))
    place_rng, phase_rng, mob_rng = (np.random.default_rng(s) for s in seeds[:3])
    loss_rngs = {fmt: np.random.default_rng(s) for fmt, s in zip(FORMATS, seeds[3:])}

    rsu_pos = place_rng.uniform(0.0, 1.0, (config.rsu_count, 2)) * [config.width, config.height]
    phases = phase_rng.uniform(0.0, config.crl_tx_interval, config.rsu_count)
    mobility = _Mobility(config, mob_rng)
    airtime = config.packet_payload / config.channel_rate

    receivers = {}
    for fmt in formats:
        fm = FormatMetrics(fmt, sizes[fmt], packet_count(sizes[fmt], config.packet_payload))
        receivers[fmt] = _Receivers(fm, config.vehicle_count, config.per_packet_loss, loss_rngs[fmt])

    # active bursts: [rsu, epoch, start time, next fragment index] per format
    active: dict[str, list[list]] = {fmt: [] for fmt in formats}
    epoch = 0
    queue: list[tuple[float, int, int, int]] = []
    seq = 0

    def schedule(t: float, prio: int, arg: int = -1) -> None:
        nonlocal seq
        heapq.heappush(queue, (t, prio, seq, arg))
        seq += 1

    schedule(0.0, _ISSUE)
    for r in range(config.rsu_count):
        schedule(float(phases[r]), _BURST, r)
    # the tick at t delivers packets that started in [t - dt, t)
    dt = config.time_step
    tick_no = 1
    schedule(min(dt, config.duration), _TICK)
    range2 = config.radio_range ** 2

    while queue:
        t, prio, _, arg = heapq.heappop(queue)
        if prio == _ISSUE:
            epoch += 1
            if t + config.issue_interval < config.duration:
                schedule(t + config.issue_interval, _ISSUE)
        elif prio == _BURST:
            for fmt in formats:
                active[fmt].append([arg, epoch, t, 0])
                receivers[fmt].m.bursts += 1
            if t + config.crl_tx_interval < config.duration:
                schedule(t + config.crl_tx_interval, _BURST, arg)
        else:
            if config.rsu_count and config.vehicle_count:
                d = mobility.pos[:, None, :] - rsu_pos[None, :, :]
                in_range = (d ** 2).sum(axis=2) <= range2
            else:
                in_range = np.zeros((config.vehicle_count, config.rsu_count), dtype=bool)
            for fmt in formats:
                rec = receivers[fmt]
                still = []
                for burst in active[fmt]:
                    rsu, ep, start, nxt = burst
                    # fragments whose transmission starts before t
                    hi = min(rec.total, max(nxt, math.ceil((t - start) / airtime)))
                    if hi > nxt:
                        rec.m.packets_sent += hi - nxt
                        rows = np.flatnonzero(in_range[:, rsu])
                        if rows.size:
                            rec.deliver(rows, ep, nxt, hi, start, airtime)
                        burst[3] = hi
                    if burst[3] < rec.total:
                        still.append(burst)
                active[fmt] = still
            mobility.step(dt)
            if t < config.duration:
                tick_no += 1
                schedule(min(tick_no * dt, config.duration), _TICK)

    for fmt in formats:
        rec = receivers[fmt]
        rec.m.vehicles_covered = int(rec.covered.sum())
        rec.m.coverage = rec.m.vehicles_covered / config.vehicle_count if config.vehicle_count else 0.0

    return SimMetrics(
        config,
        receivers[STANDARD].m if STANDARD in receivers else None,
        receivers[COMPRESSED].m if COMPRESSED in receivers else None,
        finfo,
    )
