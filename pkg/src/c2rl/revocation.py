"""Authority-side eviction and vehicle-side pseudonym self-checks.

The authority keeps every enrolled vehicle's certificate pools.  Evicting a
vehicle revokes all its non-expired certificates, backups included; issuing
sizes a filter for the current revocation set, inserts every revoked id and
signs the result.  Vehicles hold only issued lists: each newer epoch they
test their pseudonym in use and move to a backup on a false positive.
"""

from __future__ import annotations

import csv
import enum
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from .bloom import BloomFilter
from .codec import CERT_ID_LEN, MAX_EXPIRY, C2rl, Crl, CrlEntry, CrlHeader, sign
from .optimizer import optimize
from .signing import Signer

log = logging.getLogger(__name__)

DEFAULT_BACKUPS = 5
EMPTY_FILTER_M = 8
EMPTY_FILTER_K = 1
STATE_MAGIC = "# c2rl-state v1"


class UnknownVehicle(KeyError):
    pass


class PseudonymsExhausted(RuntimeError):
    """Every candidate pseudonym of a vehicle hits the filter; a refill is due."""

    def __init__(self, vehicle: "VehicleRecord"):
        super().__init__(f"vehicle {vehicle.vid}: all pseudonyms test positive, refill needed")
        self.vehicle = vehicle


class Verdict(enum.Enum):
    TRUSTED = "trusted"
    REVOKED = "revoked"


@dataclass
class VehicleRecord:
    vid: str
    pseudonyms: list[bytes]
    backups: list[bytes] = field(default_factory=list)
    current: int = 0
    expiry: dict[bytes, int] = field(default_factory=dict)
    discarded: list[bytes] = field(default_factory=list)
    last_epoch: int = 0
    exhausted: bool = False

    def __post_init__(self):
        if not self.pseudonyms:
            raise ValueError(f"vehicle {self.vid} has no pseudonyms")
        if set(self.pseudonyms) & set(self.backups):
            raise ValueError(f"vehicle {self.vid}: active and backup pools overlap")
        if not 0 <= self.current < len(self.pseudonyms):
            raise ValueError(f"vehicle {self.vid}: current index {self.current} out of range")

    @property
    def in_use(self) -> bytes:
        return self.pseudonyms[self.current]

    def certificates(self) -> list[bytes]:
        return self.pseudonyms + self.backups

    def expiry_of(self, cert_id: bytes) -> int:
        return self.expiry.get(cert_id, MAX_EXPIRY)


@dataclass
class RevocationRate:
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 100.0:
            raise ValueError(f"revocation rate must be a percentage, got {self.rho}")

    def vehicles_per_hour(self, population: int) -> float:
        return population * self.rho / 100.0


@dataclass
class RevocationState:
    vehicles: dict[str, VehicleRecord] = field(default_factory=dict)
    revoked_vids: set[str] = field(default_factory=set)
    revoked_certs: set[bytes] = field(default_factory=set)
    latest_c2rl: C2rl | None = None
    epoch: int = 0


def enroll_vehicle(state: RevocationState, vid: str, pseudonyms: int = 1000,
                   backups: int = DEFAULT_BACKUPS, expiry: int = MAX_EXPIRY,
                   rng: random.Random | None = None) -> VehicleRecord:
    """Register ``vid`` with fresh random certificate ids."""
    if vid in state.vehicles:
        raise ValueError(f"vehicle {vid} already enrolled")
    rng = rng or random.Random()
    taken = {c for v in state.vehicles.values() for c in v.certificates()}
    ids: list[bytes] = []
    while len(ids) < pseudonyms + backups:
        cid = rng.randbytes(CERT_ID_LEN)
        if cid not in taken:
            taken.add(cid)
            ids.append(cid)
    record = VehicleRecord(vid, ids[:pseudonyms], ids[pseudonyms:],
                           expiry={c: expiry for c in ids} if expiry != MAX_EXPIRY else {})
    state.vehicles[vid] = record
    return record


def revoke_vehicle(state: RevocationState, vid: str, now: int | None = None) -> RevocationState:
    if vid not in state.vehicles:
        raise UnknownVehicle(vid)
    record = state.vehicles[vid]
    state.revoked_vids.add(vid)
    state.revoked_certs.update(
        c for c in record.certificates() if now is None or record.expiry_of(c) >= now)
    return state


def live_revoked(state: RevocationState, now: int) -> list[bytes]:
    """Revoked ids not yet expired at ``now``, in a stable order."""
    expiry = {}
    for vid in state.revoked_vids:
        expiry.update(state.vehicles[vid].expiry)
    return sorted(c for c in state.revoked_certs if expiry.get(c, MAX_EXPIRY) >= now)


def issue_c2rl(state: RevocationState, delta_hat: float, signer: Signer, now: int = 0,
               next_issue: int = 0, design_load: int | None = None) -> C2rl:
    """Build, sign and record the next compressed list.

    ``design_load`` overrides the filter's design element count; by default
    it is the exact number of live revoked certificates, which is what
    guarantees the ``delta_hat`` bound.
    """
    revoked = live_revoked(state, now)
    n = len(revoked) if design_load is None else design_load
    if n == 0:
        bf = BloomFilter(EMPTY_FILTER_M, EMPTY_FILTER_K)
    else:
        sol = optimize(n, delta_hat)
        bf = BloomFilter(sol.m_star, sol.k_star)
    if design_load is not None and design_load < len(revoked):
        log.warning("design load %d is below the %d revoked certificates; the false-positive "
                    "target is not guaranteed", design_load, len(revoked))
    bf.add_many(revoked)
    state.epoch += 1
    header = CrlHeader(serial=state.epoch, issue_time=now, next_issue_time=next_issue)
    c2rl = sign(C2rl(header, bf), signer)
    state.latest_c2rl = c2rl
    return c2rl


def issue_crl(state: RevocationState, signer: Signer, now: int = 0, next_issue: int = 0) -> Crl:
    """Standard (uncompressed) list for the same revocation set; epoch unchanged."""
    expiry = {}
    for vid in state.revoked_vids:
        expiry.update(state.vehicles[vid].expiry)
    entries = tuple(CrlEntry(c, expiry.get(c, MAX_EXPIRY)) for c in live_revoked(state, now))
    header = CrlHeader(serial=state.epoch, issue_time=now, next_issue_time=next_issue)
    return sign(Crl(header, entries), signer)


def check_sender(c2rl: C2rl, cert_id: bytes) -> Verdict:
    return Verdict.REVOKED if c2rl.filter.contains(cert_id) else Verdict.TRUSTED


def self_check_and_swap(vehicle: VehicleRecord, c2rl: C2rl) -> VehicleRecord:
    """Test the pseudonym in use against a newer list; swap on a false positive.

    Backups that also test positive are discarded along the way.  When none
    is left the vehicle is flagged ``exhausted`` and
    :class:`PseudonymsExhausted` is raised.
    """
    if c2rl.epoch <= vehicle.last_epoch:
        return vehicle
    vehicle.last_epoch = c2rl.epoch
    if not c2rl.filter.contains(vehicle.in_use):
        return vehicle
    vehicle.discarded.append(vehicle.in_use)
    while vehicle.backups:
        candidate = vehicle.backups.pop(0)
        if c2rl.filter.contains(candidate):
            vehicle.discarded.append(candidate)
            continue
        vehicle.pseudonyms[vehicle.current] = candidate
        return vehicle
    vehicle.exhausted = True
    raise PseudonymsExhausted(vehicle)


# -- persistence ------------------------------------------------------------
#
# One CSV record per line after a magic comment line:
#   epoch,<int>
#   vehicle,<vid>,<revoked 0|1>,<current index>
#   cert,<vid>,<a|b>,<20 hex chars>,<expiry u32>     (a = active, b = backup)
#   revoked,<20 hex chars>                            (certificates revoked so far)

def save_state(state: RevocationState, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(STATE_MAGIC + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", state.epoch])
        for vid in sorted(state.vehicles):
            v = state.vehicles[vid]
            w.writerow(["vehicle", vid, int(vid in state.revoked_vids), v.current])
            for pool, ids in (("a", v.pseudonyms), ("b", v.backups)):
                for c in ids:
                    w.writerow(["cert", vid, pool, c.hex(), v.expiry_of(c)])
        for c in sorted(state.revoked_certs):
            w.writerow(["revoked", c.hex()])


def load_state(path: str | Path) -> RevocationState:
    with open(path, newline="") as fh:
        if fh.readline().rstrip("\n") != STATE_MAGIC:
            raise ValueError(f"{path}: not a c2rl state file")
        rows = list(csv.reader(fh))
    state = RevocationState()
    pools: dict[str, tuple[list, list, dict]] = {}
    current: dict[str, int] = {}
    for lineno, row in enumerate(rows, start=2):
        kind = row[0] if row else ""
        try:
            if kind == "epoch":
                state.epoch = int(row[1])
            elif kind == "vehicle":
                pools[row[1]] = ([], [], {})
                current[row[1]] = int(row[3])
                if row[2] == "1":
                    state.revoked_vids.add(row[1])
            elif kind == "cert":
                active, backup, expiry = pools[row[1]]
                cid = bytes.fromhex(row[3])
                (active if row[2] == "a" else backup).append(cid)
                if int(row[4]) != MAX_EXPIRY:
                    expiry[cid] = int(row[4])
            elif kind == "revoked":
                state.revoked_certs.add(bytes.fromhex(row[1]))
            else:
                raise ValueError(f"unknown record {kind!r}")
        except (IndexError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed state record: {exc}") from exc
    for vid, (active, backup, expiry) in pools.items():
        state.vehicles[vid] = VehicleRecord(vid, active, backup, current[vid], expiry)
    return state
