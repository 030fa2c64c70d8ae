"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or malformed
input, bad signature), 3 infeasible optimization.  With ``--csv`` a command
writes CSV and nothing else to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import random
import sys
from pathlib import Path

from . import codec
from .bloom import BloomFilter
from .codec import C2rl, CodecError, Crl, CrlEntry, CrlHeader
from .optimizer import OptimizerError, optimize
from .revocation import (
    DEFAULT_BACKUPS,
    RevocationState,
    UnknownVehicle,
    check_sender,
    enroll_vehicle,
    issue_c2rl,
    load_state,
    revoke_vehicle,
    save_state,
)
from .signing import DEFAULT_TEST_KEY, HmacSigner
from .sim import config as simconfig
from .sim.engine import FORMATS, run
from .sim.sweep import metrics_rows, to_csv

log = logging.getLogger("c2rl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3
DELTA_ENV = "C2RL_DELTA"
KEY_ENV = "C2RL_KEY"
FALLBACK_DELTA = 1e-3
GAIN_SWEEP = (1e-3, 1e-1)

GAIN_COLUMNS = ("n", "delta", "m", "k", "crl_bytes", "c2rl_bytes", "gain", "c2rl_wire_bytes")
OPTIMIZE_COLUMNS = ("n", "delta", "m_star", "k_star", "k_tilde_star", "m_tilde_star",
                    "delta_achieved", "bytes")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_delta() -> float:
    raw = os.environ.get(DELTA_ENV)
    if raw is None:
        return FALLBACK_DELTA
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"{DELTA_ENV}={raw!r} is not a number") from None


def _signer(args) -> HmacSigner:
    raw = args.key or os.environ.get(KEY_ENV)
    try:
        key = bytes.fromhex(raw) if raw else DEFAULT_TEST_KEY
    except ValueError:
        raise UsageError("signing key must be hex") from None
    return HmacSigner(key, args.signer)


def _write_csv(out, columns, rows) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)


def _g(x: float) -> str:
    return f"{x:.6g}"


# -- commands ---------------------------------------------------------------

def cmd_optimize(args, out) -> int:
    delta = args.delta if args.delta is not None else _default_delta()
    sol = optimize(args.n, delta)
    row = (sol.n, _g(delta), sol.m_star, sol.k_star, f"{sol.k_tilde_star:.9f}",
           f"{sol.m_tilde_star:.6f}", f"{sol.delta_at_solution:.9e}", sol.payload_bytes)
    if args.csv:
        _write_csv(out, OPTIMIZE_COLUMNS, [row])
    else:
        print(f"n = {sol.n}, target false-positive rate = {_g(delta)}", file=out)
        print(f"m* = {sol.m_star} bits ({sol.payload_bytes} bytes, "
              f"{sol.bits_per_element:.3f} bits/element)", file=out)
        print(f"k* = {sol.k_star}", file=out)
        print(f"relaxed optimum: k~* = {sol.k_tilde_star:.6f}, m~* = {sol.m_tilde_star:.3f}", file=out)
        print(f"achieved false-positive rate = {sol.delta_at_solution:.6e}", file=out)
    return EXIT_OK


def _sweep_values(text: str, points: int) -> list[float]:
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"--delta-sweep expects lo:hi, got {text!r}") from None
    if not 0 < lo <= hi < 1:
        raise UsageError("--delta-sweep bounds must satisfy 0 < lo <= hi < 1")
    if points < 2 or lo == hi:
        return [lo]
    a, b = math.log10(lo), math.log10(hi)
    return [10 ** (a + (b - a) * i / (points - 1)) for i in range(points)]


def cmd_gain(args, out) -> int:
    if args.delta_sweep:
        deltas = _sweep_values(args.delta_sweep, args.points)
    elif args.sweep:
        deltas = _sweep_values(f"{GAIN_SWEEP[0]}:{GAIN_SWEEP[1]}", args.points)
    else:
        deltas = [args.delta if args.delta is not None else _default_delta()]
    rows = []
    for n in args.n:
        for delta in deltas:
            sol = optimize(n, delta)
            m = sol.m_star
            rows.append((n, _g(delta), m, sol.k_star, codec.crl_size(n), codec.c2rl_size(m),
                         f"{codec.compression_gain(n, m):.6f}", codec.c2rl_wire_size(m)))
    if args.csv:
        _write_csv(out, GAIN_COLUMNS, rows)
    else:
        print(f"{'n':>8} {'delta':>10} {'m':>10} {'k':>3} {'crl B':>10} {'c2rl B':>9} {'gain':>9}", file=out)
        for n, d, m, k, cb, c2, g, _ in rows:
            print(f"{n:>8} {d:>10} {m:>10} {k:>3} {cb:>10} {c2:>9} {g:>9}", file=out)
    return EXIT_OK


def _read_revoked(path: Path) -> list[CrlEntry]:
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        hex_id, _, expiry = line.partition(",")
        try:
            cid = codec.cert_id_from_hex(hex_id)
            entries.append(CrlEntry(cid, int(expiry) if expiry.strip() else codec.MAX_EXPIRY))
        except ValueError as exc:
            raise CodecError(f"{path}:{lineno}: {exc}") from exc
    return entries


def cmd_build(args, out) -> int:
    entries = _read_revoked(Path(args.revoked))
    header = CrlHeader(serial=args.serial, issue_time=args.now, next_issue_time=args.next_issue)
    signer = _signer(args)
    if args.bloom:
        delta = args.delta if args.delta is not None else _default_delta()
        ids = sorted({e.cert_id for e in entries if e.expiry >= args.now})
        if ids:
            sol = optimize(len(ids), delta)
            bf = BloomFilter(sol.m_star, sol.k_star)
        else:
            bf = BloomFilter(8, 1)
        bf.add_many(ids)
        data = codec.sign_bytes(codec.encode_c2rl(C2rl(header, bf)), signer)
        summary = f"C2RL: {len(ids)} certificates, m={bf.m}, k={bf.k}, {len(data)} bytes"
    else:
        data = codec.sign_bytes(codec.encode_crl(Crl(header, tuple(entries))), signer)
        summary = f"CRL: {len(entries)} entries, {len(data)} bytes"
    Path(args.output).write_bytes(data)
    print(f"{summary} -> {args.output}", file=out)
    return EXIT_OK


def cmd_inspect(args, out) -> int:
    data = Path(args.file).read_bytes()
    obj = codec.decode(data)
    signed = codec.verify_bytes(data, _signer(args))
    h = obj.header
    fields = [("kind", "crl" if isinstance(obj, Crl) else "c2rl"), ("version", h.version),
              ("serial", h.serial), ("issue_time", h.issue_time), ("next_issue_time", h.next_issue_time)]
    if isinstance(obj, Crl):
        fields += [("entries", len(obj.entries)), ("bytes", len(data))]
    else:
        bf = obj.filter
        fields += [("entries", bf.insert_count), ("m", bf.m), ("k", bf.k), ("bytes", len(data)),
                   ("model_bytes", codec.c2rl_size(bf.m)),
                   ("fp_rate", f"{bf.false_positive_prob():.6e}"),
                   ("fill", f"{bf.popcount() / bf.m:.6f}")]
    fields.append(("signature_valid", str(signed).lower()))
    if args.csv:
        _write_csv(out, [k for k, _ in fields], [[v for _, v in fields]])
    else:
        for k, v in fields:
            print(f"{k}: {v}", file=out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    data = Path(args.c2rl).read_bytes()
    c2rl = codec.decode_c2rl(data)
    if not codec.verify_bytes(data, _signer(args)):
        print("error: signature does not verify", file=sys.stderr)
        return EXIT_DATA
    verdict = check_sender(c2rl, codec.cert_id_from_hex(args.cert))
    if args.csv:
        _write_csv(out, ("cert", "epoch", "verdict"), [(args.cert.lower(), c2rl.epoch, verdict.value)])
    else:
        print(verdict.value, file=out)
    return EXIT_OK


def _load_or_new(path: Path) -> RevocationState:
    return load_state(path) if path.exists() else RevocationState()


def cmd_enroll(args, out) -> int:
    path = Path(args.state)
    state = _load_or_new(path)
    rng = random.Random(f"{args.seed}:{args.vid}")
    rec = enroll_vehicle(state, args.vid, args.pseudonyms, args.backups, rng=rng)
    save_state(state, path)
    print(f"enrolled {rec.vid}: {len(rec.pseudonyms)} pseudonyms, {len(rec.backups)} backups", file=out)
    return EXIT_OK


def cmd_revoke(args, out) -> int:
    path = Path(args.state)
    state = load_state(path)
    before = len(state.revoked_certs)
    revoke_vehicle(state, args.vid, now=args.now)
    save_state(state, path)
    print(f"revoked {args.vid}: {len(state.revoked_certs) - before} new certificates, "
          f"{len(state.revoked_certs)} total", file=out)
    return EXIT_OK


def cmd_issue(args, out) -> int:
    path = Path(args.state)
    state = load_state(path)
    delta = args.delta if args.delta is not None else _default_delta()
    c2rl = issue_c2rl(state, delta, _signer(args), now=args.now, next_issue=args.next_issue,
                      design_load=args.design_load)
    data = codec.encode_c2rl(c2rl)
    Path(args.output).write_bytes(data)
    save_state(state, path)
    print(f"epoch {c2rl.epoch}: {c2rl.filter.insert_count} certificates, m={c2rl.m}, k={c2rl.k}, "
          f"{len(data)} bytes -> {args.output}", file=out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    cfg = simconfig.load_config(args.config) if args.config else simconfig.SimConfig()
    if args.set:
        cfg = simconfig.parse_config("\n".join(args.set), base=cfg)
    rows = []
    seeds = args.seed if args.seed else [cfg.seed]
    formats = FORMATS if args.format == "both" else (args.format,)
    for seed in seeds:
        rows.extend(metrics_rows(run(cfg.replace(seed=seed), formats)))
    text = to_csv(rows)
    if args.csv and args.csv != "-":
        Path(args.csv).write_text(text)
    if args.csv == "-":
        out.write(text)
    else:
        for r in rows:
            print(f"seed={r['seed']} {r['format']:>4}: {r['fragments']} fragments, "
                  f"received={r['total_crls_received']}, coverage={r['coverage']:.3f}, "
                  f"mean download={r['mean_download_time']:.2f} s", file=out)
        if len(formats) == 2:
            for r in rows[::2]:
                print(f"seed={r['seed']} gains: received {r['received_gain']:.3f}, "
                      f"coverage {r['coverage_gain']:.3f}, "
                      f"download time {r['download_time_gain']:.3f}", file=out)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="c2rl", description="Bloom-filter compressed certificate revocation lists")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def signing(sp):
        sp.add_argument("--key", help=f"signing key as hex (default: ${KEY_ENV} or the test key)")
        sp.add_argument("--signer", default="RCA", help="signer name stamped into the header")

    sp = sub.add_parser("optimize", help="optimal filter length and hash count")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--delta", type=float, help=f"target false-positive rate (default ${DELTA_ENV} or 1e-3)")
    sp.add_argument("--csv", action="store_true")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("gain", help="compression gain of the optimized filter")
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--sweep", action="store_true", help="sweep delta log-uniformly over 1e-3..1e-1")
    sp.add_argument("--delta-sweep", metavar="LO:HI")
    sp.add_argument("--points", type=int, default=21)
    sp.add_argument("--csv", action="store_true")
    sp.set_defaults(func=cmd_gain)

    sp = sub.add_parser("build", help="build a CRL or C2RL from a list of revoked ids")
    sp.add_argument("--revoked", required=True, help="file of hex ids, optionally ',expiry'")
    sp.add_argument("--bloom", action="store_true", help="emit a compressed list")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--serial", type=int, default=1)
    sp.add_argument("--now", type=int, default=0)
    sp.add_argument("--next-issue", type=int, default=0)
    sp.add_argument("-o", "--output", required=True)
    signing(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("inspect", help="decode and describe a .crl/.c2rl file")
    sp.add_argument("file")
    sp.add_argument("--csv", action="store_true")
    signing(sp)
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("verify", help="check a certificate id against a C2RL")
    sp.add_argument("--c2rl", required=True)
    sp.add_argument("--cert", required=True, help="certificate id, 20 hex chars")
    sp.add_argument("--csv", action="store_true")
    signing(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("enroll", help="register a vehicle with random pseudonyms")
    sp.add_argument("--state", required=True)
    sp.add_argument("--vid", required=True)
    sp.add_argument("--pseudonyms", type=int, default=1000)
    sp.add_argument("--backups", type=int, default=DEFAULT_BACKUPS)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_enroll)

    sp = sub.add_parser("revoke", help="evict a vehicle")
    sp.add_argument("--state", required=True)
    sp.add_argument("--vid", required=True)
    sp.add_argument("--now", type=int)
    sp.set_defaults(func=cmd_revoke)

    sp = sub.add_parser("issue", help="issue the next signed C2RL")
    sp.add_argument("--state", required=True)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--now", type=int, default=0)
    sp.add_argument("--next-issue", type=int, default=0)
    sp.add_argument("--design-load", type=int, help="size the filter for this many elements")
    sp.add_argument("-o", "--output", required=True)
    signing(sp)
    sp.set_defaults(func=cmd_issue)

    sp = sub.add_parser("simulate", help="RSU broadcast simulation, both list formats")
    sp.add_argument("--config", help="key = value scenario file")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
    sp.add_argument("--seed", type=int, nargs="+")
    sp.add_argument("--format", choices=("both", "crl", "c2rl"), default="both")
    sp.add_argument("--csv", metavar="PATH", help="write CSV to PATH ('-' for stdout)")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"c2rl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OptimizerError as exc:
        print(f"c2rl: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (CodecError, UnknownVehicle, OSError, ValueError) as exc:
        print(f"c2rl: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def run_capture(argv: list[str]) -> tuple[int, str]:
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
