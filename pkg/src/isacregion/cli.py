"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O error.
SNRs enter in dB and are converted to linear scale here, once.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, mc
from .channel import ChannelParams
from .errors import DomainError
from .regions import (
    RegionCurve,
    Scheme,
    corner_comm,
    corner_sensing,
    dominated_area,
    hull_contains,
    mixture_rate_at_exponent,
    sweep_region,
)
from .specfun import DEFAULT_QUADRATURE
from .svg import line_plot

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

FIG2_SNRS_DB = (10, 15, 20, 25)
SCHEME_NAMES = {"mixture": Scheme.GAUSSIAN_MIXTURE, "signedchi": Scheme.SIGNED_CHI, "timeshare": Scheme.TIME_SHARING}
CSV_HEADER = ("param", "rate_bits", "exponent_bits", "status")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def workers_from_env() -> int:
    raw = os.environ.get("ISACREGION_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ISACREGION_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise UsageError("ISACREGION_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def parse_grid(spec: str, scheme: Scheme) -> list[float]:
    """Parse ``lo:hi:count`` or ``lo:hi:count:log`` into grid values."""
    parts = spec.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("log", "lin")):
        raise UsageError(f"bad grid {spec!r}; expected lo:hi:count[:log|lin]")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad grid {spec!r}; expected numbers lo:hi:count")
    if not (math.isfinite(lo) and math.isfinite(hi)) or count < 1:
        raise UsageError(f"bad grid {spec!r}")
    if count == 1:
        if lo != hi:
            raise UsageError("a single-point grid needs lo == hi")
        values = [lo]
    elif hi <= lo:
        raise UsageError("grid needs lo < hi")
    elif len(parts) == 4 and parts[3] == "log":
        if lo <= 0:
            raise UsageError("log grids need lo > 0")
        values = np.logspace(math.log10(lo), math.log10(hi), count).tolist()
        values[0], values[-1] = lo, hi
    else:
        values = np.linspace(lo, hi, count).tolist()
    if scheme is Scheme.SIGNED_CHI:
        if any(abs(v - round(v)) > 1e-9 or round(v) < 1 for v in values):
            raise UsageError("signedchi grids must hold positive integers k")
        values = [float(round(v)) for v in values]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise UsageError("signedchi grid repeats a value of k")
    if scheme is Scheme.GAUSSIAN_MIXTURE and values[0] < 0:
        raise UsageError("mixture parameter a must be >= 0")
    if scheme is Scheme.TIME_SHARING and (values[0] < 0 or values[-1] > 1):
        raise UsageError("time-sharing weights must lie in [0, 1]")
    return values


def _fmt(v: float) -> str:
    return repr(float(v))


def curve_csv(curve: RegionCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for g in curve.grid:
        if g.point is None:
            w.writerow((_fmt(g.param), "", "", g.status))
        else:
            w.writerow((_fmt(g.param), _fmt(g.point.rate), _fmt(g.point.exponent), g.status))
    return buf.getvalue()


def _write(path: Path, text: str) -> str:
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def write_manifest(path: Path, argv: Sequence[str], outputs: dict, seed=None) -> None:
    manifest = {
        "command_line": list(argv),
        "tool_version": __version__,
        "seed": seed,
        "quadrature": DEFAULT_QUADRATURE.as_dict(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": outputs,
    }
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _params(args) -> ChannelParams:
    try:
        return ChannelParams.from_db(args.snr1_db, args.snr2_db)
    except DomainError as exc:
        raise UsageError(str(exc))


def cmd_corners(args, argv) -> int:
    params = _params(args)
    ps, pc = corner_sensing(params), corner_comm(params)
    print(f"SNR1 = {args.snr1_db:g} dB, SNR2 = {args.snr2_db:g} dB")
    print(f"sensing corner        R_s = {ps.rate:#.9g}  E_s = {ps.exponent:#.9g}")
    print(f"communication corner  R_c = {pc.rate:#.9g}  E_c = {pc.exponent:#.9g}")
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("point", "rate_bits", "exponent_bits"))
        w.writerow(("sensing", _fmt(ps.rate), _fmt(ps.exponent)))
        w.writerow(("communication", _fmt(pc.rate), _fmt(pc.exponent)))
        path = Path(args.csv)
        digest = _write(path, buf.getvalue())
        write_manifest(path.with_name(path.name + ".manifest.json"), argv, {path.name: digest})
    return EXIT_OK


def cmd_region(args, argv) -> int:
    scheme = SCHEME_NAMES[args.scheme]
    params = _params(args)
    grid = parse_grid(args.grid, scheme) if args.grid else None
    curve = sweep_region(scheme, params, grid, workers=workers_from_env())
    path = Path(args.out)
    digest = _write(path, curve_csv(curve))
    write_manifest(path.with_name(path.name + ".manifest.json"), argv, {path.name: digest})
    failed = sum(g.point is None for g in curve.grid)
    print(f"wrote {len(curve.grid)} rows to {path} ({failed} noconv)")
    return EXIT_OK


def fig2_panel(snr_db: float, workers: int = 1) -> dict[str, RegionCurve]:
    params = ChannelParams.from_db(snr_db, snr_db)
    return {
        "timeshare": sweep_region(Scheme.TIME_SHARING, params),
        "mixture": sweep_region(Scheme.GAUSSIAN_MIXTURE, params, workers=workers),
        "signedchi": sweep_region(Scheme.SIGNED_CHI, params, workers=workers),
    }


def panel_summary(curves: dict[str, RegionCurve]) -> dict:
    """Agreement and area figures used to compare a panel against time sharing."""
    params = curves["timeshare"].params
    ts, mix, chi = (curves[k].arrays() for k in ("timeshare", "mixture", "signedchi"))
    rel = []
    for r, e in zip(chi[1], chi[2]):
        if r > 0:
            rel.append(abs(mixture_rate_at_exponent(e, params) - r) / r)
    ps, pc = corner_sensing(params), corner_comm(params)
    return {
        "max_rel_rate_gap": max(rel) if rel else float("nan"),
        "area_timeshare": dominated_area(ts[1], ts[2]),
        "area_mixture": dominated_area(mix[1], mix[2]),
        "area_signedchi": dominated_area(chi[1], chi[2]),
        "inside_mixture": float(np.mean(hull_contains(curves["mixture"], ps, pc))),
        "inside_signedchi": float(np.mean(hull_contains(curves["signedchi"], ps, pc))),
    }


def cmd_fig2(args, argv) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers_from_env()
    for db in FIG2_SNRS_DB:
        curves = fig2_panel(db, workers)
        digests = {}
        series = []
        labels = {"timeshare": "time sharing", "mixture": "Gaussian mixture", "signedchi": "signed chi"}
        for name, curve in curves.items():
            fname = f"fig2_{db}db_{name}.csv"
            digests[fname] = _write(out / fname, curve_csv(curve))
            _, r, e = curve.arrays()
            series.append((labels[name], r.tolist(), e.tolist()))
        svg_name = f"fig2_{db}db.svg"
        svg = line_plot(series, f"SNR1 = SNR2 = {db} dB", "rate (bits/use)", "exponent (bits)")
        digests[svg_name] = _write(out / svg_name, svg)
        write_manifest(out / f"fig2_{db}db.manifest.json", argv, digests)
        s = panel_summary(curves)
        noconv = sum(g.point is None for g in curves["signedchi"].grid)
        print(
            f"{db:>3} dB: areas ts={s['area_timeshare']:.4f} mixture={s['area_mixture']:.4f} "
            f"signedchi={s['area_signedchi']:.4f}; mixture/signedchi max rate gap {s['max_rel_rate_gap']:.2%}; "
            f"under time-sharing segment mixture={s['inside_mixture']:.0%} signedchi={s['inside_signedchi']:.0%}; "
            f"noconv={noconv}"
        )
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    params = ChannelParams.from_db(10.0, 10.0)
    suites = ("identities", "mc", "exponents") if args.suite == "all" else (args.suite,)
    results = []
    for suite in suites:
        t0 = time.perf_counter()
        if suite == "identities":
            res = mc.identity_suite()
        elif suite == "mc":
            res = mc.mc_suite(params, trials=args.trials, seed=args.seed)
        else:
            res = mc.exponent_suite(params)
        print(f"[{suite}] {len(res)} checks in {time.perf_counter() - t0:.1f}s")
        for r in res:
            print(f"  {'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
        results.extend(res)
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed; first: {failed[0].name}")
        return EXIT_FAIL
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isacregion", description="Rate-exponent regions for Gaussian ISAC with feedback.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("corners", help="print the sensing- and communication-optimal corner points")
    c.add_argument("--snr1-db", type=float, required=True)
    c.add_argument("--snr2-db", type=float, required=True)
    c.add_argument("--csv", help="also write the corners to this CSV file")
    c.set_defaults(func=cmd_corners)

    r = sub.add_parser("region", help="sweep one achievable curve to CSV")
    r.add_argument("--scheme", choices=sorted(SCHEME_NAMES), required=True)
    r.add_argument("--snr1-db", type=float, required=True)
    r.add_argument("--snr2-db", type=float, required=True)
    r.add_argument("--grid", help="lo:hi:count[:log]; defaults depend on the scheme")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_region)

    f = sub.add_parser("fig2", help="all curves at 10, 15, 20 and 25 dB with SVG overlays")
    f.add_argument("--out-dir", required=True)
    f.set_defaults(func=cmd_fig2)

    v = sub.add_parser("verify", help="run the verification suites")
    v.add_argument("--suite", choices=("identities", "mc", "exponents", "all"), default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=mc.DEFAULT_TRIALS)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "trials", 1000) < 1000:
            raise UsageError("--trials must be at least 1000")
        return args.func(args, ["isacregion", *argv])
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"isacregion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"isacregion: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
