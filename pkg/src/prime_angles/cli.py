"""Command-line front end: ``prime-angles <subcommand> ...``.

Every run that writes ``--out FILE`` also writes ``FILE.manifest.json``
with the parameters, seeds, code version, wall time and the SHA-256 of
each output.  Without ``--out`` the payload goes to stdout.

Exit status: 0 success, 1 a requested check failed, 2 bad input,
3 budget exceeded.
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
from pathlib import Path

from . import __version__
from .errors import BudgetError, ValidationError

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# argument types


def sci_int(text: str) -> int:
    """Integer flag that also takes ``1e8`` or ``2.5e3``."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v) or v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def int_list(text: str) -> list[int]:
    return [sci_int(t) for t in text.split(",") if t.strip()]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# output + manifest


class Run:
    def __init__(self, args):
        self.args = args
        self.start = time.perf_counter()
        self.outputs: list[Path] = []

    def emit(self, text: str | bytes, path=None):
        path = path or self.args.out
        if path is None:
            sys.stdout.write(text if isinstance(text, str) else text.hex())
            return
        p = Path(path)
        if isinstance(text, str):
            p.write_text(text)
        else:
            p.write_bytes(text)
        self.outputs.append(p)

    def add_file(self, path):
        self.outputs.append(Path(path))

    def finish(self):
        if not self.outputs:
            return
        params = {k: v for k, v in vars(self.args).items() if k not in ("func",)}
        manifest = {
            "subcommand": self.args.command,
            "params": params,
            "seeds": [params["seed"]] if params.get("seed") is not None else [],
            "version": __version__,
            "wall_time_s": round(time.perf_counter() - self.start, 6),
            "outputs": {str(p): hashlib.sha256(p.read_bytes()).hexdigest() for p in self.outputs},
        }
        Path(str(self.outputs[0]) + ".manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def _table(args):
    from .gaussian_primes import prime_ideal_angles, read_angle_cache

    if getattr(args, "cache", None):
        table = read_angle_cache(args.cache)
        if args.x is not None:
            if args.x > table.x:
                raise ValidationError(f"cache covers x <= {table.x}, asked for {args.x}")
            table = table.restrict(args.x)
    else:
        if args.x is None:
            raise ValidationError("--x is required without --cache")
        table = prime_ideal_angles(args.x, threads=args.threads)
    return table.split_only() if args.split_only else table


def cmd_sieve(args, run: Run):
    from .gaussian_primes import write_angle_cache

    table = _table(args)
    fmt = args.format or ("bin" if args.out and str(args.out).endswith(".bin") else "csv")
    if fmt == "bin":
        if args.out is None:
            raise ValidationError("binary output needs --out")
        write_angle_cache(args.out, table)
        run.add_file(args.out)
    else:
        rows = zip(table.norm.tolist(), table.angle.tolist(), table.kind.tolist(),
                   table.a.tolist(), table.b.tolist())
        run.emit(csv_text(("norm", "angle", "kind", "a", "b"), rows))
    print(f"{len(table)} prime ideals with norm <= {table.x}", file=sys.stderr)
    return EXIT_OK


def cmd_variance(args, run: Run):
    from .sector_stats import CSV_HEADER, sector_variance, sliding_variance, sliding_variance_exact

    table = _table(args)
    N = len(table)
    rows = []
    for K in args.K:
        if K < 1:
            raise ValidationError("K must be >= 1")
        if args.mode == "discrete":
            rows.append(sector_variance(table, K, x=table.x).row())
            continue
        if args.mode == "sliding":
            var = sliding_variance(table, K, args.M or max(10 * K, 10000))
        else:
            var = sliding_variance_exact(table, K)
        mean = N / K
        beta = math.log(K) / math.log(N) if N >= 2 else None
        rows.append((table.x, K, N, beta, mean, var, var / mean if N else 0.0))
    run.emit(csv_text(CSV_HEADER, rows))
    return EXIT_OK


def cmd_ratio_curve(args, run: Run):
    from .sector_stats import CSV_HEADER, beta_grid, ratio_curve

    table = _table(args)
    rows = [r.row() for r in ratio_curve(table.x, beta_grid(args.betas), table=table)]
    run.emit(csv_text(CSV_HEADER, rows))
    return EXIT_OK


def cmd_smooth(args, run: Run):
    from .gaussian_primes import prime_power_records
    from .smooth_model import (
        SMOOTH_CSV_HEADER,
        default_kmax,
        standard_windows,
        variance_parseval,
        variance_quadrature,
    )

    w = standard_windows()
    table = prime_power_records(args.X, threads=args.threads)
    rows = []
    for K in args.K:
        kmax = args.kmax or default_kmax(K, w)
        vp = variance_parseval(K, args.X, w, kmax=kmax, table=table, method=args.method)
        vq = variance_quadrature(K, args.X, w, M=args.M, table=table) if args.quadrature else None
        if K >= 2:
            pred = w.c2 * args.X / K * min(math.log(args.X), 2 * math.log(K))
            ratio = vp / pred
        else:
            pred = ratio = None
        rows.append((args.X, K, kmax, vp, vq, pred, ratio))
    run.emit(csv_text(SMOOTH_CSV_HEADER, rows))
    return EXIT_OK


def cmd_ff_variance(args, run: Run):
    from .ff_spectral import spectral_report
    from .ff_stats import FF_CSV_HEADER, ff_variance

    rows = []
    for q in args.q:
        for nu in args.nu:
            if args.method == "brute":
                r = ff_variance(q, args.k, nu)
            elif args.method == "spectral":
                r = spectral_report(q, args.k, nu)
            else:
                r = ff_variance(q, args.k, nu) if q ** nu <= 10 ** 6 else spectral_report(q, args.k, nu)
            rows.append(r.row())
    run.emit(csv_text(FF_CSV_HEADER, rows))
    return EXIT_OK


CHECKS = ("orthogonality", "rh", "explicit", "variance")


def cmd_ff_spectral(args, run: Run):
    import numpy as np

    from .ff_spectral import (
        build_character_table,
        explicit_formula,
        l_polynomial,
        prime_sums,
        spectral_variance,
    )
    from .ff_stats import ff_variance

    checks = [c.strip() for c in args.check.split(",") if c.strip()]
    bad = [c for c in checks if c not in CHECKS]
    if bad:
        raise ValidationError(f"unknown check(s) {bad}; choose from {list(CHECKS)}")
    table = build_character_table(args.q, args.k)
    spectra = [l_polynomial(xi) for xi in list(table)[1:]]
    report: dict = {"q": args.q, "k": args.k, "characters": len(table), "checks": {}}
    if "orthogonality" in checks:
        V = table.value_matrix()
        res = float(np.abs(V @ V.conj().T / len(table) - np.eye(len(table))).max())
        report["checks"]["orthogonality"] = {"max_residual": res, "tolerance": 1e-10, "passed": bool(res <= 1e-10)}
    if "rh" in checks:
        res = float(max((s.rh_residual for s in spectra), default=0.0))
        res1 = float(max((s.trivial_zero_residual for s in spectra), default=0.0))
        report["checks"]["rh"] = {"max_residual": res, "trivial_zero_residual": res1,
                                  "residuals": [float(s.rh_residual) for s in spectra],
                                  "tolerance": 1e-9, "passed": bool(res <= 1e-9 and res1 <= 1e-9)}
    if "explicit" in checks:
        ps = prime_sums(args.q, args.k, args.nu_max)
        worst = 0.0
        for s in spectra:
            for nu in range(1, args.nu_max + 1):
                worst = max(worst, abs(explicit_formula(s, nu) - ps[s.id, nu - 1]))
        worst = float(worst)
        report["checks"]["explicit"] = {"max_residual": worst, "tolerance": 1e-6, "passed": bool(worst <= 1e-6)}
    if "variance" in checks:
        worst = 0.0
        for nu in range(1, args.nu_max + 1):
            if args.q ** nu > 10 ** 6:
                break
            b = ff_variance(args.q, args.k, nu).var_psi
            s = spectral_variance(args.q, args.k, nu)
            worst = max(worst, abs(b - s) / max(abs(b), 1e-300) if b else abs(s))
        worst = float(worst)
        report["checks"]["variance"] = {"max_relative": worst, "tolerance": 1e-6, "passed": bool(worst <= 1e-6)}
    report["spectra"] = [s.to_dict() for s in spectra]
    run.emit(json.dumps(report, indent=1, sort_keys=True) + "\n")
    ok = all(c["passed"] for c in report["checks"].values())
    return EXIT_OK if ok else EXIT_CHECK


def cmd_rmt(args, run: Run):
    from .rmt_model import RMT_CSV_HEADER, Weight, linear_statistic_check, moment_table

    if args.samples > 0 and args.seed is None:
        raise ValidationError("randomized runs need an explicit --seed")
    if args.table is not None:
        T = moment_table(args.group, args.dim, args.table, args.samples, args.seed, threads=args.threads)
        rows = []
        for i in T.powers:
            for j in T.powers:
                rows.append((T.group.value, T.dim, int(i), int(j), T.samples, T.mean[i, j].real,
                             T.mean[i, j].imag, T.se_re[i, j], T.se_im[i, j], T.exact[i, j]))
        header = ("group", "dim", "m", "m2", "samples", "mc_re", "mc_im", "se_re", "se_im", "exact")
        run.emit(csv_text(header, rows))
        return EXIT_OK
    w = Weight.from_json(args.weight) if args.weight else Weight.constant()
    r = linear_statistic_check(args.group, args.dim, args.n, w, args.samples, seed=args.seed or 0,
                               threads=args.threads)
    run.emit(csv_text(RMT_CSV_HEADER, [r.row()]))
    return EXIT_OK


def cmd_gaps(args, run: Run):
    from .sector_stats import gap_statistics, repulsion_margin

    table = _table(args)
    lo, hi = gap_statistics(table)
    margin = repulsion_margin(table) if args.repulsion else None
    run.emit(csv_text(("x", "N", "min_gap", "max_gap", "repulsion_margin"),
                      [(table.x, len(table), lo, hi, margin)]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, seedable=False):
    p.add_argument("--out", default=None, help="output file (default: stdout, no manifest)")
    p.add_argument("--threads", type=sci_int, default=os.cpu_count() or 1)
    if seedable:
        p.add_argument("--seed", type=sci_int, default=None)


def _angles_source(p):
    p.add_argument("--x", type=sci_int, required=False, default=None, help="norm bound")
    p.add_argument("--cache", default=None, help="read angles from a binary cache written by 'sieve'")
    p.add_argument("--split-only", action="store_true", help="only ideals above split primes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prime-angles", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sieve", help="enumerate prime ideal angles")
    _angles_source(p)
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    _common(p)
    p.set_defaults(func=cmd_sieve)

    p = sub.add_parser("variance", help="sector count variance for given K")
    _angles_source(p)
    p.add_argument("--K", type=int_list, required=True, help="comma list, e.g. 10,1e3")
    p.add_argument("--mode", choices=("discrete", "sliding", "sliding-exact"), default="discrete")
    p.add_argument("--M", type=sci_int, default=None, help="grid size for --mode sliding")
    _common(p)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("figure1", help="variance/mean ratio across K = N^beta")
    _angles_source(p)
    p.add_argument("--betas", default="0.1:1.4:0.05", help="start:stop:step (inclusive) or list")
    _common(p)
    p.set_defaults(func=cmd_ratio_curve)

    p = sub.add_parser("smooth-variance", help="smoothed-count variance, Parseval and quadrature")
    p.add_argument("--X", type=sci_int, required=True)
    p.add_argument("--K", type=int_list, required=True)
    p.add_argument("--kmax", type=sci_int, default=None)
    p.add_argument("--method", choices=("auto", "fourier", "pairs"), default="auto")
    p.add_argument("--M", type=sci_int, default=None, help="quadrature points")
    p.add_argument("--no-quadrature", dest="quadrature", action="store_false")
    _common(p)
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("ff-variance", help="function-field sector variance")
    p.add_argument("--q", type=int_list, required=True)
    p.add_argument("--k", type=sci_int, required=True)
    p.add_argument("--nu", type=int_list, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--brute", dest="method", action="store_const", const="brute")
    g.add_argument("--spectral", dest="method", action="store_const", const="spectral")
    p.set_defaults(method="auto")
    _common(p)
    p.set_defaults(func=cmd_ff_variance)

    p = sub.add_parser("ff-spectral", help="characters, L-polynomials and identity checks")
    p.add_argument("--q", type=sci_int, required=True)
    p.add_argument("--k", type=sci_int, required=True)
    p.add_argument("--check", default=",".join(CHECKS))
    p.add_argument("--nu-max", type=sci_int, default=6)
    _common(p)
    p.set_defaults(func=cmd_ff_spectral)

    p = sub.add_parser("rmt", help="Haar Monte Carlo against exact trace moments")
    p.add_argument("--group", choices=("u", "usp"), required=True)
    p.add_argument("--dim", type=sci_int, required=True)
    p.add_argument("--n", type=sci_int, default=1)
    p.add_argument("--samples", type=sci_int, default=0)
    p.add_argument("--weight", default=None, help="JSON file of Fourier modes {l: value or [re, im]}")
    p.add_argument("--table", type=sci_int, default=None, metavar="MAXPOW",
                   help="emit the full moment table for powers 0..MAXPOW instead")
    _common(p, seedable=True)
    p.set_defaults(func=cmd_rmt)

    p = sub.add_parser("gaps", help="smallest/largest angle gap and repulsion margin")
    _angles_source(p)
    p.add_argument("--repulsion", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_gaps)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    r = Run(args)
    try:
        code = args.func(args, r)
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    r.finish()
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
