"""Command-line entry point: ``gentensor {verify,rank-hist,grid,interp}``.

Exit codes: 0 success, 1 a certificate or check failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import rank_histogram
from .claims import CLAIMS, run_claims
from .config import ConfigError, load_config, resolve
from .constructions import ConstructionError, piecewise_affine_interpolate
from .tensor_core import TensorSizeError, matricize, read_gten, write_gten

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _write_matrix_csv(path: Path, mat: np.ndarray) -> None:
    np.savetxt(path, mat, delimiter=",", fmt="%.17g")


def cmd_verify(args) -> int:
    claims = list(CLAIMS) if args.claims == "all" else [c.strip() for c in args.claims.split(",") if c.strip()]
    unknown = [c for c in claims if c not in CLAIMS]
    if unknown or not claims:
        raise UsageError(f"unknown claim id(s): {', '.join(unknown) or '(none given)'}; "
                         f"known: {', '.join(CLAIMS)}")
    report = run_claims(claims, seed=args.seed, jobs=args.jobs, timing=args.timing)
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    failed = [r["claim"] for r in report if not r["pass"]]
    if failed:
        print(f"{len(failed)} of {len(report)} claims failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_rank_hist(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.levels < 1 or args.m < 1:
        raise UsageError("--levels and --m must be >= 1")
    if args.f == "identity":
        F = None
    else:
        F = read_gten(args.f)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in args.ranks:
        hist = rank_histogram(args.levels, args.m, [r], args.trials, args.seed, args.operator,
                              F=F, f_label=args.f, jobs=args.jobs)
        stem = f"rank_hist_{hist.operator}_L{args.levels}_M{args.m}_r{r}"
        (out / f"{stem}.csv").write_text(hist.to_csv())
        if args.spectra:
            (out / f"{stem}_spectra.csv").write_text(hist.spectra_csv())
        top = max(hist.bins)
        print(f"r={r} median={hist.median():g} max={top} "
              f"max_possible={args.m ** (hist.n // 2)} file={out / (stem + '.csv')}")
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    spec = resolve(cfg, base_dir=Path(args.config).parent)
    tensor = spec.grid(max_elements=args.max_elements)
    write_gten(args.out, tensor)
    if args.matricize:
        _write_matrix_csv(Path(args.matricize), matricize(tensor))
    print(f"wrote {args.out} shape={'x'.join(map(str, tensor.shape))}")
    return EXIT_OK


def cmd_interp(args) -> int:
    try:
        data = np.loadtxt(args.input, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise ConfigError(f"{args.input}: {exc}") from None
    if data.shape[1] < 2:
        raise ConfigError(f"{args.input}: need at least one coordinate column and a target column")
    points, targets = data[:, :-1], data[:, -1]
    W, b, a, cert = piecewise_affine_interpolate(points, targets, seed=args.seed)
    pred = np.maximum(0.0, points @ W.T + b) @ a
    header = ",".join([f"w{i + 1}" for i in range(W.shape[1])] + ["b", "a"])
    np.savetxt(args.out, np.column_stack([W, b, a]), delimiter=",", fmt="%.17g",
               header=header, comments="")
    for i, (p, t) in enumerate(zip(pred, targets)):
        print(f"point {i}: target={t:.17g} fit={p:.17g} residual={abs(p - t):.3g}")
    print(f"max relative residual {cert.witnesses['relative_residual']:.3g} "
          f"({'pass' if cert.passed else 'FAIL'} at {cert.tolerance:g})")
    return EXIT_OK if cert.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gentensor", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run claim certificates, one JSON object per line")
    v.add_argument("--claims", default="all", help="'all' or comma-separated claim ids")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--timing", action="store_true", help="fill in 'millis' (breaks byte-identity)")
    v.add_argument("--out", help="write the report here instead of stdout")
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("rank-hist", help="histogram of matricized HT ranks over random weights")
    h.add_argument("--levels", type=int, default=3)
    h.add_argument("--m", type=int, default=3)
    h.add_argument("--ranks", type=_int_list, default=[2, 4, 8], help="hidden widths, comma-separated")
    h.add_argument("--trials", type=int, default=1000)
    h.add_argument("--seed", type=int, default=42)
    h.add_argument("--operator", choices=["product", "relu-max", "relu-sum"], default="relu-max")
    h.add_argument("--f", default="identity", help="'identity' or a GTEN1 file holding F")
    h.add_argument("--out", default=".", help="output directory")
    h.add_argument("--jobs", type=int, default=1)
    h.add_argument("--spectra", action="store_true", help="also write singular values per trial")
    h.set_defaults(func=cmd_rank_hist)

    g = sub.add_parser("grid", help="dump the grid tensor of a JSON-configured network")
    g.add_argument("config")
    g.add_argument("--out", required=True, help="GTEN1 output path")
    g.add_argument("--matricize", metavar="CSV", help="also write the matricization as CSV")
    g.add_argument("--max-elements", type=int, default=None)
    g.set_defaults(func=cmd_grid)

    i = sub.add_parser("interp", help="fit sum_j a_j relu(w_j.x + b_j) through points")
    i.add_argument("input", help="CSV: coordinates..., target")
    i.add_argument("--out", required=True, help="weights CSV (w..., b, a)")
    i.add_argument("--seed", type=int, default=0)
    i.set_defaults(func=cmd_interp)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, TensorSizeError, ConstructionError, ValueError, OSError) as exc:
        print(f"gentensor: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
