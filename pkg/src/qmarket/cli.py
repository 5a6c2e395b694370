"""Command-line entry point: ``qmarket table | series | dump | fit``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from qmarket import experiment as ex
from qmarket.errors import QMarketError
from qmarket.qexp import FitConfig, fit
from qmarket.supply import SupplyCurve


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML experiment config; flags below override it")
    p.add_argument("--trials", type=int, help="Monte Carlo trials T per N (default 10000)")
    p.add_argument("--seed", type=int, help=f"master seed (default {ex.DEFAULT_SEED})")
    p.add_argument("--pbar", type=float, help="price cap (default 100)")
    p.add_argument("--starts", type=int, help="random starts for the fit (default 500)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmarket", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("table", help="fit q-exponentials for a range of N")
    _common(t)
    t.add_argument("--dist", help="uniform | power-left[:k] | power-right[:k] | piecewise:<file>")
    t.add_argument("--n-range", help="inclusive range such as 5..28")
    t.add_argument("--dump-strategy", metavar="DIR", help="also write each equilibrium as JSON into DIR")

    s = sub.add_parser("series", help="q versus N for several distributions")
    _common(s)
    s.add_argument("--dist", action="append", help="repeatable; overrides the config's distributions")
    s.add_argument("--n-range", help="inclusive range such as 5..28")
    s.add_argument("--summary", help="write the head/tail summary JSON here (csv format only)")

    d = sub.add_parser("dump", help="write intermediate artifacts for one N")
    _common(d)
    d.add_argument("--dist", help="distribution, as for table")
    d.add_argument("--n", type=int, required=True, help="number of firms")
    d.add_argument("--dump-dispatch", action="store_true", help="also write one simulated market day")

    f = sub.add_parser("fit", help="fit a supply-curve CSV (j,V,se) and print the fit JSON")
    f.add_argument("curve", help="supply-curve CSV")
    f.add_argument("--starts", type=int, default=500)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="output file (default stdout)")
    return parser


def _config(args, dist=None) -> ex.ExperimentConfig:
    data, base = {}, None
    if args.config:
        data = ex.load_config(args.config)
        base = Path(args.config).resolve().parent
    cfg = ex.ExperimentConfig.from_dict({k: v for k, v in data.items() if k != "distributions"}, base)
    over = {}
    if dist is not None:
        over["distribution"] = ex.distribution_from(dist)
    if getattr(args, "n_range", None):
        over["n_range"] = ex.parse_n_range(args.n_range)
    if getattr(args, "n", None):
        over["n_range"] = (args.n, args.n)
    for flag, key in (("trials", "trials"), ("seed", "seed"), ("pbar", "pbar"), ("format", "output_format"), ("out", "out")):
        val = getattr(args, flag, None)
        if val is not None:
            over[key] = val
    if args.starts is not None:
        over["fit"] = replace(cfg.fit, n_starts=args.starts)
    return replace(cfg, **over)


def _emit(text: str, out):
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ex.IOFailure(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


def cmd_table(args):
    cfg = _config(args, args.dist)
    if args.dump_strategy:
        stages = [ex.run_single(cfg, n) for n in cfg.ns]
        out = Path(args.dump_strategy)
        try:
            out.mkdir(parents=True, exist_ok=True)
            for s in stages:
                (out / f"strategy_N{s.N}.json").write_text(json.dumps(s.strategy.to_dict()) + "\n", encoding="utf-8")
        except OSError as exc:
            raise ex.IOFailure(f"cannot write to {out}: {exc}") from None
        rows = [
            {"N": s.N, "q": s.fit.q, "alpha": s.fit.alpha, "beta": s.fit.beta, "quadratic_error": s.fit.quadratic_error}
            for s in stages
        ]
    else:
        rows = ex.run_table(cfg)
    _emit(ex.rows_to_csv(rows) if cfg.output_format == "csv" else ex.rows_to_json(rows), cfg.out)


def cmd_series(args):
    data, base = ({}, None)
    if args.config:
        data = ex.load_config(args.config)
        base = Path(args.config).resolve().parent
    dists = args.dist if args.dist else data.get("distributions", [])
    configs = [replace(_config(args), distribution=ex.distribution_from(d, base)) for d in dists]
    result = ex.run_q_series(configs)
    fmt = configs[0].output_format if configs else (args.format or "csv")
    out = configs[0].out if configs else args.out
    if fmt == "json":
        _emit(json.dumps(result, indent=2) + "\n", out)
    else:
        _emit(ex.rows_to_csv(result["series"], ("distribution", "N", "q")), out)
        if args.summary:
            Path(args.summary).write_text(json.dumps(result["summary"], indent=2) + "\n", encoding="utf-8")


def cmd_dump(args):
    cfg = _config(args, args.dist)
    files = ex.dump_intermediates(cfg, args.n, args.out or ".", dispatch=args.dump_dispatch)
    files["fit_seed"] = ex.fit_seed_for(cfg, args.n)
    sys.stdout.write(json.dumps(files, indent=2) + "\n")


def cmd_fit(args):
    try:
        curve = SupplyCurve.from_csv(Path(args.curve))
    except OSError as exc:
        raise ex.IOFailure(f"cannot read {args.curve}: {exc}") from None
    result = fit(curve, FitConfig(n_starts=args.starts, seed=args.seed))
    _emit(result.to_json(), args.out)


COMMANDS = {"table": cmd_table, "series": cmd_series, "dump": cmd_dump, "fit": cmd_fit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except QMarketError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io-error", "message": str(exc)}) + "\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
