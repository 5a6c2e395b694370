"""End-to-end experiment driver: distribution -> demand pmf -> equilibrium -> supply curve -> fit."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from qmarket import rng as qrng
from qmarket.clearing import BidBook, clear, draw_ranking
from qmarket.demand import BackgroundDistribution, discretize, load_piecewise, parse_distribution, sample_demand, validate_for_equilibrium
from qmarket.equilibrium import solve
from qmarket.errors import ExperimentError, InvalidArgument, QMarketError
from qmarket.qexp import FitConfig, fit
from qmarket.supply import exact_curve, simulate

log = logging.getLogger(__name__)

DEFAULT_SEED = 2015
TABLE_COLUMNS = ("N", "q", "alpha", "beta", "quadratic_error")


class IOFailure(QMarketError):
    code = "io-error"


def parse_n_range(text) -> tuple[int, int]:
    """``"5..28"``, ``"5-28"``, ``"7"`` or a 2-sequence -> inclusive ``(lo, hi)``."""
    if isinstance(text, (list, tuple)):
        lo, hi = (int(text[0]), int(text[-1]))
    else:
        s = str(text).strip()
        for sep in ("..", "-", ":"):
            if sep in s:
                a, b = s.split(sep, 1)
                lo, hi = int(a), int(b)
                break
        else:
            lo = hi = int(s)
    return lo, hi


def distribution_from(obj, base_dir: Path | None = None) -> BackgroundDistribution:
    """Build a distribution from a ``--dist`` string or a config mapping."""
    if isinstance(obj, BackgroundDistribution):
        return obj
    if isinstance(obj, str):
        if obj.startswith("piecewise:") and base_dir is not None:
            path = Path(obj.split(":", 1)[1])
            return load_piecewise(path if path.is_absolute() else base_dir / path)
        return parse_distribution(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InvalidArgument(f"cannot interpret distribution {obj!r}")
    kind = obj["kind"]
    if kind == "piecewise":
        if "path" in obj:
            path = Path(obj["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return load_piecewise(path)
        return BackgroundDistribution.piecewise(obj["breakpoints"], obj["levels"])
    if kind in ("power-left", "power-right"):
        return BackgroundDistribution(kind, exponent=float(obj.get("exponent", 2)))
    return BackgroundDistribution(kind)


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: BackgroundDistribution = field(default_factory=BackgroundDistribution.uniform)
    n_range: tuple[int, int] = (5, 28)
    trials: int = 10_000
    pbar: float = 100.0
    seed: int = DEFAULT_SEED
    fit: FitConfig = field(default_factory=FitConfig)
    output_format: str = "csv"
    out: str | None = None

    def __post_init__(self):
        lo, hi = self.n_range
        if lo > hi:
            raise InvalidArgument(f"empty N range {self.n_range}")
        if lo < 3:
            raise InvalidArgument("every N must be >= 3")
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        if not self.pbar > 0:
            raise InvalidArgument("pbar must be positive")
        if self.output_format not in ("csv", "json"):
            raise InvalidArgument(f"unknown output format {self.output_format!r}")

    @property
    def ns(self):
        return list(range(self.n_range[0], self.n_range[1] + 1))

    @classmethod
    def from_dict(cls, d, base_dir: Path | None = None):
        kw = {}
        if "distribution" in d:
            kw["distribution"] = distribution_from(d["distribution"], base_dir)
        if "n_range" in d:
            kw["n_range"] = parse_n_range(d["n_range"])
        for key, conv in (("trials", int), ("pbar", float), ("seed", int), ("out", str)):
            if key in d:
                kw[key] = conv(d[key])
        if "format" in d:
            kw["output_format"] = str(d["format"])
        if "fit" in d:
            kw["fit"] = FitConfig.from_dict(d["fit"])
        return cls(**kw)


def load_config(path) -> dict:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise IOFailure(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidArgument(f"{path}: config must be a mapping")
    return data


@dataclass(frozen=True)
class Stage:
    """Everything computed for one N."""

    N: int
    pmf: object
    strategy: object
    curve: object
    fit: object


def run_single(config: ExperimentConfig, N: int) -> Stage:
    try:
        pmf = discretize(config.distribution, N)
        validate_for_equilibrium(pmf)
        strategy = solve(pmf, config.pbar)
        curve = simulate(strategy, config.trials, seed=qrng.derive_seed(config.seed, N, 0), workers=1)
        fit_cfg = replace(config.fit, seed=qrng.derive_seed(config.seed, N, 1, config.fit.seed))
        result = fit(curve, fit_cfg)
    except QMarketError as exc:
        raise ExperimentError(N, exc) from exc
    log.info("N=%d q=%.6g error=%.3g", N, result.q, result.quadratic_error)
    return Stage(N=N, pmf=pmf, strategy=strategy, curve=curve, fit=result)


def run_table(config: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """One ``{N, q, alpha, beta, quadratic_error}`` row per N, in N order."""
    stages = qrng.map_ordered(lambda n: run_single(config, n), config.ns, workers)
    return [
        {"N": s.N, "q": s.fit.q, "alpha": s.fit.alpha, "beta": s.fit.beta, "quadratic_error": s.fit.quadratic_error}
        for s in stages
    ]


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def rows_to_csv(rows, columns=TABLE_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row[c] if isinstance(row[c], str) else _fmt(row[c]) for c in columns])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps(rows, indent=2) + "\n"


def run_q_series(configs, workers: int | None = None) -> dict:
    """Long-format ``(distribution, N, q)`` series plus head/tail mean |q - 1| per distribution."""
    series, summary = [], []
    for cfg in configs:
        name = cfg.distribution.describe()
        rows = run_table(cfg, workers)
        for r in rows:
            series.append({"distribution": name, "N": r["N"], "q": r["q"]})
        dev = [abs(r["q"] - 1.0) for r in rows]
        summary.append(
            {
                "distribution": name,
                "head_N": [r["N"] for r in rows[:4]],
                "tail_N": [r["N"] for r in rows[-4:]],
                "head_mean_abs_q_minus_1": float(np.mean(dev[:4])),
                "tail_mean_abs_q_minus_1": float(np.mean(dev[-4:])),
                "all_q_above_1": all(r["q"] > 1 for r in rows),
            }
        )
    return {"series": series, "summary": summary}


def sample_dispatch(strategy, pmf, seed) -> dict:
    """One simulated market day under the equilibrium, as a JSON-ready dict."""
    gen = qrng.block_rng(qrng.subseed(seed, 2), 0)
    prices = strategy.sample(gen, strategy.N)
    d = sample_demand(pmf, gen)
    book = BidBook.unit_market(prices, strategy.pbar)
    result = clear(book, draw_ranking(book, gen), d)
    return {"bids": prices.tolist(), **result.to_dict()}


def dump_intermediates(config: ExperimentConfig, N: int, out_dir, dispatch: bool = False) -> dict:
    """Write strategy JSON, Monte Carlo and exact supply-curve CSVs and fit JSON for one N."""
    stage = run_single(config, N)
    out_dir = Path(out_dir)
    files = {
        "strategy": out_dir / f"strategy_N{N}.json",
        "supply_mc": out_dir / f"supply_mc_N{N}.csv",
        "supply_exact": out_dir / f"supply_exact_N{N}.csv",
        "fit": out_dir / f"fit_N{N}.json",
    }
    payloads = {
        "strategy": json.dumps(stage.strategy.to_dict()) + "\n",
        "supply_mc": stage.curve.to_csv(),
        "supply_exact": exact_curve(stage.strategy).to_csv(),
        "fit": stage.fit.to_json(),
    }
    if dispatch:
        files["dispatch"] = out_dir / f"dispatch_N{N}.json"
        payloads["dispatch"] = json.dumps(sample_dispatch(stage.strategy, stage.pmf, config.seed), indent=2) + "\n"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for key, path in files.items():
            path.write_text(payloads[key], encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write to {out_dir}: {exc}") from None
    return {k: str(v) for k, v in files.items()}


def fit_seed_for(config: ExperimentConfig, N: int) -> int:
    """Seed ``run_single`` gives the fit for this N (to re-run a dumped fit exactly)."""
    return qrng.derive_seed(config.seed, N, 1, config.fit.seed)
