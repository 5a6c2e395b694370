"""Expected aggregated supply curves: Monte Carlo estimate and order-statistic oracle."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from qmarket import rng as qrng
from qmarket.equilibrium import EquilibriumStrategy
from qmarket.errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class SupplyCurve:
    """Average j-th lowest bid ``values[j-1]`` with per-component standard errors.

    ``T`` and ``seed`` are ``None`` for the exact oracle, whose errors are zero.
    """

    values: np.ndarray
    std_errors: np.ndarray
    N: int
    T: int | None = None
    seed: int | None = None

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "V", "se"])
        for j, (v, se) in enumerate(zip(self.values, self.std_errors), 1):
            w.writerow([j, repr(float(v)), repr(float(se))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "SupplyCurve":
        text = path_or_text
        if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
            text = Path(path_or_text).read_text(encoding="utf-8")
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"j", "V", "se"}:
            raise InvalidArgument("supply curve CSV must have header j,V,se")
        rows.sort(key=lambda r: int(r["j"]))
        if [int(r["j"]) for r in rows] != list(range(1, len(rows) + 1)):
            raise InvalidArgument("supply curve CSV must list j = 1..N")
        values = np.array([float(r["V"]) for r in rows])
        se = np.array([float(r["se"]) for r in rows])
        return cls(values=values, std_errors=se, N=len(values))


def _simulate_block(strategy, seed, block):
    b, _, count = block
    gen = qrng.block_rng(seed, b)
    bids = np.sort(strategy.sample(gen, (count, strategy.N)), axis=1)
    s = bids.sum(axis=0)
    m2 = ((bids - s / count) ** 2).sum(axis=0)
    return count, s, m2


def simulate(strategy: EquilibriumStrategy, T: int, seed: int = 0, workers: int | None = None) -> SupplyCurve:
    """Average of ``T`` sorted vectors of ``N`` independent equilibrium bids."""
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise InvalidArgument(f"trial count must be an integer >= 1, got {T!r}")
    parts = qrng.map_ordered(lambda blk: _simulate_block(strategy, seed, blk), qrng.blocks(T), workers)
    n, total, m2 = qrng.merge_moments(parts)
    values = total / n
    if n > 1:
        se = np.sqrt(m2 / (n - 1)) / math.sqrt(n)
    else:
        se = np.full(strategy.N, np.nan)
    return SupplyCurve(values=values, std_errors=se, N=strategy.N, T=int(T), seed=seed)


def _beta_pdf(u, j, n):
    # Beta(j, n-j+1) density in log space; binomial factors overflow otherwise.
    logc = gammaln(n + 1) - gammaln(j) - gammaln(n - j + 1)
    return np.exp(logc + (j - 1) * np.log(u) + (n - j) * np.log1p(-u))


def exact_curve(strategy: EquilibriumStrategy, N: int | None = None, order: int = 16) -> SupplyCurve:
    """Expected order statistics ``E[X_(j)] = int_0^1 p(u) Beta(j, N-j+1)(u) du``."""
    N = strategy.N if N is None else int(N)
    if N < 1:
        raise InvalidArgument("N must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = strategy.F[:-1, None], strategy.F[1:, None]
    u = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
    wts = (0.5 * (b - a) * w).ravel()
    pu = strategy.quantile(u)
    j = np.arange(1, N + 1)[:, None]
    values = (_beta_pdf(u[None, :], j, N) * (wts * pu)[None, :]).sum(axis=1)
    return SupplyCurve(values=values, std_errors=np.zeros(N), N=N)


@dataclass(frozen=True)
class CompareReport:
    z: np.ndarray
    passed: bool
    threshold: float = 3.0

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z)))


def compare(mc: SupplyCurve, exact: SupplyCurve, threshold: float = 3.0) -> CompareReport:
    """Per-component z-scores of a Monte Carlo curve against the exact one."""
    if mc.N != exact.N:
        raise InvalidArgument(f"curve lengths differ: {mc.N} vs {exact.N}")
    diff = mc.values - exact.values
    se = mc.std_errors
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0, 0.0, diff / se)
    passed = bool(np.all(np.abs(z) <= threshold))
    return CompareReport(z=z, passed=passed, threshold=threshold)
