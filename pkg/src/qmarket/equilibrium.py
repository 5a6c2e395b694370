"""Symmetric mixed-strategy equilibrium of the unit-capacity, zero-cost reverse auction.

A firm bidding ``p`` while its ``N-1`` rivals draw from ``F`` earns, for
demand ``i``, ``p * H_i(F(p))`` when it is the marginal unit plus the
(i-1)-th lowest rival bid when it is inframarginal, where
``H_i(u) = C(N-1, i-1) u^(i-1) (1-u)^(N-i)`` and ``G_i(u)`` is the binomial
tail ``Pr(Bin(N-1, u) >= i-1)``.  Writing ``h = sum pi_i H_i`` and
``g = sum pi_i G_i``, indifference across the support gives

    d log p / dF = psi(F) = (g'(F) - h'(F)) / h(F)
                 = (N-1) sum_{i<N} pi_i B_{i-1,N-2}(F) / sum_i pi_i B_{i-1,N-1}(F),

with Bernstein polynomials ``B_{k,n}``.  Separating variables with
``p(1) = pbar`` yields the quantile map ``p(F) = pbar exp(-int_F^1 psi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from qmarket.demand import DemandPMF, validate_for_equilibrium
from qmarket.errors import DomainError, InvalidArgument, NonmonotoneEquilibrium

DEFAULT_NODES = 4097
QUAD_RTOL = 1e-10


def bernstein(n: int, u) -> np.ndarray:
    """Matrix of ``B_{k,n}(u)`` for k = 0..n, shape ``(len(u), n+1)``; u in (0, 1)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    with np.errstate(divide="ignore"):
        lu, l1u = np.log(u)[:, None], np.log1p(-u)[:, None]
    return np.exp(logc + k * lu + (n - k) * l1u)


def _psi(u, probs: np.ndarray) -> np.ndarray:
    # Endpoint values are the finite limits of the ratio.
    N = len(probs)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(u)
    lo, hi = u <= 0.0, u >= 1.0
    mid = ~(lo | hi)
    out[lo] = N - 1
    out[hi] = (N - 1) * probs[N - 2] / probs[N - 1]
    if np.any(mid):
        um = u[mid]
        num = (N - 1) * (bernstein(N - 2, um) @ probs[: N - 1])
        den = bernstein(N - 1, um) @ probs
        out[mid] = num / den
    return out


def integrand(u, pmf: DemandPMF):
    """Log-derivative of the equilibrium quantile map at ``F = u``, for u in (0, 1)."""
    validate_for_equilibrium(pmf)
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise DomainError(f"integrand is defined on the open interval (0, 1); got {u!r}")
    out = _psi(arr, pmf.probs)
    return float(out[0]) if arr.ndim == 0 else out


def _hermite(t, h, y0, y1, m0, m1):
    t2 = t * t
    t3 = t2 * t
    return (
        (2 * t3 - 3 * t2 + 1) * y0
        + (t3 - 2 * t2 + t) * h * m0
        + (-2 * t3 + 3 * t2) * y1
        + (t3 - t2) * h * m1
    )


def _hermite_dt(t, h, y0, y1, m0, m1):
    t2 = t * t
    return (6 * t2 - 6 * t) * (y0 - y1) + (3 * t2 - 4 * t + 1) * h * m0 + (3 * t2 - 2 * t) * h * m1


def _monotone_slopes(x, y, m):
    """Limit Hermite slopes to the Fritsch-Carlson region so each cubic stays monotone."""
    delta = np.diff(y) / np.diff(x)
    m = m.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        a = m[:-1] / delta
        b = m[1:] / delta
    r = a * a + b * b
    bad = np.where(r > 9.0)[0]
    for k in bad:
        tau = 3.0 / math.sqrt(r[k])
        m[k] = tau * a[k] * delta[k]
        m[k + 1] = tau * b[k] * delta[k]
    return m


@dataclass(frozen=True, eq=False)
class EquilibriumStrategy:
    """Tabulated quantile map ``F -> p(F)`` of the symmetric equilibrium.

    ``log_p`` and ``slope`` (= d log p / dF) at the nodes define a monotone
    cubic Hermite interpolant of ``log p``; ``p_m = p(0)`` is the support floor.
    """

    pmf: DemandPMF
    pbar: float
    F: np.ndarray
    log_p: np.ndarray
    slope: np.ndarray

    @property
    def N(self):
        return self.pmf.N

    @property
    def p_m(self):
        return float(np.exp(self.log_p[0]))

    @property
    def p(self):
        p = np.exp(self.log_p)
        p[-1] = self.pbar
        return p

    def quantile(self, v):
        """Price at cumulative probability ``v`` (clamped to [0, 1])."""
        v = np.asarray(v, dtype=float)
        vc = np.clip(v, 0.0, 1.0)
        F, L, m = self.F, self.log_p, self.slope
        k = np.clip(np.searchsorted(F, vc, side="right") - 1, 0, len(F) - 2)
        h = F[k + 1] - F[k]
        t = (vc - F[k]) / h
        out = np.exp(_hermite(t, h, L[k], L[k + 1], m[k], m[k + 1]))
        out = np.where(vc >= 1.0, self.pbar, out)
        out = np.where(vc <= 0.0, self.p_m, out)
        return float(out) if out.ndim == 0 else out

    def cdf(self, p):
        """Equilibrium CDF: inverse of :meth:`quantile`, clamped to 0 below p_m and 1 above pbar."""
        p = np.asarray(p, dtype=float)
        scalar = p.ndim == 0
        p = np.atleast_1d(p)
        out = np.empty_like(p)
        below = p <= self.p_m
        above = p >= self.pbar
        out[below] = 0.0
        out[above] = 1.0
        inner = ~(below | above)
        if np.any(inner):
            out[inner] = self._invert(np.log(p[inner]))
        return float(out[0]) if scalar else out

    def _invert(self, target):
        F, L, m = self.F, self.log_p, self.slope
        k = np.clip(np.searchsorted(L, target, side="right") - 1, 0, len(F) - 2)
        h = F[k + 1] - F[k]
        y0, y1, m0, m1 = L[k], L[k + 1], m[k], m[k + 1]
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        t = (target - y0) / (y1 - y0)
        # Safeguarded Newton on the local cubic; the bracket keeps it monotone-safe.
        for _ in range(60):
            f = _hermite(t, h, y0, y1, m0, m1) - target
            lo = np.where(f < 0, t, lo)
            hi = np.where(f > 0, t, hi)
            d = _hermite_dt(t, h, y0, y1, m0, m1)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_new = t - f / d
            bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
            t_new = np.where(bad, 0.5 * (lo + hi), t_new)
            if np.all(np.abs(t_new - t) <= 1e-15):
                t = t_new
                break
            t = t_new
        return F[k] + t * h

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws; ``1 - random()`` lies in (0, 1]."""
        v = 1.0 - rng.random(size)
        return self.quantile(v)

    def mean(self):
        """Population mean of the bid distribution, ``int_0^1 p(u) du``."""
        x, w = np.polynomial.legendre.leggauss(16)
        a, b = self.F[:-1, None], self.F[1:, None]
        u = 0.5 * (b - a) * x + 0.5 * (b + a)
        return float(np.sum(0.5 * (b - a) * w * self.quantile(u)))

    def to_dict(self):
        return {
            "pi": self.pmf.probs.tolist(),
            "N": self.N,
            "pbar": self.pbar,
            "p_m": self.p_m,
            "F": self.F.tolist(),
            "log_p": self.log_p.tolist(),
            "slope": self.slope.tolist(),
            "p": self.p.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            pmf=DemandPMF(np.asarray(d["pi"], dtype=float)),
            pbar=float(d["pbar"]),
            F=np.asarray(d["F"], dtype=float),
            log_p=np.asarray(d["log_p"], dtype=float),
            slope=np.asarray(d["slope"], dtype=float),
        )


def sample_bid(strategy: EquilibriumStrategy, rng: np.random.Generator) -> float:
    return strategy.sample(rng)


def cdf(strategy: EquilibriumStrategy, p):
    return strategy.cdf(p)


def chebyshev_nodes(n_nodes: int) -> np.ndarray:
    """Chebyshev-Lobatto points on [0, 1], clustered at both ends, exact 0 and 1."""
    k = np.arange(n_nodes)
    F = 0.5 * (1.0 - np.cos(np.pi * k / (n_nodes - 1)))
    F[0], F[-1] = 0.0, 1.0
    # Symmetrize to cancel cosine rounding.
    return 0.5 * (F + (1.0 - F[::-1]))


def _panel_integrals(F, probs, order):
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = F[:-1, None], F[1:, None]
    u = 0.5 * (b - a) * x + 0.5 * (b + a)
    vals = _psi(u.ravel(), probs).reshape(u.shape)
    if np.any(vals < 0):
        bad = u[vals < 0][0]
        raise NonmonotoneEquilibrium(f"equilibrium integrand is negative at F={bad:.6g}")
    return np.sum(0.5 * (b - a) * w * vals, axis=1)


def solve(pmf: DemandPMF, pbar: float = 100.0, n_nodes: int = DEFAULT_NODES, order: int = 16) -> EquilibriumStrategy:
    """Integrate the separable equilibrium equation from ``p(1) = pbar`` downward."""
    validate_for_equilibrium(pmf)
    if not pbar > 0 or not math.isfinite(pbar):
        raise InvalidArgument(f"price cap must be positive, got {pbar!r}")
    if n_nodes < 3:
        raise InvalidArgument("n_nodes must be >= 3")
    probs = pmf.probs
    F = chebyshev_nodes(n_nodes)

    panels = _panel_integrals(F, probs, order)
    while True:
        finer = _panel_integrals(F, probs, 2 * order)
        total = float(np.sum(finer))
        if abs(total - float(np.sum(panels))) <= QUAD_RTOL * max(total, 1e-300) or order >= 256:
            panels = finer
            break
        order *= 2
        panels = finer

    # tail[k] = integral of psi over [F_k, 1], summed from the right.
    tail = np.concatenate((np.cumsum(panels[::-1])[::-1], [0.0]))
    log_p = math.log(pbar) - tail
    if not np.all(np.diff(log_p) > 0):
        raise NonmonotoneEquilibrium("equilibrium quantile map is not strictly increasing")
    slope = _monotone_slopes(F, log_p, _psi(F, probs))
    return EquilibriumStrategy(pmf=pmf, pbar=float(pbar), F=F, log_p=log_p, slope=slope)
