"""Least-squares fitting of ``alpha * exp_q(beta * x)`` to a supply curve.

The curve is sampled at the bin midpoints ``x_j = j - 1/2``.  For fixed
``(q, beta)`` the error is quadratic in ``alpha``, so alpha is projected out
in closed form and only ``(q, log beta)`` is searched: many random starts,
each polished by Nelder-Mead.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from qmarket.errors import FitFailed, InvalidArgument, NoFeasibleAlpha, PoleDomainError
from qmarket.supply import SupplyCurve

# |q - 1| at or below this uses exp(x); the slack absorbs rounding of 1 +/- 1e-8.
Q_ONE_WINDOW = 1e-8 * (1 + 1e-7)


def q_exponential(q: float, x):
    """Tsallis q-exponential ``[1 + (1-q) x]^(1/(1-q))``.

    For q < 1 the function is cut off to 0 where the base is nonpositive; for
    q > 1 a nonpositive base is past the pole and raises PoleDomainError.
    """
    if not q > 0:
        raise InvalidArgument(f"q must be positive, got {q!r}")
    xa = np.asarray(x, dtype=float)
    if abs(q - 1.0) <= Q_ONE_WINDOW:
        out = np.exp(xa)
    else:
        base = (1.0 - q) * xa
        if q > 1 and np.any(base <= -1.0):
            raise PoleDomainError(f"exp_q(x) with q={q} is undefined for (q-1)x >= 1")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(base > -1.0, np.exp(np.log1p(np.maximum(base, -1.0)) / (1.0 - q)), 0.0)
    return float(out) if out.ndim == 0 else out


def _values(V):
    if isinstance(V, SupplyCurve):
        return np.asarray(V.values, dtype=float)
    return np.asarray(V, dtype=float)


def abscissae(n: int) -> np.ndarray:
    return np.arange(n) + 0.5


def objective(V, q: float, alpha: float, beta: float) -> float:
    """Quadratic error ``sum_j (V_j - alpha exp_q(beta (j - 1/2)))^2``."""
    v = _values(V)
    if not beta > 0:
        raise InvalidArgument(f"beta must be positive, got {beta!r}")
    g = q_exponential(q, beta * abscissae(len(v)))
    r = v - alpha * g
    return float(r @ r)


def optimal_alpha(V, q: float, beta: float) -> float:
    """Least-squares scale for fixed ``(q, beta)``."""
    v = _values(V)
    g = q_exponential(q, beta * abscissae(len(v)))
    num = float(v @ g)
    if not num > 0:
        raise NoFeasibleAlpha(f"no positive alpha for q={q}, beta={beta}")
    return num / float(g @ g)


def pole_ok(q: float, beta: float, n: int) -> bool:
    """Pole constraint ``n - 1/2 < 1 / (beta (q - 1))`` for q > 1."""
    return q <= 1 or 1.0 - (q - 1.0) * beta * (n - 0.5) > 0


@dataclass(frozen=True)
class FitConfig:
    n_starts: int = 500
    max_iter: int = 500
    q_bounds: tuple[float, float] = (0.3, 1.7)
    beta_bounds: tuple[float, float] = (1e-4, 20.0)
    seed: int = 0
    ftol: float = 1e-12

    def __post_init__(self):
        if self.n_starts < 1:
            raise InvalidArgument("n_starts must be >= 1")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")
        lo, hi = self.q_bounds
        if not 0 < lo < hi:
            raise InvalidArgument(f"bad q bounds {self.q_bounds}")
        lo, hi = self.beta_bounds
        if not 0 < lo < hi:
            raise InvalidArgument(f"bad beta bounds {self.beta_bounds}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("q_bounds", "beta_bounds"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        return cls(**d)


@dataclass(frozen=True)
class QExpFit:
    q: float
    alpha: float
    beta: float
    quadratic_error: float
    n_points: int
    starts_used: int
    converged_starts: int

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _reduced(v, x):
    """Error after projecting out alpha, as a function of ``(q, log beta)``."""
    def f(theta):
        q, lb = theta
        if not q > 0:
            return math.inf
        if lb > 700:
            return math.inf
        bx = math.exp(lb) * x
        with np.errstate(over="ignore"):
            if abs(q - 1.0) <= Q_ONE_WINDOW:
                g = np.exp(bx)
            else:
                base = (1.0 - q) * bx
                if base[-1] <= -1.0:
                    return math.inf  # barrier: outside the pole constraint
                g = np.exp(np.log1p(base) / (1.0 - q))
            gg = float(g @ g)
            vg = float(v @ g)
        if not (vg > 0 and math.isfinite(gg) and gg > 0):
            return math.inf
        alpha = vg / gg
        r = v - alpha * g
        return float(r @ r)

    return f


def _draw_start(rng, cfg, n):
    lq, hq = cfg.q_bounds
    lb, hb = math.log(cfg.beta_bounds[0]), math.log(cfg.beta_bounds[1])
    for _ in range(1000):
        q = rng.uniform(lq, hq)
        lbeta = rng.uniform(lb, hb)
        if pole_ok(q, math.exp(lbeta), n):
            return np.array([q, lbeta])
    return None


def fit(V, config: FitConfig | None = None) -> QExpFit:
    """Best feasible ``(q, alpha, beta)`` over ``config.n_starts`` refined random starts.

    Start ``i`` depends only on the seed and ``i``, so a run with more starts
    examines a superset of the points of a run with fewer.
    """
    cfg = config or FitConfig()
    v = _values(V)
    n = len(v)
    if n < 3:
        raise InvalidArgument(f"need at least 3 points to fit 3 parameters, got {n}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument("supply curve has non-finite values")
    x = abscissae(n)
    f = _reduced(v, x)
    rng = np.random.default_rng(cfg.seed)

    best = None  # (value, start index, theta)
    used = converged = 0
    for i in range(cfg.n_starts):
        x0 = _draw_start(rng, cfg, n)
        if x0 is None:
            continue
        f0 = f(x0)
        if not math.isfinite(f0):
            continue
        used += 1
        simplex = np.array([x0, x0 + [0.05, 0.0], x0 + [0.0, 0.1]])
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": cfg.max_iter,
                "initial_simplex": simplex,
                "xatol": 1e-10,
                "fatol": cfg.ftol * max(f0, 1e-300),
            },
        )
        theta, val = (res.x, float(res.fun)) if res.fun <= f0 else (x0, f0)
        if res.success:
            converged += 1
        if best is None or val < best[0]:
            best = (val, i, np.array(theta))

    if best is None:
        raise FitFailed("every start violated the constraints")
    q, beta = float(best[2][0]), math.exp(float(best[2][1]))
    if not pole_ok(q, beta, n):
        raise FitFailed("best point violates the pole constraint")
    alpha = optimal_alpha(v, q, beta)
    return QExpFit(
        q=q,
        alpha=alpha,
        beta=beta,
        quadratic_error=objective(v, q, alpha, beta),
        n_points=n,
        starts_used=used,
        converged_starts=converged,
    )
