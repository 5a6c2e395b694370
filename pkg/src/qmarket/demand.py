"""Background demand densities on [0, 1] and their discretization into demand levels.

A market with N unit-capacity firms faces demand i in {1, ..., N} with
probability ``pi_i = integral of h over [(i-1)/N, i/N]``.  All supported
densities have closed-form antiderivatives, so the bin integrals are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qmarket.errors import InvalidArgument, UnsupportedDemand

KINDS = ("uniform", "power-left", "power-right", "piecewise")


@dataclass(frozen=True, eq=False)
class BackgroundDistribution:
    """A normalized density on [0, 1].

    ``power-left`` with exponent k is (k+1) x**k and ``power-right`` is
    (k+1) (1-x)**k, so k=2 gives the 3x^2 and 3(x-1)^2 densities.
    ``piecewise`` holds breakpoints ``0 = b_0 < ... < b_m = 1`` and the level
    of each segment; levels are rescaled on construction so the density
    integrates to one.
    """

    kind: str
    exponent: float = 0.0
    breakpoints: tuple[float, ...] = ()
    levels: tuple[float, ...] = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in ("power-left", "power-right") and not self.exponent >= 0:
            raise InvalidArgument(f"power exponent must be >= 0, got {self.exponent}")
        if self.kind == "piecewise":
            b = np.asarray(self.breakpoints, dtype=float)
            lv = np.asarray(self.levels, dtype=float)
            if b.ndim != 1 or len(b) < 2 or len(lv) != len(b) - 1:
                raise InvalidArgument("piecewise density needs m+1 breakpoints and m levels")
            if b[0] != 0.0 or b[-1] != 1.0:
                raise InvalidArgument("piecewise breakpoints must start at 0 and end at 1")
            if np.any(np.diff(b) <= 0):
                raise InvalidArgument("piecewise breakpoints must be strictly increasing")
            if np.any(lv < 0) or not np.all(np.isfinite(lv)):
                raise InvalidArgument("piecewise levels must be finite and nonnegative")
            mass = float(np.sum(lv * np.diff(b)))
            if mass <= 0:
                raise InvalidArgument("piecewise density has zero total mass")
            object.__setattr__(self, "breakpoints", tuple(float(x) for x in b))
            object.__setattr__(self, "levels", tuple(float(x) for x in lv / mass))

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def power_left(cls, k=2):
        return cls("power-left", exponent=float(k))

    @classmethod
    def power_right(cls, k=2):
        return cls("power-right", exponent=float(k))

    @classmethod
    def piecewise(cls, breakpoints, levels):
        return cls("piecewise", breakpoints=tuple(breakpoints), levels=tuple(levels))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        k = self.exponent
        if self.kind == "uniform":
            out = np.ones_like(x)
        elif self.kind == "power-left":
            out = (k + 1) * x**k
        elif self.kind == "power-right":
            out = (k + 1) * (1 - x) ** k
        else:
            b = np.asarray(self.breakpoints)
            idx = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.levels) - 1)
            out = np.asarray(self.levels)[idx]
        return np.where((x >= 0) & (x <= 1), out, 0.0)

    def cdf(self, x):
        """Antiderivative of the density, equal to 0 at x=0 and 1 at x=1."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        k = self.exponent
        if self.kind == "uniform":
            return x.copy()
        if self.kind == "power-left":
            return x ** (k + 1)
        if self.kind == "power-right":
            return 1.0 - (1.0 - x) ** (k + 1)
        b = np.asarray(self.breakpoints)
        lv = np.asarray(self.levels)
        cum = np.concatenate(([0.0], np.cumsum(lv * np.diff(b))))
        idx = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(lv) - 1)
        return cum[idx] + lv[idx] * (x - b[idx])

    def describe(self):
        if self.name:
            return self.name
        if self.kind in ("power-left", "power-right"):
            return f"{self.kind}:{self.exponent:g}"
        return self.kind


@dataclass(frozen=True, eq=False)
class DemandPMF:
    """Probabilities of demand levels 1..N (``probs[i-1]`` is Pr(demand = i))."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 1:
            raise InvalidArgument("demand probabilities must be a nonempty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidArgument("demand probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidArgument(f"demand probabilities sum to {p.sum()!r}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def N(self):
        return len(self.probs)

    def __len__(self):
        return len(self.probs)

    def __repr__(self):
        return f"DemandPMF({np.array2string(self.probs, precision=6)})"


def discretize(h: BackgroundDistribution, N: int) -> DemandPMF:
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise InvalidArgument(f"N must be an integer >= 2, got {N!r}")
    edges = np.arange(N + 1) / N
    probs = np.diff(h.cdf(edges))
    # Telescoping keeps the sum at cdf(1) - cdf(0); clamp tiny negative rounding.
    probs = np.maximum(probs, 0.0)
    probs /= probs.sum()
    return DemandPMF(probs)


def validate_for_equilibrium(pmf: DemandPMF) -> None:
    """Reject demand vectors whose equilibrium integrand is unbounded at an endpoint."""
    if pmf.probs[0] <= 0:
        raise UnsupportedDemand("pi_1 = 0: the lowest demand level must have positive probability")
    if pmf.probs[-1] <= 0:
        raise UnsupportedDemand("pi_N = 0: the highest demand level must have positive probability")


def sample_demand(pmf: DemandPMF, rng: np.random.Generator, size=None):
    """Draw demand level(s) in 1..N."""
    cum = np.cumsum(pmf.probs)
    cum[-1] = 1.0
    u = rng.random(size)
    draw = np.searchsorted(cum, u, side="right") + 1
    draw = np.minimum(draw, pmf.N)
    return int(draw) if size is None else draw


def load_piecewise(path) -> BackgroundDistribution:
    """Read a piecewise-constant density file.

    Each non-comment line is ``b level``: the density equals ``level`` on the
    segment ending at breakpoint ``b`` (the first segment starts at 0).  The
    final breakpoint must be 1.0.  Text after ``#`` is ignored.
    """
    path = Path(path)
    bps, levels = [0.0], []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidArgument(f"{path}:{lineno}: expected 'breakpoint level', got {raw!r}")
        try:
            b, level = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise InvalidArgument(f"{path}:{lineno}: {exc}") from None
        bps.append(b)
        levels.append(level)
    if not levels:
        raise InvalidArgument(f"{path}: no density rows")
    if bps[-1] != 1.0:
        raise InvalidArgument(f"{path}: final breakpoint must be 1.0, got {bps[-1]}")
    return BackgroundDistribution("piecewise", breakpoints=tuple(bps), levels=tuple(levels), name=f"piecewise:{path.name}")


def parse_distribution(spec: str) -> BackgroundDistribution:
    """Parse ``uniform``, ``power-left[:k]``, ``power-right[:k]`` or ``piecewise:<path>``."""
    kind, _, arg = spec.partition(":")
    kind = kind.strip()
    if kind == "uniform":
        return BackgroundDistribution.uniform()
    if kind in ("power-left", "power-right"):
        k = float(arg) if arg else 2.0
        return BackgroundDistribution(kind, exponent=k)
    if kind == "piecewise":
        if not arg:
            raise InvalidArgument("piecewise distribution needs a file path: piecewise:<path>")
        return load_piecewise(arg)
    raise InvalidArgument(f"unknown distribution {spec!r}")
