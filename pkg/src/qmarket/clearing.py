"""Reverse-auction clearing: merit-order ranking, dispatch, clearing price and firm utilities."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from qmarket import rng as qrng
from qmarket.demand import DemandPMF, sample_demand
from qmarket.equilibrium import EquilibriumStrategy
from qmarket.errors import InfeasibleDemand, InvalidArgument


@dataclass(frozen=True)
class GeneratingUnit:
    """A unit owned by firm ``owner`` with cost ``cost_slope * q + cost_fixed``."""

    owner: int
    capacity: float = 1.0
    cost_slope: float = 0.0
    cost_fixed: float = 0.0

    def __post_init__(self):
        if not self.capacity > 0:
            raise InvalidArgument(f"capacity must be positive, got {self.capacity}")
        if self.cost_slope < 0 or self.cost_fixed < 0:
            raise InvalidArgument("cost coefficients must be nonnegative")
        if self.owner < 0:
            raise InvalidArgument("owner index must be >= 0")

    def cost(self, q):
        return self.cost_slope * q + self.cost_fixed


@dataclass(frozen=True, eq=False)
class BidBook:
    units: tuple[GeneratingUnit, ...]
    prices: np.ndarray
    pbar: float

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float)
        if prices.shape != (len(self.units),):
            raise InvalidArgument("need exactly one price per unit")
        if np.any(prices < 0) or np.any(prices > self.pbar) or not np.all(np.isfinite(prices)):
            raise InvalidArgument(f"bid prices must lie in [0, {self.pbar}]")
        prices.flags.writeable = False
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "prices", prices)

    @classmethod
    def unit_market(cls, prices, pbar=100.0):
        """One unit-capacity, zero-cost unit per firm, firm n bidding ``prices[n]``."""
        return cls(tuple(GeneratingUnit(owner=n) for n in range(len(prices))), prices, pbar)

    @property
    def capacities(self):
        return np.array([u.capacity for u in self.units])

    @property
    def n_firms(self):
        return max(u.owner for u in self.units) + 1


@dataclass(frozen=True)
class Ranking:
    """``order[r]`` is the index of the unit ranked ``r + 1``."""

    order: tuple[int, ...]

    def check(self, book: BidBook):
        if sorted(self.order) != list(range(len(book.units))):
            raise InvalidArgument("ranking is not a permutation of the units")
        p = book.prices[list(self.order)]
        if np.any(np.diff(p) < 0):
            raise InvalidArgument("ranking is not nondecreasing in price")


@dataclass(frozen=True, eq=False)
class DispatchResult:
    quantities: np.ndarray
    clearing_price: float
    marginal_rank: int
    utilities: np.ndarray
    demand: float
    ranking: Ranking

    def to_dict(self):
        return {
            "demand": self.demand,
            "ranking": [i for i in self.ranking.order],
            "marginal_rank": self.marginal_rank,
            "clearing_price": self.clearing_price,
            "quantities": self.quantities.tolist(),
            "utilities": self.utilities.tolist(),
        }


def _tie_classes(prices):
    return Counter(prices.tolist()).values()


def count_rankings(book: BidBook) -> int:
    """Number of price-compatible rankings: product of factorials of tie-class sizes."""
    return math.prod(math.factorial(k) for k in _tie_classes(book.prices))


def draw_ranking(book: BidBook, rng: np.random.Generator) -> Ranking:
    """A ranking chosen uniformly among the price-compatible ones."""
    order = np.argsort(book.prices, kind="stable")
    sorted_p = book.prices[order]
    start = 0
    n = len(order)
    while start < n:
        stop = start + 1
        while stop < n and sorted_p[stop] == sorted_p[start]:
            stop += 1
        if stop - start > 1:
            order[start:stop] = rng.permutation(order[start:stop])
        start = stop
    return Ranking(tuple(int(i) for i in order))


def clear(book: BidBook, ranking: Ranking, d: float) -> DispatchResult:
    order = list(ranking.order)
    caps = book.capacities[order]
    cum = np.cumsum(caps)
    total = float(cum[-1])
    # Tolerance covers summation-order rounding when d equals the total capacity.
    if not d > 0 or d > total * (1 + 1e-12):
        raise InfeasibleDemand(f"demand {d!r} outside (0, {total}]")
    prev = np.concatenate(([0.0], cum[:-1]))  # K_{j-1} for j = 1..M
    rho = int(np.count_nonzero(prev < d))
    price = float(book.prices[order[rho - 1]])

    quantities = np.zeros(len(book.units))
    utilities = np.zeros(book.n_firms)
    for r, idx in enumerate(order[: rho - 1]):
        unit = book.units[idx]
        quantities[idx] = unit.capacity
        utilities[unit.owner] += unit.capacity * price - unit.cost(unit.capacity)
    marginal = book.units[order[rho - 1]]
    q_marg = min(d - prev[rho - 1], marginal.capacity)
    quantities[order[rho - 1]] = q_marg
    utilities[marginal.owner] += q_marg * price - marginal.cost(q_marg)
    return DispatchResult(
        quantities=quantities,
        clearing_price=price,
        marginal_rank=rho,
        utilities=utilities,
        demand=float(d),
        ranking=ranking,
    )


def _profit_block_vectorized(p, n_rivals, strategy, pmf, seed, block):
    b, _, count = block
    gen = qrng.block_rng(seed, b)
    rivals = strategy.sample(gen, (count, n_rivals))
    d = sample_demand(pmf, gen, count)
    tie_u = gen.random(count)
    below = np.count_nonzero(rivals < p, axis=1)
    tied = np.count_nonzero(rivals == p, axis=1)
    rank = below + 1 + np.floor(tie_u * (tied + 1)).astype(int)
    allbids = np.sort(np.concatenate((rivals, np.full((count, 1), p)), axis=1), axis=1)
    price = allbids[np.arange(count), d - 1]
    profit = np.where(rank <= d, price, 0.0)
    s = profit.sum()
    return count, s, ((profit - s / count) ** 2).sum()


def _profit_block_engine(p, n_rivals, strategy, pmf, seed, block):
    b, _, count = block
    gen = qrng.block_rng(seed, b)
    rivals = strategy.sample(gen, (count, n_rivals))
    d = sample_demand(pmf, gen, count)
    gen.random(count)  # keep the stream aligned with the vectorized path
    tie_gen = qrng.block_rng(qrng.subseed(seed, 1), b)
    profit = np.empty(count)
    for t in range(count):
        book = BidBook.unit_market(np.concatenate(([p], rivals[t])), strategy.pbar)
        result = clear(book, draw_ranking(book, tie_gen), int(d[t]))
        profit[t] = result.utilities[0]
    s = profit.sum()
    return count, s, ((profit - s / count) ** 2).sum()


def expected_profit_of_pure_bid(
    p: float,
    n_rivals: int,
    strategy: EquilibriumStrategy,
    pmf: DemandPMF,
    trials: int,
    seed=0,
    method: str = "vectorized",
    workers: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of a unit-capacity firm's profit when it bids ``p``.

    Rivals bid independently from ``strategy`` and demand is drawn from ``pmf``.
    ``method="engine"`` clears every trial through :func:`draw_ranking` and
    :func:`clear`; the default computes the same quantity with array operations.
    """
    if not isinstance(trials, (int, np.integer)) or trials < 1:
        raise InvalidArgument(f"trials must be an integer >= 1, got {trials!r}")
    if not 0 <= p <= strategy.pbar:
        raise InvalidArgument(f"bid {p!r} outside [0, {strategy.pbar}]")
    if pmf.N > n_rivals + 1:
        raise InvalidArgument(f"demand up to {pmf.N} exceeds capacity {n_rivals + 1}")
    block_fn = {"vectorized": _profit_block_vectorized, "engine": _profit_block_engine}.get(method)
    if block_fn is None:
        raise InvalidArgument(f"unknown method {method!r}")
    parts = qrng.map_ordered(
        lambda blk: block_fn(p, n_rivals, strategy, pmf, seed, blk), qrng.blocks(trials), workers
    )
    n, total, m2 = qrng.merge_moments(parts)
    mean = float(total) / n
    se = math.sqrt(float(m2) / (n - 1) / n) if n > 1 else float("nan")
    return mean, se
