"""Idealized reverse-auction electricity markets and q-exponential supply curves."""

from qmarket.errors import QMarketError
from qmarket.demand import BackgroundDistribution, DemandPMF, discretize, sample_demand, validate_for_equilibrium
from qmarket.equilibrium import EquilibriumStrategy, integrand, solve
from qmarket.supply import SupplyCurve, compare, exact_curve, simulate

__all__ = [
    "BackgroundDistribution",
    "DemandPMF",
    "EquilibriumStrategy",
    "FitConfig",
    "QExpFit",
    "QMarketError",
    "SupplyCurve",
    "compare",
    "discretize",
    "exact_curve",
    "fit",
    "integrand",
    "objective",
    "optimal_alpha",
    "q_exponential",
    "sample_demand",
    "simulate",
    "solve",
    "validate_for_equilibrium",
]

__version__ = "0.1.0"
from qmarket.qexp import FitConfig, QExpFit, fit, objective, optimal_alpha, q_exponential
