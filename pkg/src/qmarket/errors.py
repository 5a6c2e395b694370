"""Exception types. Each carries a short machine-readable ``code`` used by the CLI."""


class QMarketError(Exception):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class InvalidArgument(QMarketError, ValueError):
    code = "invalid-argument"


class UnsupportedDemand(QMarketError, ValueError):
    code = "unsupported-demand"


class InfeasibleDemand(QMarketError, ValueError):
    code = "infeasible-demand"


class NonmonotoneEquilibrium(QMarketError, ArithmeticError):
    code = "nonmonotone-equilibrium"


class DomainError(QMarketError, ValueError):
    code = "domain-error"


class PoleDomainError(DomainError):
    code = "pole-domain"


class NoFeasibleAlpha(QMarketError, ArithmeticError):
    code = "no-feasible-alpha"


class FitFailed(QMarketError, RuntimeError):
    code = "fit-failed"


class ExperimentError(QMarketError):
    """Wraps a module error raised while processing one N of an experiment."""

    def __init__(self, n, cause):
        super().__init__(f"N={n}: {cause}")
        self.n = n
        self.cause = cause
        self.code = getattr(cause, "code", "error")

    def to_dict(self):
        return {"error": self.code, "message": str(self.cause), "N": self.n}
