"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An argument breaks a documented precondition."""


class PriorConstructionError(ValueError):
    """A prior table fails its convexity requirements."""


class NonConvexPriorError(ValueError):
    """A subproblem's pairwise table is not convex over the label span it needs."""


class SentinelCutError(RuntimeError):
    """A min cut crossed an "infinite" arc; the network was malformed."""


class BudgetExceeded(ValueError):
    """Brute-force enumeration would exceed its state budget."""


class SolverRefused(ValueError):
    """The requested solver cannot guarantee monotone descent on this model."""
