"""Universal return type of the numeric integrators."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Estimate:
    """A numeric result with its statistical and deterministic error budget.

    ``stat_err`` is one standard error (0 for exact enumeration);
    ``trunc_bound`` is a deterministic bound on everything that was
    omitted (series tails, quadrature cutoffs).
    """

    value: float
    stat_err: float = 0.0
    trunc_bound: float = 0.0
    method: str = "enumeration"  # enumeration | quadrature | monte-carlo
    warnings: tuple = field(default=())

    def __post_init__(self):
        if self.stat_err < 0 or self.trunc_bound < 0:
            raise ValueError("error fields must be nonnegative")
        if self.method == "enumeration" and self.stat_err != 0:
            raise ValueError("exact enumeration carries no statistical error")

    @property
    def total_err(self) -> float:
        return 3.0 * self.stat_err + self.trunc_bound

    def with_warning(self, msg: str) -> "Estimate":
        return Estimate(self.value, self.stat_err, self.trunc_bound,
                        self.method, self.warnings + (msg,))
