"""Evaluation results shared by the exact oracle and the Monte Carlo engine."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class EvalResult:
    """An expected-value or probability estimate with its error bound.

    ``half_width`` is the absolute integration tolerance for exact results
    and a 99% confidence half-width for Monte Carlo results.
    """

    estimate: float
    half_width: float
    method: str  # "exact" | "monte-carlo"
    replications: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "half_width": self.half_width,
            "method": self.method,
            "replications": self.replications,
            "seed": self.seed,
        }
