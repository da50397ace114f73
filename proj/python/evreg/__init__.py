"""Gumbel regression with adjusted signed likelihood ratio tests."""

from ._core import (
    DataError,
    DomainError,
    EvaluationError,
    FormulaError,
    fit,
    niwot,
    simulate_size,
    test,
)

__all__ = [
    "DataError",
    "DomainError",
    "EvaluationError",
    "FormulaError",
    "fit",
    "niwot",
    "simulate_size",
    "test",
]
