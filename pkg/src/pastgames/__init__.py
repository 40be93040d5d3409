"""Solvers and checkers for perfect-information games played over the stages ..., -2, -1, 0."""

__all__ = ["__version__"]

__version__ = "0.1.0"
