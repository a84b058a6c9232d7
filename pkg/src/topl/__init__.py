"""Sequential selection against top-l benchmarks.

Solvers for the guarantee constants (single-threshold-curve and layered
variants, finite-n and limiting), Monte Carlo policy simulation, hard
instance generators, static-threshold baselines, and an atom-sweep
instance reducer, with a command line front end (``topl --help``).
"""

from ._core import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
