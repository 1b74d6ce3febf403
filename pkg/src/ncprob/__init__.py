"""Finite-window checks for noncommutative random sequences.

Block algebras with faithful states, conditional expectations, sequence
models and verdicts for exchangeability, independence, ergodic averages and
central limits.  Submodules are imported on demand.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
