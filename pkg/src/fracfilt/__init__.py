"""Classical and time-fractional nonlinear filtering at desk scale.

Subpackages follow the pipeline: `subordinator` (random clocks and their
densities), `fraccalc` (discrete Riemann-Liouville operators), `models`
(filtering problems and grid generators), `sde_sim` (paths and particle
estimates), `zakai_classical` / `zakai_fractional` (grid solvers and the
subordination cross-checks), `levy_ext` (finite-activity jumps), `cli`
(experiment runner), `acceptance` (built-in check suite).
"""

from . import (
    acceptance,
    config,
    fraccalc,
    levy_ext,
    models,
    sde_sim,
    subordinator,
    zakai_classical,
    zakai_fractional,
)

__version__ = "0.1.0"

__all__ = [
    "acceptance",
    "config",
    "fraccalc",
    "levy_ext",
    "models",
    "sde_sim",
    "subordinator",
    "zakai_classical",
    "zakai_fractional",
    "__version__",
]
