"""Recollision geometry of the dilute random Lorentz gas.

Thin re-export of the compiled module: the two-scatterer bounce process,
tail-mass estimators, exit-direction uniformity, indirect return masses,
and the coupled exploration / Markov / single-memory flight processes.
"""

from ._recollide import (
    RecollideError,
    __version__,
    exit_tv,
    fit_loglog_slope,
    increment_gaussianity,
    indirect_mc,
    indirect_quadrature,
    mismatch_stats,
    msd_curve,
    mu_ratio_check,
    run_coupled,
    scattering_kernel_check,
    simulate_bounce,
    tail_masses,
    y_msd_exact,
)

__all__ = [
    "RecollideError",
    "__version__",
    "exit_tv",
    "fit_loglog_slope",
    "increment_gaussianity",
    "indirect_mc",
    "indirect_quadrature",
    "mismatch_stats",
    "msd_curve",
    "mu_ratio_check",
    "run_coupled",
    "scattering_kernel_check",
    "simulate_bounce",
    "tail_masses",
    "y_msd_exact",
]
