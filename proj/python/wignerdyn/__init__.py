"""Spin correlation dynamics with exact, discrete and Gaussian phase-space solvers."""

from ._core import (
    __version__,
    Hamiltonian,
    choose_level,
    closed_form,
    eigen,
    export_cmv,
    model,
    q_value,
    radii_along,
    run_config,
    sampled,
    set_threads,
    short_time_delta,
    sign_problem_factor,
    statevector,
)

__all__ = [
    "Hamiltonian",
    "choose_level",
    "closed_form",
    "eigen",
    "export_cmv",
    "model",
    "q_value",
    "radii_along",
    "run_config",
    "sampled",
    "set_threads",
    "short_time_delta",
    "sign_problem_factor",
    "statevector",
]
