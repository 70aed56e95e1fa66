"""Radial solutions of the quasilinear system Δu = |x|^a v^p, Δv = |x|^b v^q f(|∇u|):
closed-form classification, shooting integrator, phase-plane analysis and
Keller-Osserman integral tests."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: F401
    AsymptoticProfile,
    BallClassification,
    BallKind,
    PowerSolution,
    StabilityReport,
    SystemParams,
    asymptotic_profile,
    classify_ball,
    equilibria,
    exact_power_solution,
    global_existence,
    stability_report,
    validate,
)
from .shooter import Controls, RadialTrajectory, estimate_blowup_radius, fit_growth, integrate  # noqa: F401
from .phase import integrate_phase, omega_limit, phase_image  # noqa: F401
from .ko import CallableNonlinearity, PowerLaw, Tabulated, cumulative, ko_verdicts, theorem1_classify  # noqa: F401
