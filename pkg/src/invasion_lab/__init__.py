"""Invasion, blocking and persistence for reaction-diffusion in periodic perforated domains."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import (PeriodSpec, DomainMask, RectHole, StarHole, NarrowNeck, SawtoothProfile,
                       Omega3Spec, build_lattice_domain, build_sawtooth_cylinder, build_omega3)
from .reaction import (Reaction, cubic, kpp, tabulated, combustion_plateau, compute_theta, compute_R,
                       check_mean_positive)
from .solver import Coefficients, Field, SolverConfig, run, step, make_bump, make_front_like
from .stationary import (solve_radial_dirichlet, find_min_R, evolve_ball_dirichlet, discrete_dirichlet_steady,
                         energy, minimize_energy, energy_threshold, front_profile_1d, paraboloid_subsolution)
from .analysis import (Verdict, classify, measure_speed, w_star, build_propdim_profile, verify_propdim,
                       radial_expanding_subsolution)
