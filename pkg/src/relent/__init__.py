"""Numerical relative-entropy diagnostics for weak/strong two-phase flow pairs."""
from .errors import *  # noqa: F401,F403
from .geometry import FlatInterface, InterfaceCurve, project, signed_distance
from .gronwall import Envelope, check_series, delta_star, stability_bound
from .phasefield import PhasePolygon, Physics, VarifoldMeasure, VelocityField, lift_varifold
from .scenarios import advect, make_scenario, simulate

__version__ = "0.1.0"
