"""Multiscale crowd dynamics: agents and a grid density moved by one
nonlocal velocity field, with scenario presets, diagnostics and a CLI."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .desired import DesiredField
from .diagnostics import (DiagnosticsRecord, ZeroMass, average_outflow_time, center_of_mass,
                          door_flux, l1_cell_error, moments)
from .geometry import Domain, DoorSegment, Grid, Rect, project_admissible
from .interaction import InteractionSpec, KernelParams, angular_focus, interaction_field, radial_kernel
from .measures import (CrowdMeasure, InvalidScaling, MacroDensity, MicroState, compute_lambda,
                       init_density_from_micro, measure_of, tune_xi)
from .scenario import Scenario, ScenarioError, apply_overrides, build_world, load, parse, preset, serialize, validate
from .stepper import CFLViolation, StepControls, World, advance_macro, advance_micro, run, step

__all__ = [
    "BACKEND", "CFLViolation", "CrowdMeasure", "DesiredField", "DiagnosticsRecord", "Domain",
    "DoorSegment", "Grid", "InteractionSpec", "InvalidScaling", "KernelParams", "MacroDensity",
    "MicroState", "Rect", "Scenario", "ScenarioError", "StepControls", "World", "ZeroMass",
    "advance_macro", "advance_micro", "angular_focus", "apply_overrides", "average_outflow_time",
    "build_world", "center_of_mass", "compute_lambda", "door_flux", "init_density_from_micro",
    "interaction_field", "l1_cell_error", "load", "measure_of", "moments", "parse", "preset",
    "project_admissible", "radial_kernel", "run", "serialize", "step", "tune_xi", "validate",
]
