"""Stochastic fault detection and diagnosis for a two-node Li-ion thermal model."""

from .errors import ConfigError, DomainError, IntegrationError
from .fdd import ModeLibrary, build_library, classify, estimate_core, min_distance, score
from .galerkin import GalerkinSystem, UncertainInput, assemble, integrate_gpc
from .gpc import GpcSurrogate, MultiIndexBasis, build_basis, n_terms, default_basis
from .jcr import JcrMap, build_map, contours
from .scenario import FAULTY1, FAULTY2, FAULTY3, NORMAL, DEFAULT_MODES, ModeSchedule, OperatingMode, synthesize
from .thermal import BatteryParams, integrate, steady_state

__version__ = "0.1.0"
