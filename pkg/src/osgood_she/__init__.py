"""Stochastic heat equation with Osgood-type nonlinearities on a periodic lattice."""
from .catalog import NoiseSpectrum, ScalarFn, resolve, resolve_spectrum
from .conditions import (check_drift_envelope, check_sigma_envelope, check_superlinear_ratio, dalang_upsilon,
                         noise_alpha_check, osgood_classify, repeated_log_family)
from .config import RunConfig
from .field import GridField, heat_semigroup, vp_norm, weighted_integral
from .lattice import Lattice
from .noise import NoiseStream, build_spectrum, sample_increment
from .solver import RunSetup, mild_step, run_localized, simulate_batch, tripling_sequence

__version__ = "0.1.0"
