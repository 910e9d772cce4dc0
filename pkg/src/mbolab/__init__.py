"""Threshold-dynamics laboratory for anisotropic curvature flow.

Binary sets on a periodic grid evolve by convolve-and-threshold steps; the
package provides the grid and set types, analytic kernel descriptors with
their directional analysis, the thresholding scheme with its monotonicity
and energy-descent diagnostics, nonlocal perimeter energies, consistency and
convergence experiments, and a config-driven command line runner.
"""

from __future__ import annotations

from .errors import (
    ConfigurationError,
    ContainmentError,
    MbolabError,
    NumericError,
    PreconditionError,
    SpecMismatchError,
    TopologyError,
)
from .energy import (
    adjusted_perimeter,
    anisotropic_perimeter,
    k_perimeter,
    self_interaction,
    variational_objective,
)
from .grid import BinarySetField, GridSpec, ScalarField, make_shape
from .kernels import (
    DirectionalDistribution,
    KernelDescriptor,
    SampledKernel,
    construct_kernel,
    directional_moments,
    fit_A_from_sigma,
    gaussian_kernel,
    mobility_of,
    rescale_kernel,
    sample_kernel,
    special_kernels,
    surface_tension_of,
)
from .scheme import EvolutionRecord, evolve, threshold_step, threshold_step_with_drift
from .analysis import (
    BackwardReport,
    ContractionReport,
    LipschitzCheck,
    EnergyReport,
    FatteningReport,
    Measurement,
    RateFit,
    RateReport,
    backward_consistency_experiment,
    consistency_experiment,
    arrival_time_lipschitz,
    contraction_suite,
    energy_convergence_experiment,
    fattening_diagnostics,
    rate_fit,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "MbolabError",
    "SpecMismatchError",
    "ContainmentError",
    "PreconditionError",
    "ConfigurationError",
    "NumericError",
    "TopologyError",
    "GridSpec",
    "BinarySetField",
    "ScalarField",
    "make_shape",
    "KernelDescriptor",
    "SampledKernel",
    "DirectionalDistribution",
    "gaussian_kernel",
    "sample_kernel",
    "rescale_kernel",
    "construct_kernel",
    "directional_moments",
    "surface_tension_of",
    "mobility_of",
    "fit_A_from_sigma",
    "special_kernels",
    "k_perimeter",
    "adjusted_perimeter",
    "self_interaction",
    "variational_objective",
    "anisotropic_perimeter",
    "threshold_step",
    "threshold_step_with_drift",
    "evolve",
    "EvolutionRecord",
    "Measurement",
    "RateFit",
    "RateReport",
    "BackwardReport",
    "EnergyReport",
    "ContractionReport",
    "LipschitzCheck",
    "FatteningReport",
    "rate_fit",
    "consistency_experiment",
    "backward_consistency_experiment",
    "energy_convergence_experiment",
    "arrival_time_lipschitz",
    "contraction_suite",
    "fattening_diagnostics",
    "write_report",
]
