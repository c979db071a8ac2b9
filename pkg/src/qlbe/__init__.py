"""Tracer-in-gas kinetics: collision kernels of the quantum linear Boltzmann
equation, Monte Carlo relaxation, moment equations, diffusive-limit
Fokker-Planck solvers and a momentum-grid master-equation generator."""
from .core import (
    DerivedScales,
    PhysicalParams,
    derive_scales,
    erf,
    kummer_a,
    kummer_b,
    maxwell_boltzmann,
    rel,
)
from .diffusive import (
    DiffusionCoefficients,
    GaussianMoments,
    WignerField,
    coefficients,
    eta_by_quadrature,
    evolve_classical_fp,
    evolve_quantum_fp,
    gaussian_moment_oracle,
)
from .errors import (
    ConfigurationError,
    DiffusiveLimitWarning,
    DomainError,
    DomainTooSmallError,
    NumericAccuracyError,
    PreconditionError,
    QLBEError,
    SamplingError,
)
from .grid import (
    CoherenceSlice,
    GridGenerator,
    MomentumGrid3D,
    apply_generator,
    coherence_decay_rate,
    propagate_slice,
)
from .moments import (
    MomentState,
    energy_rhs,
    i1,
    i2,
    integrate_moments,
    momentum_rhs,
)
from .rates import (
    BornCrossSection,
    ConstantCrossSection,
    m_in_classical,
    m_in_quantum,
    m_out_classical,
    m_out_flux,
    sample_collision,
    sigma_tilde,
)
from .trajectories import EnsembleStats, Trajectory, ensemble_moments, simulate_trajectory

__version__ = "0.1.0"

__all__ = [
    "DerivedScales",
    "PhysicalParams",
    "derive_scales",
    "erf",
    "kummer_a",
    "kummer_b",
    "maxwell_boltzmann",
    "rel",
    "DiffusionCoefficients",
    "GaussianMoments",
    "WignerField",
    "coefficients",
    "eta_by_quadrature",
    "evolve_classical_fp",
    "evolve_quantum_fp",
    "gaussian_moment_oracle",
    "ConfigurationError",
    "DiffusiveLimitWarning",
    "DomainError",
    "DomainTooSmallError",
    "NumericAccuracyError",
    "PreconditionError",
    "QLBEError",
    "SamplingError",
    "CoherenceSlice",
    "GridGenerator",
    "MomentumGrid3D",
    "apply_generator",
    "coherence_decay_rate",
    "propagate_slice",
    "MomentState",
    "energy_rhs",
    "i1",
    "i2",
    "integrate_moments",
    "momentum_rhs",
    "BornCrossSection",
    "ConstantCrossSection",
    "m_in_classical",
    "m_in_quantum",
    "m_out_classical",
    "m_out_flux",
    "sample_collision",
    "sigma_tilde",
    "EnsembleStats",
    "Trajectory",
    "ensemble_moments",
    "simulate_trajectory",
]
