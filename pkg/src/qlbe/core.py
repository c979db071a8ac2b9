"""Physical parameters, derived scales and the special functions used throughout.

Program units: ``k_B = 1`` so temperature is an energy, and ``hbar`` is a
free parameter (default 1).  Vectors are numpy arrays whose last axis has
length 3; every function broadcasts over leading axes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np
from scipy import special

from .errors import ConfigurationError, DiffusiveLimitWarning

#: Mass ratio m/M above which diffusive-limit results carry a warning.
DIFFUSIVE_MASS_RATIO_LIMIT = 0.1

_SQRT_PI = math.sqrt(math.pi)

# Below this value of u^2 the Kummer closed forms lose digits to cancellation.
KUMMER_SERIES_CUTOFF = 0.25


@dataclass(frozen=True)
class PhysicalParams:
    """Microscopic input: gas mass ``m``, tracer mass ``M``, temperature ``T``
    (energy units), gas number density ``n_gas``, total cross-section
    ``sigma_tot`` and ``hbar``.
    """

    m: float
    M: float
    T: float
    n_gas: float
    sigma_tot: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "M", "T", "sigma_tot", "hbar"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be finite and > 0, got {value!r}")
        # n_gas = 0 is allowed: it switches all collisions off.
        if not (np.isfinite(self.n_gas) and self.n_gas >= 0):
            raise ConfigurationError(f"n_gas must be finite and >= 0, got {self.n_gas!r}")

    @property
    def beta(self) -> float:
        return 1.0 / self.T

    @property
    def mass_ratio(self) -> float:
        return self.m / self.M

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> "PhysicalParams":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {f.name for f in fields(cls) if f.name != "hbar"} - set(values)
        if missing:
            raise ConfigurationError(f"missing parameter keys: {sorted(missing)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def replace(self, **changes) -> "PhysicalParams":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return PhysicalParams(**data)


@dataclass(frozen=True)
class DerivedScales:
    p_beta: float
    v_beta: float
    m_star: float
    lambda_th: float
    lambda_th_gas: float


def derive_scales(params: PhysicalParams) -> DerivedScales:
    """Thermal momentum and velocity of the gas, reduced mass and the two
    thermal de Broglie wavelengths."""
    m, M, beta, hbar = params.m, params.M, params.beta, params.hbar
    p_beta = math.sqrt(2.0 * m / beta)
    return DerivedScales(
        p_beta=p_beta,
        v_beta=p_beta / m,
        m_star=m * M / (M + m),
        lambda_th=math.sqrt(2.0 * math.pi * hbar**2 * beta / M),
        lambda_th_gas=math.sqrt(2.0 * math.pi * hbar**2 * beta / m),
    )


def warn_if_not_diffusive(params: PhysicalParams, stacklevel: int = 3) -> bool:
    """Emit :class:`DiffusiveLimitWarning` when m/M exceeds the validity limit.

    Returns True if the warning was issued.
    """
    if params.mass_ratio > DIFFUSIVE_MASS_RATIO_LIMIT:
        warnings.warn(
            f"mass ratio m/M = {params.mass_ratio:.3g} exceeds "
            f"{DIFFUSIVE_MASS_RATIO_LIMIT}; diffusive-limit results are unreliable",
            DiffusiveLimitWarning,
            stacklevel=stacklevel,
        )
        return True
    return False


def rel(p, P, params: PhysicalParams) -> np.ndarray:
    """Relative momentum ``(m*/m) p - (m*/M) P`` of a gas particle ``p`` and
    the tracer ``P``."""
    m_star = params.m * params.M / (params.M + params.m)
    return (m_star / params.m) * np.asarray(p, dtype=float) - (m_star / params.M) * np.asarray(
        P, dtype=float
    )


def maxwell_boltzmann(p, params: PhysicalParams, mass: float | None = None) -> np.ndarray:
    """Normalized Maxwell-Boltzmann momentum density.

    Parameters
    ----------
    p : array_like, shape (..., 3)
    params : PhysicalParams
    mass : float, optional
        Particle mass; defaults to the gas mass ``params.m``.  Pass
        ``params.M`` for the tracer equilibrium.
    """
    mass = params.m if mass is None else mass
    p_th2 = 2.0 * mass / params.beta
    p = np.asarray(p, dtype=float)
    return np.exp(-np.sum(p * p, axis=-1) / p_th2) / (math.pi * p_th2) ** 1.5


def erf(x):
    """Error function (``scipy.special.erf``) evaluated on ``|x|`` and
    sign-restored, so ``erf(-x) == -erf(x)`` holds exactly."""
    arr = np.asarray(x, dtype=float)
    val = np.copysign(special.erf(np.abs(arr)), arr)
    return float(val) if np.ndim(x) == 0 else val


def _kummer_series(alpha: float, gamma: float, u2: np.ndarray) -> np.ndarray:
    """1F1(alpha, gamma; -u2) by its power series (small u2 only)."""
    term = np.ones_like(u2)
    total = np.ones_like(u2)
    k = 0
    while True:
        term *= (alpha + k) / (gamma + k) * (-u2) / (k + 1)
        total += term
        k += 1
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)) or k > 200:
            return total


def _prepare_u2(u2):
    arr = np.asarray(u2, dtype=float)
    if np.any(arr < 0):
        raise ConfigurationError("u2 must be >= 0")
    return arr


def kummer_a(u2):
    """``1F1(-1/2, 5/2; -u2)``; positive and increasing in ``u2``."""
    arr = _prepare_u2(u2)
    flat = arr.ravel()
    out = np.empty_like(flat)
    small = flat < KUMMER_SERIES_CUTOFF
    out[small] = _kummer_series(-0.5, 2.5, flat[small])
    big = flat[~small]
    if big.size:
        U = np.sqrt(big)
        g = 0.5 * _SQRT_PI * erf(U) / U
        out[~small] = (3.0 / 16.0) / big * (
            (1.0 + 2.0 * big) * np.exp(-big) - (1.0 - 4.0 * big - 4.0 * big**2) * g
        )
    out = out.reshape(arr.shape)
    return float(out) if np.ndim(u2) == 0 else out


def kummer_b(u2):
    """``1F1(-3/2, 3/2; -u2)``; positive and increasing in ``u2``."""
    arr = _prepare_u2(u2)
    flat = arr.ravel()
    out = np.empty_like(flat)
    small = flat < KUMMER_SERIES_CUTOFF
    out[small] = _kummer_series(-1.5, 1.5, flat[small])
    big = flat[~small]
    if big.size:
        U = np.sqrt(big)
        g = 0.5 * _SQRT_PI * erf(U) / U
        out[~small] = 0.125 * (
            (5.0 + 2.0 * big) * np.exp(-big) + (3.0 + 12.0 * big + 4.0 * big**2) * g
        )
    out = out.reshape(arr.shape)
    return float(out) if np.ndim(u2) == 0 else out
