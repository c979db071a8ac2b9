"""Relaxation equations for the mean momentum and kinetic energy.

The exact Heisenberg identities involve ``<f(P)>``; the ODEs here use the
delta-state closure ``<f(P)> ~ f(<P>)``.  The momentum and energy equations are
integrated independently.  Dimensionless momentum is ``U = P / (M v_beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import PhysicalParams, derive_scales, kummer_a, kummer_b
from .diffusive import coefficients
from .errors import ConfigurationError, NumericAccuracyError


def relaxation_prefactor(params: PhysicalParams) -> float:
    """``n sigma / (4 pi) * (16/3) * sqrt(8 pi / (m beta)) * m*/M`` [1/time]."""
    m_star = derive_scales(params).m_star
    return (params.n_gas * params.sigma_tot / (4.0 * math.pi) * (16.0 / 3.0)
            * math.sqrt(8.0 * math.pi / (params.m * params.beta)) * m_star / params.M)


def i1(U, params: PhysicalParams) -> np.ndarray:
    """Rate of change of the dimensionless momentum, ``dU/dt`` at a sharp
    momentum ``U``; antiparallel to ``U``."""
    U = np.asarray(U, dtype=float)
    u2 = np.sum(U * U, axis=-1, keepdims=True)
    return -relaxation_prefactor(params) * U * kummer_a(u2)


def i2(u2, params: PhysicalParams):
    """Rate of change of ``U**2`` at a sharp momentum with ``|U|**2 = u2``.

    Positive (heating) below the energy fixed point, negative above.
    """
    u2 = np.asarray(u2, dtype=float)
    ratio = derive_scales(params).m_star / params.M
    out = -2.0 * relaxation_prefactor(params) * (u2 * kummer_a(u2) - 1.5 * ratio * kummer_b(u2))
    return float(out) if out.ndim == 0 else out


def momentum_rhs(P, params: PhysicalParams) -> np.ndarray:
    """``d<P>/dt`` in the delta closure."""
    P = np.asarray(P, dtype=float)
    s = derive_scales(params)
    return i1(P / (params.M * s.v_beta), params) * (params.M * s.v_beta)


def energy_rhs(E, params: PhysicalParams):
    """``d<E>/dt`` in the delta closure, with ``U**2 = beta E m / M``."""
    E = np.asarray(E, dtype=float)
    if np.any(E < 0):
        raise ConfigurationError("kinetic energy must be >= 0")
    s = derive_scales(params)
    out = i2(params.beta * E * params.mass_ratio, params) * 0.5 * params.M * s.v_beta**2
    return float(out) if np.ndim(out) == 0 else out


def energy_fixed_point(params: PhysicalParams) -> float:
    """Root of :func:`energy_rhs` on ``(0, inf)``; the closure's stationary energy."""
    if params.n_gas == 0:
        raise ConfigurationError("no fixed point without collisions")
    ratio = derive_scales(params).m_star / params.M

    def brace(u2):
        return u2 * kummer_a(u2) - 1.5 * ratio * kummer_b(u2)

    hi = 3.0 * ratio
    while brace(hi) <= 0.0:
        hi *= 2.0
    u2 = brentq(brace, 0.0, hi, xtol=1e-15, rtol=1e-14)
    return u2 / (params.beta * params.mass_ratio)


@dataclass(frozen=True)
class MomentState:
    P: np.ndarray
    E: float

    def __post_init__(self):
        object.__setattr__(self, "P", np.asarray(self.P, dtype=float).reshape(3))
        if not self.E >= 0:
            raise ConfigurationError("E must be >= 0")


@dataclass
class MomentSeries:
    t: np.ndarray
    P: np.ndarray
    E: np.ndarray

    def table(self):
        return ["t", "Px", "Py", "Pz", "E"], np.column_stack([self.t, self.P, self.E])


def diffusive_solution(initial: MomentState, time_grid, params: PhysicalParams) -> MomentSeries:
    """Analytic solution of the linear limit equations: exponential friction of
    ``P`` and relaxation of ``E`` to ``3/(2 beta)`` at twice the rate."""
    t = np.asarray(time_grid, dtype=float)
    eta = coefficients(params, warn=False).eta
    e_eq = 1.5 / params.beta
    P = initial.P[None, :] * np.exp(-eta * t)[:, None]
    E = e_eq + (initial.E - e_eq) * np.exp(-2.0 * eta * t)
    return MomentSeries(t, P, E)


def _rhs(params, mode):
    if mode == "exact-closure":
        def f(t, y):
            return np.concatenate([momentum_rhs(y[:3], params), [energy_rhs(max(y[3], 0.0), params)]])
    elif mode == "diffusive":
        eta = coefficients(params, warn=False).eta
        e_eq = 1.5 / params.beta

        def f(t, y):
            return np.concatenate([-eta * y[:3], [-2.0 * eta * (y[3] - e_eq)]])
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    return f


def _rk4(f, y0, t, n_steps):
    out = np.empty((len(t), len(y0)))
    out[0] = y = np.array(y0, dtype=float)
    for i in range(1, len(t)):
        h = (t[i] - t[i - 1]) / n_steps
        tt = t[i - 1]
        for _ in range(n_steps):
            k1 = f(tt, y)
            k2 = f(tt + h / 2, y + h / 2 * k1)
            k3 = f(tt + h / 2, y + h / 2 * k2)
            k4 = f(tt + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            tt += h
        out[i] = y
    return out


def integrate_moments(initial: MomentState, time_grid, params: PhysicalParams,
                      mode: str = "exact-closure", method: str = "DOP853",
                      rtol: float = 1e-10, atol: float = 1e-13, rk4_steps: int = 1) -> MomentSeries:
    """Integrate the closed momentum and energy ODEs.

    Parameters
    ----------
    mode : {"exact-closure", "diffusive"}
    method : str
        Any adaptive :func:`scipy.integrate.solve_ivp` method, or ``"rk4"`` for
        classical fixed-step Runge-Kutta with ``rk4_steps`` steps per output
        interval (used for order studies).
    """
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise ConfigurationError("time grid must be strictly increasing")
    f = _rhs(params, mode)
    y0 = np.concatenate([initial.P, [initial.E]])
    if method == "rk4":
        y = _rk4(f, y0, t, rk4_steps)
    else:
        scale = max(np.linalg.norm(initial.P), initial.E, 1.0 / params.beta)
        sol = solve_ivp(f, (t[0], t[-1]), y0, method=method, t_eval=t, rtol=rtol, atol=atol * scale)
        if not sol.success:
            raise NumericAccuracyError(f"moment integration failed: {sol.message}")
        y = sol.y.T
    return MomentSeries(t, y[:, :3], y[:, 3])
