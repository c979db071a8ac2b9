"""Diffusive-limit coefficients and phase-space Fokker-Planck solvers.

The solvers work on a 1D x 1D phase space (the 3D generator is a direct sum of
identical one-dimensional generators).  X is periodic; P is truncated with
zero flux, and the mass reaching the edge cells is monitored.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from .core import PhysicalParams, derive_scales, warn_if_not_diffusive
from .errors import ConfigurationError, DomainTooSmallError
from .quadrature import gauss_hermite, plane_basis, sphere_rule

#: Largest allowed eta * dt for one splitting step.
MAX_ETA_DT = 0.1
#: Mass allowed in the outermost momentum cells before the domain is declared too small.
LEAKAGE_TOL = 1e-6


@dataclass(frozen=True)
class DiffusionCoefficients:
    eta: float
    D_pp: float
    D_xx: float


def coefficients(params: PhysicalParams, warn: bool = True) -> DiffusionCoefficients:
    """Friction ``eta``, momentum diffusion ``D_pp = eta M T`` and the minimal
    position diffusion ``D_xx = D_pp (hbar / (4 M T))**2`` for a constant
    cross-section."""
    if warn:
        warn_if_not_diffusive(params)
        if params.n_gas == 0:
            warnings.warn("n_gas = 0: no collisions, all coefficients vanish", UserWarning, stacklevel=2)
    eta = (16.0 / 3.0) * params.n_gas * params.sigma_tot * math.sqrt(
        params.m * params.T / (2.0 * math.pi * params.M**2)
    )
    D_pp = eta * params.M * params.T
    D_xx = D_pp * (params.hbar / (4.0 * params.M * params.T)) ** 2
    return DiffusionCoefficients(eta, D_pp, D_xx)


def minimality_ratio(c: DiffusionCoefficients, hbar: float) -> float:
    """``16 D_pp D_xx / (eta hbar)**2``; equal to one for the minimal D_xx."""
    return 16.0 * c.D_pp * c.D_xx / (c.eta * hbar) ** 2


def eta_by_quadrature(params: PhysicalParams, n_plane: int = 32, rtol: float = 1e-12) -> float:
    """Friction coefficient from its defining transfer integral
    ``(beta / 6M)(n/m)(sigma/4pi) int d^3Q |Q| exp(-beta Q^2 / 8m) int_{Q-perp} mu_beta``.

    The radial integral uses adaptive quadrature, the plane integral of the
    Maxwellian Gauss-Hermite, and the solid angle a product rule.
    """
    s = derive_scales(params)
    p_beta = s.p_beta
    # plane integral of mu_beta through the origin, perpendicular to z
    x, w = gauss_hermite(n_plane)
    e1, e2 = plane_basis(np.array([0.0, 0.0, 1.0]))
    pts = p_beta * (x[:, None, None] * e1 + x[None, :, None] * e2)
    mu = np.exp(-np.sum(pts**2, axis=-1) / p_beta**2) / (math.pi**1.5 * p_beta**3)
    plane = np.sum(w[:, None] * w[None, :] * mu * np.exp(np.sum(pts**2, axis=-1) / p_beta**2)) * p_beta**2
    _, wd = sphere_rule(8, 16)
    solid = wd.sum()
    radial, err = quad(lambda q: q**3 * math.exp(-params.beta * q * q / (8.0 * params.m)),
                       0.0, math.inf, epsabs=0.0, epsrel=rtol, limit=200)
    pref = params.beta / (6.0 * params.M) * params.n_gas / params.m * params.sigma_tot / (4.0 * math.pi)
    return pref * solid * radial * plane


@dataclass(frozen=True)
class GaussianMoments:
    """First and second moments of a 1D x 1D phase-space density."""

    mean_x: float
    mean_p: float
    var_x: float
    cov_xp: float
    var_p: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p, self.var_x, self.cov_xp, self.var_p])


def _moment_matrix(c: DiffusionCoefficients, M: float, quantum: bool, free_streaming: bool):
    s = 1.0 / M if free_streaming else 0.0
    d_xx = c.D_xx if quantum else 0.0
    A = np.zeros((6, 6))
    # state: <x>, <p>, var x, cov xp, var p, 1
    A[0, 1] = s
    A[1, 1] = -c.eta
    A[2, 3] = 2.0 * s
    A[2, 5] = 2.0 * d_xx
    A[3, 4] = s
    A[3, 3] = -c.eta
    A[4, 4] = -2.0 * c.eta
    A[4, 5] = 2.0 * c.D_pp
    return A


def gaussian_moment_oracle(initial: GaussianMoments, t, coeffs: DiffusionCoefficients, M: float,
                           quantum: bool = True, free_streaming: bool = True):
    """Exact moments of the linear Fokker-Planck dynamics, by the matrix
    exponential of the closed first/second-moment system.

    Returns a :class:`GaussianMoments` for scalar ``t`` and an array of shape
    (len(t), 5) otherwise.
    """
    A = _moment_matrix(coeffs, M, quantum, free_streaming)
    y0 = np.append(initial.as_array(), 1.0)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([(expm(A * ti) @ y0)[:5] for ti in ts])
    if np.ndim(t) == 0:
        return GaussianMoments(*out[0])
    return out


@dataclass
class WignerField:
    """Real phase-space field on cell centres of ``[x_min, x_max) x [p_min, p_max]``."""

    x_range: tuple
    p_range: tuple
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ConfigurationError("values must be a 2-D array (nx, np)")
        if not (self.x_range[1] > self.x_range[0] and self.p_range[1] > self.p_range[0]):
            raise ConfigurationError("ranges must be increasing")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("non-finite field values")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.x_range[1] - self.x_range[0]) / self.nx

    @property
    def dp(self) -> float:
        return (self.p_range[1] - self.p_range[0]) / self.n_p

    @property
    def x(self) -> np.ndarray:
        return self.x_range[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def p(self) -> np.ndarray:
        return self.p_range[0] + (np.arange(self.n_p) + 0.5) * self.dp

    @classmethod
    def from_function(cls, func: Callable, x_range, p_range, nx: int, n_p: int,
                      normalize: bool = True) -> "WignerField":
        dx = (x_range[1] - x_range[0]) / nx
        dp = (p_range[1] - p_range[0]) / n_p
        x = x_range[0] + (np.arange(nx) + 0.5) * dx
        p = p_range[0] + (np.arange(n_p) + 0.5) * dp
        vals = np.asarray(func(x[:, None], p[None, :]), dtype=float) * np.ones((nx, n_p))
        f = cls(tuple(map(float, x_range)), tuple(map(float, p_range)), vals)
        if normalize:
            f.values /= f.mass()
        return f

    @classmethod
    def gaussian(cls, m: GaussianMoments, x_range, p_range, nx: int, n_p: int) -> "WignerField":
        cov = np.array([[m.var_x, m.cov_xp], [m.cov_xp, m.var_p]])
        inv = np.linalg.inv(cov)

        def g(x, p):
            dx, dp = x - m.mean_x, p - m.mean_p
            return np.exp(-0.5 * (inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp * dp))

        return cls.from_function(g, x_range, p_range, nx, n_p)

    def mass(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def moments(self) -> GaussianMoments:
        w = self.values * self.dx * self.dp
        tot = w.sum()
        x, p = self.x[:, None], self.p[None, :]
        mx = (w * x).sum() / tot
        mp = (w * p).sum() / tot
        return GaussianMoments(
            mx, mp,
            (w * (x - mx) ** 2).sum() / tot,
            (w * (x - mx) * (p - mp)).sum() / tot,
            (w * (p - mp) ** 2).sum() / tot,
        )

    def edge_mass(self) -> float:
        return float((self.values[:, 0].sum() + self.values[:, -1].sum()) * self.dx * self.dp)


def _ou_propagator_spectral(p, L, eta, D, dt):
    """Exact one-step Ornstein-Uhlenbeck propagator on a band-limited,
    P-periodic representation (mass conserved exactly)."""
    n = len(p)
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=L / n)
    if eta > 0:
        contract = math.exp(-eta * dt)
        spread = (D / (2.0 * eta)) * (-math.expm1(-2.0 * eta * dt))
    else:
        contract, spread = 1.0, D * dt
    E2 = np.exp(-1j * np.outer(k * contract, p))
    E1 = np.exp(1j * np.outer(p, k))
    return np.real(E1 @ (np.exp(-spread * k * k)[:, None] * E2)) / n


def _ou_propagator_fv(p, eta, D, dt):
    """Square-root-approximation finite-volume generator, exponentiated.

    Monotone (non-negative propagator), conserves mass with zero-flux walls
    and leaves the sampled Maxwellian exactly stationary.
    """
    n = len(p)
    h = p[1] - p[0]
    if D == 0.0:
        return np.eye(n)
    half = 0.5 * (p[1:] + p[:-1])
    a = h * half * eta / (2.0 * D)
    up = (D / h**2) * np.exp(-a)  # rate i -> i+1
    down = (D / h**2) * np.exp(a)  # rate i+1 -> i
    G = np.zeros((n, n))
    i = np.arange(n - 1)
    G[i + 1, i] += up
    G[i, i] -= up
    G[i, i + 1] += down
    G[i + 1, i + 1] -= down
    return expm(G * dt)


def _check_grid(W: WignerField, c: DiffusionCoefficients):
    if c.eta <= 0:
        return
    sigma_eq = math.sqrt(c.D_pp / c.eta)
    if W.dp > sigma_eq / 8.0 * (1 + 1e-12):
        raise ConfigurationError(
            f"momentum grid too coarse: dp = {W.dp:.4g} > sqrt(D_pp/eta)/8 = {sigma_eq / 8:.4g}; "
            "increase the number of momentum cells"
        )
    half_width = min(-W.p_range[0], W.p_range[1])
    if half_width < 6.0 * sigma_eq * (1 - 1e-12):
        raise ConfigurationError(
            f"momentum half-width {half_width:.4g} < 6 sqrt(D_pp/eta) = {6 * sigma_eq:.4g}; widen the P range"
        )


def _evolve(W0: WignerField, t_final: float, c: DiffusionCoefficients, M: float, dt: Optional[float],
            free_streaming: bool, p_scheme: str, check_leakage: bool) -> WignerField:
    if t_final < 0:
        raise ConfigurationError("t_final must be >= 0")
    if not M > 0:
        raise ConfigurationError("M must be > 0")
    _check_grid(W0, c)
    if dt is None:
        dt = 0.01 / c.eta if c.eta > 0 else t_final
    if c.eta * dt > MAX_ETA_DT * (1 + 1e-12):
        raise ConfigurationError(
            f"time step too large: eta*dt = {c.eta * dt:.3g} > {MAX_ETA_DT}; reduce dt"
        )
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9))) if t_final > 0 else 0
    W = W0.values.copy()
    if n_steps == 0:
        return replace(W0, values=W)
    h = t_final / n_steps
    p = W0.p
    L = W0.p_range[1] - W0.p_range[0]
    if p_scheme == "spectral":
        Tp = _ou_propagator_spectral(p, L, c.eta, c.D_pp, h)
    elif p_scheme == "finite-volume":
        Tp = _ou_propagator_fv(p, c.eta, c.D_pp, h)
    else:
        raise ConfigurationError(f"unknown p_scheme {p_scheme!r}")
    kx = 2.0 * np.pi * np.fft.fftfreq(W0.nx, d=W0.dx)
    x_active = free_streaming or c.D_xx > 0
    if x_active:
        vel = p / M if free_streaming else np.zeros_like(p)
        # exact half-step of streaming plus position diffusion in Fourier space
        half_x = np.exp(-c.D_xx * kx[:, None] ** 2 * (h / 2) - 1j * kx[:, None] * vel[None, :] * (h / 2))
    scale = max(W0.mass(), np.finfo(float).tiny)
    for _ in range(n_steps):
        if x_active:
            W = np.real(np.fft.ifft(half_x * np.fft.fft(W, axis=0), axis=0))
        W = W @ Tp.T
        if x_active:
            W = np.real(np.fft.ifft(half_x * np.fft.fft(W, axis=0), axis=0))
        if check_leakage:
            edge = (W[:, 0].sum() + W[:, -1].sum()) * W0.dx * W0.dp
            if abs(edge) > LEAKAGE_TOL * scale:
                raise DomainTooSmallError(
                    f"probability {edge:.3g} reached the momentum boundary; widen the P range"
                )
    return WignerField(W0.x_range, W0.p_range, W, W0.t + t_final)


def evolve_quantum_fp(W0: WignerField, t_final: float, coeffs: DiffusionCoefficients, M: float,
                      dt: Optional[float] = None, free_streaming: bool = True,
                      p_scheme: str = "spectral", check_leakage: bool = True) -> WignerField:
    """Evolve ``dW/dt = eta d_p(p W) + D_pp d_p^2 W + D_xx d_x^2 W - (p/M) d_x W``.

    Strang splitting: half step of streaming plus position diffusion (exact in
    Fourier space), full step of friction plus momentum diffusion (exact
    Ornstein-Uhlenbeck propagator, ``p_scheme="spectral"``, or the monotone
    finite-volume scheme), half step of streaming.

    Raises
    ------
    ConfigurationError
        If ``eta * dt > 0.1`` or the momentum grid under-resolves or
        under-covers the equilibrium width ``sqrt(D_pp/eta)``.
    DomainTooSmallError
        If more than ``1e-6`` of the mass sits in the outermost momentum cells.
    """
    return _evolve(W0, t_final, coeffs, M, dt, free_streaming, p_scheme, check_leakage)


def evolve_classical_fp(W0: WignerField, t_final: float, coeffs: DiffusionCoefficients, M: float,
                        dt: Optional[float] = None, free_streaming: bool = False,
                        p_scheme: str = "spectral", check_leakage: bool = True) -> WignerField:
    """Classical Kramers dynamics: as :func:`evolve_quantum_fp` with ``D_xx = 0``.

    Free streaming is off by default, matching the bare friction-diffusion
    equation for the momentum density.
    """
    c = DiffusionCoefficients(coeffs.eta, coeffs.D_pp, 0.0)
    return _evolve(W0, t_final, c, M, dt, free_streaming, p_scheme, check_leakage)
