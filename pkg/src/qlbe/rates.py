"""Collision-rate kernels of the linear Boltzmann equation for a tracer in a
Maxwellian gas, and an exact sampler for single collisions.

Conventions: ``Q`` is the momentum gained by the tracer.  ``m_in_classical(P, Q)``
is the rate density for arriving at ``P`` after a gain ``Q``;
``m_out_classical(P)`` is the total rate of leaving ``P``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .core import PhysicalParams, derive_scales, erf
from .errors import ConfigurationError, DomainError, NumericAccuracyError, PreconditionError, SamplingError
from .quadrature import gauss_hermite, legendre_on, plane_basis, rotation_to, sphere_rule

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ConstantCrossSection:
    """Isotropic scattering, ``|f|^2 = sigma_tot / (4 pi)``."""

    sigma_tot: float

    def __post_init__(self):
        if not self.sigma_tot >= 0:
            raise ConfigurationError("sigma_tot must be >= 0")

    def differential(self, p_f, p_i):
        shape = np.broadcast_shapes(np.shape(p_f)[:-1], np.shape(p_i)[:-1])
        return np.full(shape, self.sigma_tot / (4.0 * math.pi))


@dataclass(frozen=True)
class BornCrossSection:
    """Born-approximation cross-section ``|f_B(Q)|^2`` depending only on the
    magnitude of the momentum transfer.

    ``kernel`` maps an array of transfer magnitudes to non-negative values
    [area / steradian].
    """

    kernel: Callable[[np.ndarray], np.ndarray]

    def differential(self, p_f, p_i):
        q = np.linalg.norm(np.asarray(p_f, dtype=float) - np.asarray(p_i, dtype=float), axis=-1)
        value = np.asarray(self.kernel(q), dtype=float)
        if np.any(value < 0):
            raise ConfigurationError("Born kernel returned a negative cross-section")
        return value

    @classmethod
    def from_table(cls, path: Union[str, Path]) -> "BornCrossSection":
        """Two-column text file ``Q value``; linear interpolation, constant
        extension beyond the tabulated range."""
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ConfigurationError(f"{path}: expected two columns, found {data.shape[1]}")
        q, v = data[:, 0], data[:, 1]
        if np.any(np.diff(q) <= 0):
            raise ConfigurationError(f"{path}: Q column must be strictly increasing")
        if np.any(v < 0):
            raise ConfigurationError(f"{path}: negative cross-section values")
        return cls(kernel=lambda x: np.interp(x, q, v))


CrossSectionModel = Union[ConstantCrossSection, BornCrossSection]


def _model(params: PhysicalParams, model):
    return ConstantCrossSection(params.sigma_tot) if model is None else model


def _split_transfer(Q):
    Q = np.asarray(Q, dtype=float)
    q = np.linalg.norm(Q, axis=-1)
    if np.any(q == 0.0):
        raise DomainError("zero momentum transfer: the kernel carries a 1/Q singularity")
    return q, Q / q[..., None]


def _offset(P, qhat, q, params: PhysicalParams):
    """Parallel offset of the gas momentum fixed by energy conservation for a
    tracer arriving at ``P`` after gaining ``Q``."""
    r = params.mass_ratio
    return 0.5 * (1.0 - r) * q + r * np.sum(np.asarray(P, dtype=float) * qhat, axis=-1)


def _prefactor(q, params: PhysicalParams):
    m_star = params.m * params.M / (params.M + params.m)
    return params.n_gas * params.m / (m_star**2 * q)


def _plane_quadrature(P, Q, params, model, n_nodes=24):
    """Gauss-Hermite evaluation of
    ``int_{Q-perp} d^2p exp(-p^2/p_beta^2) sigma(rel(p,P_perp) - Q/2, rel(p,P_perp) + Q/2)``
    normalised by ``pi^{-3/2} p_beta^{-1}`` (i.e. the plane integral of mu_beta
    with the parallel offset stripped).
    """
    p_beta = derive_scales(params).p_beta
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    P, Q = np.broadcast_arrays(P, Q)
    q, qhat = _split_transfer(Q)
    e1, e2 = plane_basis(qhat)
    P_perp = P - np.sum(P * qhat, axis=-1, keepdims=True) * qhat
    x, w = gauss_hermite(n_nodes)
    total = np.zeros(q.shape)
    for xi, wi in zip(x, w):
        for yj, wj in zip(x, w):
            p = p_beta * (xi * e1 + yj * e2)
            rl = _rel(p, P_perp, params)
            total += wi * wj * model.differential(rl - 0.5 * Q, rl + 0.5 * Q)
    return total / (math.pi**1.5 * p_beta)


def _rel(p, P, params):
    m_star = params.m * params.M / (params.M + params.m)
    return (m_star / params.m) * p - (m_star / params.M) * P


def m_in_classical(P, Q, params: PhysicalParams, model: CrossSectionModel | None = None):
    """Classical rate density to arrive at momentum ``P`` after gaining ``Q``.

    Constant cross-sections use the closed form (the Q-perp Gaussian integral
    done analytically); Born kernels integrate the Q-perp plane numerically.

    Raises
    ------
    DomainError
        If any ``Q`` is the zero vector.
    """
    model = _model(params, model)
    q, qhat = _split_transfer(Q)
    p_beta = derive_scales(params).p_beta
    b = _offset(P, qhat, q, params)
    gauss = np.exp(-(b * b) / p_beta**2)
    if isinstance(model, ConstantCrossSection):
        plane = model.sigma_tot / (4.0 * math.pi) / (_SQRT_PI * p_beta)
    else:
        plane = _plane_quadrature(P, Q, params, model)
    return _prefactor(q, params) * plane * gauss


def m_in_quantum(P, Pprime, Q, params: PhysicalParams, model: CrossSectionModel | None = None):
    """Complex in-rate density ``M_in(P, P'; Q)`` of the quantum master equation.

    For both supported models the scattering amplitude carries no phase that
    depends on the perpendicular momenta, so the result is real; it equals the
    geometric mean of the two classical rates and reduces to
    :func:`m_in_classical` on the diagonal.
    """
    model = _model(params, model)
    q, qhat = _split_transfer(Q)
    p_beta = derive_scales(params).p_beta
    b1 = _offset(P, qhat, q, params)
    b2 = _offset(Pprime, qhat, q, params)
    gauss = np.exp(-(b1 * b1 + b2 * b2) / (2.0 * p_beta**2))
    if isinstance(model, ConstantCrossSection):
        plane = model.sigma_tot / (4.0 * math.pi) / (_SQRT_PI * p_beta)
    else:
        plane = _plane_quadrature(P, Q, params, model)
    return (_prefactor(q, params) * plane * gauss).astype(complex)


def sigma_tilde(P_perp, Q, params: PhysicalParams, model: CrossSectionModel | None = None,
                method: str = "auto", n_nodes: int = 24):
    """Effective cross-section: the differential cross-section averaged with
    the Maxwellian over the plane perpendicular to ``Q``.

    ``method="auto"`` uses the closed form for constant cross-sections and
    Gauss-Hermite quadrature otherwise; ``"quadrature"`` forces the latter.
    """
    model = _model(params, model)
    P_perp = np.asarray(P_perp, dtype=float)
    q, qhat = _split_transfer(Q)
    par = np.abs(np.sum(P_perp * qhat, axis=-1))
    scale = np.maximum(np.linalg.norm(P_perp, axis=-1), np.finfo(float).tiny)
    if np.any(par > 1e-9 * scale):
        raise PreconditionError("P_perp is not perpendicular to Q")
    if method == "auto" and isinstance(model, ConstantCrossSection):
        p_beta = derive_scales(params).p_beta
        return np.broadcast_to(model.sigma_tot / (4.0 * math.pi) / (_SQRT_PI * p_beta), q.shape).copy()
    if method not in ("auto", "quadrature"):
        raise ConfigurationError(f"unknown method {method!r}")
    return _plane_quadrature(P_perp, Q, params, model, n_nodes=n_nodes)


def m_out_flux(P, params: PhysicalParams):
    """Closed-form total collision rate for a constant cross-section:
    ``n sigma <|v_gas - V|>`` averaged over the Maxwellian gas."""
    s = derive_scales(params)
    U = np.linalg.norm(np.asarray(P, dtype=float), axis=-1) / (params.M * s.v_beta)
    small = U < 1e-3
    Us = np.where(small, 1.0, U)
    big = np.exp(-Us * Us) / _SQRT_PI + (Us + 0.5 / Us) * erf(Us)
    series = (2.0 / _SQRT_PI) * (1.0 + U * U / 3.0 - U**4 / 30.0)
    speed = np.where(small, series, big)
    out = params.n_gas * params.sigma_tot * s.v_beta * speed
    return float(out) if np.ndim(out) == 0 else out


def _radial_cutoff(P, params):
    s = derive_scales(params)
    U = np.linalg.norm(P) / (params.M * s.v_beta)
    return 12.0 * max(s.p_beta, s.m_star * s.v_beta * (1.0 + U))


def _transfer_rule(P, params, n_radial, n_polar, n_azimuth):
    """Nodes Q (k, 3) and weights for integrals over the momentum transfer,
    polar axis along ``P``."""
    s = derive_scales(params)
    eps = 1e-6 * s.m_star * s.v_beta
    q_max = _radial_cutoff(P, params)
    panels = max(1, n_radial // 16)
    r, wr = legendre_on(eps, q_max, n_radial // panels, panels)
    dirs, wd = sphere_rule(n_polar, n_azimuth)
    dirs = dirs @ rotation_to(P)
    Q = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    w = ((r * r * wr)[:, None] * wd[None, :]).ravel()
    return Q, w


def _out_integrals(P, params, model, n_radial, n_polar, n_azimuth):
    Q, w = _transfer_rule(P, params, n_radial, n_polar, n_azimuth)
    dens = w * m_in_classical(P + Q, Q, params, model)
    rate = dens.sum()
    mean = dens @ Q
    second = (Q * dens[:, None]).T @ Q
    return rate, mean, second


def m_out_classical(P, params: PhysicalParams, model: CrossSectionModel | None = None,
                    n_radial: int = 64, n_polar: int = 16, n_azimuth: int = 32,
                    rtol: float = 1e-6):
    """Total rate of leaving momentum ``P``, by radial x spherical quadrature of
    ``m_in_classical(P + Q, Q)`` over ``Q``.

    The radial rule starts at ``1e-6 m* v_beta`` (the 1/Q kernel is integrable)
    and is repeated at double resolution; if the two disagree by more than
    ``rtol`` a :class:`NumericAccuracyError` is raised.
    """
    model = _model(params, model)
    P = np.asarray(P, dtype=float)
    flat = P.reshape(-1, 3)
    out = np.empty(len(flat))
    for i, p in enumerate(flat):
        coarse = _out_integrals(p, params, model, n_radial, n_polar, n_azimuth)[0]
        fine = _out_integrals(p, params, model, 2 * n_radial, 2 * n_polar, n_azimuth)[0]
        if abs(fine - coarse) > rtol * abs(fine):
            raise NumericAccuracyError(
                f"out-rate quadrature not converged at P={p}: {coarse} vs {fine}"
            )
        out[i] = fine
    out = out.reshape(P.shape[:-1])
    return float(out) if out.ndim == 0 else out


def transfer_moments(P, params: PhysicalParams, model: CrossSectionModel | None = None,
                     n_radial: int = 128, n_polar: int = 32, n_azimuth: int = 32):
    """Mean vector and covariance of the momentum transfer distribution
    ``m_in_classical(P + Q, Q) / m_out_classical(P)``, by quadrature."""
    model = _model(params, model)
    rate, first, second = _out_integrals(np.asarray(P, dtype=float), params, model,
                                         n_radial, n_polar, n_azimuth)
    mean = first / rate
    return mean, second / rate - np.outer(mean, mean)


def sample_collisions(P, params: PhysicalParams, rng: np.random.Generator,
                      max_iter: int = 100_000, return_gas: bool = False):
    """Draw one momentum transfer for each tracer momentum in ``P`` (n, 3).

    The colliding gas velocity is drawn from ``mu_beta(u) |u - V|`` by
    rejection from the envelope ``mu_beta(u) (|u| + |V|)`` (a two-component
    mixture that is sampled exactly, acceptance probability >= 1/2 on
    average), then the relative momentum is rotated to a uniform direction.
    Only constant cross-sections are supported.

    Returns
    -------
    Q : ndarray (n, 3)
    p0 : ndarray (n, 3), only if ``return_gas``; pre-collision gas momenta.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    s = derive_scales(params)
    n = len(P)
    V = P / params.M
    v_abs = np.linalg.norm(V, axis=-1)
    mean_speed = 2.0 * s.v_beta / _SQRT_PI
    p_flux = mean_speed / (mean_speed + v_abs)
    u = np.empty((n, 3))
    pending = np.arange(n)
    it = 0
    while pending.size:
        it += 1
        if it > max_iter:
            raise SamplingError(f"rejection sampler exceeded {max_iter} iterations")
        k = pending.size
        from_flux = rng.random(k) < p_flux[pending]
        u_mb = rng.normal(scale=s.v_beta / math.sqrt(2.0), size=(k, 3))
        direction = rng.normal(size=(k, 3))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        speed = s.v_beta * np.sqrt(rng.gamma(2.0, size=k))
        cand = np.where(from_flux[:, None], speed[:, None] * direction, u_mb)
        vp = v_abs[pending]
        accept_prob = np.linalg.norm(cand - V[pending], axis=-1) / (np.linalg.norm(cand, axis=-1) + vp)
        acc = rng.random(k) < accept_prob
        u[pending[acc]] = cand[acc]
        pending = pending[~acc]
    r = s.m_star * (u - V)
    new_dir = rng.normal(size=(n, 3))
    new_dir /= np.linalg.norm(new_dir, axis=-1, keepdims=True)
    Q = r - np.linalg.norm(r, axis=-1, keepdims=True) * new_dir
    if return_gas:
        return Q, params.m * u
    return Q


def sample_collision(P, params: PhysicalParams, rng: np.random.Generator,
                     model: CrossSectionModel | None = None, max_iter: int = 100_000):
    """Single momentum transfer for a tracer at ``P`` (constant cross-section only)."""
    if model is not None and not isinstance(model, ConstantCrossSection):
        raise ConfigurationError("collision sampling is only available for constant cross-sections")
    if model is not None and model.sigma_tot != params.sigma_tot:
        params = params.replace(sigma_tot=model.sigma_tot)
    return sample_collisions(np.asarray(P, dtype=float)[None, :], params, rng, max_iter)[0]
