"""Momentum-representation generator of the master equation on a 3D grid.

A coherence slice holds ``rho(P + K/2, P - K/2)`` on grid nodes ``P`` for a
fixed coherence vector ``K``; translation covariance makes each slice evolve
on its own.  The gain term is a discrete sum over grid transfers ``Q != 0``;
the loss term uses the exact out-rate.  Gain columns are rescaled so that the
discrete gain out of every node equals its loss, which makes trace
conservation at ``K = 0`` exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import PhysicalParams, derive_scales
from .errors import ConfigurationError
from .rates import ConstantCrossSection, m_out_flux

_SQRT_PI = math.sqrt(math.pi)
#: Dense generators up to this many bytes are cached for propagation.
DENSE_LIMIT_BYTES = 2.5e9


@dataclass(frozen=True)
class MomentumGrid3D:
    """``N**3`` nodes of ``linspace(-P_max, P_max, N)`` per axis (N odd)."""

    P_max: float
    N: int = 21

    def __post_init__(self):
        if self.N < 3 or self.N % 2 == 0:
            raise ConfigurationError(f"N must be odd and >= 3, got {self.N}")
        if not self.P_max > 0:
            raise ConfigurationError("P_max must be > 0")

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.P_max, self.P_max, self.N)

    @property
    def dP(self) -> float:
        return 2.0 * self.P_max / (self.N - 1)

    @property
    def shape(self) -> tuple:
        return (self.N,) * 3

    @property
    def size(self) -> int:
        return self.N**3

    @property
    def nodes(self) -> np.ndarray:
        a = self.axis
        g = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def check(self, params: PhysicalParams, strict: bool = True) -> None:
        """Coverage ``P_max >= 5 max(p_beta, sqrt(M T))`` and resolution
        ``dP <= p_beta / 2``; ``strict=False`` skips the resolution rule
        (coarse members of a refinement ladder)."""
        s = derive_scales(params)
        need = 5.0 * max(s.p_beta, math.sqrt(params.M * params.T))
        if self.P_max < need * (1 - 1e-12):
            raise ConfigurationError(f"P_max = {self.P_max:.4g} < {need:.4g} (5 thermal widths)")
        if strict and self.dP > 0.5 * s.p_beta * (1 + 1e-12):
            raise ConfigurationError(
                f"grid spacing {self.dP:.4g} exceeds p_beta/2 = {0.5 * s.p_beta:.4g}; increase N"
            )


def default_grid(params: PhysicalParams, N: int = 21) -> MomentumGrid3D:
    s = derive_scales(params)
    return MomentumGrid3D(5.0 * max(s.p_beta, math.sqrt(params.M * params.T)), N)


@dataclass
class CoherenceSlice:
    grid: MomentumGrid3D
    K: np.ndarray
    values: np.ndarray
    include_free_phase: bool = False

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=float).reshape(3)
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ConfigurationError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("non-finite slice values")

    @classmethod
    def thermal(cls, grid: MomentumGrid3D, params: PhysicalParams, K=(0.0, 0.0, 0.0),
                include_free_phase: bool = False) -> "CoherenceSlice":
        """Maxwell-Boltzmann profile at the tracer mass, unit discrete trace."""
        P = grid.nodes
        w = np.exp(-np.sum(P * P, axis=1) / (2.0 * params.M * params.T)).reshape(grid.shape)
        w /= w.sum() * grid.dP**3
        return cls(grid, np.asarray(K, dtype=float), w, include_free_phase)

    @classmethod
    def gaussian(cls, grid: MomentumGrid3D, mean, var: float, K=(0.0, 0.0, 0.0),
                 include_free_phase: bool = False) -> "CoherenceSlice":
        P = grid.nodes - np.asarray(mean, dtype=float)
        w = np.exp(-np.sum(P * P, axis=1) / (2.0 * var)).reshape(grid.shape)
        w /= w.sum() * grid.dP**3
        return cls(grid, np.asarray(K, dtype=float), w, include_free_phase)

    def trace(self) -> complex:
        return complex(self.values.sum() * self.grid.dP**3)

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.dP**3)

    def mean_energy(self, M: float) -> float:
        """``<P^2 / 2M>`` of a population (``K = 0``) slice."""
        P = self.grid.nodes
        w = np.real(self.values).ravel()
        return float(np.sum(w * np.sum(P * P, axis=1)) / (2.0 * M * w.sum()))


class GridGenerator:
    """Generator of one momentum grid for a constant cross-section.

    Parameters
    ----------
    strict : bool
        Enforce the resolution rule ``dP <= p_beta/2`` (see
        :meth:`MomentumGrid3D.check`).
    chunk : int
        Output rows processed at once in matrix-free application.
    """

    def __init__(self, grid: MomentumGrid3D, params: PhysicalParams,
                 model: Optional[ConstantCrossSection] = None, strict: bool = True, chunk: int = 128):
        if model is not None and not isinstance(model, ConstantCrossSection):
            raise ConfigurationError("grid propagation supports constant cross-sections only")
        if model is not None:
            params = params.replace(sigma_tot=model.sigma_tot)
        grid.check(params, strict=strict)
        self.grid = grid
        self.params = params
        self.chunk = chunk
        self.nodes = grid.nodes
        s = derive_scales(params)
        self._p_beta = s.p_beta
        self._ratio = params.mass_ratio
        self._pref = (params.n_gas * params.m / s.m_star**2 * params.sigma_tot / (4.0 * math.pi)
                      / (_SQRT_PI * s.p_beta) * grid.dP**3)
        self._factors: Optional[np.ndarray] = None
        self._dense: dict = {}

    # kernel -----------------------------------------------------------------
    def _block(self, rows: np.ndarray, K: np.ndarray) -> np.ndarray:
        """Unscaled gain weights ``M_in(P_i + K/2, P_i - K/2; P_i - P_j) dP^3``
        for output rows ``rows`` and all source nodes (Q = 0 set to zero)."""
        P = self.nodes[rows]
        Q = P[:, None, :] - self.nodes[None, :, :]
        q = np.sqrt(np.einsum("ijk,ijk->ij", Q, Q))
        zero = q == 0.0
        q[zero] = 1.0
        PQ = np.einsum("ik,ijk->ij", P, Q) / q
        b = 0.5 * (1.0 - self._ratio) * q + self._ratio * PQ
        expo = b * b
        if np.any(K):
            d = 0.5 * self._ratio * (Q @ K) / q
            expo = expo + d * d
        w = self._pref / q * np.exp(-expo / self._p_beta**2)
        w[zero] = 0.0
        return w

    def column_factors(self) -> np.ndarray:
        """Scale of each source column so the discrete gain it feeds equals its
        exact out-rate."""
        if self._factors is None:
            colsum = np.zeros(self.grid.size)
            zero_K = np.zeros(3)
            for start in range(0, self.grid.size, self.chunk):
                rows = np.arange(start, min(start + self.chunk, self.grid.size))
                colsum += self._block(rows, zero_K).sum(axis=0)
            loss = self.loss_rates(zero_K)
            with np.errstate(invalid="ignore", divide="ignore"):
                self._factors = np.where(colsum > 0, loss / colsum, 0.0)
        return self._factors

    def loss_rates(self, K) -> np.ndarray:
        """``(M_out(P + K/2) + M_out(P - K/2)) / 2`` at each node."""
        K = np.asarray(K, dtype=float)
        return 0.5 * (m_out_flux(self.nodes + 0.5 * K, self.params)
                      + m_out_flux(self.nodes - 0.5 * K, self.params))

    def phase(self, K) -> np.ndarray:
        """Free-evolution frequency ``P.K / (hbar M)`` at each node."""
        return (self.nodes @ np.asarray(K, dtype=float)) / (self.params.hbar * self.params.M)

    # application ------------------------------------------------------------
    def matrix(self, K, include_free_phase: bool = False) -> np.ndarray:
        """Dense generator for slice ``K`` (real when the free phase is off)."""
        K = np.asarray(K, dtype=float)
        key = (tuple(K), bool(include_free_phase and np.any(K)))
        if key in self._dense:
            return self._dense[key]
        n = self.grid.size
        cplx = key[1]
        A = np.empty((n, n), dtype=complex if cplx else float)
        f = self.column_factors()
        for start in range(0, n, self.chunk):
            rows = np.arange(start, min(start + self.chunk, n))
            A[rows] = self._block(rows, K) * f[None, :]
        diag = -self.loss_rates(K).astype(A.dtype)
        if cplx:
            diag = diag - 1j * self.phase(K)
        A[np.arange(n), np.arange(n)] += diag
        if A.nbytes <= DENSE_LIMIT_BYTES:
            self._dense = {key: A}
        return A

    def apply(self, values: np.ndarray, K, include_free_phase: bool = False) -> np.ndarray:
        """Time derivative of a slice, matrix-free unless a dense generator is cached."""
        K = np.asarray(K, dtype=float)
        key = (tuple(K), bool(include_free_phase and np.any(K)))
        v = np.asarray(values).ravel()
        if key in self._dense:
            return (self._dense[key] @ v).reshape(self.grid.shape)
        f = self.column_factors()
        fv = f * v
        out = np.empty(self.grid.size, dtype=np.result_type(v.dtype, float))
        for start in range(0, self.grid.size, self.chunk):
            rows = np.arange(start, min(start + self.chunk, self.grid.size))
            out[rows] = self._block(rows, K) @ fv
        out = out - self.loss_rates(K) * v
        if key[1]:
            out = out - 1j * self.phase(K) * v
        return out.reshape(self.grid.shape)


def apply_generator(slice_: CoherenceSlice, params: PhysicalParams,
                    model: Optional[ConstantCrossSection] = None,
                    generator: Optional[GridGenerator] = None, strict: bool = True) -> CoherenceSlice:
    """Time derivative of ``slice_`` under gain, loss and (optionally) free evolution."""
    gen = generator or GridGenerator(slice_.grid, params, model, strict=strict)
    d = gen.apply(slice_.values, slice_.K, slice_.include_free_phase)
    return CoherenceSlice(slice_.grid, slice_.K, d, slice_.include_free_phase)


def max_stable_dt(gen: GridGenerator, K) -> float:
    return 0.1 / float(np.max(gen.loss_rates(K)))


def propagate_slice(slice_: CoherenceSlice, t_final: float, dt: float, params: PhysicalParams,
                    generator: Optional[GridGenerator] = None, strict: bool = True,
                    callback=None) -> CoherenceSlice:
    """Classical fourth-order Runge-Kutta propagation.

    ``callback(t, values)`` is called after every step if given.

    Raises
    ------
    ConfigurationError
        If ``dt`` exceeds ``0.1 / max loss rate`` on the grid.
    """
    gen = generator or GridGenerator(slice_.grid, params, strict=strict)
    limit = max_stable_dt(gen, slice_.K)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise ConfigurationError(f"dt = {dt:.4g} outside (0, {limit:.4g}] (0.1 / max loss rate)")
    if t_final < 0:
        raise ConfigurationError("t_final must be >= 0")
    n_steps = int(math.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0
    h = t_final / n_steps if n_steps else 0.0
    cplx = slice_.include_free_phase and np.any(slice_.K)
    y = slice_.values.astype(complex if (cplx or np.iscomplexobj(slice_.values)) else float).ravel()
    if n_steps and y.itemsize * y.size**2 <= DENSE_LIMIT_BYTES:
        A = gen.matrix(slice_.K, slice_.include_free_phase)
        f = lambda v: A @ v
    else:
        f = lambda v: gen.apply(v, slice_.K, slice_.include_free_phase).ravel()
    t = 0.0
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        if callback is not None:
            callback(t, y.reshape(slice_.grid.shape))
    return CoherenceSlice(slice_.grid, slice_.K, y.reshape(slice_.grid.shape), slice_.include_free_phase)


def coherence_decay_rate(K, params: PhysicalParams, grid: Optional[MomentumGrid3D] = None,
                         generator: Optional[GridGenerator] = None, strict: bool = True) -> float:
    """Initial decay rate ``-(d/dt) ||rho||_1 / ||rho||_1`` of a slice with the
    thermal profile at coherence vector ``K``."""
    if generator is None:
        grid = grid or default_grid(params)
        generator = GridGenerator(grid, params, strict=strict)
    sl = CoherenceSlice.thermal(generator.grid, params, K)
    d = generator.apply(sl.values, sl.K, False)
    # the free phase is imaginary on a real profile and drops out of the L1 rate
    return float(-np.sum(np.real(d)) / np.sum(np.abs(sl.values)))


def thermal_loss_average(K, params: PhysicalParams, grid: MomentumGrid3D) -> float:
    """Loss rate ``(M_out(P + K/2) + M_out(P - K/2)) / 2`` averaged over the
    thermal profile; the large-``K`` limit of :func:`coherence_decay_rate`."""
    sl = CoherenceSlice.thermal(grid, params, K)
    P = grid.nodes
    K = np.asarray(K, dtype=float)
    loss = 0.5 * (m_out_flux(P + 0.5 * K, params) + m_out_flux(P - 0.5 * K, params))
    w = sl.values.ravel()
    return float(np.sum(w * loss) / w.sum())


def stationarity_residual(params: PhysicalParams, grid: MomentumGrid3D,
                          generator: Optional[GridGenerator] = None, strict: bool = True) -> float:
    """``||G rho_MB||_1 / ||loss * rho_MB||_1`` for the grid-sampled Maxwellian."""
    gen = generator or GridGenerator(grid, params, strict=strict)
    sl = CoherenceSlice.thermal(grid, params)
    d = gen.apply(sl.values, np.zeros(3))
    loss = gen.loss_rates(np.zeros(3)) * sl.values.ravel()
    return float(np.abs(d).sum() / np.abs(loss).sum())
