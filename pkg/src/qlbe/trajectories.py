"""Event-driven Monte Carlo for the classical linear Boltzmann dynamics.

Between collisions the tracer momentum is constant, so the waiting time is
exactly exponential with rate ``m_out_flux(P)`` and no time step is involved.
Ensembles are simulated in lock-step blocks; each block owns one counter-based
Philox stream derived from the root seed, so results do not depend on the
number of worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .core import PhysicalParams
from .errors import ConfigurationError
from .rates import ConstantCrossSection, m_out_flux, sample_collision, sample_collisions

DEFAULT_BLOCK_SIZE = 1024


def block_rng(root_seed: int, block: int) -> np.random.Generator:
    """Independent stream number ``block`` of the root seed."""
    if root_seed < 0 or root_seed >= 2**64:
        raise ConfigurationError("root seed must fit in 64 unsigned bits")
    return np.random.Generator(np.random.Philox(key=root_seed, counter=[0, 0, 0, block]))


@dataclass
class Trajectory:
    """Jump times (first entry 0) and the momentum held from each time on."""

    times: np.ndarray
    momenta: np.ndarray

    @property
    def n_events(self) -> int:
        return len(self.times) - 1

    def momentum_at(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return self.momenta[idx]

    def time_average(self, func: Callable[[np.ndarray], np.ndarray], t_end: float) -> float:
        """Exact time average of ``func(P)`` over ``[0, t_end]``."""
        edges = np.append(self.times[self.times < t_end], t_end)
        vals = func(self.momenta[: len(edges) - 1])
        return float(np.sum(vals * np.diff(edges)) / t_end)


def simulate_trajectory(P0, t_max: float, params: PhysicalParams, rng: np.random.Generator,
                        model: Optional[ConstantCrossSection] = None,
                        freeze_momentum: bool = False, max_events: int = 10**8) -> Trajectory:
    """Single Gillespie trajectory up to ``t_max``.

    ``freeze_momentum`` records events without applying the momentum jump,
    which isolates the waiting-time statistics.
    """
    if not t_max > 0:
        raise ConfigurationError("t_max must be > 0")
    if model is not None:
        params = params.replace(sigma_tot=model.sigma_tot)
    P = np.array(P0, dtype=float)
    times, momenta = [0.0], [P.copy()]
    t = 0.0
    rate = m_out_flux(P, params)
    while len(times) <= max_events:
        if rate <= 0.0:
            break
        t += rng.exponential(1.0 / rate)
        if t > t_max:
            break
        if not freeze_momentum:
            P = P + sample_collision(P, params, rng)
            rate = m_out_flux(P, params)
        times.append(t)
        momenta.append(P.copy())
    return Trajectory(np.array(times), np.array(momenta))


class MaxwellInitial:
    """Initial momenta drawn from the Maxwell-Boltzmann law at the tracer mass."""

    def __init__(self, params: PhysicalParams):
        self.scale = math.sqrt(params.M * params.T)

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(scale=self.scale, size=(n, 3))


InitialSpec = Union[np.ndarray, Callable[[np.random.Generator, int], np.ndarray]]


def default_time_grid(eta: float, n: int = 64, t_min: float = 0.01, t_max: float = 10.0) -> np.ndarray:
    """``t = 0`` followed by ``n`` geometric points in ``[t_min, t_max] / eta``."""
    return np.concatenate([[0.0], np.geomspace(t_min / eta, t_max / eta, n)])


@dataclass
class EnsembleStats:
    t: np.ndarray
    mean_P: np.ndarray
    mean_E: np.ndarray
    cov_P: np.ndarray
    se_P: np.ndarray
    se_E: np.ndarray
    n_traj: int
    root_seed: int
    n_events: int = 0

    def table(self) -> tuple[list[str], np.ndarray]:
        """Column names and a 2-D array suitable for CSV output."""
        names = ["t", "Px", "Py", "Pz", "E",
                 "VarPx", "VarPy", "VarPz", "CovPxPy", "CovPxPz", "CovPyPz",
                 "se_Px", "se_Py", "se_Pz", "se_E"]
        c = self.cov_P
        cols = [self.t, *self.mean_P.T, self.mean_E,
                c[:, 0, 0], c[:, 1, 1], c[:, 2, 2], c[:, 0, 1], c[:, 0, 2], c[:, 1, 2],
                *self.se_P.T, self.se_E]
        return names, np.column_stack(cols)


# accumulated per grid time: P (3), products P_a P_b (6), E^2
_PAIRS = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
_N_SUMS = 3 + len(_PAIRS) + 1


def _initial_block(spec, rng, start, size):
    if callable(spec):
        P = np.asarray(spec(rng, size), dtype=float)
    else:
        arr = np.asarray(spec, dtype=float)
        P = np.tile(arr, (size, 1)) if arr.ndim == 1 else arr[start:start + size].copy()
    if P.shape != (size, 3):
        raise ConfigurationError(f"initial momenta have shape {P.shape}, expected {(size, 3)}")
    return P


def _run_block(args):
    spec, start, size, grid, params, root_seed, block = args
    rng = block_rng(root_seed, block)
    P = _initial_block(spec, rng, start, size)
    sums = np.zeros((_N_SUMS, len(grid)))
    n_grid = len(grid)
    two_M = 2.0 * params.M
    t_cur = np.zeros(size)
    ptr = np.zeros(size, dtype=np.int64)
    active = np.arange(size)
    n_events = 0
    while active.size:
        Pa = P[active]
        rate = m_out_flux(Pa, params)
        rate = np.atleast_1d(rate)
        wait = np.full(active.size, np.inf)
        e = rng.exponential(size=active.size)
        np.divide(e, rate, out=wait, where=rate > 0)
        t_new = t_cur[active] + wait
        hi = np.searchsorted(grid, t_new, side="left")
        counts = hi - ptr[active]
        total = int(counts.sum())
        if total:
            rows = np.repeat(np.arange(active.size), counts)
            offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
            gidx = ptr[active][rows] + offs
            Pr = Pa[rows]
            for k in range(3):
                sums[k] += np.bincount(gidx, Pr[:, k], minlength=n_grid)
            for j, (a, b) in enumerate(_PAIRS):
                sums[3 + j] += np.bincount(gidx, Pr[:, a] * Pr[:, b], minlength=n_grid)
            E = np.sum(Pr * Pr, axis=1) / two_M
            sums[-1] += np.bincount(gidx, E * E, minlength=n_grid)
        ptr[active] = hi
        t_cur[active] = t_new
        jump = hi < n_grid
        idx = active[jump]
        if idx.size:
            P[idx] += sample_collisions(P[idx], params, rng)
            n_events += idx.size
        active = idx
    return sums, n_events


def ensemble_moments(P0_distribution: InitialSpec, n_traj: int, time_grid, params: PhysicalParams,
                     root_seed: int, block_size: int = DEFAULT_BLOCK_SIZE,
                     workers: int = 1) -> EnsembleStats:
    """Monte Carlo estimate of momentum and energy moments on ``time_grid``.

    Parameters
    ----------
    P0_distribution : array (3,), array (n_traj, 3) or callable ``(rng, n) -> (n, 3)``
        Delta initial momentum, explicit initial momenta, or a sampler that
        receives the block's stream.
    time_grid : array_like
        Non-decreasing output times starting at or after 0.
    workers : int
        Number of processes; results are identical for any value.
    """
    if n_traj < 2:
        raise ConfigurationError("n_traj must be >= 2")
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) < 0):
        raise ConfigurationError("time grid must be a non-empty, non-decreasing array of times >= 0")
    if block_size < 1:
        raise ConfigurationError("block_size must be >= 1")
    jobs = []
    for block, start in enumerate(range(0, n_traj, block_size)):
        size = min(block_size, n_traj - start)
        jobs.append((P0_distribution, start, size, grid, params, int(root_seed), block))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs))
    else:
        results = [_run_block(j) for j in jobs]
    sums = np.zeros((_N_SUMS, len(grid)))
    n_events = 0
    for s, k in results:  # block order: deterministic reduction
        sums += s
        n_events += k
    n = float(n_traj)
    mean_P = (sums[:3] / n).T
    second = np.empty((len(grid), 3, 3))
    for j, (a, b) in enumerate(_PAIRS):
        second[:, a, b] = second[:, b, a] = sums[3 + j] / n
    cov = (second - mean_P[:, :, None] * mean_P[:, None, :]) * (n / (n - 1.0))
    mean_E = (sums[3] + sums[4] + sums[5]) / (2.0 * params.M * n)
    var_E = (sums[-1] / n - mean_E**2) * (n / (n - 1.0))
    se_P = np.sqrt(np.maximum(np.diagonal(cov, axis1=1, axis2=2), 0.0) / n)
    se_E = np.sqrt(np.maximum(var_E, 0.0) / n)
    return EnsembleStats(grid, mean_P, mean_E, cov, se_P, se_E, n_traj, int(root_seed), n_events)
