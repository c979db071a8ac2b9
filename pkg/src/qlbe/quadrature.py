"""Fixed quadrature rules shared by the rate and coefficient integrals."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=16)
def gauss_hermite(n: int):
    """Nodes/weights for the weight ``exp(-x**2)`` on the real line."""
    x, w = np.polynomial.hermite.hermgauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def legendre_on(a: float, b: float, n: int, panels: int = 1):
    """Composite Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = gauss_legendre(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def sphere_rule(n_polar: int = 16, n_azimuth: int = 32):
    """Product rule on the unit sphere: Gauss-Legendre in cos(theta) times
    the trapezoid rule in phi.

    Returns unit vectors of shape (n_polar * n_azimuth, 3), with the polar
    axis along +z, and weights summing to 4*pi.
    """
    c, wc = gauss_legendre(n_polar)
    phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    s = np.sqrt(1.0 - c**2)
    dirs = np.stack(
        [
            (s[:, None] * np.cos(phi)[None, :]).ravel(),
            (s[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(c, n_azimuth),
        ],
        axis=-1,
    )
    weights = np.repeat(wc, n_azimuth) * (2.0 * np.pi / n_azimuth)
    return dirs, weights


def rotation_to(axis) -> np.ndarray:
    """Orthogonal matrix whose third row is the unit vector along ``axis``.

    ``R.T @ v`` maps a vector given in the frame with polar axis ``axis`` back
    to lab coordinates.  A zero axis gives the identity.
    """
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        return np.eye(3)
    e3 = axis / norm
    e1, e2 = plane_basis(e3)
    return np.stack([e1, e2, e3])


def plane_basis(normal):
    """Two orthonormal vectors spanning the plane perpendicular to ``normal``.

    Broadcasts over leading axes of ``normal`` (which must be unit length).
    """
    n = np.asarray(normal, dtype=float)
    # pick the lab axis least aligned with n to avoid degeneracy
    helper = np.zeros_like(n)
    idx = np.argmin(np.abs(n), axis=-1)
    np.put_along_axis(helper, idx[..., None], 1.0, axis=-1)
    e1 = helper - np.sum(helper * n, axis=-1, keepdims=True) * n
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(n, e1)
    return e1, e2
