import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlbe.core import (
    KUMMER_SERIES_CUTOFF,
    PhysicalParams,
    derive_scales,
    erf,
    kummer_a,
    kummer_b,
    maxwell_boltzmann,
    rel,
    warn_if_not_diffusive,
)
from qlbe.errors import ConfigurationError, DiffusiveLimitWarning

positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


def test_derive_scales_examples():
    s = derive_scales(PhysicalParams(m=2, M=5, T=1, n_gas=1, sigma_tot=1))
    assert s.p_beta == pytest.approx(2.0, rel=1e-15)
    assert derive_scales(PhysicalParams(m=1, M=1, T=1, n_gas=1, sigma_tot=1)).m_star == 0.5
    s = derive_scales(PhysicalParams(m=1, M=100, T=1, n_gas=1, sigma_tot=1))
    assert s.lambda_th == pytest.approx(math.sqrt(2 * math.pi / 100), rel=1e-15)
    assert s.lambda_th == pytest.approx(0.250663, abs=1e-6)


@given(positive, positive, positive)
def test_scale_invariants(m, M, T):
    p = PhysicalParams(m=m, M=M, T=T, n_gas=1.0, sigma_tot=1.0)
    s = derive_scales(p)
    assert s.p_beta**2 == pytest.approx(2 * m / p.beta, rel=1e-14)
    assert s.m_star < min(m, M)
    if m < M:
        assert s.lambda_th < s.lambda_th_gas


@pytest.mark.parametrize("bad", [dict(m=0), dict(M=-1), dict(T=float("nan")), dict(sigma_tot=0),
                                 dict(hbar=0), dict(n_gas=-1)])
def test_params_reject_invalid(bad):
    kw = dict(m=1.0, M=2.0, T=1.0, n_gas=1.0, sigma_tot=1.0)
    kw.update(bad)
    with pytest.raises(ConfigurationError):
        PhysicalParams(**kw)


def test_params_from_mapping():
    p = PhysicalParams.from_mapping(dict(m=1, M=2, T=3, n_gas=0, sigma_tot=1))
    assert p.hbar == 1.0 and p.n_gas == 0.0
    with pytest.raises(ConfigurationError, match="unknown"):
        PhysicalParams.from_mapping(dict(m=1, M=2, T=3, n_gas=1, sigma_tot=1, x=2))
    with pytest.raises(ConfigurationError, match="missing"):
        PhysicalParams.from_mapping(dict(m=1, M=2))


def test_diffusive_warning_threshold():
    with pytest.warns(DiffusiveLimitWarning):
        assert warn_if_not_diffusive(PhysicalParams(m=1, M=2, T=1, n_gas=1, sigma_tot=1))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not warn_if_not_diffusive(PhysicalParams(m=1, M=10, T=1, n_gas=1, sigma_tot=1))


def test_rel_examples(unit_params):
    s = derive_scales(unit_params)
    p, P = np.array([1.0, 2.0, 3.0]), np.array([-4.0, 0.5, 2.0])
    expected = s.m_star / unit_params.m * p - s.m_star / unit_params.M * P
    assert np.allclose(rel(p, P, unit_params), expected, rtol=1e-15)
    # a gas particle moving with the tracer velocity has zero relative momentum
    V = P / unit_params.M
    assert np.allclose(rel(unit_params.m * V, P, unit_params), 0.0, atol=1e-15)


def test_maxwell_boltzmann_normalised(unit_params):
    from scipy.integrate import quad

    p_beta = derive_scales(unit_params).p_beta
    radial = quad(lambda r: 4 * math.pi * r * r * maxwell_boltzmann(np.array([0, 0, r]), unit_params),
                  0, 20 * p_beta)[0]
    assert radial == pytest.approx(1.0, rel=1e-10)
    radial_M = quad(lambda r: 4 * math.pi * r * r
                    * maxwell_boltzmann(np.array([0, 0, r]), unit_params, mass=unit_params.M), 0, 200)[0]
    assert radial_M == pytest.approx(1.0, rel=1e-10)


def test_erf_against_mpmath():
    x = np.concatenate([np.linspace(-8, 8, 4001), [0.0, 1e-300, 3.0, 3.0000001, 27.0]])
    ref = np.array([float(mpmath.erf(v)) for v in x])
    assert np.max(np.abs(erf(x) - ref)) < 2e-15
    assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-15)
    assert erf(np.inf) == 1.0 and erf(-np.inf) == -1.0


@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_erf_odd_and_bounded(x):
    assert erf(-x) == -erf(x)
    assert -1.0 <= erf(x) <= 1.0


def _kummer_ref(a, b, u2):
    return float(mpmath.hyp1f1(a, b, -u2))


def test_kummer_against_mpmath():
    u2 = np.concatenate([np.linspace(0, 25, 2001), [KUMMER_SERIES_CUTOFF * (1 - 1e-12), KUMMER_SERIES_CUTOFF]])
    ra = np.array([_kummer_ref(-0.5, 2.5, v) for v in u2])
    rb = np.array([_kummer_ref(-1.5, 1.5, v) for v in u2])
    assert np.max(np.abs(kummer_a(u2) / ra - 1)) < 1e-13
    assert np.max(np.abs(kummer_b(u2) / rb - 1)) < 1e-13


def test_kummer_special_values():
    assert kummer_a(0.0) == 1.0 and kummer_b(0.0) == 1.0
    # large argument: 1F1(a, b; -x) ~ Gamma(b)/Gamma(b-a) x^(-a) (1 + a(a-b+1)/x)
    x = 400.0
    assert kummer_a(x) == pytest.approx(math.gamma(2.5) / math.gamma(3.0) * x**0.5 * (1 + 1 / x), rel=1e-4)
    assert kummer_b(x) == pytest.approx(math.gamma(1.5) / math.gamma(3.0) * x**1.5 * (1 + 3 / x), rel=1e-4)
    with pytest.raises(ConfigurationError):
        kummer_a(-1.0)


def test_kummer_monotone_grid():
    u2 = np.linspace(0, 25, 10_000)
    assert np.all(np.diff(kummer_a(u2)) > 0)
    assert np.all(np.diff(kummer_b(u2)) > 0)
    assert np.all(kummer_a(u2) > 0) and np.all(kummer_b(u2) > 0)


@settings(max_examples=200)
@given(st.floats(min_value=0, max_value=30, allow_nan=False))
def test_kummer_derivative_identity(u2):
    # d/dz 1F1(a, b; z) = a/b 1F1(a+1, b+1; z)
    z = -u2
    h = 1e-5 * max(1.0, u2)
    for f, a, b in ((kummer_a, -0.5, 2.5), (kummer_b, -1.5, 1.5)):
        lo, hi = max(u2 - h, 0.0), u2 + h
        deriv = (f(hi) - f(lo)) / (hi - lo)  # d/du2 = -d/dz
        ref = -(a / b) * float(mpmath.hyp1f1(a + 1, b + 1, z))
        assert deriv == pytest.approx(ref, rel=1e-5, abs=1e-9)
