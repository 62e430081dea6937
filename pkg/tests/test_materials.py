import math

import pytest
from hypothesis import given, strategies as st

from porostab.errors import ConfigError
from porostab.materials import RegionMaterial, StabilizationConfig, compute_tau, derive_moduli


def test_cantilever_moduli():
    mod = derive_moduli(RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.05, kappa=0.0))
    assert mod.G == pytest.approx(3e9, rel=1e-14)
    assert mod.lam == pytest.approx(3e9, rel=1e-14)
    assert mod.b == 1.0 and mod.invN == 0.0 and mod.invM == 0.0


def test_stiffer_rock_shear_modulus():
    mod = derive_moduli(RegionMaterial(K_dr=9.4e9, nu=0.25, phi0=0.1, kappa=0.0))
    assert mod.G == pytest.approx(5.64e9, rel=1e-14)


def test_compressible_constituents():
    m = RegionMaterial(K_dr=5e9, nu=0.25, phi0=0.05, kappa=0.0, K_s=40e9, K_f=2e9)
    mod = derive_moduli(m)
    assert mod.b == pytest.approx(0.875)
    assert mod.invN == pytest.approx((0.875 - 0.05) / 40e9)
    assert mod.invM == pytest.approx(mod.invN + 0.05 / 2e9)


def test_tau_values():
    assert compute_tau(3e9, 3e9, 1.0) == pytest.approx(1.875e-11, rel=1e-14)
    assert compute_tau(3e9, 3e9, 3.0) == pytest.approx(5.625e-11, rel=1e-14)
    assert compute_tau(3e9, 3e9, 0.0) == 0.0


@pytest.mark.parametrize("kw", [dict(nu=0.5), dict(nu=-1.0), dict(phi0=0.0), dict(phi0=1.0),
                                dict(K_dr=0.0), dict(kappa=-1.0), dict(K_s=2e9)])
def test_invalid_materials(kw):
    base = dict(K_dr=5e9, nu=0.25, phi0=0.05, kappa=0.0)
    base.update(kw)
    with pytest.raises(ConfigError):
        RegionMaterial(**base).validate()


def test_stabilization_config():
    assert StabilizationConfig(True, 1.0, [1, 2]).regions == frozenset({1, 2})
    with pytest.raises(ConfigError):
        StabilizationConfig(True, 0.0)


@given(st.floats(1e8, 1e11), st.floats(-0.9, 0.49), st.floats(0.0, 10.0), st.floats(0.1, 10.0))
def test_tau_linear_in_c(K, nu, c, alpha):
    mod = derive_moduli(RegionMaterial(K_dr=K, nu=nu, phi0=0.1, kappa=0.0))
    assert compute_tau(mod.lam, mod.G, alpha * c) == pytest.approx(
        alpha * compute_tau(mod.lam, mod.G, c), rel=1e-12, abs=0)


@given(st.floats(1e8, 1e11), st.floats(-0.9, 0.49))
def test_bulk_modulus_roundtrip(K, nu):
    mod = derive_moduli(RegionMaterial(K_dr=K, nu=nu, phi0=0.1, kappa=0.0))
    assert mod.G > 0
    assert math.isclose(mod.lam + 2 * mod.G / 3, K, rel_tol=1e-12)
