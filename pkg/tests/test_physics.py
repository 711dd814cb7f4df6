from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from kgcm.errors import DataError
from kgcm.physics import (GeostrophicParams, HydrostaticParams,
                          geostrophic_velocity, hydrostatic_thickness)


def test_hydrostatic_zero_freeboard_zero_snow():
    p = HydrostaticParams(h_ice=0.4, h_ssh=0.4, h_s=0.0)
    assert hydrostatic_thickness(p) == pytest.approx(0.0, abs=1e-15)


def test_hydrostatic_hand_example():
    # exact rational evaluation: 0.5*1024/107 - 0.1*704/107 = 2208/535
    expected = float(Fraction(1, 2) * Fraction(1024, 107)
                     - Fraction(1, 10) * Fraction(704, 107))
    p = HydrostaticParams(h_ice=0.5, h_ssh=0.0, h_s=0.1,
                          rho_w=1024.0, rho_i=917.0, rho_s=320.0)
    got = hydrostatic_thickness(p)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(4.127102803738317, rel=1e-12)


def test_hydrostatic_linearity_in_freeboard():
    base = hydrostatic_thickness(HydrostaticParams(h_ice=0.3, h_ssh=0.0, h_s=0.0))
    doubled = hydrostatic_thickness(HydrostaticParams(h_ice=0.6, h_ssh=0.0, h_s=0.0))
    assert doubled == pytest.approx(2.0 * base, rel=1e-12)


def test_hydrostatic_rejects_equal_densities():
    with pytest.raises(DataError, match="rho_w > rho_i"):
        HydrostaticParams(h_ice=0.5, h_ssh=0.0, rho_w=917.0, rho_i=917.0)


def test_hydrostatic_matches_high_precision_oracle():
    # independent reimplementation with exact fractions at random parameters
    rng = np.random.default_rng(0)
    for _ in range(20):
        h_ice = round(float(rng.uniform(0, 2)), 6)
        h_ssh = round(float(rng.uniform(-0.5, 0.5)), 6)
        h_s = round(float(rng.uniform(0, 0.5)), 6)
        p = HydrostaticParams(h_ice=h_ice, h_ssh=h_ssh, h_s=h_s)
        oracle = (Fraction(str(h_ice)) - Fraction(str(h_ssh))) * Fraction(1024, 107) \
            - Fraction(str(h_s)) * Fraction(704, 107)
        assert hydrostatic_thickness(p) == pytest.approx(float(oracle), rel=1e-12)


def test_geostrophic_flat_ssh():
    u, v = geostrophic_velocity(GeostrophicParams(deta_dx=0.0, deta_dy=0.0))
    assert u == 0.0 and v == 0.0


def test_geostrophic_hand_example():
    p = GeostrophicParams(deta_dx=1e-6, deta_dy=0.0, g=9.81, f=1.4e-4)
    u, v = geostrophic_velocity(p)
    assert u == pytest.approx(0.0, abs=1e-15)
    assert v == pytest.approx(0.07007142857142858, rel=1e-12)


def test_geostrophic_sign_symmetry():
    p_pos = GeostrophicParams(deta_dx=2e-6, deta_dy=-1e-6, f=1.4e-4)
    p_neg = GeostrophicParams(deta_dx=2e-6, deta_dy=-1e-6, f=-1.4e-4)
    u1, v1 = geostrophic_velocity(p_pos)
    u2, v2 = geostrophic_velocity(p_neg)
    assert u2 == pytest.approx(-u1, rel=1e-12)
    assert v2 == pytest.approx(-v1, rel=1e-12)


def test_geostrophic_rejects_zero_coriolis():
    with pytest.raises(DataError, match="nonzero"):
        GeostrophicParams(deta_dx=0.0, deta_dy=0.0, f=0.0)


def test_geostrophic_matches_high_precision_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        dx = float(rng.uniform(-1e-5, 1e-5))
        dy = float(rng.uniform(-1e-5, 1e-5))
        u, v = geostrophic_velocity(GeostrophicParams(deta_dx=dx, deta_dy=dy))
        ratio = 9.81 / 1.4e-4
        assert u == pytest.approx(-ratio * dy, rel=1e-12, abs=1e-18)
        assert v == pytest.approx(ratio * dx, rel=1e-12, abs=1e-18)
