import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbita.effective import EffectiveOscillator, admissible, energy_ceiling, find_center, turning_points
from orbita.errors import NoMinimumError, ParameterError
from orbita.potentials import homogeneous, lennard_jones, levi_civita


@pytest.mark.parametrize("alpha", [-3.0, -2.0, -0.5, 0.5, 1.0, 1.5])
def test_homogeneous_center(alpha):
    c = find_center(EffectiveOscillator(homogeneous(1, alpha), 1.0, -1))
    assert c.s0 == pytest.approx(1.0, rel=1e-13)
    assert c.omega0 == pytest.approx((2 - alpha) / (2 * alpha), rel=1e-13)


def test_levi_civita_center(lc):
    c = find_center(EffectiveOscillator(lc, 1.0, -1))
    assert c.s0 == pytest.approx(0.8, rel=1e-13)
    assert c.omega0 == pytest.approx(0.625, rel=1e-13)


def test_lj_no_minimum(lj):
    assert 2.3**2 > (1 / 5) ** (2 / 3) * 72 / 5
    with pytest.raises(NoMinimumError):
        find_center(EffectiveOscillator(lj, 2.3, -1))


def test_center_residual_and_derivative(builtins):
    for p, L in builtins:
        for k in (-1, 1):
            osc = EffectiveOscillator(p, L, k)
            c = find_center(osc)
            assert abs(osc.W(c.s0, 1)) <= 1e-12 * abs(c.omega2) * c.s0
            assert c.omega2 > 0
            h = 1e-5 * L
            fd = (find_center(osc.with_L(L + h)).s0 - find_center(osc.with_L(L - h)).s0) / (2 * h)
            assert fd == pytest.approx(c.ds0_dL, rel=1e-6)
            fd2 = (find_center(osc.with_L(L + h)).omega2 - find_center(osc.with_L(L - h)).omega2) / (2 * h)
            assert fd2 == pytest.approx(c.d_omega2_dL, rel=1e-6, abs=1e-9 * c.omega2 / L)


def test_clairaut_center_is_reciprocal(builtins):
    for p, L in builtins:
        r0 = find_center(EffectiveOscillator(p, L, -1)).s0
        u0 = find_center(EffectiveOscillator(p, L, 1)).s0
        assert u0 * r0 == pytest.approx(1.0, rel=1e-10)


def test_unified_oscillator_reproduces_radial_and_clairaut(lj):
    rad = EffectiveOscillator(lj, 0.5, -1)
    ang = EffectiveOscillator(lj, 0.5, 1)
    for r in (1.0, 1.3, 2.0):
        W = 0.125 / r**2 - lj(r)
        assert rad.W(r) == pytest.approx(W, rel=1e-14)
        assert ang.W(1 / r) == pytest.approx(W, rel=1e-14)


def test_admissible_examples(harmonic):
    osc = EffectiveOscillator(homogeneous(1, 0.5), 1.0, -1)
    assert admissible(osc, -0.4)
    assert not admissible(osc, 0.1)
    assert admissible(EffectiveOscillator(harmonic, 1.0, -1), 5.0)
    assert energy_ceiling(EffectiveOscillator(harmonic, 1.0, -1)) == math.inf


def test_lj_ceiling_is_local_max(lj):
    osc = EffectiveOscillator(lj, 0.5, -1)
    H0 = energy_ceiling(osc)
    r = np.linspace(1.6, 20.0, 200001)
    W = osc.W(r)
    i = int(np.argmax(W))
    assert 0 < i < r.size - 1
    assert H0 == pytest.approx(W[i], rel=1e-6)


def test_turning_points_kepler(kepler):
    tp = turning_points(EffectiveOscillator(kepler, 1.0, -1), -0.4)
    lo, hi = sorted(np.roots([0.8, -2.0, 1.0]))
    assert tp.s_minus == pytest.approx(lo, rel=1e-13)
    assert tp.s_plus == pytest.approx(hi, rel=1e-13)
    assert tp.s_minus == pytest.approx(0.690983, abs=1e-6)


def test_turning_points_levi_civita(lc):
    tp = turning_points(EffectiveOscillator(lc, 1.0, -1), -0.5)
    assert tp.s_minus == pytest.approx(1 - math.sqrt(0.2), rel=1e-13)
    assert tp.s_plus == pytest.approx(1 + math.sqrt(0.2), rel=1e-13)


def test_turning_points_at_circular_limit(builtins):
    for p, L in builtins:
        osc = EffectiveOscillator(p, L, -1)
        c = find_center(osc)
        tp = turning_points(osc, -c.omega0 + 1e-14)
        assert abs(tp.s_minus - c.s0) < 1e-6 and abs(tp.s_plus - c.s0) < 1e-6


def test_turning_points_below_minimum_rejected(lc):
    with pytest.raises(ParameterError):
        turning_points(EffectiveOscillator(lc, 1.0, -1), -1.0)


@given(frac=st.floats(0.01, 0.95), L=st.floats(0.6, 2.0), k=st.sampled_from([-1, 1]))
@settings(max_examples=40, deadline=None)
def test_turning_point_residual_and_sign(frac, L, k):
    osc = EffectiveOscillator(levi_civita(1.0, 0.1), L, k)
    c = find_center(osc)
    H = -c.omega0 * (1 - frac)
    tp = turning_points(osc, H)
    assert tp.s_minus < c.s0 < tp.s_plus
    for s in (tp.s_minus, tp.s_plus):
        assert abs(osc.W(s) - H) <= abs(H) * 1e-12 + 1e-14
    inner = np.linspace(tp.s_minus, tp.s_plus, 12)[1:-1]
    assert np.all(osc.W(inner) < H)


def test_invalid_oscillator():
    with pytest.raises(ParameterError):
        EffectiveOscillator(homogeneous(1, 0.5), -1.0)
    with pytest.raises(ParameterError):
        EffectiveOscillator(homogeneous(1, 0.5), 1.0, 0)
