import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    homogeneous_oracle,
    lc_D,
    lc_dT_dH,
    lc_dTheta_dL,
    lc_T,
    lc_Theta,
    lj_oracle,
    polar_orbit,
    richardson_limit,
)
from conftest import sample_energy
from orbita.errors import InadmissibleError, ParameterError
from orbita.potentials import homogeneous, lennard_jones, levi_civita, logarithmic
from orbita.timemap import (
    TimeMaps,
    apsidal_angle,
    circular_limits,
    circular_timemap_limits,
    lj_circular_sign,
    lj_threshold_L0,
    make_map,
    monotonicity_certificate,
    nondegeneracy,
    period,
    relativistic_kepler,
    scaling_reduce,
    sign_table,
)


# ------------------------------------------------------------ closed forms
def test_levi_civita_values(lc):
    v = nondegeneracy(lc, -0.5, 1.0)
    assert v.T == pytest.approx(2 * math.pi, rel=1e-10)
    assert v.Theta == pytest.approx(2 * math.pi / math.sqrt(0.8), rel=1e-10)
    assert v.Theta == pytest.approx(7.024815, abs=1e-6)
    assert v.dT_dH == pytest.approx(18.849556, rel=1e-7)
    assert v.dT_dH == pytest.approx(lc_dT_dH(1, -0.5), rel=1e-10)
    assert abs(v.dT_dL) < 1e-9
    assert abs(v.dTheta_dH) < 1e-9
    assert v.dTheta_dL == pytest.approx(lc_dTheta_dL(1.0, 0.1), rel=1e-10)
    assert v.D == pytest.approx(lc_D(1, 0.1, -0.5, 1.0), rel=1e-9)
    assert v.D == pytest.approx(-33.10, abs=5e-3)


def test_kepler_period(kepler):
    # pi / (sqrt(2) 0.4^(3/2)) = 8.7810184...
    expected = math.pi / (math.sqrt(2) * 0.4**1.5)
    assert period(kepler, -0.4, 1.0) == pytest.approx(expected, rel=1e-10)
    assert expected == pytest.approx(8.781018, abs=1e-6)


def test_harmonic_period_and_ode(harmonic):
    # H = 1 is the circular energy at L = 1: the limit there is 2 pi / sqrt(4).
    assert circular_limits(make_map(harmonic, 1.0)).T == pytest.approx(math.pi, rel=1e-14)
    assert period(harmonic, 1.0 + 1e-9, 1.0) == pytest.approx(math.pi, rel=1e-10)
    assert period(harmonic, 2.0, 1.0) == pytest.approx(math.pi, rel=1e-10)
    # ODE oracle: the radius returns to its minimum after half the Cartesian period.
    tp = make_map(harmonic, 1.0).turning_points(2.0)
    sol = polar_orbit(lambda r: -r, tp.s_minus, 0.0, 0.0, 1.0, 4.0)
    from scipy.optimize import brentq

    t_peri = brentq(lambda t: sol.sol(t)[1], 2.5, 3.8, xtol=1e-14)
    assert t_peri == pytest.approx(math.pi, rel=1e-9)


@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("L", [0.8, 1.2])
def test_bertrand_kepler(kepler, frac, L):
    H = -frac / (2 * L * L)
    assert abs(apsidal_angle(kepler, H, L) - 2 * math.pi) < 1e-8
    assert abs(nondegeneracy(kepler, H, L).D) < 1e-8


@pytest.mark.parametrize("excess", [0.2, 3.0])
@pytest.mark.parametrize("L", [0.5, 1.5])
def test_bertrand_harmonic(harmonic, excess, L):
    H = L + excess
    assert abs(apsidal_angle(harmonic, H, L) - math.pi) < 1e-8
    assert abs(nondegeneracy(harmonic, H, L).D) < 1e-8


def test_theta_equals_L_times_P(builtins):
    for p, L in builtins:
        maps = TimeMaps(p, L)
        H = sample_energy(maps, 0.3)
        v = maps.values(H)
        assert v.Theta == pytest.approx(L * v.P, rel=1e-12)
        assert v.D == v.dT_dH * v.dTheta_dL - v.dT_dL * v.dTheta_dH


def test_against_quadrature_oracle():
    for alpha in (0.5, 1.5, -0.5):
        o = homogeneous_oracle(alpha, L=1.1)
        maps = TimeMaps(homogeneous(1, alpha), 1.1)
        H = -o.omega0 * 0.6 if alpha > 0 else o.omega0 * -1 + 1.0
        assert maps.period(H) == pytest.approx(o.T(H), rel=1e-10)
        assert maps.apsidal_angle(H) == pytest.approx(o.Theta(H), rel=1e-10)
    o = lj_oracle(1, 1, 0.5)
    maps = TimeMaps(lennard_jones(1, 1), 0.5)
    H = -0.5 * o.omega0
    assert maps.period(H) == pytest.approx(o.T(H), rel=1e-10)
    assert maps.apsidal_angle(H) == pytest.approx(o.Theta(H), rel=1e-10)


# ------------------------------------------------------- derivative oracle
def _fd_close(fd, exact, value, h):
    """Relative 1e-6 agreement, with a rounding floor for derivatives that vanish."""
    return abs(fd - exact) <= 1e-6 * abs(exact) + 100 * np.finfo(float).eps * abs(value) / h


@pytest.mark.parametrize("idx", range(4))
def test_partials_match_finite_differences(builtins, idx):
    p, L = builtins[idx]
    maps = TimeMaps(p, L)
    H = sample_energy(maps, 0.4)
    v = maps.values(H)
    h = 1e-6 * (H + maps.omega0)
    up, dn = maps.values(H + h), maps.values(H - h)
    assert _fd_close((up.T - dn.T) / (2 * h), v.dT_dH, v.T, h)
    assert _fd_close((up.Theta - dn.Theta) / (2 * h), v.dTheta_dH, v.Theta, h)
    k = 1e-6 * L
    upL, dnL = TimeMaps(p, L + k).values(H), TimeMaps(p, L - k).values(H)
    assert _fd_close((upL.T - dnL.T) / (2 * k), v.dT_dL, v.T, k)
    assert _fd_close((upL.Theta - dnL.Theta) / (2 * k), v.dTheta_dL, v.Theta, k)


# ---------------------------------------------------------- h jet at center
@pytest.mark.parametrize("k", [-1, 1])
def test_h_jet_at_center(lj, k):
    m = make_map(lj, 0.5, k)
    c = m.circ
    h, h1, h2, h3, hL, _ = (float(a[0]) for a in m.jet(np.array([c.s0])))
    w2, w3, w4 = c.omega2, c.omega3, c.omega4
    assert h == 0.0
    assert h1 == pytest.approx(math.sqrt(w2 / 2), rel=1e-12)
    assert h2 == pytest.approx(w3 / (3 * math.sqrt(2) * math.sqrt(w2)), rel=1e-10)
    assert h3 == pytest.approx((3 * w2 * w4 - w3**2) / (12 * math.sqrt(2) * w2**1.5), rel=1e-10)
    assert hL == pytest.approx(math.sqrt(2) * k * 0.5 * c.s0 ** (2 * k - 1) / math.sqrt(w2), rel=1e-10)


def test_h_is_increasing(builtins):
    for p, L in builtins:
        m = make_map(p, L)
        tp = m.turning_points(sample_energy(TimeMaps(p, L), 0.9))
        _, h1 = m.h_h1(np.linspace(tp.s_minus, tp.s_plus, 400))
        assert np.all(h1 > 0)


# ------------------------------------------------------------ circular limits
def test_homogeneous_circular_limits():
    p = homogeneous(1, 0.5)
    assert circular_limits(make_map(p, 1.0, -1)).T == pytest.approx(2 * math.pi / math.sqrt(1.5), rel=1e-12)
    assert circular_timemap_limits(p, 1.0).Theta == pytest.approx(5.130199, abs=1e-6)


@pytest.mark.parametrize("case", ["lc", "hom", "lj"])
@pytest.mark.parametrize("k", [-1, 1])
def test_circular_limits_by_extrapolation(case, k):
    p, L = {"lc": (levi_civita(1, 0.1), 1.0), "hom": (homogeneous(1, 0.5), 1.0),
            "lj": (lennard_jones(1, 1), 0.5)}[case]
    m = make_map(p, L, k)
    lim = circular_limits(m)
    w0 = m.circ.omega0
    deltas = [w0 * 10.0**-j for j in range(4, 9)]
    for get, ref, natural in ((lambda i: i.period, lim.T, lim.T),
                              (lambda i: i.d_period_dH, lim.dT_dH, lim.T / w0),
                              (lambda i: i.d_period_dL, lim.dT_dL, lim.T / L)):
        ex = richardson_limit(lambda d: get(m.integrals(-w0 + d)), deltas)
        assert abs(ex - ref) <= 1e-4 * max(abs(ref), 1e-3 * natural)


# ---------------------------------------------------------------- scaling
def test_scaling_period_example():
    p = homogeneous(1, 0.5)
    lhs = period(p, -0.4, 1.3)
    rhs = 1.3 ** (5 / 3) * period(p, -0.4 * 1.3 ** (2 / 3), 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_scaling_identity_at_unit_L():
    rep = scaling_reduce(0.5, -0.4, 1.0)
    assert rep.reduced == (-0.4, 1.0)
    assert rep.pairs["D"][0] == pytest.approx(rep.pairs["D"][1], rel=1e-7)


@given(alpha=st.sampled_from([-3.0, -0.5, 0.5, 1.5]), frac=st.floats(0.1, 0.9), L=st.floats(0.5, 2.0))
@settings(max_examples=20, deadline=None)
def test_scaling_identities(alpha, frac, L):
    w0 = (2 - alpha) / (2 * alpha) * L ** (-2 * alpha / (2 - alpha))
    H = -w0 * (1 - frac) if alpha > 0 else -w0 + 3 * frac * abs(w0)
    assert scaling_reduce(alpha, H, L).max_rel_error() < 1e-8


def test_logarithmic_scaling():
    rep = scaling_reduce(None, 1.0 + math.log(1.7), 1.7)
    assert rep.max_rel_error() < 1e-8


# ------------------------------------------------------------------ signs
def test_sign_table_examples():
    assert sign_table(0.5) == {"dTheta_dH": -1, "dTheta_dL": 1, "D": 1}
    assert sign_table(1.5) == {"dTheta_dH": 1, "dTheta_dL": -1, "D": -1}
    assert sign_table(None) == {"dTheta_dH": -1, "dTheta_dL": 1, "D": 1}
    # For alpha < 0 the admissible energies are positive, so dTheta/dL has the
    # sign of alpha * H * dTheta/dH = -1.
    assert sign_table(-3.0) == {"dTheta_dH": 1, "dTheta_dL": -1, "D": 1}
    for bad in (-2.0, 0.0, 1.0, 2.0):
        with pytest.raises(ParameterError):
            sign_table(bad)


@pytest.mark.parametrize("alpha", [-3.0, -0.5, 0.5, 1.5, None])
def test_computed_signs_match_table(alpha):
    p = logarithmic(1.0) if alpha is None else homogeneous(1.0, alpha)
    table = sign_table(alpha)
    for L in (0.7, 1.4):
        maps = TimeMaps(p, L)
        top = 0.0 if alpha is not None and alpha > 0 else -maps.omega0 + 2.0 * max(abs(maps.omega0), 1.0)
        for frac in (0.2, 0.7):
            v = maps.values(-maps.omega0 + frac * (top + maps.omega0))
            assert np.sign(v.dTheta_dH) == table["dTheta_dH"]
            assert np.sign(v.dTheta_dL) == table["dTheta_dL"]
            assert np.sign(v.D) == table["D"]


# ----------------------------------------------------------- monotonicity
def test_schaaf_homogeneous():
    for alpha in (0.5, 1.9):
        rep = monotonicity_certificate(homogeneous(1, alpha), 1.0)
        assert rep.schaaf_i.passed and rep.schaaf_ii.passed


def test_harmonic_certificate_and_flat_period(harmonic):
    rep = monotonicity_certificate(harmonic, 1.0)
    assert rep.schaaf_i.samples > 0
    Ts = [period(harmonic, H, 1.0) for H in np.linspace(1.1, 5.0, 7)]
    assert max(Ts) - min(Ts) < 1e-10


# ----------------------------------------------------------- Lennard-Jones
def test_lj_circular_signs():
    rep = lj_circular_sign(1, 1, 0.5)
    assert rep.signs[:4] == (1, -1, 1, 1)
    assert rep.signs[4] == 1


def test_lj_sigma0_display():
    from scipy.optimize import brentq

    # Radial center from L^2 r0^10 = 24 r0^6 - 48 (varsigma = sigma = 1).
    r0 = brentq(lambda r: 0.25 * r**10 - 24 * r**6 + 48, 1.05, 2.0, xtol=1e-15)
    m = make_map(lennard_jones(1, 1), 0.5, -1)
    expected = (2**12 * 9 / r0**30) * (68 * r0**12 - 920 * r0**6 + 4025)
    assert m.circ.s0 == pytest.approx(r0, rel=1e-12)
    assert m.circ.sigma0 == pytest.approx(expected, rel=1e-8)
    assert expected > 0


def test_lj_threshold_reported():
    L0 = lj_threshold_L0(1, 1)
    x = np.roots([3850, -1905, 192, -20])
    real = [r.real for r in x if abs(r.imag) < 1e-12]
    assert len(real) == 1
    assert 0 < L0 < math.sqrt((1 / 5) ** (2 / 3) * 72 / 5)
    # Below L0 the circular limit of D is positive.
    assert lj_circular_sign(1, 1, 0.9 * L0).signs[4] == 1


def test_lj_inadmissible():
    with pytest.raises(InadmissibleError):
        lj_circular_sign(1, 1, 2.3)


# ---------------------------------------------------- relativistic Kepler
def test_relativistic_closed_forms():
    r = relativistic_kepler(1, 10, -0.5, 1)
    assert r.T == pytest.approx(2000 * math.pi / (1e4 - 0.25) ** 1.5, rel=1e-14)
    assert r.Theta == pytest.approx(2 * math.pi / math.sqrt(0.99), rel=1e-14)
    assert r.nondegenerate


def test_relativistic_classical_limit():
    r = relativistic_kepler(1, 1e6, -0.5, 1, binding=True)
    assert r.T == pytest.approx(math.pi / (math.sqrt(2) * 0.5**1.5), rel=1e-6)


def test_relativistic_bounds():
    with pytest.raises(ParameterError):
        relativistic_kepler(1, 0.5, -0.1, 1)
    with pytest.raises(ParameterError):
        relativistic_kepler(1, 10, 200, 1)
