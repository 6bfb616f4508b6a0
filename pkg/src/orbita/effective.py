"""Unified effective oscillator ``W(s;L) = L^2 s^(2k)/2 - V_k(s)``.

``k = -1`` is the radial problem in ``s = r`` with ``V_k = V``. ``k = +1`` is
the Clairaut-transformed problem in ``s = u = 1/r`` with ``V_k(u) = V(1/u)``;
its period times L is the apsidal angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DegenerateCenterError, NoMinimumError, ParameterError
from .potentials import (
    CEILING_INFINITE,
    CEILING_LOCAL_MAX,
    CEILING_ZERO,
    RadialPotential,
    Term,
    power_log_derivative,
    power_log_scale,
)

CENTER_GRID_POINTS = 256
CENTER_GRID_DECADES = 12.0
FALLBACK_GRID_POINTS = 4096
FALLBACK_GRID_DECADES = 30.0


def _merge_terms(terms) -> tuple[Term, ...]:
    merged: dict[float, float] = {}
    for c, p in terms:
        merged[p] = merged.get(p, 0.0) + c
    return tuple((c, p) for p, c in sorted(merged.items()) if c != 0.0)


@dataclass(frozen=True)
class EffectiveOscillator:
    """The one-dimensional oscillator at fixed angular momentum ``L > 0``."""

    base: RadialPotential
    L: float
    k: int = -1

    def __post_init__(self):
        if self.k not in (-1, 1):
            raise ParameterError(f"k must be -1 or +1, got {self.k}")
        L = float(self.L)
        if not (L > 0.0 and math.isfinite(L)):
            raise ParameterError(f"L must be a positive finite number, got {self.L}")
        object.__setattr__(self, "L", L)
        kinetic = (0.5 * L * L, 2.0 * self.k)
        if self.k == -1:
            working = [(-c, p) for c, p in self.base.terms]
            log_c = -self.base.log_coefficient
            r_lo, r_hi = self.base.domain
            domain = (r_lo, r_hi)
        else:
            working = [(-c, -p) for c, p in self.base.terms]
            log_c = self.base.log_coefficient
            r_lo, r_hi = self.base.domain
            domain = (0.0 if math.isinf(r_hi) else 1.0 / r_hi, math.inf if r_lo == 0.0 else 1.0 / r_lo)
        object.__setattr__(self, "terms", _merge_terms([kinetic, *working]))
        object.__setattr__(self, "log_coefficient", log_c)
        object.__setattr__(self, "domain", domain)

    def W(self, s, n: int = 0):
        """n-th s-derivative of W(s;L)."""
        return power_log_derivative(self.terms, self.log_coefficient, s, n)

    def W_scale(self, s: float, n: int = 0) -> float:
        return power_log_scale(self.terms, self.log_coefficient, s, n)

    def dW_dL(self, s, n: int = 0):
        """n-th s-derivative of dW/dL = L s^(2k), for n = 0, 1, 2."""
        k2 = 2.0 * self.k
        coef = self.L
        for j in range(n):
            coef *= k2 - j
        return coef * np.asarray(s, dtype=float) ** (k2 - n)

    def to_radius(self, s):
        return s if self.k == -1 else 1.0 / np.asarray(s, dtype=float)

    def with_L(self, L: float) -> "EffectiveOscillator":
        return EffectiveOscillator(self.base, L, self.k)


@dataclass(frozen=True)
class CircularData:
    """Center of the well and derivative data of Omega = W + omega0 there."""

    k: int
    L: float
    s0: float
    omega0: float
    omega2: float
    omega3: float
    omega4: float
    sigma0: float
    d_omega2_dL: float
    ds0_dL: float
    domega0_dL: float


@dataclass(frozen=True)
class TurningPoints:
    s_minus: float
    s_plus: float


def _grid(domain, points: int, decades: float) -> np.ndarray:
    lo, hi = domain
    g_lo = lo * (1.0 + 1e-9) if lo > 0 else 10.0 ** (-decades)
    g_hi = hi * (1.0 - 1e-9) if math.isfinite(hi) else 10.0 ** decades
    if g_lo <= 0 or g_hi <= g_lo:
        raise ParameterError(f"cannot build a scan grid on the domain {domain}")
    return np.geomspace(g_lo, g_hi, points)


def _sign_changes(osc: EffectiveOscillator, grid: np.ndarray, rising: bool) -> list[tuple[float, float]]:
    # The grid spans many decades; overflow to +-inf still has the right sign.
    with np.errstate(over="ignore", invalid="ignore"):
        d = osc.W(grid, 1)
    if rising:
        idx = np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]
    else:
        idx = np.nonzero((d[:-1] > 0) & (d[1:] <= 0))[0]
    return [(float(grid[i]), float(grid[i + 1])) for i in idx]


def _polish_root(osc: EffectiveOscillator, a: float, b: float) -> float:
    s = brentq(lambda x: osc.W(x, 1), a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):
        w2 = osc.W(s, 2)
        if w2 == 0.0:
            break
        step = osc.W(s, 1) / w2
        if not (a <= s - step <= b):
            break
        s -= step
    return s


def find_center(osc: EffectiveOscillator) -> CircularData:
    """Locate the strict minimum s0 of W(.;L) and its derivative data."""
    brackets = _sign_changes(osc, _grid(osc.domain, CENTER_GRID_POINTS, CENTER_GRID_DECADES), True)
    if not brackets:
        grid = _grid(osc.domain, FALLBACK_GRID_POINTS, FALLBACK_GRID_DECADES)
        brackets = _sign_changes(osc, grid, True)
    if not brackets:
        raise NoMinimumError(
            f"W(.;L={osc.L:g}) for {osc.base.label} has no local minimum (W' never changes sign from - to +)"
        )
    s0 = _polish_root(osc, *brackets[0])
    w2, w3, w4 = (osc.W(s0, n) for n in (2, 3, 4))
    if not w2 > 0.0:
        raise DegenerateCenterError(f"W''(s0={s0:g}) = {w2:g} is not positive")
    k, L = osc.k, osc.L
    sigma0 = 5.0 * w3 * w3 - 3.0 * w2 * w4
    ds0 = -2.0 * k * L * s0 ** (2 * k - 1) / w2
    dw2 = -(2.0 * k * L * s0 ** (2 * k - 2) / w2) * (s0 * w3 - (2 * k - 1) * w2)
    return CircularData(
        k=k, L=L, s0=s0, omega0=-osc.W(s0), omega2=w2, omega3=w3, omega4=w4, sigma0=sigma0,
        d_omega2_dL=dw2, ds0_dL=ds0, domega0_dL=-L * s0 ** (2 * k),
    )


def _endpoint_limit(osc: EffectiveOscillator, right: bool) -> float:
    lo, hi = osc.domain
    end = hi if right else lo
    if (right and math.isfinite(hi)) or (not right and lo > 0):
        return float(osc.W(end))
    terms = [(c, p) for c, p in osc.terms if c != 0.0]
    beta = osc.log_coefficient
    # At infinity the largest exponent dominates, at zero the smallest.
    key = max if right else min
    dominant = key(terms, key=lambda t: t[1]) if terms else None
    if dominant is not None and (dominant[1] > 0 if right else dominant[1] < 0):
        return math.copysign(math.inf, dominant[0])
    if beta != 0.0:
        return math.copysign(math.inf, beta if right else -beta)
    return sum(c for c, p in terms if p == 0.0)


def energy_ceiling(osc: EffectiveOscillator, center: CircularData | None = None) -> float:
    """Upper end H0(L) of the admissible energy window."""
    policy = osc.base.ceiling
    if policy == CEILING_ZERO:
        return 0.0
    if policy == CEILING_INFINITE:
        return math.inf
    center = center or find_center(osc)
    grid = _grid(osc.domain, FALLBACK_GRID_POINTS, FALLBACK_GRID_DECADES)
    maxima = [_polish_root(osc, a, b) for a, b in _sign_changes(osc, grid, False)]
    right = [s for s in maxima if s > center.s0]
    left = [s for s in maxima if s < center.s0]
    if policy == CEILING_LOCAL_MAX:
        values = [osc.W(min(right))] if right else []
        values += [osc.W(max(left))] if left else []
        if not values:
            raise NoMinimumError(f"no local maximum of W bounds the well of {osc.base.label}")
        return float(min(values))
    barrier_r = osc.W(min(right)) if right else _endpoint_limit(osc, True)
    barrier_l = osc.W(max(left)) if left else _endpoint_limit(osc, False)
    return float(min(barrier_r, barrier_l))


def admissible(osc: EffectiveOscillator, H: float, center: CircularData | None = None,
               ceiling: float | None = None) -> bool:
    """True iff -omega0(L) < H < H0(L)."""
    try:
        center = center or find_center(osc)
    except (NoMinimumError, DegenerateCenterError):
        return False
    if ceiling is None:
        ceiling = energy_ceiling(osc, center)
    return bool(-center.omega0 < H < ceiling)


def _bracket_side(osc, center, H, sign: int) -> tuple[float, float]:
    s0 = center.s0
    lo, hi = osc.domain
    E = H + center.omega0
    delta = 1.5 * math.sqrt(max(2.0 * E / center.omega2, 0.0)) + 1e-15 * s0
    inner = s0
    for _ in range(400):
        if sign > 0:
            cand = s0 + delta
            if cand >= hi:
                cand = 0.5 * (inner + hi)
        else:
            cand = s0 - delta
            if cand <= lo:
                cand = 0.5 * (inner + lo)
        if osc.W(cand) - H >= 0.0:
            return (inner, cand) if sign > 0 else (cand, inner)
        inner = cand
        delta *= 2.0
    raise ConvergenceError(f"could not bracket the turning point of W = {H:g} on {'right' if sign > 0 else 'left'}")


def turning_points(osc: EffectiveOscillator, H: float, center: CircularData | None = None) -> TurningPoints:
    """Roots s- < s0 < s+ of W(s;L) = H."""
    center = center or find_center(osc)
    if not H > -center.omega0:
        raise ParameterError(f"H={H:g} is not above the minimum -omega0={-center.omega0:g}")
    f = lambda s: osc.W(s) - H  # noqa: E731
    out = []
    for sign in (-1, 1):
        a, b = _bracket_side(osc, center, H, sign)
        try:
            out.append(brentq(f, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500))
        except (RuntimeError, ValueError) as exc:
            raise ConvergenceError(f"turning point solve failed: {exc}") from exc
    return TurningPoints(*out)
