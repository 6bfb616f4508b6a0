"""Radial period, apsidal angle, their derivatives and the determinant D(H,L).

All time-map integrals use the regularizing variable

    h(s) = sgn(s - s0) sqrt(Omega(s)),   Omega = W + omega0,

followed by ``s(theta) = h^{-1}(sqrt(H + omega0) sin theta)``. In the theta
variable every integrand is smooth on [-pi/2, pi/2], so Gauss-Legendre
quadrature converges quickly.

Near the center, Omega is evaluated from its exact Taylor series about s0
(available in closed form for power/log terms) and h is written as
``xi * sqrt(g(xi))`` with ``g = Omega/xi^2``. This removes the 0/0 form of
the generic h-derivative formulas without any finite differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .effective import (
    CircularData,
    EffectiveOscillator,
    TurningPoints,
    energy_ceiling,
    find_center,
)
from .errors import ConvergenceError, InadmissibleError, ParameterError, QuadratureError
from .potentials import RadialPotential, homogeneous, logarithmic

SQRT2 = math.sqrt(2.0)
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureOptions:
    """Gauss-Legendre settings. Panels are bisected until ``n`` and ``2n`` agree."""

    nodes: int = 64
    rtol: float = 1e-12
    fail_rtol: float = 1e-8
    max_panels: int = 400
    series_radius: float = 0.15
    series_terms: int = 48


DEFAULT_QUADRATURE = QuadratureOptions()


@lru_cache(maxsize=16)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _binomials(q: float, count: int) -> np.ndarray:
    out = np.empty(count)
    c = 1.0
    for j in range(count):
        out[j] = c
        c *= (q - j) / (j + 1)
    return out


@dataclass(frozen=True)
class MapIntegrals:
    """Raw integrals of one oscillator at a single energy."""

    period: float
    d_period_dH: float
    d_period_dL: float
    area: float
    nodes_used: int


class RegularizedMap:
    """Time map of one effective oscillator at fixed L."""

    def __init__(self, osc: EffectiveOscillator, center: CircularData | None = None,
                 options: QuadratureOptions = DEFAULT_QUADRATURE):
        self.osc = osc
        self.circ = center or find_center(osc)
        self.options = options
        self.ceiling = energy_ceiling(osc, self.circ)
        c = self.circ
        s0 = c.s0
        J = options.series_terms
        # a_j = s0^j W^(j)(s0)/j!, for j = 2..J+2 (dimensionless Taylor data).
        a = np.zeros(J + 3)
        for coef, q in osc.terms:
            a += coef * s0**q * _binomials(q, J + 3)
        beta = osc.log_coefficient
        if beta != 0.0:
            j = np.arange(1, J + 3)
            a[1:] += beta * (-1.0) ** (j + 1) / j
        poly = a[2:]
        cols = np.zeros((poly.size, 4))
        for order in range(4):
            d = npoly.polyder(poly, order)
            cols[: d.size, order] = d
        self._series_matrix = cols
        self._series_powers = np.arange(poly.size)

    # ------------------------------------------------------------------ h jet
    @property
    def L(self) -> float:
        return self.osc.L

    def omega(self, s):
        return self.osc.W(s) + self.circ.omega0

    def _series_mask(self, s):
        x = (s - self.circ.s0) / self.circ.s0
        return x, np.abs(x) < self.options.series_radius

    def _series_G(self, x, order: int):
        s0 = self.circ.s0
        P = (x[:, None] ** self._series_powers) @ self._series_matrix[:, : order + 1]
        P = P.T
        g = P[0] / s0**2
        G = np.sqrt(g)
        out = [G]
        if order >= 1:
            g1 = P[1] / s0**3
            G1 = g1 / (2 * G)
            out.append(G1)
        if order >= 2:
            g2 = P[2] / s0**4
            G2 = g2 / (2 * G) - g1 * g1 / (4 * G**3)
            out.append(G2)
        if order >= 3:
            g3 = P[3] / s0**5
            G3 = g3 / (2 * G) - 3 * g1 * g2 / (4 * G**3) + 3 * g1**3 / (8 * G**5)
            out.append(G3)
        return out

    def h_h1(self, s):
        """h(s) and h'(s), vectorized."""
        s = np.asarray(s, dtype=float)
        x, near = self._series_mask(s)
        h = np.empty_like(s)
        h1 = np.empty_like(s)
        if np.any(near):
            xn = x[near]
            G, G1 = self._series_G(xn, 1)
            xi = xn * self.circ.s0
            h[near] = xi * G
            h1[near] = G + xi * G1
        far = ~near
        if np.any(far):
            sf = s[far]
            om = self.omega(sf)
            sg = np.sign(sf - self.circ.s0)
            R = np.sqrt(np.maximum(om, 0.0))
            h[far] = sg * R
            h1[far] = sg * self.osc.W(sf, 1) / (2 * R)
        return h, h1

    def jet(self, s):
        """(h, h', h'', h''', d_L h, d_L h') at ``s``, vectorized."""
        s = np.asarray(s, dtype=float)
        c = self.circ
        k, L, s0 = self.osc.k, self.L, c.s0
        x, near = self._series_mask(s)
        out = [np.empty_like(s) for _ in range(6)]
        if np.any(near):
            xn = x[near]
            G, G1, G2, G3 = self._series_G(xn, 3)
            xi = xn * s0
            if k == 1:
                R, R1 = 2.0 + xn, np.ones_like(xn)
            else:
                R = -(2.0 + xn) / (1.0 + xn) ** 2
                R1 = (3.0 + xn) / (1.0 + xn) ** 3
            q = L * s0 ** (2 * k - 1) * R
            q1 = L * s0 ** (2 * k - 2) * R1
            vals = (
                xi * G,
                G + xi * G1,
                2 * G1 + xi * G2,
                3 * G2 + xi * G3,
                q / (2 * G),
                q1 / (2 * G) - q * G1 / (2 * G * G),
            )
            for o, v in zip(out, vals):
                o[near] = v
        far = ~near
        if np.any(far):
            sf = s[far]
            om = self.omega(sf)
            w1, w2, w3 = (self.osc.W(sf, n) for n in (1, 2, 3))
            sg = np.sign(sf - s0)
            R = np.sqrt(om)
            dl = L * (sf ** (2 * k) - s0 ** (2 * k))
            dl1 = 2 * k * L * sf ** (2 * k - 1)
            vals = (
                sg * R,
                sg * w1 / (2 * R),
                sg * (2 * om * w2 - w1 * w1) / (4 * om * R),
                sg * (4 * om * om * w3 - 6 * om * w1 * w2 + 3 * w1**3) / (8 * om * om * R),
                sg * dl / (2 * R),
                sg * (2 * om * dl1 - w1 * dl) / (4 * om * R),
            )
            for o, v in zip(out, vals):
                o[far] = v
        return tuple(out)

    # --------------------------------------------------------------- inversion
    def invert(self, y, lo, hi, guess=None, max_iter: int = 300):
        """Solve h(s) = y with a bisection-safeguarded Newton iteration.

        ``lo``/``hi`` must bracket the solutions (h increasing)."""
        y = np.asarray(y, dtype=float)
        lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
        hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
        if guess is None:
            s = 0.5 * (lo + hi)
        else:
            s = np.clip(np.asarray(guess, dtype=float), lo, hi)
            s = np.where((s > lo) & (s < hi), s, 0.5 * (lo + hi))
        s = np.array(s, dtype=float)
        active = np.ones(y.shape, dtype=bool)
        for _ in range(max_iter):
            idx = np.nonzero(active)[0]
            sa, ya, la, ha = s[idx], y[idx], lo[idx], hi[idx]
            h, h1 = self.h_h1(sa)
            f = h - ya
            la = np.where(f < 0, sa, la)
            ha = np.where(f > 0, sa, ha)
            with np.errstate(divide="ignore", invalid="ignore"):
                s_new = sa - f / h1
            # A Newton step below 1e-9 relative leaves a quadratically small error;
            # clipping into the bracket (which holds the root) cannot increase it.
            tiny = np.isfinite(s_new) & (np.abs(s_new - sa) <= 1e-9 * np.abs(sa))
            bad = ~np.isfinite(s_new) | (s_new <= la) | (s_new >= ha)
            if np.any(bad):
                geo = (la > 0) & (ha > 4 * la)
                with np.errstate(invalid="ignore", over="ignore"):
                    mid = np.where(geo, np.sqrt(la * ha), 0.5 * (la + ha))
                s_new = np.where(tiny, np.clip(s_new, la, ha), np.where(bad, mid, s_new))
            done = (f == 0) | tiny | (ha - la <= 4 * EPS * np.abs(sa))
            s[idx] = np.where(f == 0, sa, s_new)
            lo[idx], hi[idx] = la, ha
            active[idx[done]] = False
            if not np.any(active):
                return s
        raise ConvergenceError("inversion of h did not converge")

    def _expand(self, target: float, sign: int) -> tuple[float, float]:
        """Bracket h(s) = target on one side of the center."""
        c = self.circ
        lo_d, hi_d = self.osc.domain
        delta = 1.5 * abs(target) / math.sqrt(c.omega2 / 2.0) + 1e-15 * c.s0
        inner = c.s0
        for _ in range(2000):
            if sign > 0:
                cand = c.s0 + delta
                if cand >= hi_d:
                    cand = 0.5 * (inner + hi_d)
            else:
                cand = c.s0 - delta
                if cand <= lo_d:
                    cand = 0.5 * (inner + lo_d)
            h, _ = self.h_h1(np.array([cand]))
            if sign * (h[0] - target) >= 0:
                return (inner, cand) if sign > 0 else (cand, inner)
            inner = cand
            delta *= 2.0
        raise ConvergenceError(f"cannot bracket h(s) = {target:g}")

    def energy_offset(self, H: float) -> float:
        E = H + self.circ.omega0
        if not (E > 0 and H < self.ceiling):
            raise InadmissibleError(
                f"H={H:g} outside the admissible window ({-self.circ.omega0:g}, {self.ceiling:g}) at L={self.L:g}"
            )
        return E

    def turning_points(self, H: float) -> TurningPoints:
        E = self.energy_offset(H)
        root = math.sqrt(E)
        out = []
        for sign in (-1, 1):
            a, b = self._expand(sign * root, sign)
            out.append(float(self.invert(np.array([sign * root]), a, b)[0]))
        return TurningPoints(*out)

    # ------------------------------------------------------------- quadrature
    @staticmethod
    def _gl(n: int):
        return _gauss_legendre(n)

    def _integrands(self, theta, E, tp: TurningPoints):
        root = math.sqrt(E)
        st = np.sin(theta)
        y = root * st
        s0 = self.circ.s0
        guess = np.where(st >= 0, s0 + (tp.s_plus - s0) * st, s0 + (s0 - tp.s_minus) * st)
        lo = max(tp.s_minus * (1 - 1e-12), 0.5 * (self.osc.domain[0] + tp.s_minus))
        hi = min(tp.s_plus * (1 + 1e-12), 0.5 * (self.osc.domain[1] + tp.s_plus))
        s = self.invert(y, lo, hi, guess)
        _, h1, h2, h3, dlh, dlh1 = self.jet(s)
        c2 = np.cos(theta) ** 2
        return np.vstack([
            SQRT2 / h1,
            (3 * h2 * h2 - h1 * h3) / h1**5 * c2 / SQRT2,
            SQRT2 * (h2 * dlh - h1 * dlh1) / h1**3,
            2 * SQRT2 * E * c2 / h1,
        ])

    def _panel(self, a: float, b: float, n: int, E: float, tp: TurningPoints):
        x1, w1 = self._gl(n)
        x2, w2 = self._gl(2 * n)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        theta = np.concatenate([mid + half * x1, mid + half * x2])
        f = self._integrands(theta, E, tp)
        coarse = half * f[:, :n] @ w1
        fine = half * f[:, n:] @ w2
        absval = half * np.abs(f[:, n:]) @ w2
        return coarse, fine, absval

    def integrals(self, H: float, upper: float = math.pi / 2) -> MapIntegrals:
        """Integrals over theta in [-pi/2, upper] (upper < pi/2 gives partial times)."""
        E = self.energy_offset(H)
        tp = self.turning_points(H)
        opts = self.options
        n = opts.nodes
        # Absolute floors from the natural scales of the well: period 2pi/sqrt(W''),
        # energy W'' s0^2. They matter only for integrals that vanish identically.
        c = self.circ
        t_nat = 2 * math.pi / math.sqrt(c.omega2)
        e_nat = c.omega2 * c.s0**2
        floor = np.array([t_nat, t_nat / e_nat, t_nat / self.L, E * t_nat])
        # Globally adaptive bisection: always split the panel with the largest
        # weighted error until the summed error meets the tolerance.
        panels = []
        counter = 0
        evaluated = 0

        def add(a, b):
            nonlocal counter, evaluated
            coarse, fine, absval = self._panel(a, b, n, E, tp)
            evaluated += 3 * n
            counter += 1
            panels.append([a, b, fine, np.abs(fine - coarse), absval, counter])

        add(-math.pi / 2, upper)
        while True:
            fine = np.sum([p[2] for p in panels], axis=0)
            err = np.sum([p[3] for p in panels], axis=0)
            mag = np.sum([p[4] for p in panels], axis=0)
            budget = opts.rtol * (mag + floor)
            if np.all(err <= budget) or len(panels) >= opts.max_panels:
                break
            worst = max(range(len(panels)), key=lambda i: float(np.max(panels[i][3] / budget)))
            a, b = panels[worst][0], panels[worst][1]
            panels.pop(worst)
            m = 0.5 * (a + b)
            add(a, m)
            add(m, b)
        if np.any(err > opts.fail_rtol * (mag + floor)):
            raise QuadratureError(
                f"quadrature refinements disagree beyond {opts.fail_rtol:g} relative at H={H:g}, L={self.L:g}"
            )
        total = fine
        T, dH, dL_rest, area = total
        dL = self.circ.domega0_dL * dH + dL_rest
        return MapIntegrals(float(T), float(dH), float(dL), float(area), evaluated)

    def period(self, H: float) -> float:
        return self.integrals(H).period

    def d_period(self, H: float) -> tuple[float, float]:
        r = self.integrals(H)
        return r.d_period_dH, r.d_period_dL

    def partial_time(self, H: float, s: float) -> float:
        """Time to go from s- to s (s- <= s <= s+) along the oscillation."""
        E = self.energy_offset(H)
        h, _ = self.h_h1(np.array([float(s)]))
        ratio = float(np.clip(h[0] / math.sqrt(E), -1.0, 1.0))
        phi = math.asin(ratio)
        if phi <= -math.pi / 2:
            return 0.0
        # Half of sqrt(2) * int dtheta / h' over [-pi/2, phi].
        return 0.5 * self.integrals(H, upper=phi).period


def make_map(potential: RadialPotential, L: float, k: int = -1,
             options: QuadratureOptions = DEFAULT_QUADRATURE) -> RegularizedMap:
    return RegularizedMap(EffectiveOscillator(potential, L, k), options=options)


# ---------------------------------------------------------------- TimeMaps
@dataclass(frozen=True)
class TimeMapValues:
    H: float
    L: float
    T: float
    Theta: float
    P: float
    dT_dH: float
    dT_dL: float
    dTheta_dH: float
    dTheta_dL: float
    D: float

    def as_row(self) -> dict[str, float]:
        return {
            "H": self.H, "L": self.L, "T": self.T, "Theta": self.Theta,
            "dT_dH": self.dT_dH, "dT_dL": self.dT_dL,
            "dTheta_dH": self.dTheta_dH, "dTheta_dL": self.dTheta_dL, "D": self.D,
        }


class TimeMaps:
    """Both oscillators of a potential at fixed L, reusable across energies."""

    def __init__(self, potential: RadialPotential, L: float,
                 options: QuadratureOptions = DEFAULT_QUADRATURE):
        self.potential = potential
        self.L = float(L)
        self.radial = make_map(potential, L, -1, options)
        self.angular = make_map(potential, L, +1, options)

    @property
    def omega0(self) -> float:
        return self.radial.circ.omega0

    @property
    def ceiling(self) -> float:
        return self.radial.ceiling

    def admissible(self, H: float) -> bool:
        return -self.omega0 < H < self.ceiling

    def values(self, H: float) -> TimeMapValues:
        rad = self.radial.integrals(H)
        ang = self.angular.integrals(H)
        L = self.L
        P = ang.period
        Theta = L * P
        dTheta_dH = L * ang.d_period_dH
        dTheta_dL = P + L * ang.d_period_dL
        D = rad.d_period_dH * dTheta_dL - rad.d_period_dL * dTheta_dH
        return TimeMapValues(H, L, rad.period, Theta, P, rad.d_period_dH, rad.d_period_dL,
                             dTheta_dH, dTheta_dL, D)

    def period(self, H: float) -> float:
        return self.radial.period(H)

    def apsidal_angle(self, H: float) -> float:
        return self.L * self.angular.period(H)


def period(potential: RadialPotential, H: float, L: float) -> float:
    return make_map(potential, L, -1).period(H)


def apsidal_angle(potential: RadialPotential, H: float, L: float) -> float:
    """Theta(H,L) = L * (period of the k=+1 oscillator)."""
    return L * make_map(potential, L, +1).period(H)


def nondegeneracy(potential: RadialPotential, H: float, L: float) -> TimeMapValues:
    return TimeMaps(potential, L).values(H)


# ------------------------------------------------------------ circular limits
@dataclass(frozen=True)
class CircularLimits:
    T: float
    dT_dH: float
    dT_dL: float


def circular_limits(m: RegularizedMap | CircularData) -> CircularLimits:
    """Limits of (T, dT/dH, dT/dL) of one oscillator as H -> -omega0."""
    c = m.circ if isinstance(m, RegularizedMap) else m
    w2, w3, k, s0, L = c.omega2, c.omega3, c.k, c.s0, c.L
    T = 2 * math.pi / math.sqrt(w2)
    dH = math.pi * c.sigma0 / (12 * w2**3.5)
    bracket = s0 * s0 * c.sigma0 - 24 * k * w2 * w3 * s0 + 24 * k * (2 * k - 1) * w2 * w2
    dL = -math.pi * L * s0 ** (2 * k - 2) / (12 * w2**3.5) * bracket
    return CircularLimits(T, dH, dL)


@dataclass(frozen=True)
class CircularTimeMapLimits:
    """Circular limits of T, Theta and their partials, plus D."""

    T: float
    Theta: float
    dT_dH: float
    dT_dL: float
    dTheta_dH: float
    dTheta_dL: float
    D: float

    def to_dict(self) -> dict:
        values = {f: getattr(self, f) for f in ("T", "Theta", "dT_dH", "dT_dL", "dTheta_dH", "dTheta_dL", "D")}
        values["signs"] = {f: int(math.copysign(1, v)) if v != 0 else 0 for f, v in values.items()}
        values["limit_signs"] = [values["signs"][f] for f in ("dT_dH", "dT_dL", "dTheta_dH", "dTheta_dL")]
        return values


def circular_timemap_limits(potential: RadialPotential, L: float) -> CircularTimeMapLimits:
    rad = circular_limits(find_center(EffectiveOscillator(potential, L, -1)))
    ang = circular_limits(find_center(EffectiveOscillator(potential, L, +1)))
    Theta = L * ang.T
    dTh_dH = L * ang.dT_dH
    dTh_dL = ang.T + L * ang.dT_dL
    D = rad.dT_dH * dTh_dL - rad.dT_dL * dTh_dH
    return CircularTimeMapLimits(rad.T, Theta, rad.dT_dH, rad.dT_dL, dTh_dH, dTh_dL, D)


# -------------------------------------------------------- homogeneous scaling
@dataclass(frozen=True)
class ScalingReport:
    """Both sides of each scaling identity at (H, L)."""

    reduced: tuple[float, float]
    pairs: dict[str, tuple[float, float]] = field(default_factory=dict)

    def max_rel_error(self) -> float:
        return max(abs(a - b) / max(abs(a), abs(b), 1e-300) for a, b in self.pairs.values())


def reduced_energy(alpha: float | None, H: float, L: float, kappa: float = 1.0) -> float:
    """Energy of the L=1 problem equivalent to (H, L); alpha=None is logarithmic."""
    if alpha is None:
        return H - kappa * math.log(L)
    return H * L ** (2 * alpha / (2 - alpha))


def scaling_reduce(alpha: float | None, H: float, L: float, kappa: float = 1.0) -> ScalingReport:
    """Evaluate the homogeneous (or logarithmic, alpha=None) scaling identities."""
    pot = logarithmic(kappa) if alpha is None else homogeneous(kappa, alpha)
    eta = reduced_energy(alpha, H, L, kappa)
    full = TimeMaps(pot, L).values(H)
    unit = TimeMaps(pot, 1.0).values(eta)
    if alpha is None:
        pairs = {
            "T": (full.T, L * unit.T),
            "P": (full.P, unit.P / L),
            "dT_dL": (full.dT_dL, (full.T - full.dT_dH) / L),
            "dTheta_dL": (full.dTheta_dL, -full.dTheta_dH / L),
            "D": (full.D, -full.T * full.dTheta_dH / L),
        }
    else:
        a = alpha
        pairs = {
            "T": (full.T, L ** ((2 + a) / (2 - a)) * unit.T),
            "P": (full.P, unit.P / L),
            "dT_dL": (full.dT_dL, ((2 + a) * full.T + 2 * a * H * full.dT_dH) / ((2 - a) * L)),
            "dTheta_dL": (full.dTheta_dL, 2 * a / (2 - a) * H / L * full.dTheta_dH),
            "D": (full.D, -(2 + a) / (2 - a) / L * full.T * full.dTheta_dH),
        }
    return ScalingReport((eta, 1.0), pairs)


def sign_table(alpha: float | None) -> dict[str, int]:
    """Signs of (dTheta/dH, dTheta/dL, D) for the homogeneous family.

    ``alpha=None`` selects the logarithmic potential. dTheta/dL follows from
    ``dTheta/dL = 2 alpha/(2 - alpha) (H/L) dTheta/dH`` with the sign of H on
    the admissible window: H < 0 for alpha > 0, H > 0 for alpha < 0.
    """
    if alpha is None:
        return {"dTheta_dH": -1, "dTheta_dL": 1, "D": 1}
    a = float(alpha)
    if not a < 2 or a in (-2.0, 0.0, 1.0):
        raise ParameterError(f"no sign table for alpha={a:g}")
    dH = 1 if (a < -2 or 1 < a < 2) else -1
    sign_H = -1 if a > 0 else 1
    dL = int(np.sign(a)) * sign_H * dH
    D = 1 if a < 1 else -1
    return {"dTheta_dH": dH, "dTheta_dL": dL, "D": D}


# ------------------------------------------------------ monotonicity checks
@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    worst_margin: float
    samples: int


@dataclass(frozen=True)
class MonotonicityReport:
    schaaf_i: ConditionResult
    schaaf_ii: ConditionResult
    chicone: ConditionResult
    inflection_points: tuple[float, ...]


def monotonicity_certificate(potential: RadialPotential, L: float, samples: int = 200) -> MonotonicityReport:
    """Schaaf's and Chicone's sufficient conditions for a monotone period map.

    Condition (i) ``5 W'''^2 - 3 W'' W'''' > 0`` is sampled on (s0, s*).
    Condition (ii) ``W' W''' < 0`` is checked where ``W'' = 0`` to the right
    of the center (vacuous if W is convex there). Chicone's expression
    ``6 Omega Omega''^2 - 3 Omega'^2 Omega'' - 2 Omega Omega' Omega'''`` is
    sampled across the well up to the energy ceiling.
    """
    osc = EffectiveOscillator(potential, L, -1)
    m = RegularizedMap(osc)
    s0 = m.circ.s0
    hi = osc.domain[1]
    if not math.isfinite(m.ceiling):
        s_top = s0 * 1e4 if math.isinf(hi) else hi
    else:
        s_top = s0 * 1e4 if math.isinf(hi) else hi
        # Stop before the barrier where the well ends.
        if potential.ceiling != "zero":
            grid = np.geomspace(s0 * (1 + 1e-6), s_top, 4096)
            w1 = osc.W(grid, 1)
            neg = np.nonzero(w1 <= 0)[0]
            if neg.size:
                s_top = grid[neg[0]]
    if not math.isfinite(s_top):
        s_top = s0 * 1e4
    grid = np.geomspace(s0 * (1 + 1e-3), s_top * (1 - 1e-9), samples)
    w = [osc.W(grid, n) for n in range(5)]
    schaaf = 5 * w[3] ** 2 - 3 * w[2] * w[4]
    scale = 5 * w[3] ** 2 + 3 * np.abs(w[2] * w[4])
    margin_i = float(np.min(schaaf / np.where(scale > 0, scale, 1.0)))
    cond_i = ConditionResult(bool(np.all(schaaf > 0)), margin_i, samples)

    w2_grid = osc.W(grid, 2)
    idx = np.nonzero(np.sign(w2_grid[:-1]) != np.sign(w2_grid[1:]))[0]
    from scipy.optimize import brentq

    inflections = tuple(float(brentq(lambda s: osc.W(s, 2), grid[i], grid[i + 1])) for i in idx)
    products = [osc.W(r, 1) * osc.W(r, 3) for r in inflections]
    cond_ii = ConditionResult(
        all(p < 0 for p in products),
        float(max(products)) if products else -math.inf,
        len(products),
    )

    s_lo = max(osc.domain[0], s0 * 1e-3)
    full = np.concatenate([np.geomspace(s_lo * 1.000001, s0 * (1 - 1e-3), samples // 2), grid])
    om = m.omega(full)
    o1, o2, o3 = (osc.W(full, n) for n in (1, 2, 3))
    ch = 6 * om * o2**2 - 3 * o1**2 * o2 - 2 * om * o1 * o3
    ch_scale = 6 * np.abs(om) * o2**2 + 3 * o1**2 * np.abs(o2) + 2 * np.abs(om * o1 * o3)
    inside = om < (m.ceiling + m.circ.omega0 if math.isfinite(m.ceiling) else np.inf)
    ch_rel = (ch / np.where(ch_scale > 0, ch_scale, 1.0))[inside]
    cond_ch = ConditionResult(bool(np.all(ch_rel > 0)), float(np.min(ch_rel)) if ch_rel.size else math.nan,
                              int(inside.sum()))
    return MonotonicityReport(cond_i, cond_ii, cond_ch, inflections)


# --------------------------------------------------------- Lennard-Jones
LJ_CUBIC = (3850.0, -1905.0, 192.0, -20.0)


def lj_admissible_bound(varsigma: float, sigma: float) -> float:
    """Upper bound on L^2 for the Lennard-Jones well to exist."""
    return (1 / 5) ** (2 / 3) * (72 / 5) * varsigma * sigma**2


def lj_threshold_L0(varsigma: float, sigma: float) -> float:
    """L at which the circular limit of dTheta/dL changes sign.

    The sign is governed by ``3850 x^3 - 1905 x^2 + 192 x - 20`` with
    ``x = sigma^6 u0^6``; positive for x above its real root k0, i.e. for
    small L.
    """
    roots = np.roots(LJ_CUBIC)
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0]
    if not real:
        raise ConvergenceError("threshold cubic has no positive real root")
    k0 = max(real)
    u0 = k0 ** (1 / 6) / sigma
    L2 = 24 * varsigma * sigma**6 * u0**4 - 48 * varsigma * sigma**12 * u0**10
    if L2 <= 0:
        raise ConvergenceError("threshold root lies outside the admissible range")
    return math.sqrt(L2)


@dataclass(frozen=True)
class LJSignReport:
    L: float
    limits: CircularTimeMapLimits
    signs: tuple[int, int, int, int, int]
    L0: float
    dTheta_dL_expected_positive: bool


def _sgn(v: float) -> int:
    return int(np.sign(v))


def lj_circular_sign(varsigma: float, sigma: float, L: float) -> LJSignReport:
    from .potentials import lennard_jones

    if not L * L < lj_admissible_bound(varsigma, sigma):
        raise InadmissibleError(
            f"L^2={L * L:g} violates L^2 < {lj_admissible_bound(varsigma, sigma):g} for Lennard-Jones"
        )
    lim = circular_timemap_limits(lennard_jones(varsigma, sigma), L)
    L0 = lj_threshold_L0(varsigma, sigma)
    signs = (_sgn(lim.dT_dH), _sgn(lim.dT_dL), _sgn(lim.dTheta_dH), _sgn(lim.dTheta_dL), _sgn(lim.D))
    return LJSignReport(L, lim, signs, L0, L <= L0)


# ------------------------------------------------------ relativistic Kepler
@dataclass(frozen=True)
class RelativisticKepler:
    T: float
    Theta: float
    dT_dH: float
    dTheta_dL: float
    D: float
    nondegenerate: bool


def relativistic_kepler(kappa: float, c: float, H: float, L: float,
                        binding: bool = False) -> RelativisticKepler:
    """Closed-form radial period and apsidal angle of relativistic Kepler.

    H is the total energy, rest energy c^2 included. With ``binding=True``
    H is read as the binding energy E = H_total - c^2, and c^4 - H_total^2
    is evaluated as -E (2 c^2 + E) to avoid cancellation at large c.
    """
    if not (kappa > 0 and c > 0 and L > 0):
        raise ParameterError("kappa, c and L must be positive")
    if not c * c * L * L > kappa * kappa:
        raise ParameterError(f"need c^2 L^2 > kappa^2, got c={c:g}, L={L:g}, kappa={kappa:g}")
    if binding:
        if not -2 * c * c < H < 0:
            raise ParameterError(f"need -2c^2 < E < 0, got E={H:g}")
        q = -H * (2 * c * c + H)
        h_total = c * c + H
    else:
        if not abs(H) < c * c:
            raise ParameterError(f"need |H| < c^2, got H={H:g}")
        q = (c * c - H) * (c * c + H)
        h_total = H
    T = 2 * math.pi * kappa * c**3 / q**1.5
    dT_dH = 6 * math.pi * kappa * c**3 * h_total / q**2.5
    a = kappa * kappa / (c * c * L * L)
    Theta = 2 * math.pi / math.sqrt(1 - a)
    dTheta_dL = -2 * math.pi * a / (L * (1 - a) ** 1.5)
    D = dT_dH * dTheta_dL
    return RelativisticKepler(T, Theta, dT_dH, dTheta_dL, D, D != 0.0)
