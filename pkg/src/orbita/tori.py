"""Action-angle chart and invariant tori filled by (n,k)-type periodic orbits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, InadmissibleError, ParameterError
from .potentials import RadialPotential, from_mapping
from .timemap import TimeMaps, TimeMapValues

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------ action-angle
@dataclass(frozen=True)
class ActionAngleChart:
    H: float
    L: float
    I1: float
    I2: float
    area: float
    mu: float
    psi: float
    phi1: float
    phi2: float
    T: float
    Theta: float


def area(potential: RadialPotential, H: float, L: float) -> float:
    """Area enclosed by the (r, r') orbit: 2 int sqrt(2(H - W)) dr."""
    return TimeMaps(potential, L).radial.integrals(H).area


def actions(potential: RadialPotential, H: float, L: float) -> tuple[float, float]:
    a = area(potential, H, L)
    return a / TWO_PI + L, L


def energy_momentum(potential: RadialPotential, r: float, rdot: float, L: float) -> float:
    return 0.5 * (rdot * rdot + L * L / (r * r)) - float(potential(r))


def angles(r: float, rdot: float, theta: float, L: float, potential: RadialPotential,
           maps: TimeMaps | None = None) -> ActionAngleChart:
    """Action-angle coordinates of a polar state on a bounded orbit.

    mu is the time elapsed since the last pericenter, psi the polar angle of
    that pericenter. rdot = 0 counts as a pericenter if r <= r0, else as an
    apocenter.
    """
    if not (r > 0 and L > 0):
        raise InadmissibleError("angles need r > 0 and L > 0")
    maps = maps or TimeMaps(potential, L)
    H = energy_momentum(potential, r, rdot, L)
    if not maps.admissible(H):
        raise InadmissibleError(f"state with H={H:g}, L={L:g} is not on a bounded orbit")
    rad = maps.radial.integrals(H)
    ang = maps.angular.integrals(H)
    T, P = rad.period, ang.period
    Theta = L * P
    tp = maps.radial.turning_points(H)
    ascending = rdot > 0 or (rdot == 0 and r <= maps.radial.circ.s0)
    if rdot == 0:
        # A turning point: snap, since mu ~ sqrt(r - r-) amplifies rounding.
        t_r, swept_up = (0.0, 0.0) if ascending else (0.5 * T, 0.5 * Theta)
    else:
        r_c = min(max(r, tp.s_minus), tp.s_plus)
        t_r = maps.radial.partial_time(H, r_c)
        swept_up = L * (0.5 * P - maps.angular.partial_time(H, 1.0 / r_c))
    if ascending:
        mu, swept = t_r, swept_up
    else:
        mu, swept = T - t_r, Theta - swept_up
    mu = min(max(mu, 0.0), T)
    if mu >= T:
        mu = 0.0
    psi = (theta - swept) % TWO_PI
    phi1 = TWO_PI * mu / T
    phi2 = ((Theta - TWO_PI) * mu / T + psi) % TWO_PI
    a = rad.area
    return ActionAngleChart(H, L, a / TWO_PI + L, L, a, mu, psi, phi1, phi2, T, Theta)


def angles_cartesian(x, v, potential: RadialPotential, maps: TimeMaps | None = None) -> ActionAngleChart:
    x1, x2 = float(x[0]), float(x[1])
    v1, v2 = float(v[0]), float(v[1])
    r = math.hypot(x1, x2)
    return angles(r, (x1 * v1 + x2 * v2) / r, math.atan2(x2, x1), x1 * v2 - x2 * v1, potential, maps)


# ------------------------------------------------------------------- tori
@dataclass
class TorusSolution:
    """Located (H*, L*) whose tori carry (n,k) orbits of minimal period tau/ell."""

    n: int
    k: int
    tau: float
    ell: int
    H: float
    L: float
    T: float
    Theta: float
    I1: float
    I2: float
    D: float
    residual_T: float
    residual_Theta: float
    potential: dict = field(default_factory=dict)
    unique: bool = False

    @property
    def period(self) -> float:
        """Minimal period of the orbits on the torus."""
        return self.tau / self.ell

    def radial_target(self) -> float:
        return self.tau / (self.ell * self.n)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["residuals"] = {"T": self.residual_T, "Theta": self.residual_Theta}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TorusSolution":
        keys = {f for f in cls.__dataclass_fields__}
        body = {k: v for k, v in data.items() if k in keys}
        if "residuals" in data:
            body.setdefault("residual_T", data["residuals"].get("T", math.nan))
            body.setdefault("residual_Theta", data["residuals"].get("Theta", math.nan))
        return cls(**body)

    def build_potential(self) -> RadialPotential:
        return from_mapping(self.potential)


def _check_type(n: int, k: int, ell: int, tau: float):
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer)) and n >= 1 and k >= 1):
        raise ParameterError(f"n and k must be positive integers, got n={n}, k={k}")
    if math.gcd(int(n), int(k)) != 1:
        raise ParameterError(f"n={n} and k={k} must be coprime")
    if not (isinstance(ell, (int, np.integer)) and ell >= 1):
        raise ParameterError(f"ell must be a positive integer, got {ell}")
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")


def homogeneous_ratio_interval(alpha: float) -> tuple[float, float]:
    """Open interval of admissible k/n for the homogeneous family."""
    lo, hi = 1.0 / (2.0 - alpha), 1.0 / math.sqrt(2.0 - alpha)
    return (min(lo, hi), max(lo, hi))


def _residuals(v: TimeMapValues, T_target: float, Th_target: float) -> tuple[float, float]:
    return (v.T - T_target) / T_target, (v.Theta - Th_target) / Th_target


def _finish(potential, n, k, tau, ell, v: TimeMapValues, unique: bool) -> TorusSolution:
    T_target = tau / (ell * n)
    Th_target = TWO_PI * k / n
    rT, rTh = _residuals(v, T_target, Th_target)
    maps = TimeMaps(potential, v.L)
    a = maps.radial.integrals(v.H).area
    return TorusSolution(
        n=int(n), k=int(k), tau=float(tau), ell=int(ell), H=v.H, L=v.L, T=v.T, Theta=v.Theta,
        I1=a / TWO_PI + v.L, I2=v.L, D=v.D, residual_T=abs(rT), residual_Theta=abs(rTh),
        potential=potential.to_mapping(), unique=unique,
    )


def newton_torus(potential: RadialPotential, T_target: float, Th_target: float, seed: tuple[float, float],
                 tol: float = 1e-13, max_iter: int = 50) -> TimeMapValues:
    """Damped Newton for T(H,L) = T_target, Theta(H,L) = Th_target.

    The Jacobian is the matrix of partials whose determinant is D(H,L)."""
    H, L = map(float, seed)
    maps = TimeMaps(potential, L)
    if not maps.admissible(H):
        raise InadmissibleError(f"seed (H={H:g}, L={L:g}) is not admissible")
    v = maps.values(H)
    for _ in range(max_iter):
        F = np.array(_residuals(v, T_target, Th_target))
        norm = float(np.max(np.abs(F)))
        if norm < tol:
            return v
        J = np.array([[v.dT_dH / T_target, v.dT_dL / T_target],
                      [v.dTheta_dH / Th_target, v.dTheta_dL / Th_target]])
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian (D = {v.D:g}) at H={H:g}, L={L:g}") from exc
        lam = 1.0
        for _ in range(40):
            H_new, L_new = H + lam * step[0], L + lam * step[1]
            if L_new > 0:
                try:
                    maps_new = TimeMaps(potential, L_new)
                    if maps_new.admissible(H_new):
                        v_new = maps_new.values(H_new)
                        if np.max(np.abs(_residuals(v_new, T_target, Th_target))) < norm:
                            break
                except (InadmissibleError, ConvergenceError, ArithmeticError):
                    pass
                except Exception as exc:  # center lost for this L
                    if type(exc).__name__ not in ("NoMinimumError", "DegenerateCenterError"):
                        raise
            lam *= 0.5
        else:
            raise ConvergenceError(f"torus Newton stalled at H={H:g}, L={L:g}, residual={norm:g}")
        H, L, maps, v = H_new, L_new, maps_new, v_new
    raise ConvergenceError(f"torus Newton did not converge in {max_iter} iterations")


def _energy_on_period(maps: TimeMaps, target: float) -> float:
    """H in (-omega0, 0) with T(H, L) = target, for a period increasing to infinity."""
    om = maps.omega0
    lo = -om * (1 - 1e-10)
    if maps.period(lo) >= target:
        raise InadmissibleError("target period is below the circular period at this L")
    hi = -om * 0.5
    while maps.period(hi) < target:
        lo = hi
        hi *= 0.1
        if -hi < 1e-14 * om:
            raise ConvergenceError("cannot bracket the target radial period")
    return brentq(lambda H: math.log(maps.period(H) / target), lo, hi, xtol=1e-15 * om, rtol=1e-15)


def theta_hat(potential: RadialPotential, L: float, T_target: float) -> tuple[float, float]:
    """(H^(L), Theta(H^(L), L)) where H^(L) solves T = T_target."""
    maps = TimeMaps(potential, L)
    H = _energy_on_period(maps, T_target)
    return H, maps.apsidal_angle(H)


def homogeneous_L_hat(alpha: float, kappa: float, T_target: float) -> float:
    """L at which the circular radial period equals T_target."""
    c = T_target * math.sqrt(2 - alpha) / TWO_PI
    return (c * kappa ** (2 / (2 - alpha))) ** ((2 - alpha) / (2 + alpha))


def find_torus(potential: RadialPotential, tau: float, n: int, k: int, ell: int = 1,
               seed: tuple[float, float] | None = None) -> TorusSolution:
    """Locate (H*, L*) with T = tau/(ell n) and Theta = 2 pi k/n."""
    _check_type(n, k, ell, tau)
    T_target = tau / (ell * n)
    Th_target = TWO_PI * k / n
    if potential.family == "homogeneous" and seed is None:
        alpha = potential.params["alpha"]
        kappa = potential.params["kappa"]
        if not (0 < alpha < 2 and alpha != 1):
            raise ParameterError("the seedless torus search needs a homogeneous alpha in (0,2), alpha != 1")
        lo, hi = homogeneous_ratio_interval(alpha)
        if not lo < k / n < hi:
            raise InadmissibleError(f"k/n = {k}/{n} = {k / n:.6g} is outside the admissible interval ({lo:.6g}, {hi:.6g})")
        L_hat = homogeneous_L_hat(alpha, kappa, T_target)
        g = lambda L: theta_hat(potential, L, T_target)[1] - Th_target  # noqa: E731
        # theta_hat is monotone on (0, L_hat): sweep towards both ends for a sign change.
        a = 0.5 * L_hat
        ga = g(a)
        sign_circ = 1 if (TWO_PI / math.sqrt(2 - alpha) - Th_target) > 0 else -1
        if np.sign(ga) == sign_circ:
            b, gb = a, ga
            for _ in range(60):
                a *= 0.5
                ga = g(a)
                if np.sign(ga) != sign_circ:
                    break
            else:
                raise ConvergenceError("could not bracket the apsidal target from below")
        else:
            b = a
            for j in range(2, 60):
                b = L_hat * (1 - 2.0**-j)
                gb = g(b)
                if np.sign(gb) == sign_circ:
                    break
                a, ga = b, gb
            else:
                raise ConvergenceError("could not bracket the apsidal target from above")
        L_star = brentq(g, min(a, b), max(a, b), xtol=1e-14 * L_hat, rtol=1e-15)
        H_star, _ = theta_hat(potential, L_star, T_target)
        v = newton_torus(potential, T_target, Th_target, (H_star, L_star))
        return _finish(potential, n, k, tau, ell, v, unique=True)
    if seed is None:
        raise ParameterError("a seed (H, L) is required for non-homogeneous potentials")
    v = newton_torus(potential, T_target, Th_target, seed)
    return _finish(potential, n, k, tau, ell, v, unique=False)


def kam_determinant(potential: RadialPotential, H: float, L: float, tau: float) -> tuple[float, bool]:
    """det D Phi = -2 pi tau^2 / T^3 * D and whether it is nonzero."""
    v = TimeMaps(potential, L).values(H)
    det = -TWO_PI * tau * tau / v.T**3 * v.D
    return det, det != 0.0
