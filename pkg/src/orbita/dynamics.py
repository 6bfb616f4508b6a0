"""Integration of the planar equations of motion and orbit diagnostics."""

from __future__ import annotations

import csv
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    CollisionError,
    InsufficientEventsError,
    IntegrationError,
    VerificationError,
)
from .potentials import RadialPotential

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14
TWO_PI = 2.0 * math.pi

Accel = Callable[[float, float, float], tuple[float, float]]
Jacobian = Callable[[float, float, float], tuple[float, float, float, float]]


@dataclass(frozen=True)
class CartesianState:
    x: tuple[float, float]
    v: tuple[float, float]
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", (float(self.x[0]), float(self.x[1])))
        object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))
        object.__setattr__(self, "t", float(self.t))
        if not math.hypot(*self.x) > 0.0:
            raise CollisionError("state at the origin")

    @classmethod
    def from_vector(cls, z, t: float = 0.0) -> "CartesianState":
        return cls((z[0], z[1]), (z[2], z[3]), t)

    @property
    def vector(self) -> np.ndarray:
        return np.array([*self.x, *self.v])

    @property
    def r(self) -> float:
        return math.hypot(*self.x)

    def angular_momentum(self) -> float:
        return self.x[0] * self.v[1] - self.x[1] * self.v[0]

    def energy(self, potential: RadialPotential) -> float:
        return 0.5 * (self.v[0] ** 2 + self.v[1] ** 2) - float(potential(self.r))

    def rotated(self, phi: float) -> "CartesianState":
        c, s = math.cos(phi), math.sin(phi)
        x, v = self.x, self.v
        return CartesianState((c * x[0] - s * x[1], s * x[0] + c * x[1]),
                              (c * v[0] - s * v[1], s * v[0] + c * v[1]), self.t)


def polar_state(r: float, rdot: float, theta: float, L: float, t: float = 0.0) -> CartesianState:
    c, s = math.cos(theta), math.sin(theta)
    vt = L / r
    return CartesianState((r * c, r * s), (rdot * c - vt * s, rdot * s + vt * c), t)


def pericenter_state(r_minus: float, L: float, theta: float = 0.0) -> CartesianState:
    return polar_state(r_minus, 0.0, theta, L)


# -------------------------------------------------------------------- fields
@dataclass(frozen=True)
class Field:
    """Acceleration a(t, x) with its x-Jacobian, both on plain floats."""

    accel: Accel
    jac: Jacobian
    potential: RadialPotential | None = None
    label: str = "field"
    guards: tuple = ()

    def __add__(self, other: "Field") -> "Field":
        a1, a2 = self.accel, other.accel
        j1, j2 = self.jac, other.jac

        def accel(t, x1, x2):
            p, q = a1(t, x1, x2), a2(t, x1, x2)
            return p[0] + q[0], p[1] + q[1]

        def jac(t, x1, x2):
            p, q = j1(t, x1, x2), j2(t, x1, x2)
            return p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]

        return Field(accel, jac, None, f"{self.label}+{other.label}", self.guards + other.guards)

    def scaled(self, eps: float) -> "Field":
        a0, j0 = self.accel, self.jac

        def accel(t, x1, x2):
            a = a0(t, x1, x2)
            return eps * a[0], eps * a[1]

        def jac(t, x1, x2):
            j = j0(t, x1, x2)
            return eps * j[0], eps * j[1], eps * j[2], eps * j[3]

        return Field(accel, jac, None, f"{eps:g}*{self.label}", self.guards)


def central_field(potential: RadialPotential) -> Field:
    """x'' = V'(|x|) x/|x|."""
    pair = potential.force_pair

    def accel(t, x1, x2):
        r = math.hypot(x1, x2)
        d1, _ = pair(r)
        f = d1 / r
        return f * x1, f * x2

    def jac(t, x1, x2):
        r2 = x1 * x1 + x2 * x2
        r = math.sqrt(r2)
        d1, d2 = pair(r)
        f = d1 / r
        g = (d2 - f) / r2
        return f + g * x1 * x1, g * x1 * x2, g * x1 * x2, f + g * x2 * x2

    return Field(accel, jac, potential, potential.label)


# ---------------------------------------------------------------- integrator
@dataclass
class Trajectory:
    """Dense trajectory; columns of ``y`` are x1, x2, v1, v2, accumulated angle."""

    t: np.ndarray
    y: np.ndarray
    sol: object
    pericenters: np.ndarray
    field: Field
    monodromy: np.ndarray | None = None
    status: str = "ok"

    @property
    def potential(self) -> RadialPotential | None:
        return self.field.potential

    def __call__(self, t) -> np.ndarray:
        return self.sol(t)

    def state(self, t: float) -> CartesianState:
        z = self.sol(t)
        return CartesianState((z[0], z[1]), (z[2], z[3]), t)

    @property
    def final(self) -> CartesianState:
        return CartesianState((self.y[0, -1], self.y[1, -1]), (self.y[2, -1], self.y[3, -1]), self.t[-1])

    def angle(self, t) -> np.ndarray:
        return self.sol(t)[4]

    def invariants(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2, v1, v2 = self.y[:4]
        L = x1 * v2 - x2 * v1
        if self.potential is None:
            return np.full_like(L, np.nan), L
        H = 0.5 * (v1 * v1 + v2 * v2) - self.potential(np.hypot(x1, x2))
        return H, L

    def to_csv(self, path, times: Sequence[float] | None = None) -> None:
        """Write ``t,x1,x2,v1,v2,H,L`` with 17 significant digits."""
        if times is None:
            t, y = self.t, self.y
        else:
            t = np.asarray(times, dtype=float)
            y = self.sol(t)
        x1, x2, v1, v2 = y[:4]
        L = x1 * v2 - x2 * v1
        if self.potential is None:
            H = np.full_like(L, np.nan)
        else:
            H = 0.5 * (v1 * v1 + v2 * v2) - self.potential(np.hypot(x1, x2))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "x2", "v1", "v2", "H", "L"])
            for row in zip(t, x1, x2, v1, v2, H, L):
                w.writerow([f"{value:.17g}" for value in row])


def _rhs(field: Field, variational: bool):
    accel, jac = field.accel, field.jac

    if not variational:
        def f(t, y):
            x1, x2, v1, v2 = y[0], y[1], y[2], y[3]
            a1, a2 = accel(t, x1, x2)
            return [v1, v2, a1, a2, (x1 * v2 - x2 * v1) / (x1 * x1 + x2 * x2)]
        return f

    def fv(t, y):
        x1, x2, v1, v2 = y[0], y[1], y[2], y[3]
        a1, a2 = accel(t, x1, x2)
        j11, j12, j21, j22 = jac(t, x1, x2)
        phi = y[5:].reshape(4, 4)
        out = np.empty(21)
        out[:5] = (v1, v2, a1, a2, (x1 * v2 - x2 * v1) / (x1 * x1 + x2 * x2))
        d = out[5:].reshape(4, 4)
        d[0] = phi[2]
        d[1] = phi[3]
        d[2] = j11 * phi[0] + j12 * phi[1]
        d[3] = j21 * phi[0] + j22 * phi[1]
        return out
    return fv


def integrate(field: Field, state: CartesianState, t_end: float, rtol: float = DEFAULT_RTOL,
              atol: float = DEFAULT_ATOL, r_min: float | None = None, variational: bool = False,
              max_step: float = math.inf, extra_events: Sequence[Callable] = ()) -> Trajectory:
    """Integrate from ``state`` to ``t_end`` with DOP853 and dense output.

    Pericenters are recorded as upward zero crossings of x.v. The run raises
    CollisionError when |x| falls to ``r_min`` (default 1e-6 |x0|).
    """
    if r_min is None:
        r_min = 1e-6 * state.r
    extra_events = tuple(field.guards) + tuple(extra_events)
    y0 = [*state.x, *state.v, math.atan2(state.x[1], state.x[0])]
    if variational:
        y0 = y0 + list(np.eye(4).ravel())

    def peri(t, y):
        return y[0] * y[2] + y[1] * y[3]
    peri.direction = 1.0

    def collide(t, y):
        return y[0] * y[0] + y[1] * y[1] - r_min * r_min
    collide.terminal = True
    collide.direction = -1.0

    try:
        sol = solve_ivp(_rhs(field, variational), (state.t, t_end), y0, method="DOP853", rtol=rtol,
                        atol=atol, dense_output=True, events=[peri, collide, *extra_events],
                        max_step=max_step)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise IntegrationError(f"integration failed: {exc}") from exc
    if sol.status == -1:
        raise IntegrationError(f"integrator failure: {sol.message}")
    if sol.t_events[1].size:
        raise CollisionError(f"|x| reached the collision floor {r_min:g} at t={sol.t_events[1][0]:.6g}")
    for ev, hits in zip(extra_events, sol.t_events[2:]):
        if getattr(ev, "terminal", False) and hits.size:
            raise CollisionError(f"{getattr(ev, '__name__', 'guard')} triggered at t={hits[0]:.6g}")
    mono = None
    if variational:
        mono = sol.y[5:, -1].reshape(4, 4).copy()
    return Trajectory(t=sol.t, y=sol.y[:5], sol=_Dense(sol.sol), pericenters=sol.t_events[0],
                      field=field, monodromy=mono)


class _Dense:
    """Dense output restricted to the first five components."""

    def __init__(self, sol):
        self._sol = sol

    def __call__(self, t):
        return self._sol(t)[:5]


def integrate_polar(potential: RadialPotential, r: float, rdot: float, theta: float, L: float, t_end: float,
                    rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
    """Second oracle for the unperturbed problem: r'' = L^2/r^3 + V'(r), theta' = L/r^2."""
    pair = potential.force_pair

    def f(t, y):
        rr = y[0]
        return [y[1], L * L / rr**3 + pair(rr)[0], L / (rr * rr)]

    sol = solve_ivp(f, (0.0, t_end), [r, rdot, theta], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if sol.status == -1:
        raise IntegrationError(sol.message)
    return sol


# ---------------------------------------------------------------- diagnostics
@dataclass(frozen=True)
class OrbitDiagnostics:
    measured_T: float
    measured_Theta: float
    winding_n: int
    winding_k: int
    H_drift: float
    L_drift: float
    pericenter_times: tuple[float, ...] = field(default_factory=tuple)


def _relative_drift(values: np.ndarray) -> float:
    if np.all(np.isnan(values)):
        return math.nan
    ref = abs(values[0]) or 1.0
    return float(np.max(np.abs(values - values[0])) / ref)


def drifts(traj: Trajectory) -> tuple[float, float]:
    H, L = traj.invariants()
    return _relative_drift(H), _relative_drift(L)


def measure(traj: Trajectory, include_start: bool = False) -> OrbitDiagnostics:
    """Radial period and apsidal angle from consecutive pericenter events.

    With ``include_start`` the initial time counts as a pericenter, for
    trajectories started exactly there.
    """
    times = list(traj.pericenters)
    if include_start and (not times or times[0] - traj.t[0] > 1e-9 * (traj.t[-1] - traj.t[0])):
        times.insert(0, float(traj.t[0]))
    if len(times) < 2:
        raise InsufficientEventsError(f"need at least two pericenter passages, found {len(times)}")
    times = np.asarray(times)
    angles = traj.angle(times)
    dT = np.diff(times)
    dA = np.diff(angles)
    total = (angles[-1] - angles[0]) / TWO_PI
    H_d, L_d = drifts(traj)
    return OrbitDiagnostics(
        measured_T=float(np.mean(dT)),
        measured_Theta=float(np.mean(dA)),
        winding_n=int(len(times) - 1),
        winding_k=int(round(total)),
        H_drift=H_d,
        L_drift=L_d,
        pericenter_times=tuple(float(t) for t in times),
    )


@dataclass(frozen=True)
class VerificationReport:
    closure_error: float
    closure_relative: float
    winding_n: int
    winding_k: int
    winding_residual: float
    earliest_return: float
    minimal: bool
    H_drift: float
    L_drift: float
    passed: bool
    failures: tuple[str, ...]

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def verify_torus(torus, closure_tol: float = 1e-7, winding_tol: float = 1e-6, separation_tol: float = 1e-4,
                 raise_on_fail: bool = True, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> VerificationReport:
    """Integrate the pericenter state for one minimal period and check the (n,k) type."""
    from .effective import EffectiveOscillator, turning_points

    potential = torus.build_potential()
    tp = turning_points(EffectiveOscillator(potential, torus.L, -1), torus.H)
    z0 = pericenter_state(tp.s_minus, torus.L)
    period = torus.tau / torus.ell
    traj = integrate(central_field(potential), z0, period, rtol=rtol, atol=atol)
    zT = traj.final.vector
    z0v = z0.vector
    closure = float(np.linalg.norm(zT - z0v))
    scale = float(np.linalg.norm(z0v))
    winding = (traj.y[4, -1] - traj.y[4, 0]) / TWO_PI
    k_meas = int(round(winding))
    peri = [t for t in traj.pericenters if 1e-9 * period < t < period * (1 - 1e-9)]
    n_meas = len(peri) + 1
    earliest = math.inf
    for t in peri:
        earliest = min(earliest, float(np.linalg.norm(traj.sol(t)[:4] - z0v)) / scale)
    H_d, L_d = drifts(traj)
    failures = []
    if closure > closure_tol:
        failures.append(f"closure error {closure:.3g} exceeds {closure_tol:g}")
    if abs(winding - torus.k) > winding_tol:
        failures.append(f"winding {winding:.12g} differs from k={torus.k}")
    if n_meas != torus.n:
        failures.append(f"{n_meas} radial periods per closure, expected n={torus.n}")
    minimal = earliest > separation_tol
    if not minimal:
        failures.append(f"earlier return to the initial state (relative distance {earliest:.3g})")
    report = VerificationReport(closure, closure / scale, n_meas, k_meas, float(winding - torus.k), earliest,
                                minimal, H_d, L_d, not failures, tuple(failures))
    if failures and raise_on_fail:
        raise VerificationError("; ".join(failures))
    return report
