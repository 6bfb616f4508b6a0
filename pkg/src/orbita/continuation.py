"""Periodic solutions of tau-periodically perturbed central force problems.

Fixed points of the time-tau map are found by damped least-squares Newton,
seeded on an unperturbed invariant torus.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .dynamics import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    CartesianState,
    Field,
    Trajectory,
    central_field,
    integrate,
    pericenter_state,
)
from .effective import EffectiveOscillator, turning_points
from .errors import CollisionError, ConvergenceError, InadmissibleError, IntegrationError, ParameterError
from .tori import TorusSolution

TWO_PI = 2.0 * math.pi
log = logging.getLogger(__name__)

UNIFORM_DRIVE = "uniform_drive"
ROTATING_POINT_MASS = "rotating_point_mass"
NO_PERTURBATION = "none"
POLISH_FACTOR = 1e-2
POLISH_ATTEMPTS = 3


@dataclass(frozen=True)
class PerturbationModel:
    """tau-periodic perturbation eps * grad U(t, x).

    ``gradient`` maps eps to the field grad U; it receives eps so that models
    whose U depends on eps (the rotating point mass) can build it.
    """

    tau: float
    kind: str
    epsilon: float
    gradient: Callable[[float], Field] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if self.kind not in (UNIFORM_DRIVE, ROTATING_POINT_MASS, NO_PERTURBATION):
            raise ParameterError(f"unknown perturbation kind {self.kind!r}")
        if self.kind != NO_PERTURBATION and self.gradient is None:
            raise ParameterError(f"{self.kind} needs a gradient builder")

    def with_epsilon(self, epsilon: float) -> "PerturbationModel":
        return PerturbationModel(self.tau, self.kind, float(epsilon), self.gradient, dict(self.params))

    def field(self, base: Field) -> Field:
        if self.kind == NO_PERTURBATION or self.epsilon == 0.0:
            return base
        total = base + self.gradient(self.epsilon).scaled(self.epsilon)
        return Field(total.accel, total.jac, None, total.label, total.guards)


def uniform_drive(tau: float, epsilon: float, direction: Sequence[float] = (1.0, 0.0),
                  amplitude: float = 1.0) -> PerturbationModel:
    """U(t, x) = amplitude cos(2 pi t/tau) <e, x> with a unit vector e."""
    e1, e2 = float(direction[0]), float(direction[1])
    norm = math.hypot(e1, e2)
    if norm == 0.0:
        raise ParameterError("drive direction must be nonzero")
    e1, e2 = e1 / norm, e2 / norm
    w = TWO_PI / tau

    def grad(eps: float) -> Field:
        def accel(t, x1, x2):
            c = amplitude * math.cos(w * t)
            return c * e1, c * e2

        def jac(t, x1, x2):
            return 0.0, 0.0, 0.0, 0.0

        return Field(accel, jac, None, "uniform_drive")

    return PerturbationModel(tau, UNIFORM_DRIVE, float(epsilon), grad,
                             {"direction": [e1, e2], "amplitude": float(amplitude)})


def no_perturbation(tau: float) -> PerturbationModel:
    return PerturbationModel(tau, NO_PERTURBATION, 0.0)


# ------------------------------------------------------------- time-tau map
@dataclass(frozen=True)
class TimeTauResult:
    z_tau: np.ndarray
    monodromy: np.ndarray
    trajectory: Trajectory


def time_tau_map(model: PerturbationModel, base: Field, z0, method: str = "variational",
                 fd_step: float = 1e-7, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                 r_min: float | None = None) -> TimeTauResult:
    """State at t = tau and the 4x4 monodromy matrix of the full field."""
    state = z0 if isinstance(z0, CartesianState) else CartesianState.from_vector(z0)
    fld = model.field(base)
    if method == "variational":
        traj = integrate(fld, state, model.tau, rtol=rtol, atol=atol, r_min=r_min, variational=True)
        return TimeTauResult(traj.final.vector, traj.monodromy, traj)
    if method != "fd":
        raise ParameterError(f"unknown monodromy method {method!r}")
    traj = integrate(fld, state, model.tau, rtol=rtol, atol=atol, r_min=r_min)
    z = state.vector
    # Position and velocity can differ by orders of magnitude: scale each block separately.
    scales = (float(np.linalg.norm(z[:2])),) * 2 + (float(np.linalg.norm(z[2:])),) * 2
    M = np.empty((4, 4))
    for j in range(4):
        h = fd_step * max(scales[j], 1e-300)
        cols = []
        for sgn in (1.0, -1.0):
            zp = z.copy()
            zp[j] += sgn * h
            cols.append(integrate(fld, CartesianState.from_vector(zp), model.tau, rtol=rtol, atol=atol,
                                  r_min=r_min).final.vector)
        M[:, j] = (cols[0] - cols[1]) / (2 * h)
    return TimeTauResult(traj.final.vector, M, traj)


# ---------------------------------------------------------------- seeding
def torus_pericenter(torus: TorusSolution) -> CartesianState:
    tp = turning_points(EffectiveOscillator(torus.build_potential(), torus.L, -1), torus.H)
    return pericenter_state(tp.s_minus, torus.L)


def torus_trajectory(torus: TorusSolution, t_end: float | None = None) -> Trajectory:
    potential = torus.build_potential()
    return integrate(central_field(potential), torus_pericenter(torus), t_end or torus.period)


def reflected(state: CartesianState) -> CartesianState:
    """(x1, x2, v1, v2) -> (x1, -x2, v1, -v2): the orbit with the opposite L."""
    return CartesianState((state.x[0], -state.x[1]), (state.v[0], -state.v[1]), state.t)


def seed_grid(torus: TorusSolution, n_lambda: int, n_phi: int, reflect: bool = False) -> list[CartesianState]:
    """Time-advanced and rotated copies of the torus pericenter state."""
    if n_lambda < 1 or n_phi < 1:
        raise ParameterError("grid counts must be >= 1")
    traj = torus_trajectory(torus, torus.T)
    out = []
    for j in range(n_lambda):
        lam = torus.T * j / n_lambda
        base = CartesianState.from_vector(traj.sol(lam)[:4]) if j else torus_pericenter(torus)
        for i in range(n_phi):
            s = base.rotated(TWO_PI * i / (n_phi * torus.k))
            out.append(reflected(s) if reflect else s)
    return out


# ----------------------------------------------------------------- Newton
@dataclass
class PeriodicOrbit:
    epsilon: float
    z0: CartesianState
    residual: float
    torus: TorusSolution | None
    monodromy: np.ndarray
    winding_k: int
    iterations: int
    distance_to_torus: float = math.nan

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "z0": [*self.z0.x, *self.z0.v],
            "residual": self.residual,
            "winding_k": self.winding_k,
            "distance_to_torus": self.distance_to_torus,
            "iterations": self.iterations,
            "monodromy_det": float(np.linalg.det(self.monodromy)),
        }


@dataclass(frozen=True)
class NewtonFailure:
    seed: CartesianState
    reason: str


def _winding(traj: Trajectory) -> float:
    return (traj.y[4, -1] - traj.y[4, 0]) / TWO_PI


def _rotate4(z: np.ndarray, phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * z[0] - s * z[1], s * z[0] + c * z[1], c * z[2] - s * z[3], s * z[2] + c * z[3]])


def _rotation_generator(z: np.ndarray) -> np.ndarray:
    return np.array([-z[1], z[0], -z[3], z[2]])


def torus_chart(base: Field, p) -> tuple[np.ndarray, np.ndarray]:
    """State z(p) and dz/dp for p = (r, L, lam, phi).

    z = R_phi Phi^lam(B(r, L)) where B is the pericenter-type state
    ((r, 0), (0, L/r)) and Phi the unperturbed flow. Moving lam or phi keeps
    z on the same invariant torus exactly.
    """
    r, L, lam, phi = (float(v) for v in p)
    if not r > 0:
        raise CollisionError("chart radius must be positive")
    B = np.array([r, 0.0, 0.0, L / r])
    dB = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-L / (r * r), 1.0 / r]])
    if lam != 0.0:
        traj = integrate(base, CartesianState.from_vector(B), lam, variational=True)
        Y, Phi = traj.final.vector, traj.monodromy
    else:
        Y, Phi = B, np.eye(4)
    a = base.accel(0.0, Y[0], Y[1])
    flow = np.array([Y[2], Y[3], a[0], a[1]])
    z = _rotate4(Y, phi)
    D = np.empty((4, 4))
    cols = Phi @ dB
    D[:, 0] = _rotate4(cols[:, 0], phi)
    D[:, 1] = _rotate4(cols[:, 1], phi)
    D[:, 2] = _rotate4(flow, phi)
    D[:, 3] = _rotation_generator(z)
    return z, D


def chart_coordinates(state: CartesianState, potential) -> np.ndarray:
    """(r_minus, L, mu, psi) of a state on an unperturbed bounded orbit."""
    from .tori import angles_cartesian

    chart = angles_cartesian(state.x, state.v, potential)
    tp = turning_points(EffectiveOscillator(potential, chart.L, -1), chart.H)
    return np.array([tp.s_minus, chart.L, chart.mu, chart.psi])


def newton_fixed_point(model: PerturbationModel, base: Field, seed, tol: float = 1e-9, max_iter: int = 50,
                       epsilon_bound: float = math.inf, torus: TorusSolution | None = None,
                       method: str = "variational", r_min: float | None = None,
                       chart: str = "torus", frozen: Sequence[int] = ()) -> PeriodicOrbit | NewtonFailure:
    """Damped Tikhonov least-squares Newton on F = P(z) - z.

    Each step solves (J^T J + (mu^2 + nu) I) d = -J^T F with
    mu = max(1e-12, 1e-3 |eps|); the extra term nu grows tenfold when a step
    fails to reduce |F| and decays after successful steps.

    ``chart="torus"`` writes z in the coordinates of ``torus_chart`` so that
    steps along the unperturbed torus stay on it; this avoids the quadratic
    energy error of straight Cartesian steps, which the strong shear of the
    time-tau map amplifies. ``chart="cartesian"`` iterates on z directly.
    Coordinates listed in ``frozen`` keep their seed values; freezing phi is
    the phase condition for perturbations invariant under a joint rotation
    and time shift.

    Divergence and collisions are returned as NewtonFailure, not raised.
    """
    if abs(model.epsilon) > epsilon_bound:
        raise ParameterError(f"|epsilon| = {abs(model.epsilon):g} exceeds the configured bound {epsilon_bound:g}")
    if chart not in ("torus", "cartesian"):
        raise ParameterError(f"unknown chart {chart!r}")
    seed_state = seed if isinstance(seed, CartesianState) else CartesianState.from_vector(seed)
    mu = max(1e-12, 1e-3 * abs(model.epsilon))
    nu = 0.0
    free = [i for i in range(4) if i not in set(frozen)]

    def evaluate(p):
        if chart == "torus":
            z, dz = torus_chart(base, p)
        else:
            z, dz = np.asarray(p, dtype=float), np.eye(4)
        res = time_tau_map(model, base, z, method=method, r_min=r_min)
        return z, res, res.z_tau - z, (res.monodromy - np.eye(4)) @ dz

    try:
        if chart == "torus":
            if base.potential is None:
                raise ParameterError("the torus chart needs an unperturbed central field")
            p = chart_coordinates(seed_state, base.potential)
        else:
            p = seed_state.vector
        z, res, F, J = evaluate(p)
    except (CollisionError, IntegrationError, InadmissibleError) as exc:
        return NewtonFailure(seed_state, str(exc))
    norm = float(np.linalg.norm(F))

    def success(iterations):
        return PeriodicOrbit(model.epsilon, CartesianState.from_vector(z), norm, torus, res.monodromy,
                             int(round(_winding(res.trajectory))), iterations)

    for it in range(max_iter + 1):
        # Polish below tol while steps keep reducing the residual.
        if norm < POLISH_FACTOR * tol or (norm < tol and it == max_iter):
            return success(it)
        if it == max_iter:
            break
        Jf = J[:, free]
        JtJ, JtF = Jf.T @ Jf, Jf.T @ F
        floor = 1e-20 * float(np.trace(JtJ))
        # Below tol the residual sits near integration noise: polish briefly.
        for _ in range(POLISH_ATTEMPTS if norm < tol else 60):
            p_new = p.copy()
            p_new[free] -= np.linalg.solve(JtJ + (mu * mu + nu) * np.eye(len(free)), JtF)
            try:
                z_new, res_new, F_new, J_new = evaluate(p_new)
                n_new = float(np.linalg.norm(F_new))
                if n_new < norm:
                    nu = nu / 10.0 if nu > floor else 0.0
                    break
            except (CollisionError, IntegrationError):
                pass
            log.debug("newton rejected step, nu=%.1e", nu)
            nu = max(10.0 * nu, floor)
        else:
            if norm < tol:
                return success(it)
            return NewtonFailure(seed_state, f"damped step stalled at residual {norm:.3g}")
        log.debug("newton it=%d residual=%.3e nu=%.1e", it + 1, n_new, nu)
        stalled = norm < tol and n_new > 0.5 * norm
        p, z, res, F, J, norm = p_new, z_new, res_new, F_new, J_new, n_new
        if stalled:
            return success(it + 1)
    return NewtonFailure(seed_state, f"no convergence in {max_iter} iterations (residual {norm:.3g})")


# --------------------------------------------------------------- distances
def _best_rotation(z: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """min over phi of |z - R_phi w| for position and velocity rotated together."""
    zc = np.array([z[0] + 1j * z[1], z[2] + 1j * z[3]])
    wc = np.array([w[0] + 1j * w[1], w[2] + 1j * w[3]])
    s = np.sum(zc * np.conj(wc))
    d2 = np.sum(np.abs(zc) ** 2) + np.sum(np.abs(wc) ** 2) - 2 * abs(s)
    return math.sqrt(max(float(d2), 0.0)), float(np.angle(s))


def distance_to_orbit(z, traj: Trajectory, span: float, samples: int = 512) -> float:
    """min over time shift in [0, span) and rotation of |z - R_phi x(t)|."""
    z = np.asarray(z.vector if isinstance(z, CartesianState) else z, dtype=float)
    t0 = traj.t[0]
    ts = t0 + span * np.arange(samples) / samples
    W = traj.sol(ts)[:4]
    d = np.array([_best_rotation(z, W[:, i])[0] for i in range(samples)])
    i = int(np.argmin(d))
    h = span / samples
    lo, hi = ts[i] - h, ts[i] + h

    def f(t):
        t = t0 + (t - t0) % span
        return _best_rotation(z, traj.sol(t)[:4])[0]

    opt = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14 * span})
    return float(min(opt.fun, d[i]))


def distance_to_torus(z, torus: TorusSolution, traj: Trajectory | None = None) -> float:
    """Distance to the invariant torus: one radial period plus rotations covers it."""
    traj = traj or torus_trajectory(torus, torus.T * 1.01)
    return distance_to_orbit(z, traj, torus.T)


# ------------------------------------------------------------------ survey
@dataclass
class SurveyResult:
    orbits: list[PeriodicOrbit]
    failures: list[NewtonFailure]
    converged: int

    @property
    def distinct(self) -> int:
        return len(self.orbits)


def survey(model: PerturbationModel, torus: TorusSolution, epsilon: float | None = None, n_lambda: int = 4,
           n_phi: int = 4, tol: float = 1e-9, dedup_rel: float = 1e-5, threads: int = 1,
           reflect: bool = False, base: Field | None = None) -> SurveyResult:
    """Newton from every grid seed, then deduplicate up to time shift and rotation."""
    if epsilon is not None:
        model = model.with_epsilon(epsilon)
    base = base or central_field(torus.build_potential())
    seeds = seed_grid(torus, n_lambda, n_phi, reflect=reflect)

    def run(seed):
        return newton_fixed_point(model, base, seed, tol=tol, torus=torus)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    orbits = [r for r in results if isinstance(r, PeriodicOrbit)]
    failures = [r for r in results if isinstance(r, NewtonFailure)]
    torus_traj = torus_trajectory(torus, torus.T * 1.01)
    scale = float(np.linalg.norm(torus_pericenter(torus).vector))
    distinct: list[tuple[PeriodicOrbit, Trajectory]] = []
    for orb in orbits:
        orb.distance_to_torus = distance_to_torus(orb.z0, torus, torus_traj)
        duplicate = False
        for other, traj in distinct:
            if distance_to_orbit(orb.z0, traj, model.tau) < dedup_rel * scale:
                duplicate = True
                break
        if not duplicate:
            traj = integrate(model.field(base), orb.z0, model.tau * 1.001)
            distinct.append((orb, traj))
    return SurveyResult([o for o, _ in distinct], failures, len(orbits))


def continue_in_epsilon(model: PerturbationModel, torus: TorusSolution, epsilons: Sequence[float],
                        seed: CartesianState | None = None, tol: float = 1e-9,
                        base: Field | None = None) -> list[PeriodicOrbit]:
    """Follow one branch: each orbit seeds the next, rescaled towards the torus."""
    base = base or central_field(torus.build_potential())
    torus_traj = torus_trajectory(torus, torus.T * 1.01)
    current = seed or torus_pericenter(torus)
    prev_eps = None
    out = []
    for eps in epsilons:
        guess = current.vector
        if prev_eps is not None:
            anchor = _nearest_on_orbit(current.vector, torus_traj, torus.T)
            guess = anchor + (eps / prev_eps) * (current.vector - anchor)
        result = newton_fixed_point(model.with_epsilon(eps), base, guess, tol=tol, torus=torus)
        if isinstance(result, NewtonFailure):
            raise ConvergenceError(f"continuation lost the branch at epsilon={eps:g}: {result.reason}")
        result.distance_to_torus = distance_to_torus(result.z0, torus, torus_traj)
        out.append(result)
        current, prev_eps = result.z0, eps
    return out


def _nearest_on_orbit(z: np.ndarray, traj: Trajectory, span: float, samples: int = 512) -> np.ndarray:
    ts = traj.t[0] + span * np.arange(samples) / samples
    W = traj.sol(ts)[:4]
    best = min(range(samples), key=lambda i: _best_rotation(z, W[:, i])[0])
    w = W[:, best]
    phi = _best_rotation(z, w)[1]
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * w[0] - s * w[1], s * w[0] + c * w[1], c * w[2] - s * w[3], s * w[2] + c * w[3]])
