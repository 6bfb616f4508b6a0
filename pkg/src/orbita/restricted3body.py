"""Restricted planar circular 3-body problem with alpha-homogeneous attraction.

Normalization: separation 1, period 2 pi, primaries of mass 1-m at m e^{it}
and of mass m at -(1-m) e^{it}. In the frame

    x = c (q - m e^{it}),   c = (1-m)^(-1/(alpha+2)),

the heavy primary sits at the origin and the problem is a 2 pi-periodic
perturbation, of size m, of the homogeneous central force with kappa = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .continuation import (
    ROTATING_POINT_MASS,
    NewtonFailure,
    PeriodicOrbit,
    PerturbationModel,
    distance_to_torus,
    newton_fixed_point,
    torus_pericenter,
)
from .dynamics import CartesianState, Field, Trajectory, central_field, integrate
from .errors import CollisionError, ConvergenceError, InadmissibleError, ParameterError
from .potentials import homogeneous
from .tori import TorusSolution, find_torus, homogeneous_ratio_interval

TWO_PI = 2.0 * math.pi
SMALL_PRIMARY_GUARD = 0.2


@dataclass(frozen=True)
class R3BConfig:
    alpha: float
    m: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0 and self.alpha != 1.0):
            raise ParameterError(f"alpha must lie in (0,2) without 1, got {self.alpha}")
        if not 0.0 <= self.m < 1.0:
            raise ParameterError(f"m must lie in [0,1), got {self.m}")

    @property
    def c(self) -> float:
        return (1.0 - self.m) ** (-1.0 / (self.alpha + 2.0))

    def primaries(self, t: float) -> tuple[complex, complex]:
        """(xi_M, xi_m): positions of the heavy and the light primary."""
        e = complex(math.cos(t), math.sin(t))
        return self.m * e, -(1.0 - self.m) * e


def _pull(y1: float, y2: float, beta: float) -> tuple[float, float]:
    """y/|y|^beta."""
    p = (y1 * y1 + y2 * y2) ** (-0.5 * beta)
    return y1 * p, y2 * p


def _pull_jac(y1: float, y2: float, beta: float) -> tuple[float, float, float, float]:
    """Jacobian of y/|y|^beta."""
    r2 = y1 * y1 + y2 * y2
    p = r2 ** (-0.5 * beta)
    g = -beta * p / r2
    return p + g * y1 * y1, g * y1 * y2, g * y1 * y2, p + g * y2 * y2


def q_field(config: R3BConfig, guard: float = 1e-6) -> Field:
    """q'' = (1-m)(xi_M - q)/|xi_M - q|^(a+2) + m (xi_m - q)/|xi_m - q|^(a+2)."""
    beta = config.alpha + 2.0
    m = config.m

    def accel(t, q1, q2):
        c, s = math.cos(t), math.sin(t)
        a1, a2 = _pull(m * c - q1, m * s - q2, beta)
        b1, b2 = _pull(-(1 - m) * c - q1, -(1 - m) * s - q2, beta)
        return (1 - m) * a1 + m * b1, (1 - m) * a2 + m * b2

    def jac(t, q1, q2):
        c, s = math.cos(t), math.sin(t)
        a = _pull_jac(m * c - q1, m * s - q2, beta)
        b = _pull_jac(-(1 - m) * c - q1, -(1 - m) * s - q2, beta)
        return tuple(-(1 - m) * ai - m * bi for ai, bi in zip(a, b))

    def near_heavy(t, y):
        return math.hypot(y[0] - m * math.cos(t), y[1] - m * math.sin(t)) - guard
    near_heavy.terminal = True

    def near_light(t, y):
        return math.hypot(y[0] + (1 - m) * math.cos(t), y[1] + (1 - m) * math.sin(t)) - guard
    near_light.terminal = True

    return Field(accel, jac, None, f"r3b-q(alpha={config.alpha:g}, m={m:g})", (near_heavy, near_light))


def field(config: R3BConfig, t: float, q) -> np.ndarray:
    """Acceleration of the massless body at time t and position q."""
    xi_M, xi_m = config.primaries(t)
    q = complex(q[0], q[1])
    for xi in (xi_M, xi_m):
        if abs(q - xi) == 0.0:
            raise CollisionError("q coincides with a primary")
    a = q_field(config).accel(t, q.real, q.imag)
    return np.array(a)


def to_perturbed_frame(config: R3BConfig, t: float, q, qdot) -> tuple[np.ndarray, np.ndarray]:
    c = config.c
    e = np.array([math.cos(t), math.sin(t)])
    ie = np.array([-e[1], e[0]])
    x = c * (np.asarray(q, dtype=float) - config.m * e)
    xdot = c * (np.asarray(qdot, dtype=float) - config.m * ie)
    return x, xdot


def from_perturbed_frame(config: R3BConfig, t: float, x, xdot) -> tuple[np.ndarray, np.ndarray]:
    c = config.c
    e = np.array([math.cos(t), math.sin(t)])
    ie = np.array([-e[1], e[0]])
    q = np.asarray(x, dtype=float) / c + config.m * e
    qdot = np.asarray(xdot, dtype=float) / c + config.m * ie
    return q, qdot


def perturbation_gradient(alpha: float, m: float, guard: float = SMALL_PRIMARY_GUARD) -> Field:
    """grad U(t, x, m) with x'' = -x/|x|^(a+2) + m grad U in the x-frame.

    grad U = c e^{it} - (ce^{it} + x)/((1-m)|ce^{it} + x|^(a+2)); the light
    primary sits at x = -c e^{it}.
    """
    beta = alpha + 2.0
    c = (1.0 - m) ** (-1.0 / beta)
    w = 1.0 / (1.0 - m)

    def accel(t, x1, x2):
        ce1, ce2 = c * math.cos(t), c * math.sin(t)
        p1, p2 = _pull(ce1 + x1, ce2 + x2, beta)
        return ce1 - w * p1, ce2 - w * p2

    def jac(t, x1, x2):
        j = _pull_jac(c * math.cos(t) + x1, c * math.sin(t) + x2, beta)
        return tuple(-w * ji for ji in j)

    def near_light(t, y):
        return math.hypot(y[0] + c * math.cos(t), y[1] + c * math.sin(t)) - guard
    near_light.terminal = True

    return Field(accel, jac, None, "rotating_point_mass", (near_light,))


def rotating_point_mass(alpha: float, m: float) -> PerturbationModel:
    """Perturbation model with epsilon identified with m."""
    return PerturbationModel(TWO_PI, ROTATING_POINT_MASS, float(m), lambda eps: perturbation_gradient(alpha, eps),
                             {"alpha": float(alpha)})


def x_field(config: R3BConfig) -> Field:
    """Full x-frame field -x/|x|^(a+2) + m grad U."""
    base = central_field(homogeneous(1.0, config.alpha))
    model = rotating_point_mass(config.alpha, config.m)
    return model.field(base)


# ---------------------------------------------------------------- candidates
@dataclass(frozen=True)
class Candidate:
    n: int
    k: int
    ell: int
    torus: TorusSolution
    r_plus: float


def _r_plus(torus: TorusSolution) -> float:
    from .effective import EffectiveOscillator, turning_points

    return turning_points(EffectiveOscillator(torus.build_potential(), torus.L, -1), torus.H).s_plus


def candidate_tori(alpha: float, N: int, n: int = 4, k: int = 3, bound: float = 0.5,
                   max_ell: int = 10_000) -> list[Candidate]:
    """First N multipliers ell whose (n,k) torus of period 2 pi/ell has r+ < bound."""
    lo, hi = homogeneous_ratio_interval(alpha)
    if not lo < k / n < hi:
        raise InadmissibleError(f"k/n = {k}/{n} is outside the admissible interval ({lo:.6g}, {hi:.6g})")
    if N < 1:
        raise ParameterError("N must be >= 1")
    potential = homogeneous(1.0, alpha)
    base = find_torus(potential, TWO_PI, n, k, 1)
    r1 = _r_plus(base)
    # r+ scales as (2 pi/ell)^(2/(2+alpha)): start the search near the threshold.
    expo = 2.0 / (2.0 + alpha)
    ell = max(1, int(math.floor((r1 / bound) ** (1.0 / expo))) - 1)
    out = []
    while len(out) < N:
        if ell > max_ell:
            raise ConvergenceError("no candidate torus below the sup-norm bound")
        torus = base if ell == 1 else find_torus(potential, TWO_PI, n, k, ell)
        rp = _r_plus(torus)
        if rp < bound:
            out.append(Candidate(n, k, ell, torus, rp))
        ell += 1
    return out


# ------------------------------------------------------------------- search
@dataclass
class R3BOrbit:
    candidate: Candidate
    m: float
    orbit: PeriodicOrbit
    q0: np.ndarray
    qdot0: np.ndarray
    q_residual: float
    frame_consistency: float
    sup_norm_x: float

    def to_dict(self) -> dict:
        return {
            "n": self.candidate.n, "k": self.candidate.k, "ell": self.candidate.ell, "m": self.m,
            "q0": list(self.q0), "qdot0": list(self.qdot0), "x_residual": self.orbit.residual,
            "q_residual": self.q_residual, "frame_consistency": self.frame_consistency,
            "sup_norm_x": self.sup_norm_x, "winding_k": self.orbit.winding_k,
            "distance_to_torus": self.orbit.distance_to_torus,
        }


def frame_consistency(config: R3BConfig, x0, xdot0, t_end: float = TWO_PI, samples: int = 64,
                      ) -> tuple[float, Trajectory, Trajectory]:
    """Max state difference between q-frame integration and the mapped x-frame one."""
    q0, qd0 = from_perturbed_frame(config, 0.0, x0, xdot0)
    tx = integrate(x_field(config), CartesianState(tuple(x0), tuple(xdot0)), t_end)
    tq = integrate(q_field(config), CartesianState(tuple(q0), tuple(qd0)), t_end)
    worst = 0.0
    for t in np.linspace(0.0, t_end, samples):
        zx = tx.sol(t)
        q, qd = from_perturbed_frame(config, t, zx[:2], zx[2:4])
        zq = tq.sol(t)
        worst = max(worst, float(np.linalg.norm(np.concatenate([q - zq[:2], qd - zq[2:4]]))))
    return worst, tx, tq


def find_r3b_periodic(config: R3BConfig, candidate: Candidate, tol: float = 1e-9,
                      seed: CartesianState | None = None) -> R3BOrbit:
    """2 pi-periodic orbit near the candidate torus, returned in the q-frame."""
    base = central_field(homogeneous(1.0, config.alpha))
    model = rotating_point_mass(config.alpha, config.m)
    seed = seed or torus_pericenter(candidate.torus)
    result = newton_fixed_point(model, base, seed, tol=tol, torus=candidate.torus, frozen=(3,))
    if isinstance(result, NewtonFailure):
        raise ConvergenceError(f"no 2 pi-periodic orbit near the ell={candidate.ell} torus: {result.reason}")
    result.distance_to_torus = distance_to_torus(result.z0, candidate.torus)
    x0, xd0 = np.array(result.z0.x), np.array(result.z0.v)
    consistency, tx, tq = frame_consistency(config, x0, xd0)
    q0, qd0 = from_perturbed_frame(config, 0.0, x0, xd0)
    zq = tq.final.vector
    q_res = float(np.linalg.norm(zq - np.concatenate([q0, qd0])))
    # Step points alone can miss the apocenter: add a fine dense-output grid.
    dense = tx.sol(np.linspace(0.0, TWO_PI, 4097))
    sup = float(max(np.max(np.hypot(tx.y[0], tx.y[1])), np.max(np.hypot(dense[0], dense[1]))))
    return R3BOrbit(candidate, config.m, result, q0, qd0, q_res, consistency, sup)
