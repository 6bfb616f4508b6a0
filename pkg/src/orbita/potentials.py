"""Radial potentials as finite sums of power terms plus an optional logarithm.

A potential is stored as

    V(r) = sum_i c_i r**p_i + a log r

so every derivative is available in closed form. The sign convention is the
one of the equations of motion ``x'' = V'(|x|) x/|x|``: an attractive force
corresponds to a *decreasing* V, e.g. ``V = kappa/r`` for Kepler.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

Term = tuple[float, float]

MAX_ORDER = 4

# How the upper end H0(L) of the admissible energy window is obtained.
CEILING_ZERO = "zero"            # W -> 0 at infinity, no interior maximum
CEILING_INFINITE = "infinite"    # W coercive
CEILING_LOCAL_MAX = "local_max"  # interior local maximum of W beyond the well
CEILING_AUTO = "auto"            # decided from asymptotics of the term list


def falling_factorial(p: float, n: int) -> float:
    """Return p (p-1) ... (p-n+1), the coefficient of d^n/dr^n r**p."""
    out = 1.0
    for j in range(n):
        out *= p - j
    return out


def power_log_derivative(terms: Sequence[Term], log_coefficient: float, s, n: int = 0):
    """n-th derivative of ``sum c s**p + a log s`` at ``s`` (scalar or array)."""
    s_arr = np.asarray(s, dtype=float)
    out = np.zeros_like(s_arr)
    for c, p in terms:
        coef = c * falling_factorial(p, n)
        if coef != 0.0:
            out = out + coef * s_arr ** (p - n)
    if log_coefficient != 0.0:
        if n == 0:
            out = out + log_coefficient * np.log(s_arr)
        else:
            coef = log_coefficient * (-1.0) ** (n - 1) * math.factorial(n - 1)
            out = out + coef * s_arr ** (-n)
    if np.ndim(s) == 0:
        return float(out)
    return out


def power_log_scale(terms: Sequence[Term], log_coefficient: float, s: float, n: int = 0) -> float:
    """Sum of absolute term contributions, used as a magnitude for tolerances."""
    total = 0.0
    for c, p in terms:
        total += abs(c * falling_factorial(p, n) * s ** (p - n))
    if log_coefficient != 0.0:
        if n == 0:
            total += abs(log_coefficient * math.log(s))
        else:
            total += abs(log_coefficient) * math.factorial(n - 1) * s ** (-n)
    return total


@dataclass(frozen=True)
class RadialPotential:
    """Immutable power-sum + logarithm radial potential on ``domain``."""

    terms: tuple[Term, ...]
    log_coefficient: float = 0.0
    domain: tuple[float, float] = (0.0, math.inf)
    label: str = "custom"
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    ceiling: str = CEILING_AUTO

    def __post_init__(self):
        terms = tuple((float(c), float(p)) for c, p in self.terms)
        for c, p in terms:
            if not (math.isfinite(c) and math.isfinite(p)):
                raise ParameterError(f"power term ({c}, {p}) must be finite")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "log_coefficient", float(self.log_coefficient))
        r_lo, r_hi = (float(self.domain[0]), float(self.domain[1]))
        if not (0.0 <= r_lo < r_hi):
            raise ParameterError(f"domain must satisfy 0 <= r_lo < r_hi, got {self.domain}")
        object.__setattr__(self, "domain", (r_lo, r_hi))
        object.__setattr__(self, "params", dict(self.params))
        if self.ceiling not in (CEILING_ZERO, CEILING_INFINITE, CEILING_LOCAL_MAX, CEILING_AUTO):
            raise ParameterError(f"unknown energy ceiling policy {self.ceiling!r}")

    def in_domain(self, r) -> bool:
        r_arr = np.asarray(r, dtype=float)
        return bool(np.all((r_arr > self.domain[0]) & (r_arr < self.domain[1])))

    def derivative(self, r, n: int = 0):
        """n-th derivative of V, vectorized over ``r``. No domain check."""
        return power_log_derivative(self.terms, self.log_coefficient, r, n)

    def __call__(self, r):
        return self.derivative(r, 0)

    def force_pair(self, r: float) -> tuple[float, float]:
        """(V'(r), V''(r)) with plain float arithmetic; hot path of the ODE code."""
        d1 = 0.0
        d2 = 0.0
        for c, p in self.terms:
            rp = c * p * r ** (p - 2.0)
            d1 += rp * r
            d2 += rp * (p - 1.0)
        a = self.log_coefficient
        if a != 0.0:
            d1 += a / r
            d2 -= a / (r * r)
        return d1, d2

    def to_mapping(self) -> dict:
        """Serializable description matching the TOML/JSON input schema."""
        if self.family != "custom":
            return {"family": self.family, **self.params}
        out = {
            "family": "custom",
            "terms": [[c, p] for c, p in self.terms],
            "log_coefficient": self.log_coefficient,
        }
        if self.domain != (0.0, math.inf):
            out["domain"] = list(self.domain)
        return out


def eval_derivatives(p: RadialPotential, r: float, max_order: int = MAX_ORDER) -> list[float]:
    """Return ``[V(r), V'(r), ..., V^(max_order)(r)]``."""
    if not 0 <= max_order <= MAX_ORDER:
        raise ParameterError(f"max_order must lie in 0..{MAX_ORDER}, got {max_order}")
    if not p.in_domain(r):
        raise DomainError(f"r={r} outside the domain {p.domain} of {p.label}")
    return [p.derivative(float(r), n) for n in range(max_order + 1)]


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0:
        raise ParameterError(f"{name} must be > 0, got {value}")
    return value


def homogeneous(kappa: float, alpha: float) -> RadialPotential:
    """V = kappa / (alpha r**alpha); alpha = -2 is the harmonic oscillator."""
    kappa = _positive("kappa", kappa)
    alpha = float(alpha)
    if not alpha < 2.0:
        raise ParameterError(f"alpha must be < 2, got {alpha}")
    if alpha == 0.0:
        raise ParameterError("alpha must be != 0 (use the logarithmic family)")
    return RadialPotential(
        terms=((kappa / alpha, -alpha),),
        label=f"homogeneous(kappa={kappa:g}, alpha={alpha:g})",
        family="homogeneous",
        params={"kappa": kappa, "alpha": alpha},
        ceiling=CEILING_ZERO if alpha > 0 else CEILING_INFINITE,
    )


def logarithmic(kappa: float) -> RadialPotential:
    """V = -kappa log r."""
    kappa = _positive("kappa", kappa)
    return RadialPotential(
        terms=(),
        log_coefficient=-kappa,
        label=f"logarithmic(kappa={kappa:g})",
        family="logarithmic",
        params={"kappa": kappa},
        ceiling=CEILING_INFINITE,
    )


def levi_civita(kappa: float, lam: float) -> RadialPotential:
    """V = kappa/r + lam/r**2; lam = 0 is Kepler."""
    kappa = _positive("kappa", kappa)
    lam = float(lam)
    if not math.isfinite(lam):
        raise ParameterError(f"lambda must be finite, got {lam}")
    return RadialPotential(
        terms=((kappa, -1.0), (lam, -2.0)),
        label=f"levi_civita(kappa={kappa:g}, lambda={lam:g})",
        family="levi_civita",
        params={"kappa": kappa, "lambda": lam},
        ceiling=CEILING_ZERO,
    )


def lennard_jones(varsigma: float, sigma: float) -> RadialPotential:
    """V = 4 varsigma sigma^6 / r^6 - 4 varsigma sigma^12 / r^12."""
    varsigma = _positive("varsigma", varsigma)
    sigma = _positive("sigma", sigma)
    return RadialPotential(
        terms=((4.0 * varsigma * sigma**6, -6.0), (-4.0 * varsigma * sigma**12, -12.0)),
        label=f"lennard_jones(varsigma={varsigma:g}, sigma={sigma:g})",
        family="lennard_jones",
        params={"varsigma": varsigma, "sigma": sigma},
        ceiling=CEILING_LOCAL_MAX,
    )


def custom(terms: Sequence[Sequence[float]], log_coefficient: float = 0.0,
           domain: Sequence[float] = (0.0, math.inf), label: str = "custom") -> RadialPotential:
    """User-defined power-sum potential; H0 is derived from its asymptotics."""
    parsed = []
    for item in terms:
        if len(item) != 2:
            raise ParameterError(f"each term must be a [coefficient, exponent] pair, got {item!r}")
        parsed.append((float(item[0]), float(item[1])))
    return RadialPotential(
        terms=tuple(parsed),
        log_coefficient=log_coefficient,
        domain=(float(domain[0]), float(domain[1])),
        label=label,
    )


_BUILDERS = {
    "homogeneous": (homogeneous, ("kappa", "alpha")),
    "logarithmic": (logarithmic, ("kappa",)),
    "levi_civita": (levi_civita, ("kappa", "lambda")),
    "lennard_jones": (lennard_jones, ("varsigma", "sigma")),
}


def make_builtin(family: str, **params: float) -> RadialPotential:
    """Build one of the named families from keyword parameters."""
    if family == "kepler":
        return levi_civita(params.get("kappa", 1.0), 0.0)
    if family == "harmonic":
        return homogeneous(params.get("kappa", 1.0), -2.0)
    try:
        builder, names = _BUILDERS[family]
    except KeyError:
        raise ParameterError(
            f"unknown potential family {family!r}; expected one of {sorted(_BUILDERS)}"
        ) from None
    missing = [n for n in names if n not in params]
    if missing:
        raise ParameterError(f"{family} needs parameters {missing}")
    extra = sorted(set(params) - set(names))
    if extra:
        raise ParameterError(f"{family} does not accept parameters {extra}")
    return builder(*(params[n] for n in names))


def from_mapping(table: Mapping) -> RadialPotential:
    """Parse the ``{family = ..., ...}`` table used by config files."""
    if "family" not in table:
        raise ParameterError("potential table needs a 'family' key")
    family = table["family"]
    rest = {k: v for k, v in table.items() if k != "family"}
    if family == "custom":
        if "terms" not in rest:
            raise ParameterError("custom potential needs 'terms'")
        return custom(
            rest["terms"],
            rest.get("log_coefficient", 0.0),
            rest.get("domain", (0.0, math.inf)),
            rest.get("label", "custom"),
        )
    try:
        return make_builtin(family, **{k: float(v) for k, v in rest.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad parameters for {family}: {exc}") from exc
