"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 empty admissible set,
4 convergence or verification failure.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import (
    ConvergenceError,
    DegenerateCenterError,
    InadmissibleError,
    NoMinimumError,
    OrbitaError,
    ParameterError,
    VerificationError,
)
from .potentials import RadialPotential, from_mapping, make_builtin

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMPTY = 3
EXIT_CONVERGENCE = 4


class CliFailure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _fail_from(exc: Exception) -> CliFailure:
    if isinstance(exc, (ParameterError, click.BadParameter)):
        return CliFailure(str(exc), EXIT_CONFIG)
    if isinstance(exc, (InadmissibleError, NoMinimumError, DegenerateCenterError)):
        return CliFailure(str(exc), EXIT_EMPTY)
    if isinstance(exc, (ConvergenceError, VerificationError)):
        return CliFailure(str(exc), EXIT_CONVERGENCE)
    if isinstance(exc, OrbitaError):
        return CliFailure(str(exc), EXIT_CONVERGENCE)
    return CliFailure(f"{type(exc).__name__}: {exc}", EXIT_CONFIG)


def _guard(fn):
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (OrbitaError, ValueError, KeyError, OSError, tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
            raise _fail_from(exc) from exc

    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


def thread_count(flag: int | None) -> int:
    env = os.environ.get("ORBITA_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise CliFailure(f"ORBITA_THREADS must be an integer, got {env!r}", EXIT_CONFIG) from None
    else:
        value = flag or 1
    if value < 1:
        raise CliFailure("thread count must be >= 1", EXIT_CONFIG)
    return value


def load_table(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".json"):
        return json.loads(text)
    return tomllib.loads(text)


def load_potential(path: str | None, family: str | None, params: dict) -> RadialPotential:
    """Potential from a TOML/JSON file (top level or a [potential] table) or from flags."""
    if path:
        table = load_table(path)
        table = table.get("potential", table)
        return from_mapping(table)
    if family is None:
        if "alpha" in params:
            family = "homogeneous"
            params.setdefault("kappa", 1.0)
        else:
            raise ParameterError("give --potential FILE or --family")
    return make_builtin(family, **{k: v for k, v in params.items() if v is not None})


def potential_options(fn):
    opts = [
        click.option("--potential", "potential_file", type=click.Path(exists=True, dir_okay=False),
                     help="TOML or JSON potential description."),
        click.option("--family", type=click.Choice(["homogeneous", "logarithmic", "levi_civita", "lennard_jones",
                                                    "kepler", "harmonic"])),
        click.option("--kappa", type=float),
        click.option("--alpha", type=float),
        click.option("--lambda", "lam", type=float),
        click.option("--varsigma", type=float),
        click.option("--sigma", type=float),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _potential_from_flags(potential_file, family, kappa, alpha, lam, varsigma, sigma) -> RadialPotential:
    params = {"kappa": kappa, "alpha": alpha, "lambda": lam, "varsigma": varsigma, "sigma": sigma}
    params = {k: v for k, v in params.items() if v is not None}
    if family in ("levi_civita",) and "kappa" not in params:
        params["kappa"] = 1.0
    if family in ("homogeneous", "logarithmic") and "kappa" not in params:
        params["kappa"] = 1.0
    return load_potential(potential_file, family, params)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def emit_json(data, out: str | None) -> None:
    text = json.dumps(data, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


@click.group()
@click.version_option(__version__, prog_name="orbita")
@click.option("--threads", type=int, default=None, help="Worker cap (ORBITA_THREADS overrides).")
@click.pass_context
def main(ctx, threads):
    """Time maps, invariant tori and periodic orbits of planar central force problems."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads


# ------------------------------------------------------------------- scan
def _scan_cell(potential, H, L):
    from .timemap import TimeMaps

    try:
        maps = TimeMaps(potential, L)
    except (NoMinimumError, DegenerateCenterError):
        return None
    if not maps.admissible(H):
        return None
    return maps.values(H)


def _auto_window(potential, L, count):
    from .timemap import TimeMaps

    try:
        maps = TimeMaps(potential, L)
    except (NoMinimumError, DegenerateCenterError):
        return [math.nan] * count
    lo = -maps.omega0
    width = maps.ceiling - lo if math.isfinite(maps.ceiling) else max(abs(lo), 1.0)
    return list(lo + width * np.linspace(0.05, 0.95, count))


@main.command()
@potential_options
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              help="TOML run config with [potential] and [grid] tables.")
@click.option("--H-min", "h_min", type=float)
@click.option("--H-max", "h_max", type=float)
@click.option("--nH", "n_h", type=int, default=10, show_default=True)
@click.option("--L-min", "l_min", type=float)
@click.option("--L-max", "l_max", type=float)
@click.option("--nL", "n_l", type=int, default=10, show_default=True)
@click.option("--L", "l_single", type=float, help="Single angular momentum (overrides the L range).")
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (stdout if omitted).")
@click.pass_context
@_guard
def scan(ctx, potential_file, family, kappa, alpha, lam, varsigma, sigma, config_file,
         h_min, h_max, n_h, l_min, l_max, n_l, l_single, out):
    """Tabulate T, Theta, their partials and D over an (H, L) grid.

    Without --H-min/--H-max every L gets its own energy window spanning the
    middle 90% of the admissible interval.
    """
    grid = {}
    if config_file:
        table = load_table(config_file)
        potential = from_mapping(table.get("potential", {}))
        grid = table.get("grid", {})
    else:
        potential = _potential_from_flags(potential_file, family, kappa, alpha, lam, varsigma, sigma)
    h_min = grid.get("H_min", h_min)
    h_max = grid.get("H_max", h_max)
    n_h = int(grid.get("nH", n_h))
    l_min = grid.get("L_min", l_min)
    l_max = grid.get("L_max", l_max)
    n_l = int(grid.get("nL", n_l))
    if l_single is not None:
        l_min = l_max = l_single
        n_l = 1
    if n_h < 1 or n_l < 1:
        raise ParameterError("grid counts must be >= 1")
    if l_min is None or l_max is None:
        raise ParameterError("an L range (--L-min/--L-max or --L) is required")
    if not 0 < l_min <= l_max:
        raise ParameterError("need 0 < L_min <= L_max")
    if (h_min is None) != (h_max is None):
        raise ParameterError("give both --H-min and --H-max or neither")
    if h_min is not None and h_min > h_max:
        raise ParameterError("need H_min <= H_max")
    Ls = np.linspace(l_min, l_max, n_l)
    cells = []
    for j, L in enumerate(Ls):
        Hs = np.linspace(h_min, h_max, n_h) if h_min is not None else _auto_window(potential, L, n_h)
        cells.extend((j, i, float(H), float(L)) for i, H in enumerate(Hs))
    threads = thread_count(ctx.obj.get("threads"))

    def run(cell):
        j, i, H, L = cell
        if not math.isfinite(H):
            return None
        return _scan_cell(potential, H, L)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    rows = [(c, r) for c, r in zip(cells, results) if r is not None]
    flagged = [(c[0], c[1]) for c, r in zip(cells, results) if r is None]
    if not rows:
        raise CliFailure("no admissible (H, L) cell in the grid", EXIT_EMPTY)
    if flagged:
        click.echo(f"{len(flagged)} inadmissible cell(s) skipped: {flagged}", err=True)
    header = ["H", "L", "T", "Theta", "dT_dH", "dT_dL", "dTheta_dH", "dTheta_dL", "D", "admissible"]
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for (j, i, H, L), v in sorted(rows, key=lambda item: (item[0][0], item[0][1])):
            w.writerow([_fmt(x) for x in (H, L, v.T, v.Theta, v.dT_dH, v.dT_dL, v.dTheta_dH,
                                          v.dTheta_dL, v.D)] + ["true"])
    finally:
        if out:
            fh.close()


# ------------------------------------------------------------- find-torus
@main.command("find-torus")
@potential_options
@click.option("--n", "n", type=int, required=True)
@click.option("--k", "k", type=int, required=True)
@click.option("--tau", type=float, required=True)
@click.option("--ell", type=int, default=1, show_default=True)
@click.option("--seed-H", "seed_h", type=float)
@click.option("--seed-L", "seed_l", type=float)
@click.option("--out", type=click.Path(dir_okay=False))
@_guard
def find_torus_cmd(potential_file, family, kappa, alpha, lam, varsigma, sigma, n, k, tau, ell, seed_h, seed_l, out):
    """Locate the torus of (n,k) orbits with minimal period tau/ell."""
    from .tori import find_torus

    potential = _potential_from_flags(potential_file, family, kappa, alpha, lam, varsigma, sigma)
    seed = None
    if seed_h is not None or seed_l is not None:
        if seed_h is None or seed_l is None:
            raise ParameterError("give both --seed-H and --seed-L")
        seed = (seed_h, seed_l)
    sol = find_torus(potential, tau, n, k, ell, seed=seed)
    emit_json(sol.to_dict(), out)


# ------------------------------------------------------------------ verify
def _load_torus(path: str):
    from .tori import TorusSolution

    data = json.loads(Path(path).read_text())
    try:
        return TorusSolution.from_dict(data)
    except TypeError as exc:
        raise ParameterError(f"{path} is not a torus file: {exc}") from exc


@main.command()
@click.option("--torus", "torus_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), help="Write the trajectory CSV here.")
@click.option("--out", type=click.Path(dir_okay=False))
@_guard
def verify(torus_file, csv_out, out):
    """Integrate a torus file's pericenter state and check closure and type."""
    from .dynamics import central_field, integrate, verify_torus
    from .continuation import torus_pericenter

    torus = _load_torus(torus_file)
    report = verify_torus(torus, raise_on_fail=False)
    if csv_out:
        traj = integrate(central_field(torus.build_potential()), torus_pericenter(torus), torus.period)
        traj.to_csv(csv_out)
    emit_json(report.to_dict(), out)
    if not report.passed:
        raise CliFailure("; ".join(report.failures), EXIT_CONVERGENCE)


# ---------------------------------------------------------------- continue
@main.command("continue")
@click.option("--torus", "torus_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--epsilon", "epsilons", type=float, multiple=True, required=True)
@click.option("--direction", nargs=2, type=float, default=(1.0, 0.0), show_default=True)
@click.option("--n-lambda", type=int, default=1, show_default=True)
@click.option("--n-phi", type=int, default=1, show_default=True)
@click.option("--reflect", is_flag=True, help="Seed on the reflected torus (opposite L).")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
@_guard
def continue_cmd(ctx, torus_file, epsilons, direction, n_lambda, n_phi, reflect, out):
    """Periodic orbits under a uniform tau-periodic drive, one survey per epsilon."""
    from .continuation import survey, uniform_drive

    torus = _load_torus(torus_file)
    threads = thread_count(ctx.obj.get("threads"))
    records = []
    for eps in epsilons:
        model = uniform_drive(torus.tau, eps, direction)
        res = survey(model, torus, n_lambda=n_lambda, n_phi=n_phi, threads=threads, reflect=reflect)
        for orb in res.orbits:
            d = orb.to_dict()
            records.append({k: d[k] for k in ("epsilon", "z0", "residual", "winding_k", "distance_to_torus")})
    emit_json(records, out)
    if not records:
        raise CliFailure("no periodic orbit converged", EXIT_CONVERGENCE)


# --------------------------------------------------------------------- r3b
@main.command()
@click.option("--alpha", type=float, required=True)
@click.option("--m", "mass", type=float, required=True)
@click.option("--n", "n", type=int, default=4, show_default=True)
@click.option("--k", "k", type=int, default=3, show_default=True)
@click.option("--count", "count", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--csv-dir", type=click.Path(file_okay=False), help="Directory for q-frame trajectory CSVs.")
@_guard
def r3b(alpha, mass, n, k, count, out, csv_dir):
    """2 pi-periodic orbits of the restricted 3-body problem near small tori."""
    from .dynamics import CartesianState, integrate
    from .restricted3body import R3BConfig, candidate_tori, find_r3b_periodic, q_field

    config = R3BConfig(alpha, mass)
    orbits = []
    for cand in candidate_tori(alpha, count, n, k):
        orb = find_r3b_periodic(config, cand)
        orbits.append(orb.to_dict())
        if csv_dir:
            Path(csv_dir).mkdir(parents=True, exist_ok=True)
            traj = integrate(q_field(config), CartesianState(tuple(orb.q0), tuple(orb.qdot0)), 2 * math.pi)
            traj.to_csv(Path(csv_dir) / f"r3b_ell{cand.ell}.csv", np.linspace(0, 2 * math.pi, 1001))
    emit_json(orbits, out)


# ------------------------------------------------------------------ limits
@main.command()
@potential_options
@click.option("--L", "L", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False))
@_guard
def limits(potential_file, family, kappa, alpha, lam, varsigma, sigma, L, out):
    """Closed-form circular limits of the time maps at angular momentum L."""
    from .timemap import circular_timemap_limits

    potential = _potential_from_flags(potential_file, family, kappa, alpha, lam, varsigma, sigma)
    lim = circular_timemap_limits(potential, L)
    emit_json(lim.to_dict(), out)


# ---------------------------------------------------------- potential-info
@main.command("potential-info")
@potential_options
@click.option("--L", "L", type=float)
@click.option("--out", type=click.Path(dir_okay=False))
@_guard
def potential_info(potential_file, family, kappa, alpha, lam, varsigma, sigma, L, out):
    """Describe a potential and, with --L, its well and admissible window."""
    from .timemap import TimeMaps, monotonicity_certificate

    potential = _potential_from_flags(potential_file, family, kappa, alpha, lam, varsigma, sigma)
    info = {"potential": potential.to_mapping(), "label": potential.label, "ceiling_policy": potential.ceiling}
    if L is not None:
        maps = TimeMaps(potential, L)
        circ = maps.radial.circ
        cert = monotonicity_certificate(potential, L)
        info.update({
            "L": L, "r0": circ.s0, "omega0": circ.omega0, "H_min": -circ.omega0, "H_max": maps.ceiling,
            "monotonicity": {
                "schaaf_i": cert.schaaf_i.passed, "schaaf_ii": cert.schaaf_ii.passed,
                "chicone": cert.chicone.passed,
            },
        })
    emit_json(info, out)


if __name__ == "__main__":  # pragma: no cover
    main()
