"""Comet-type periodic orbits of the planar three-body problem.

Pipeline: solve the energy level for ``G`` on the section ``phi = 0``,
iterate the section map of the rectified flow, find its fixed point by
Newton's method, tune ``epsilon`` until the binary's rotation ratio is the
rational ``(q -+ 1)/q`` and assemble the closed orbit in rotating polar
variables.
"""

from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import kernels
from .config import DEFAULTS
from .core_model import (
    TWO_PI,
    DomainError,
    EnergyLevel,
    ModelError,
    SystemParams,
    h_comet,
    h_comet_truncated,
    parse_branch,
)
from .transforms import comet_to_rotating, _positions_vectorized

Z_STAR = np.array([0.0, 0.0, 1.0, 0.0])

# Constants of the estimate suite, calibrated by scripts/estimate_constants.py
BOUND_CONSTANTS = {
    "M0": 12.0,
    "M1": 4.0,
    "M3": 2.0,
    "K_period": 4.0,
    "K_ratio": 4.0,
    "K_radius": 2.0,
    "K_q2": 4.0,
    "K_p2": 4.0,
}


class PeriodicOrbitError(ModelError):
    """Graph-solve, convergence or closure failure."""


def _check_system(system):
    if system not in ("full", "truncated"):
        raise DomainError(f"system must be 'full' or 'truncated', got {system!r}")
    return system == "truncated"


def _energy_level(params, E):
    if isinstance(E, EnergyLevel):
        return E
    return EnergyLevel.truncated(params.epsilon, parse_branch(E))


# ---------------------------------------------------------------------------
# energy graph


def _graph_coefficients(params, point, truncated):
    """Coefficients of ``H(G) = a G^2 + b G + h0`` on the section ``phi = 0``."""
    rho, ups, rh, Rh = point
    eps, d, a_ = params.epsilon, params.delta, params.alpha
    e3 = eps ** 3
    z0 = np.array([rh, Rh, rho, ups, 0.0, 0.0])
    if truncated:
        return e3 / (2 * rho * rho), -1.0, h_comet_truncated(params, z0)
    k = math.sqrt(d / eps)
    r = 1.0 + k * rh
    s = 2 * k * rh + k * k * rh * rh
    a = e3 * (1 + d) / (2 * rho * rho) + k * k / (2 * a_ * r * r)
    b = -1.0 + s / (r * r)
    return a, b, h_comet(params, z0)


def energy_graph_G(params, E, point, system="full"):
    """Solve the energy level for ``G`` at ``phi = 0``.

    Parameters
    ----------
    params : SystemParams
    E : EnergyLevel or branch label
    point : sequence of 4 floats
        ``(rho, Upsilon, rh, Rh)``.
    system : {"full", "truncated"}

    Returns
    -------
    float
        The root continuing ``G = -E`` from ``epsilon = 0``.
    """
    truncated = _check_system(system)
    E = _energy_level(params, E)
    if point[0] <= 0:
        raise DomainError("rho must be positive")
    a, b, h0 = _graph_coefficients(params, point, truncated)
    c = h0 - E.value
    disc = b * b - 4 * a * c
    if disc < 0 or b >= 0:
        raise PeriodicOrbitError("energy level is not a graph over this point")
    # root that tends to -c/b as a -> 0, written without cancellation
    G = 2 * c / (-b + math.sqrt(disc))
    # one Newton step on the quadratic removes the last rounding
    G -= (a * G * G + b * G + c) / (2 * a * G + b)
    return G


def graph_expansion(params, E, point):
    """Series of the truncated energy graph up to ``O(epsilon^6)``."""
    E = _energy_level(params, E)
    rho, ups, rh, Rh = point
    a_ = params.alpha
    rot = Rh * Rh / a_ + a_ * rh * rh
    return (-E.value + 0.5 * rot + params.epsilon ** 3 * (
        0.5 * ups * ups + (rot - 2 * E.value) ** 2 / (8 * rho * rho) - 1.0 / rho))


# ---------------------------------------------------------------------------
# section map


@dataclass
class SectionMapResult:
    """Image of the section map and its derivative.

    ``return_time`` and ``theta_advance`` are the elapsed time and the
    advance of the binary angle over one lap (both positive).
    """

    image: np.ndarray
    jacobian: np.ndarray
    return_parameter: float
    return_time: float
    theta_advance: float
    G: float


def _rectified_rhs(params, truncated):
    mu, eps, d = params.mu, params.epsilon, params.delta
    k = math.sqrt(d / eps)
    dra = d / (params.alpha * eps)
    rhs6 = kernels.comet_rhs

    def f(phi, y):
        w = rhs6(y[:6], mu, eps, d, truncated)
        inv = 1.0 / w[4]
        r = 1.0 + k * y[0]
        th = (1.0 - dra * y[5]) / (r * r)
        return np.array([w[0] * inv, w[1] * inv, w[2] * inv, w[3] * inv, 1.0,
                         w[5] * inv, inv, th * inv])
    return f


def _lap(params, z4, E, truncated, rtol, atol, dense=False):
    G = energy_graph_G(params, E, (z4[2], z4[3], z4[0], z4[1]),
                       "truncated" if truncated else "full")
    y0 = np.array([z4[0], z4[1], z4[2], z4[3], 0.0, G, 0.0, 0.0])
    sol = solve_ivp(_rectified_rhs(params, truncated), (0.0, TWO_PI), y0,
                    method="DOP853", rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0:
        raise PeriodicOrbitError(f"section map propagation failed: {sol.message}")
    return sol, G


def rectified_section_map(params, z, E, system="full", jacobian=True, fd_step=None,
                          rtol=None, atol=None):
    """One return of the rectified flow to ``phi = 0``.

    Parameters
    ----------
    params : SystemParams
    z : array_like, shape (4,)
        ``(rh, Rh, rho, Upsilon)`` on the section.
    E : EnergyLevel or branch label
    system : {"full", "truncated"}
    jacobian : bool
        Compute the derivative by central differences.

    Returns
    -------
    SectionMapResult
    """
    truncated = _check_system(system)
    E = _energy_level(params, E)
    rtol = rtol or DEFAULTS["rel_tol"]
    atol = atol or DEFAULTS["abs_tol"] * 1e-2
    z = np.asarray(z, dtype=float)
    sol, G = _lap(params, z, E, truncated, rtol, atol)
    yend = sol.y[:, -1]
    jac = None
    if jacobian:
        h = fd_step or DEFAULTS["fd_step"]
        jac = np.empty((4, 4))
        for i in range(4):
            dz = np.zeros(4)
            dz[i] = h
            yp = _lap(params, z + dz, E, truncated, rtol, atol)[0].y[:4, -1]
            ym = _lap(params, z - dz, E, truncated, rtol, atol)[0].y[:4, -1]
            jac[:, i] = (yp - ym) / (2 * h)
    return SectionMapResult(image=yend[:4].copy(), jacobian=jac, return_parameter=TWO_PI,
                            return_time=abs(yend[6]), theta_advance=abs(yend[7]), G=G)


def multipliers(result):
    """Eigenvalues of the section-map derivative."""
    return np.linalg.eigvals(result.jacobian)


def expected_multipliers(epsilon, branch):
    """Closed-form multipliers of the truncated map at the fixed point."""
    sgn = parse_branch(branch)
    w = TWO_PI * epsilon ** 3 / (-1 + sgn * epsilon ** 3)
    return np.array([np.exp(1j * w), np.exp(-1j * w), np.exp(1j * w), np.exp(-1j * w)])


# ---------------------------------------------------------------------------
# fixed points


@dataclass
class FixedPointResult:
    point: np.ndarray
    residual: float
    iterations: int
    history: list
    section: SectionMapResult
    E: EnergyLevel
    system: str
    bounds: dict = field(default_factory=dict)


def perturbation_scale(params):
    """``mu eps^4 + sqrt(delta) eps^(-7/2)``, the size of the fixed-point shift."""
    e = params.epsilon
    return params.mu * e ** 4 + math.sqrt(params.delta) * e ** -3.5


def fixed_point_bounds(params, point, G, E, constants=None, floor=1e-12):
    """Check the distance of a fixed point from ``Z*``.

    Returns a dict ``name -> (value, bound, ok)``; ``floor`` absorbs the
    solver tolerance where the bound vanishes.
    """
    c = constants or BOUND_CONSTANTS
    scale = perturbation_scale(params)
    rot = math.sqrt(params.delta) * params.epsilon ** -3.5
    sgn = E.branch
    vals = {
        "rh": (abs(point[0]), c["M3"] * rot),
        "Rh": (abs(point[1]), c["M3"] * rot),
        "rho": (abs(point[2] - 1), c["M1"] * scale),
        "Ups": (abs(point[3]), c["M1"] * scale),
        "G": (abs(G - sgn), c["M1"] * scale),
    }
    return {k: (v, b, bool(v <= b + floor)) for k, (v, b) in vals.items()}


def find_fixed_point(params, E, initial=None, system="full", tol=None, max_iter=None,
                     fd_step=None, method="newton"):
    """Fixed point of the section map.

    Parameters
    ----------
    params : SystemParams
    E : EnergyLevel or branch label
    initial : array_like, optional
        Starting point, ``Z* = (0, 0, 1, 0)`` by default.
    system : {"full", "truncated"}
    method : {"newton", "contraction"}
        Newton with a finite-difference Jacobian, or the chord iteration
        with the unperturbed derivative at ``Z*`` (slower, used as a check).

    Returns
    -------
    FixedPointResult
    """
    _check_system(system)
    E = _energy_level(params, E)
    tol = tol or DEFAULTS["newton_tol"]
    max_iter = max_iter or DEFAULTS["newton_max_iter"]
    z = np.array(Z_STAR if initial is None else initial, dtype=float)
    history = []
    if method == "contraction":
        base = rectified_section_map(params, Z_STAR, E, "truncated", True, fd_step)
        chord = np.linalg.inv(np.eye(4) - base.jacobian)
    elif method != "newton":
        raise DomainError(f"unknown method {method!r}")
    res = None
    for it in range(max_iter + 1):
        want_jac = method == "newton"
        res = rectified_section_map(params, z, E, system, want_jac, fd_step)
        F = res.image - z
        err = float(np.abs(F).max())
        history.append(err)
        if err < tol:
            break
        if it == max_iter:
            raise PeriodicOrbitError(f"no convergence after {max_iter} iterations, "
                                     f"residual {err:.3e}")
        if method == "newton":
            step = np.linalg.solve(res.jacobian - np.eye(4), -F)
        else:
            step = chord @ F
        z = z + step
        if len(history) > 3 and history[-1] > history[-4] and err > 1e3 * tol:
            raise PeriodicOrbitError("iteration diverges")
    if res.jacobian is None:
        res = rectified_section_map(params, z, E, system, True, fd_step)
    out = FixedPointResult(point=z, residual=history[-1], iterations=len(history) - 1,
                           history=history, section=res, E=E, system=system)
    out.bounds = fixed_point_bounds(params, z, res.G, E)
    bad = [k for k, (_, _, ok) in out.bounds.items() if not ok]
    if bad:
        warnings.warn(f"fixed point exceeds estimated bounds on {bad}", RuntimeWarning)
    return out


def rotation_ratio(params, fixed_point):
    """``2 pi`` over the binary-angle advance during one lap."""
    sec = fixed_point.section if isinstance(fixed_point, FixedPointResult) else fixed_point
    return TWO_PI / sec.theta_advance


def target_ratio(q, branch):
    sgn = parse_branch(branch)
    return (q - sgn) / q


def admissible_q(epsilon0):
    """Integers in ``[4/(3 eps0^3), 8/(3 eps0^3)]``."""
    lo = 4.0 / (3.0 * epsilon0 ** 3)
    hi = 8.0 / (3.0 * epsilon0 ** 3)
    return int(math.ceil(lo)), int(math.floor(hi))


def tuning_bracket(epsilon0):
    return 9.0 * epsilon0 / 16.0, 15.0 * epsilon0 / 16.0


@dataclass
class TuneResult:
    epsilon: float
    ratio: float
    target: float
    residual: float
    fixed_point: FixedPointResult
    evaluations: int
    monotone: bool


def tune_epsilon(params, branch, q=None, epsilon0=None, bracket=None, system="full",
                 samples=3):
    """Find ``epsilon`` with rotation ratio ``(q -+ 1)/q``.

    Parameters
    ----------
    params : SystemParams
        ``epsilon`` is ignored; ``q`` is taken from here unless given.
    branch : label of the branch
    q : int, optional
    epsilon0 : float, optional
        Sets the bracket ``[9 eps0/16, 15 eps0/16]``; default from config.
    bracket : (float, float), optional
        Overrides the bracket.
    samples : int
        Interior samples used for the monotonicity check.

    Returns
    -------
    TuneResult
    """
    sgn = parse_branch(branch)
    q = int(q or params.q)
    eps0 = epsilon0 or DEFAULTS["epsilon0"]
    lo, hi = bracket or tuning_bracket(eps0)
    target = target_ratio(q, sgn)
    cache = {}
    warm = {"z": Z_STAR.copy()}

    def ratio(eps):
        if eps in cache:
            return cache[eps][0]
        p = params.replace(epsilon=eps, q=q)
        fp = find_fixed_point(p, EnergyLevel.truncated(eps, sgn), warm["z"], system)
        warm["z"] = fp.point
        val = rotation_ratio(p, fp)
        cache[eps] = (val, fp)
        return val

    grid = np.linspace(lo, hi, samples + 2)
    vals = np.array([ratio(e) for e in grid])
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs < 0) or np.all(diffs > 0))
    if not monotone:
        warnings.warn("rotation ratio is not monotone on the bracket", RuntimeWarning)
    g = vals - target
    if np.all(g > 0) or np.all(g < 0):
        raise PeriodicOrbitError(
            f"target {target} outside sampled ratio range [{vals.min()}, {vals.max()}]")
    i = int(np.nonzero(np.sign(g[:-1]) != np.sign(g[1:]))[0][0])
    # the leading-order guess gives a tight sub-bracket when it is valid
    guess = (sgn * (1.0 - target)) ** (1.0 / 3.0)
    a, b = grid[i], grid[i + 1]
    if a < guess < b:
        w = 1e-3 * guess
        ga, gb = ratio(guess - w) - target, ratio(guess + w) - target
        if ga * gb < 0:
            a, b = guess - w, guess + w
    eps = brentq(lambda e: ratio(e) - target, a, b, xtol=1e-16, rtol=1e-15, maxiter=200)
    val = ratio(eps)
    fp = cache[eps][1]
    return TuneResult(epsilon=eps, ratio=val, target=target, residual=abs(val - target),
                      fixed_point=fp, evaluations=len(cache), monotone=monotone)


# ---------------------------------------------------------------------------
# assembled orbits


class _TrigInterpolant:
    """Trigonometric interpolation of periodic samples on a uniform grid."""

    def __init__(self, values, period):
        values = np.asarray(values, dtype=float)
        self.n = values.shape[-1]
        self.period = period
        coef = np.fft.rfft(values, axis=-1) / self.n
        if self.n % 2 == 0:
            coef[..., -1] *= 0.5
        coef[..., 1:] *= 2.0
        self.coef = coef
        self.k = np.arange(coef.shape[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        ph = np.exp(1j * TWO_PI / self.period * np.multiply.outer(t, self.k))
        return np.real(ph @ self.coef.T).T


class PeriodicOrbitRecord:
    """A closed orbit of the rotating three-body system.

    One lap of length ``lap_period`` is sampled uniformly; the full period is
    ``laps * lap_period`` and the binary angle advances by ``2 pi q``.

    Attributes
    ----------
    params : SystemParams
        With the tuned ``epsilon``.
    branch : int
    lap_period, period : float
    laps : int
        Number of laps, ``q -+ 1``.
    theta_rate : float
        Mean angular speed of the binary.
    fixed_point : ndarray, shape (4,)
    samples_t : ndarray, shape (n,)
    samples : ndarray, shape (n, 8)
        Rotating polar states over one lap.
    """

    def __init__(self, params, branch, lap_period, laps, theta_rate, fixed_point, G0,
                 samples_t, samples, diagnostics=None):
        self.params = params
        self.branch = int(branch)
        self.lap_period = float(lap_period)
        self.laps = int(laps)
        self.period = self.laps * self.lap_period
        self.theta_rate = float(theta_rate)
        self.fixed_point = np.asarray(fixed_point, dtype=float)
        self.G0 = float(G0)
        self.samples_t = np.asarray(samples_t, dtype=float)
        self.samples = np.asarray(samples, dtype=float)
        self.diagnostics = diagnostics or {}
        per = self.samples.T.copy()
        per[2] = per[2] - self.theta_rate * self.samples_t
        self._interp = _TrigInterpolant(per, self.lap_period)

    @property
    def epsilon_tuned(self):
        return self.params.epsilon

    @property
    def rotation_ratio(self):
        return (self.laps, self.params.q)

    def rotating_state(self, t):
        """Rotating polar state at time ``t`` (any real, reduced mod period)."""
        t = np.mod(np.asarray(t, dtype=float), self.period)
        lap_t = np.mod(t, self.lap_period)
        z = self._interp(lap_t)
        z[2] = np.mod(z[2] + self.theta_rate * t, TWO_PI)
        z[3] = self.params.alpha
        return z

    # -- persistence ------------------------------------------------------
    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "branch": "plus" if self.branch > 0 else "minus",
            "epsilon_tuned": self.params.epsilon,
            "period": self.period,
            "lap_period": self.lap_period,
            "rotation_ratio": {"num": self.laps, "den": self.params.q},
            "theta_rate": self.theta_rate,
            "fixed_point": self.fixed_point.tolist(),
            "G0": self.G0,
            "samples": {"t": self.samples_t.tolist(), "state": self.samples.tolist()},
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            params = SystemParams(**d["params"])
            rec = cls(params, parse_branch(d["branch"]), d["lap_period"],
                      d["rotation_ratio"]["num"], d["theta_rate"], d["fixed_point"],
                      d["G0"], d["samples"]["t"], d["samples"]["state"],
                      d.get("diagnostics"))
        except (KeyError, TypeError, ValueError) as exc:
            raise PeriodicOrbitError(f"malformed periodic orbit record: {exc}") from exc
        if rec.params.q != d["rotation_ratio"]["den"]:
            raise PeriodicOrbitError("rotation ratio denominator differs from q")
        return rec

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path):
        text = text_or_path
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


class RecordPrimaries:
    """Primaries provider backed by a periodic orbit record."""

    def __init__(self, record):
        self.record = record
        self.mu = record.params.mu
        self.delta = record.params.delta
        self.q = record.params.q
        self.period = record.period
        self.nu = TWO_PI / record.period

    def positions(self, t):
        z = self.record.rotating_state(np.atleast_1d(t))
        xs = _positions_vectorized(self.record.params, z)
        if np.ndim(t) == 0:
            return tuple(x[:, 0] for x in xs)
        return xs

    def masses(self):
        return 1.0 - self.mu, self.mu, self.delta


def _comet_time_rhs(params):
    mu, eps, d = params.mu, params.epsilon, params.delta
    k = math.sqrt(d / eps)
    dra = d / (params.alpha * eps)

    def f(t, y):
        w = kernels.comet_rhs(y[:6], mu, eps, d, False)
        r = 1.0 + k * y[0]
        return np.append(w, (1.0 - dra * y[5]) / (r * r))
    return f


def assemble_orbit(params, fixed_point, branch=None, n_samples=128, direct_check=False,
                   rtol=None):
    """Build the closed orbit in rotating polar variables.

    Parameters
    ----------
    params : SystemParams
        Must carry the tuned ``epsilon`` and the resonance ``q``.
    fixed_point : FixedPointResult
    branch : label, optional
        Defaults to the branch of ``fixed_point``.
    n_samples : int
        Uniform samples per lap.
    direct_check : bool
        Also integrate all laps in one run and report the closure defect.

    Returns
    -------
    PeriodicOrbitRecord
    """
    sgn = fixed_point.E.branch if branch is None else parse_branch(branch)
    rtol = rtol or DEFAULTS["rel_tol"]
    sec = fixed_point.section
    lap = sec.return_time
    laps = params.q - sgn
    z6 = np.array([*fixed_point.point[:4], 0.0, sec.G])
    y0 = np.append(z6, 0.0)
    ts = lap * np.arange(n_samples) / n_samples
    sol = solve_ivp(_comet_time_rhs(params), (0.0, lap), y0, method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2, t_eval=np.append(ts, lap), dense_output=False)
    if sol.status != 0:
        raise PeriodicOrbitError(sol.message)
    ys = sol.y.T
    rot = np.array([comet_to_rotating(params, y[:6], y[6]) for y in ys])
    theta_rate = ys[-1, 6] / lap
    rec = PeriodicOrbitRecord(params, sgn, lap, laps, theta_rate, fixed_point.point,
                              sec.G, ts, rot[:-1])
    # closure over one lap in rotating variables, and of theta over all laps
    lap_defect = rot[-1] - rot[0]
    lap_defect[2] = 0.0
    theta_defect = math.remainder(laps * ys[-1, 6], TWO_PI)
    closure = max(float(np.abs(lap_defect).max()), abs(theta_defect))
    rec.diagnostics = {
        "closure": closure,
        "lap_closure": float(np.abs(lap_defect).max()),
        "theta_closure": abs(theta_defect),
        "fixed_point_residual": fixed_point.residual,
        "ratio": TWO_PI / ys[-1, 6],
    }
    if direct_check:
        rec.diagnostics["direct_closure"] = direct_closure(params, y0, laps * lap, rtol)
        rec.diagnostics["direct_closure_relative"] = direct_closure(params, y0, laps * lap,
                                                                    rtol, relative=True)
    rec.diagnostics["estimates"] = orbit_estimates(rec, fixed_point)
    return rec


def direct_closure(params, y0, period, rtol=None, relative=False):
    """Closure defect from a single integration over the whole period.

    With ``relative`` the defect is divided by the size of the state, which
    is dominated by the outer body at distance ``epsilon^-2``.
    """
    rtol = rtol or DEFAULTS["rel_tol"]
    sol = solve_ivp(_comet_time_rhs(params), (0.0, period), y0, method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2)
    end = comet_to_rotating(params, sol.y[:6, -1], sol.y[6, -1])
    start = comet_to_rotating(params, y0[:6], y0[6])
    diff = end - start
    diff[2] = math.remainder(diff[2], TWO_PI)
    scale = max(1.0, float(np.abs(start).max())) if relative else 1.0
    return float(np.abs(diff).max()) / scale


def orbit_estimates(record, fixed_point=None, constants=None, floor=1e-12):
    """Evaluate the estimate suite on an assembled orbit.

    Returns a dict ``name -> (value, bound, ok)``.
    """
    c = constants or BOUND_CONSTANTS
    p = record.params
    eps, d, q = p.epsilon, p.delta, p.q
    sgn = record.branch
    sq = math.sqrt(d / eps)
    t = np.linspace(0.0, record.lap_period, 4 * record.samples_t.size, endpoint=False)
    z = record.rotating_state(t)
    r, R = z[0], z[1]
    # inertial outer-body position and momentum
    e = np.array([np.cos(z[2]), np.sin(z[2])])
    Q2 = np.array([e[0] * z[4] - e[1] * z[5], e[1] * z[4] + e[0] * z[5]])
    P2 = np.array([e[0] * z[6] - e[1] * z[7], e[1] * z[6] + e[0] * z[7]])
    # the outer body turns with the sign of the branch
    beta = sgn * TWO_PI * t / record.period
    ref_q = np.array([np.cos(beta), np.sin(beta)]) / eps ** 2
    ref_p = sgn * d * eps * np.array([np.sin(beta), -np.cos(beta)])
    thdot = (1.0 - (z[4] * z[7] - z[5] * z[6]) / p.alpha) / r ** 2
    sup = lambda a: float(np.abs(a).max())
    vals = {
        "period": (abs(record.period / (TWO_PI * q) - 1.0), c["K_period"] * sq),
        "ratio": (abs(TWO_PI / (record.theta_rate * record.lap_period) - (1 - sgn * eps ** 3)),
                  c["K_ratio"] * (eps ** 7 + sq)),
        "r": (sup(r - 1.0), c["K_radius"] * d / eps ** 4),
        "R": (sup(R), c["K_radius"] * d / eps ** 4),
        "theta_dot": (sup(thdot - 1.0), c["K_radius"] * d / eps ** 4),
        "q2": (sup(np.hypot(*(Q2 - ref_q))), c["K_q2"] * eps ** 2),
        "p2": (sup(np.hypot(*(P2 + ref_p))), c["K_p2"] * d * eps ** 5),
    }
    out = {k: (v, b, bool(v <= b + floor)) for k, (v, b) in vals.items()}
    if fixed_point is not None:
        out.update({f"fixed_{k}": v for k, v in fixed_point.bounds.items()})
    return out


def circular_record(params, branch, n_samples=64):
    """Planet-free limit: the binary on the unit circle, ``theta = t``."""
    sgn = parse_branch(branch)
    if params.delta != 0.0:
        raise DomainError("the circular record needs delta = 0")
    fp = find_fixed_point(params, EnergyLevel.truncated(params.epsilon, sgn))
    return assemble_orbit(params, fp, sgn, n_samples)
