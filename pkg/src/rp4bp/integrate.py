"""Adaptive integration with dense output and section crossings."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core_model import (
    Chart,
    ChartState,
    DomainError,
    ModelError,
    make_rhs,
    system_chart,
)
from .transforms import mcgehee_to_qp, qp_to_mcgehee


class IntegrationError(ModelError):
    """Step-size underflow or a failed propagation."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances of the adaptive integrator.

    ``method_order`` selects the Dormand-Prince pair: 8 (DOP853, default) or
    5 (RK45).  ``max_step = 0`` means no bound.
    """

    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = 0.0
    method_order: int = 8
    event_tol: float = 1e-12
    qp_switch: float = 0.05

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.event_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.method_order not in (5, 8):
            raise DomainError("method_order must be 5 or 8")
        if self.max_step < 0:
            raise DomainError("max_step must be non-negative")

    @property
    def method(self):
        return "DOP853" if self.method_order == 8 else "RK45"

    def solver_kwargs(self):
        kw = dict(method=self.method, rtol=self.rel_tol, atol=self.abs_tol)
        if self.max_step > 0:
            kw["max_step"] = self.max_step
        return kw


def propagate(rhs, z0, t_span, config=None, dense=True, events=None):
    """Thin wrapper around :func:`scipy.integrate.solve_ivp`.

    Raises
    ------
    IntegrationError
        When the solver stops before the end of the span without an event.
    """
    config = config or IntegratorConfig()
    sol = solve_ivp(rhs, t_span, np.asarray(z0, dtype=float), dense_output=dense,
                    events=events, **config.solver_kwargs())
    if sol.status == -1:
        raise IntegrationError(sol.message)
    return sol


class Trajectory:
    """Sampled solution with a dense interpolant.

    Parameters
    ----------
    chart : Chart
    times : ndarray, shape (n,)
        Strictly increasing sample times.
    states : ndarray, shape (n, dim)
    dense : callable
        Maps a time (or array of times) to states, shape ``(dim,)`` or
        ``(dim, m)``.
    """

    def __init__(self, chart, times, states, dense):
        times = np.asarray(times, dtype=float)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DomainError("trajectory times must be strictly increasing")
        self.chart = Chart(chart)
        self.times = times
        self.states = np.asarray(states, dtype=float)
        self._dense = dense

    @property
    def t_min(self):
        return self.times[0]

    @property
    def t_max(self):
        return self.times[-1]

    def __call__(self, t):
        return self._dense(t)

    def state_at(self, t):
        return ChartState(self.chart, self._dense(float(t)))

    def to_csv(self, path, metadata=None):
        write_csv(path, ["t", *self.chart.names],
                  np.column_stack([self.times, self.states]), metadata)


def write_csv(path, header, rows, metadata=None):
    """CSV with ``#`` metadata lines, a header row, then the data."""
    with open(path, "w") as fh:
        for k, v in (metadata or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _from_solution(chart, sol):
    t = sol.t
    y = sol.y.T
    if t.size > 1 and t[-1] < t[0]:
        t, y = t[::-1], y[::-1]
    keep = np.concatenate([[True], np.diff(t) > 0])
    return Trajectory(chart, t[keep], y[keep], sol.sol)


class _Piecewise:
    """Dense output glued from segments, some stored in the (q,p) chart."""

    def __init__(self, pieces, delta):
        self.pieces = pieces  # (t_lo, t_hi, sol, is_qp)
        self.delta = delta

    def _one(self, t):
        for lo, hi, sol, is_qp in self.pieces:
            if lo <= t <= hi:
                z = sol(t)
                return qp_to_mcgehee(z, self.delta) if is_qp else z
        lo, hi, sol, is_qp = self.pieces[0] if t < self.pieces[0][0] else self.pieces[-1]
        z = sol(t)
        return qp_to_mcgehee(z, self.delta) if is_qp else z

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self._one(float(t))
        return np.column_stack([self._one(float(s)) for s in t])


def _integrate_mcgehee_switching(params, z0, t_span, config, primaries):
    """McGehee integration that moves to the (q,p) chart when x is small."""
    d = 0.0 if primaries is None else primaries.delta
    f_m = make_rhs(params, "asteroid_mcgehee", primaries)
    f_q = make_rhs(params, "qp", primaries)
    thr = config.qp_switch
    t0, t1 = map(float, t_span)
    sign = 1.0 if t1 >= t0 else -1.0
    z = np.asarray(z0, dtype=float)
    in_qp = z[0] < thr
    if in_qp:
        z = mcgehee_to_qp(z, d)
    pieces, ts, ys = [], [], []
    t = t0
    while sign * (t1 - t) > 0:
        if in_qp:
            def ev(tt, w):
                return (w[0] + w[1]) / math.sqrt(1 + d) - thr
            ev.direction = 1.0
        else:
            def ev(tt, w):
                return w[0] - thr
            ev.direction = -1.0
        ev.terminal = True
        sol = propagate(f_q if in_qp else f_m, z, (t, t1), config, events=ev)
        ys_seg = sol.y.T
        if in_qp:
            ys_seg = np.array([qp_to_mcgehee(w, d) for w in ys_seg])
        pieces.append((min(sol.t[0], sol.t[-1]), max(sol.t[0], sol.t[-1]), sol.sol, in_qp))
        ts.append(sol.t)
        ys.append(ys_seg)
        t = sol.t[-1]
        z = sol.y[:, -1]
        if sol.status == 1:
            z = qp_to_mcgehee(z, d) if in_qp else mcgehee_to_qp(z, d)
            in_qp = not in_qp
        else:
            break
    t_all = np.concatenate(ts)
    y_all = np.concatenate(ys)
    if sign < 0:
        t_all, y_all = t_all[::-1], y_all[::-1]
        pieces = pieces[::-1]
    keep = np.concatenate([[True], np.diff(t_all) > 0])
    return Trajectory(Chart.AsteroidMcGehee, t_all[keep], y_all[keep],
                      _Piecewise(pieces, d))


def integrate(params, state, which, t_span, config=None, primaries=None):
    """Integrate ``state`` under the system ``which`` over ``t_span``.

    Parameters
    ----------
    params : SystemParams
    state : ChartState
    which : str
        System tag accepted by :func:`rp4bp.core_model.make_rhs`.
    t_span : (float, float)
        Start and end time; the end may precede the start.
    config : IntegratorConfig, optional
    primaries : object, optional
        Primaries provider for the asteroid systems.

    Returns
    -------
    Trajectory
    """
    config = config or IntegratorConfig()
    chart = system_chart(which)
    if state.chart is not chart:
        raise DomainError(f"system {which} needs chart {chart.value}")
    if not all(np.isfinite(t_span)):
        raise DomainError("t_span must be finite")
    if which == "asteroid_mcgehee" and config.qp_switch > 0:
        return _integrate_mcgehee_switching(params, state.coords, t_span, config,
                                            primaries)
    rhs = make_rhs(params, which, primaries)
    sol = propagate(rhs, state.coords.copy(), tuple(map(float, t_span)), config)
    return _from_solution(chart, sol)


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class Section:
    """Zero set of ``g(t, z)`` with a crossing direction.

    ``direction`` is +1 (g increasing), -1 (decreasing) or 0 (both).
    """

    g: object
    direction: int = 0
    period: float = 0.0

    def value(self, t, z):
        v = self.g(t, z)
        if self.period:
            half = 0.5 * self.period
            v = (v + half) % self.period - half
        return v


def coordinate_section(index, value, direction=0, period=0.0):
    """Section ``z[index] = value``, optionally modulo ``period``."""
    return Section(lambda t, z: z[index] - value, direction, period)


def time_section(value, direction=0, period=0.0):
    return Section(lambda t, z: t - value, direction, period)


def event_crossing(trajectory, event, config=None, subdivisions=4, include_start=False):
    """Locate all crossings of ``event`` along ``trajectory``.

    The dense output is sampled on each step (with ``subdivisions`` interior
    points) and every bracketed sign change is refined with Brent's method.
    A zero exactly at the first sample is reported only if ``include_start``.

    Returns
    -------
    list of (float, ChartState)
    """
    config = config or IntegratorConfig()
    ts = trajectory.times
    if ts.size < 2:
        return []
    grid = np.concatenate([np.linspace(a, b, subdivisions + 1)[:-1]
                           for a, b in zip(ts[:-1], ts[1:])] + [ts[-1:]])
    zs = trajectory(grid)
    vals = np.array([event.value(t, zs[:, i]) for i, t in enumerate(grid)])
    # a jump of a wrapped section function is not a crossing
    jump = 0.5 * event.period if event.period else np.inf

    def fn(t):
        return event.value(t, trajectory(t))

    out = []
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if abs(b - a) >= jump:
            continue
        if event.direction and np.sign(b - a) != event.direction:
            continue
        if a == 0.0:
            if i > 0 or include_start:
                hit = grid[i]
            else:
                continue
        elif b == 0.0:
            continue  # picked up as a == 0 on the next interval
        elif a * b < 0:
            hit = brentq(fn, grid[i], grid[i + 1], xtol=config.event_tol, rtol=1e-15)
        else:
            continue
        out.append((hit, ChartState(trajectory.chart, trajectory(hit))))
    if vals[-1] == 0.0 and grid.size > 1:
        out.append((grid[-1], ChartState(trajectory.chart, trajectory(grid[-1]))))
    return out
