"""Coordinate changes between the charts, with symplecticity certificates.

Each transform is a :class:`TransformDescriptor` holding forward and inverse
maps on raw coordinate arrays.  The conformal factor ``c`` is defined by
``omega_source = c * omega_target`` once the source form is written in the
target variables.
"""

from dataclasses import dataclass

import numpy as np

from .core_model import (
    TWO_PI,
    Chart,
    ChartMismatchError,
    ChartState,
    DomainError,
    SystemParams,
)

TRANSFORM_NAMES = ("Jacobi", "Polar1", "Hadjidemetriou", "Rescale1", "Rescale2",
                   "CometPolar", "CartesianPullback", "McGehee", "QPChart",
                   "AsteroidPolar")


def _rot(th):
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, -s], [s, c]])


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _polar(q, v):
    """Cartesian pair ``(q, v)`` to ``(rho, phi, radial, angular momentum)``."""
    rho = np.hypot(q[0], q[1])
    if rho == 0.0:
        raise DomainError("polar coordinates undefined at the origin")
    phi = np.arctan2(q[1], q[0])
    radial = (q @ v) / rho
    return rho, phi, radial, _cross(q, v)


def _unpolar(rho, phi, radial, ang):
    if rho <= 0.0:
        raise DomainError("radius must be positive")
    e = np.array([np.cos(phi), np.sin(phi)])
    ep = np.array([-np.sin(phi), np.cos(phi)])
    return rho * e, radial * e + (ang / rho) * ep


# ---------------------------------------------------------------------------
# raw maps


def jacobi_forward(p, z):
    mu = p.mu
    xS, xJ, xP = z[0:2], z[2:4], z[4:6]
    yS, yJ, yP = z[6:8], z[8:10], z[10:12]
    return np.concatenate([xS, xJ - xS, xP - (1 - mu) * xS - mu * xJ,
                           yS + yJ + yP, yJ + mu * yP, yP])


def jacobi_inverse(p, z):
    mu = p.mu
    Q0, Q1, Q2 = z[0:2], z[2:4], z[4:6]
    P0, P1, P2 = z[6:8], z[8:10], z[10:12]
    xS = Q0
    xJ = Q0 + Q1
    xP = Q2 + (1 - mu) * xS + mu * xJ
    yP = P2
    yJ = P1 - mu * P2
    yS = P0 - yJ - yP
    return np.concatenate([xS, xJ, xP, yS, yJ, yP])


def polar1_forward(p, z):
    r, th, R, Th = _polar(z[2:4], z[8:10])
    out = z.copy()
    out[2], out[3], out[8], out[9] = r, th, R, Th
    return out


def polar1_inverse(p, z):
    Q1, P1 = _unpolar(z[2], z[3], z[8], z[9])
    out = z.copy()
    out[2:4], out[8:10] = Q1, P1
    return out


def had_forward(p, z):
    r, th, R, Th = z[2], z[3], z[8], z[9]
    back = _rot(-th)
    Q2, P2 = z[4:6], z[10:12]
    return np.concatenate([[r, R, th, Th + _cross(Q2, P2)], back @ Q2, back @ P2])


def had_inverse(p, z):
    """Embed a rotating state in Jacobi polar variables with ``P0 = 0`` and
    the centre of mass at the origin."""
    r, R, th, Om = z[0:4]
    q2, p2 = z[4:6], z[6:8]
    fwd = _rot(th)
    Q2, P2 = fwd @ q2, fwd @ p2
    Th = Om - _cross(q2, p2)
    e = np.array([np.cos(th), np.sin(th)])
    Q0 = -p.mu * r * e - p.delta / (1 + p.delta) * Q2
    return np.concatenate([Q0, [r, th], Q2, [0.0, 0.0], [R, Th], P2])


def rescale1_forward(p, z):
    d = p.delta
    if d <= 0.0:
        raise DomainError("the first rescaling needs delta > 0")
    k = np.sqrt(d)
    r, R, q2, p2 = z[0], z[1], z[2:4], z[4:6]
    return np.concatenate([[(r - 1) / k, R / k], q2, p2 / d])


def rescale1_inverse(p, z):
    # well defined at delta = 0: the binary sits at r = 1 and p2 vanishes
    d = p.delta
    k = np.sqrt(d)
    return np.concatenate([[1 + k * z[0], k * z[1]], z[2:4], d * z[4:6]])


def rescale2_forward(p, z):
    e = p.epsilon
    se = np.sqrt(e)
    return np.concatenate([[se * z[0], se * z[1]], e * e * z[2:4], z[4:6] / e])


def rescale2_inverse(p, z):
    e = p.epsilon
    se = np.sqrt(e)
    return np.concatenate([[z[0] / se, z[1] / se], z[2:4] / (e * e), e * z[4:6]])


def comet_polar_forward(p, z):
    rho, phi, ups, G = _polar(z[2:4], z[4:6])
    return np.array([z[0], z[1], rho, ups, phi, G])


def comet_polar_inverse(p, z):
    q, v = _unpolar(z[2], z[4], z[3], z[5])
    return np.concatenate([z[0:2], q, v])


def pullback_forward(p, z):
    """Rotating polar state to Cartesian positions and momenta."""
    return jacobi_inverse(p, polar1_inverse(p, had_inverse(p, z)))


def pullback_inverse(p, z):
    return had_forward(p, polar1_forward(p, jacobi_forward(p, z)))


def asteroid_polar_forward(p, z):
    xi, psi, Xi, Psi = _polar(z[0:2], z[2:4])
    return np.array([xi, Xi, psi, Psi, z[4]])


def asteroid_polar_inverse(p, z):
    x, y = _unpolar(z[0], z[2], z[1], z[3])
    return np.concatenate([x, y, [z[4]]])


def mcgehee_forward(p, z):
    if z[0] <= 0.0:
        raise DomainError("McGehee transform needs xi > 0")
    out = np.array(z, dtype=float)
    out[0] = np.sqrt(2.0 / z[0])
    return out


def mcgehee_inverse(p, z):
    if z[0] <= 0.0:
        raise DomainError("McGehee inverse needs x > 0")
    out = np.array(z, dtype=float)
    out[0] = 2.0 / (z[0] * z[0])
    return out


def mcgehee_to_qp(z, delta):
    x, Xi, psi, Psi, s = z
    sq = np.sqrt(1.0 + delta)
    return np.array([0.5 * (sq * x - Xi), 0.5 * (sq * x + Xi),
                     (1 + delta) * psi + Psi * Xi, Psi, s])


def qp_to_mcgehee(z, delta):
    q, pp, al, Psi, s = z
    Xi = pp - q
    return np.array([(q + pp) / np.sqrt(1.0 + delta), Xi,
                     (al - Psi * Xi) / (1 + delta), Psi, s])


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class TransformDescriptor:
    """A named coordinate change bound to a parameter set."""

    name: str
    params: SystemParams

    def __post_init__(self):
        if self.name not in _TABLE and self.name != "Identity":
            raise DomainError(f"unknown transform {self.name!r}")

    @property
    def source(self):
        return self._entry[0]

    @property
    def target(self):
        return self._entry[1]

    @property
    def conformal_factor(self):
        p = self.params
        if self.name == "Rescale1":
            return p.delta
        if self.name == "Rescale2":
            return 1.0 / p.epsilon
        return 1.0

    @property
    def _entry(self):
        if self.name == "Identity":
            return (self._identity_chart, self._identity_chart, None, None)
        return _TABLE[self.name]

    def forward_raw(self, z):
        if self.name == "Identity":
            return np.array(z, dtype=float)
        return self._entry[2](self.params, np.asarray(z, dtype=float))

    def inverse_raw(self, z):
        if self.name == "Identity":
            return np.array(z, dtype=float)
        return self._entry[3](self.params, np.asarray(z, dtype=float))


def identity_descriptor(chart, params=None):
    desc = TransformDescriptor("Identity", params or SystemParams())
    object.__setattr__(desc, "_identity_chart", Chart(chart))
    return desc


_TABLE = {
    "Jacobi": (Chart.CartesianSixBody, Chart.Jacobi, jacobi_forward, jacobi_inverse),
    "Polar1": (Chart.Jacobi, Chart.JacobiPolar, polar1_forward, polar1_inverse),
    "Hadjidemetriou": (Chart.JacobiPolar, Chart.RotatingPolar, had_forward, had_inverse),
    "Rescale1": (Chart.RotatingReduced, Chart.RescaledTilde, rescale1_forward,
                 rescale1_inverse),
    "Rescale2": (Chart.RescaledTilde, Chart.RescaledHat, rescale2_forward,
                 rescale2_inverse),
    "CometPolar": (Chart.RescaledHat, Chart.CometPolar, comet_polar_forward,
                   comet_polar_inverse),
    "CartesianPullback": (Chart.RotatingPolar, Chart.CartesianSixBody, pullback_forward,
                          pullback_inverse),
    "McGehee": (Chart.AsteroidPolar, Chart.AsteroidMcGehee, mcgehee_forward,
                mcgehee_inverse),
    "QPChart": (Chart.AsteroidMcGehee, Chart.QPChart,
                lambda p, z: mcgehee_to_qp(z, p.delta),
                lambda p, z: qp_to_mcgehee(z, p.delta)),
    "AsteroidPolar": (Chart.AsteroidCartesian, Chart.AsteroidPolar,
                      asteroid_polar_forward, asteroid_polar_inverse),
}


def apply(desc, state, direction="forward"):
    """Map ``state`` through ``desc``.

    Parameters
    ----------
    desc : TransformDescriptor
    state : ChartState
        In the source chart for ``forward``, the target chart for ``inverse``.
    direction : {"forward", "inverse"}

    Returns
    -------
    ChartState
    """
    if direction == "forward":
        if state.chart is not desc.source:
            raise ChartMismatchError(
                f"{desc.name} forward expects {desc.source.value}, got {state.chart.value}")
        return ChartState(desc.target, desc.forward_raw(state.coords))
    if direction == "inverse":
        if state.chart is not desc.target:
            raise ChartMismatchError(
                f"{desc.name} inverse expects {desc.target.value}, got {state.chart.value}")
        return ChartState(desc.source, desc.inverse_raw(state.coords))
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


# ---------------------------------------------------------------------------
# symplectic forms and certificates


def symplectic_matrix(chart, z, delta=0.0):
    """Matrix of the chart's 2-form at ``z`` (entry ``[i, j]`` is
    ``omega(e_i, e_j)``)."""
    chart = Chart(chart)
    n = chart.dim
    om = np.zeros((n, n))
    for a, b in chart.pairs:
        om[a, b], om[b, a] = 1.0, -1.0
    if chart is Chart.AsteroidMcGehee:
        w = -4.0 / z[0] ** 3
        om[0, 1], om[1, 0] = w, -w
    elif chart is Chart.QPChart:
        q, p, _, Psi, _ = z
        x = (q + p) / np.sqrt(1.0 + delta)
        w = -8.0 / (np.sqrt(1.0 + delta) * x ** 3)
        om[0, 1], om[1, 0] = w, -w
        # (d alpha - Psi (dp - dq)) ^ dPsi / (1 + delta)
        om[2, 3], om[3, 2] = 1.0 / (1 + delta), -1.0 / (1 + delta)
        om[1, 3], om[3, 1] = -Psi / (1 + delta), Psi / (1 + delta)
        om[0, 3], om[3, 0] = Psi / (1 + delta), -Psi / (1 + delta)
    return om


def numerical_jacobian(fn, z, rel_step=1e-6):
    """Central-difference Jacobian with step ``rel_step * (1 + |z_i|)``."""
    z = np.asarray(z, dtype=float)
    f0 = np.asarray(fn(z))
    jac = np.empty((f0.size, z.size))
    for i in range(z.size):
        h = rel_step * (1.0 + abs(z[i]))
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (np.asarray(fn(zp)) - np.asarray(fn(zm))) / (zp[i] - zm[i])
    return jac


def _mcgehee_inverse_jacobian(p, z):
    jac = np.eye(5)
    jac[0, 0] = -4.0 / z[0] ** 3
    return jac


def _qp_inverse_jacobian(p, z):
    d = p.delta
    sq = np.sqrt(1.0 + d)
    Psi, Xi = z[3], z[1] - z[0]
    jac = np.zeros((5, 5))
    jac[0, 0] = jac[0, 1] = 1.0 / sq
    jac[1, 0], jac[1, 1] = -1.0, 1.0
    jac[2, 0], jac[2, 1] = Psi / (1 + d), -Psi / (1 + d)
    jac[2, 2], jac[2, 3] = 1.0 / (1 + d), -Xi / (1 + d)
    jac[3, 3] = jac[4, 4] = 1.0
    return jac


# closed-form inverse Jacobians where finite differences lose digits
_INVERSE_JACOBIANS = {"McGehee": _mcgehee_inverse_jacobian,
                      "QPChart": _qp_inverse_jacobian}


def symplectic_residual(desc, state):
    """Max-norm defect of the conformal symplectic identity.

    The map differentiated is the one going from the lower to the higher
    dimensional chart (the inverse for square maps), so that the pulled-back
    form is compared on the chart where it is non-degenerate.
    """
    if state.chart is not desc.source:
        raise ChartMismatchError(f"{desc.name} expects {desc.source.value}")
    c = desc.conformal_factor
    d = desc.params.delta
    z_src = state.coords.copy()
    if desc.name == "Identity":
        om = symplectic_matrix(desc.source, z_src, d)
        return float(np.abs(om - om).max())
    z_tgt = desc.forward_raw(z_src)
    if desc.source.dim < desc.target.dim:
        # forward is an embedding: F^* omega_tgt = omega_src / c
        jac = numerical_jacobian(desc.forward_raw, z_src)
        pulled = jac.T @ symplectic_matrix(desc.target, z_tgt, d) @ jac
        return float(np.abs(c * pulled - symplectic_matrix(desc.source, z_src, d)).max())
    if desc.name in _INVERSE_JACOBIANS:
        jac = _INVERSE_JACOBIANS[desc.name](desc.params, z_tgt)
    else:
        jac = numerical_jacobian(desc.inverse_raw, z_tgt)
    pulled = jac.T @ symplectic_matrix(desc.source, z_src, d) @ jac
    return float(np.abs(pulled - c * symplectic_matrix(desc.target, z_tgt, d)).max())


def state_difference(a, b):
    """Componentwise difference with angles compared on the circle."""
    if a.chart is not b.chart:
        raise ChartMismatchError("states live in different charts")
    diff = a.coords - b.coords
    for i in a.chart.angles:
        diff[i] = (diff[i] + np.pi) % TWO_PI - np.pi
    return diff


# ---------------------------------------------------------------------------
# sampling of regular states


def random_source_state(desc, rng):
    """Draw a regular state in the source chart of ``desc``.

    For the maps that drop the centre of mass the state is drawn on the
    manifold where the dropped variables vanish.
    """
    p = desc.params
    n = rng.normal
    u = rng.uniform
    name = desc.name
    if name == "Jacobi":
        z = n(size=12)
    elif name == "Polar1":
        z = n(size=12)
        z[2:4] = u(0.3, 2.0) * np.array([np.cos(a := u(0, TWO_PI)), np.sin(a)])
    elif name == "Hadjidemetriou":
        rot = np.concatenate([[u(0.5, 1.5), n(), u(0, TWO_PI), n()], 3 * n(size=2),
                              n(size=2)])
        z = had_inverse(p, rot)
    elif name == "Rescale1":
        z = np.concatenate([[u(0.5, 1.5), n()], 3 * n(size=2), p.delta * n(size=2)])
    elif name == "Rescale2":
        e = p.epsilon
        z = np.concatenate([n(size=2), n(size=2) / e ** 2, e * n(size=2)])
    elif name == "CometPolar":
        z = np.concatenate([n(size=2), u(0.3, 2.0) * np.array(
            [np.cos(a := u(0, TWO_PI)), np.sin(a)]), n(size=2)])
    elif name == "CartesianPullback":
        z = np.concatenate([[u(0.5, 1.5), n(), u(0, TWO_PI), n()], 3 * n(size=2),
                            n(size=2)])
    elif name == "McGehee":
        z = np.array([u(1.0, 100.0), n(), u(0, TWO_PI), 5 * n(), u(0, TWO_PI)])
    elif name == "QPChart":
        z = np.array([u(0.05, 1.0), n(), u(0, TWO_PI), 5 * n(), u(0, TWO_PI)])
    elif name == "AsteroidPolar":
        z = np.concatenate([u(0.3, 3.0) * np.array([np.cos(a := u(0, TWO_PI)),
                                                     np.sin(a)]), n(size=2),
                            [u(0, TWO_PI)]])
    else:
        z = n(size=desc.source.dim)
    return ChartState(desc.source, z)


# ---------------------------------------------------------------------------
# primaries and composite chains


def primaries_at_time(record, t):
    """Cartesian positions ``(x_S, x_J, x_P)`` of the primaries at time ``t``.

    ``record`` must provide ``params`` and ``rotating_state(t)`` returning the
    rotating polar coordinates of the periodic orbit (reduced modulo its
    period).
    """
    if record is None or not hasattr(record, "rotating_state"):
        raise DomainError("a periodic orbit record is required")
    p = record.params
    z = np.asarray(record.rotating_state(t), dtype=float)
    if z.ndim == 1:
        c = pullback_forward(p, z)
        return c[0:2], c[2:4], c[4:6]
    return _positions_vectorized(p, z)


def _positions_vectorized(p, z):
    """Positions for an array of rotating states with shape ``(8, n)``."""
    r, th, q2 = z[0], z[2], z[4:6]
    e = np.array([np.cos(th), np.sin(th)])
    Q2 = np.array([e[0] * q2[0] - e[1] * q2[1], e[1] * q2[0] + e[0] * q2[1]])
    shift = p.delta / (1 + p.delta) * Q2
    return -p.mu * r * e - shift, (1 - p.mu) * r * e - shift, Q2 / (1 + p.delta)


def cartesian_to_comet(params, state, omega_tol=1e-9):
    """Cartesian three-body state to comet polar variables.

    The state must have zero total momentum, the centre of mass at the origin
    and total angular momentum ``alpha``.

    Returns
    -------
    (ChartState, float)
        Comet polar state and the binary angle ``theta`` carried alongside.
    """
    if state.chart is not Chart.CartesianSixBody:
        raise ChartMismatchError("expected CartesianSixBody")
    rot = pullback_inverse(params, state.coords)
    if abs(rot[3] - params.alpha) > omega_tol * (1 + abs(params.alpha)):
        raise DomainError(f"total angular momentum {rot[3]} differs from alpha")
    reduced = np.concatenate([rot[0:2], rot[4:8]])
    hat = rescale2_forward(params, rescale1_forward(params, reduced))
    return ChartState(Chart.CometPolar, comet_polar_forward(params, hat)), float(rot[2])


def comet_to_rotating(params, z, theta):
    """Raw comet polar coordinates plus ``theta`` to rotating polar ones."""
    hat = comet_polar_inverse(params, np.asarray(z, dtype=float))
    red = rescale1_inverse(params, rescale2_inverse(params, hat))
    return np.concatenate([red[0:2], [theta, params.alpha], red[2:6]])


def comet_to_cartesian(params, state, theta):
    if state.chart is not Chart.CometPolar:
        raise ChartMismatchError("expected CometPolar")
    rot = comet_to_rotating(params, state.coords, theta)
    return ChartState(Chart.CartesianSixBody, pullback_forward(params, rot))
