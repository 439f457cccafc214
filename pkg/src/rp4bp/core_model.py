"""Parameters, chart-tagged states, Hamiltonians and vector fields.

Every system of the construction lives here: the planar three-body problem
in Cartesian, Jacobi and rotating polar variables, the two rescaled comet
systems, the comet polar system and its truncation, and the restricted
four-body asteroid problem in Cartesian, polar and McGehee variables.

Conventions
-----------
Masses of Sun, Jupiter and planet are ``1 - mu``, ``mu`` and ``delta``.
Canonical charts list their coordinates so that the symplectic pairs are
given by :attr:`Chart.pairs`.  Angles are stored in ``[0, 2*pi)`` inside
:class:`ChartState`; raw arrays passed to the integrator are not wrapped.
"""

from dataclasses import dataclass, field
from enum import Enum
import math

import numpy as np

from . import kernels

TWO_PI = 2.0 * np.pi
COLLISION_FLOOR = 1e-8


class ModelError(Exception):
    """Base class for model-level failures."""


class CollisionError(ModelError):
    """Raised when two bodies come closer than the collision floor."""


class ChartMismatchError(ModelError):
    """Raised when a state is used with a system of a different chart."""


class DomainError(ModelError):
    """Raised when a state or parameter lies outside the valid domain."""


class Chart(str, Enum):
    """Coordinate charts with fixed coordinate layouts."""

    CartesianSixBody = "CartesianSixBody"
    Jacobi = "Jacobi"
    JacobiPolar = "JacobiPolar"
    RotatingPolar = "RotatingPolar"
    RotatingReduced = "RotatingReduced"
    RescaledTilde = "RescaledTilde"
    RescaledHat = "RescaledHat"
    CometPolar = "CometPolar"
    AsteroidCartesian = "AsteroidCartesian"
    AsteroidPolar = "AsteroidPolar"
    AsteroidMcGehee = "AsteroidMcGehee"
    QPChart = "QPChart"

    @property
    def dim(self):
        return _LAYOUT[self][0]

    @property
    def names(self):
        return _LAYOUT[self][1]

    @property
    def pairs(self):
        """Index pairs ``(position, momentum)`` of the chart's 2-form."""
        return _LAYOUT[self][2]

    @property
    def angles(self):
        return _LAYOUT[self][3]

    @property
    def positive(self):
        """Indices that must be strictly positive (radial variables)."""
        return _LAYOUT[self][4]


_LAYOUT = {
    Chart.CartesianSixBody: (
        12,
        ("xSx", "xSy", "xJx", "xJy", "xPx", "xPy",
         "ySx", "ySy", "yJx", "yJy", "yPx", "yPy"),
        tuple((i, i + 6) for i in range(6)), (), ()),
    Chart.Jacobi: (
        12,
        ("Q0x", "Q0y", "Q1x", "Q1y", "Q2x", "Q2y",
         "P0x", "P0y", "P1x", "P1y", "P2x", "P2y"),
        tuple((i, i + 6) for i in range(6)), (), ()),
    Chart.JacobiPolar: (
        12,
        ("Q0x", "Q0y", "r", "theta", "Q2x", "Q2y",
         "P0x", "P0y", "R", "Theta", "P2x", "P2y"),
        tuple((i, i + 6) for i in range(6)), (3,), (2,)),
    Chart.RotatingPolar: (
        8, ("r", "R", "theta", "Omega", "q2x", "q2y", "p2x", "p2y"),
        ((0, 1), (2, 3), (4, 6), (5, 7)), (2,), (0,)),
    Chart.RotatingReduced: (
        6, ("r", "R", "q2x", "q2y", "p2x", "p2y"),
        ((0, 1), (2, 4), (3, 5)), (), (0,)),
    Chart.RescaledTilde: (
        6, ("rt", "Rt", "q2x", "q2y", "v2x", "v2y"),
        ((0, 1), (2, 4), (3, 5)), (), ()),
    Chart.RescaledHat: (
        6, ("rh", "Rh", "qhx", "qhy", "vhx", "vhy"),
        ((0, 1), (2, 4), (3, 5)), (), ()),
    Chart.CometPolar: (
        6, ("rh", "Rh", "rho", "Ups", "phi", "G"),
        ((0, 1), (2, 3), (4, 5)), (4,), (2,)),
    Chart.AsteroidCartesian: (
        5, ("xAx", "xAy", "yAx", "yAy", "s"),
        ((0, 2), (1, 3)), (4,), ()),
    Chart.AsteroidPolar: (
        5, ("xi", "Xi", "psi", "Psi", "s"),
        ((0, 1), (2, 3)), (2, 4), (0,)),
    Chart.AsteroidMcGehee: (
        5, ("x", "Xi", "psi", "Psi", "s"),
        ((0, 1), (2, 3)), (2, 4), ()),
    Chart.QPChart: (
        5, ("q", "p", "alpha", "Psi", "s"),
        ((0, 1), (2, 3)), (4,), ()),
}


@dataclass(frozen=True)
class SystemParams:
    """Parameter tuple of the problem.

    Parameters
    ----------
    mu : float
        Mass ratio of the inner binary, ``0 <= mu <= 1/2``.
    delta : float
        Mass of the planet, ``delta >= 0``.
    epsilon : float
        Comet rescaling parameter, ``0 < epsilon < 1``.
    q : int
        Resonance integer, ``q >= 2``.
    """

    mu: float = 0.5
    delta: float = 0.0
    epsilon: float = 0.1
    q: int = 1000

    def __post_init__(self):
        if not (0.0 <= self.mu <= 0.5):
            raise DomainError(f"mu must lie in [0, 1/2], got {self.mu}")
        if not self.delta >= 0.0:
            raise DomainError(f"delta must be non-negative, got {self.delta}")
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if int(self.q) != self.q or self.q < 2:
            raise DomainError(f"q must be an integer >= 2, got {self.q}")
        object.__setattr__(self, "q", int(self.q))

    @property
    def alpha(self):
        return self.mu * (1.0 - self.mu)

    def replace(self, **kw):
        d = dict(mu=self.mu, delta=self.delta, epsilon=self.epsilon, q=self.q)
        d.update(kw)
        return SystemParams(**d)

    def require_perturbative(self, delta1):
        """Check ``delta <= delta1 * epsilon**7``."""
        if self.delta > delta1 * self.epsilon ** 7:
            raise DomainError(
                f"delta={self.delta} exceeds delta1*eps^7={delta1 * self.epsilon ** 7}")

    def to_dict(self):
        return dict(mu=self.mu, delta=self.delta, epsilon=self.epsilon, q=self.q)


@dataclass(frozen=True)
class ChartState:
    """A phase-space point tagged with its chart.

    Angles are wrapped to ``[0, 2*pi)`` and radial variables are checked on
    construction.
    """

    chart: Chart
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        chart = Chart(self.chart)
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size != chart.dim:
            raise ChartMismatchError(
                f"{chart.value} expects {chart.dim} coordinates, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite coordinates")
        for i in chart.angles:
            c[i] = np.mod(c[i], TWO_PI)
            if c[i] >= TWO_PI:
                c[i] = 0.0
        for i in chart.positive:
            if not c[i] > 0.0:
                raise DomainError(f"{chart.names[i]} must be positive, got {c[i]}")
        if chart is Chart.AsteroidMcGehee and c[0] < 0.0:
            raise DomainError("McGehee x must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "coords", c)

    def __getitem__(self, name):
        return self.coords[self.chart.names.index(name)]

    def with_coords(self, coords):
        return ChartState(self.chart, coords)


@dataclass(frozen=True)
class EnergyLevel:
    """Energy value with the branch label of the comet orbit."""

    value: float
    branch: int

    def __post_init__(self):
        if self.branch not in (1, -1):
            raise DomainError("branch must be +1 or -1")

    @classmethod
    def truncated(cls, epsilon, branch):
        """Level ``E = -branch - epsilon**3 / 2`` of the truncated orbits."""
        return cls(-branch - 0.5 * epsilon ** 3, branch)


def parse_branch(branch):
    """Map ``'plus'``, ``'+'``, ``1`` and friends to ``+1`` or ``-1``."""
    if branch in (1, "+", "plus", "+1"):
        return 1
    if branch in (-1, "-", "minus", "-1"):
        return -1
    raise DomainError(f"unknown branch {branch!r}")


# ---------------------------------------------------------------------------
# primaries


class CircularPrimaries:
    """Sun and Jupiter on the unit circle with unit angular speed.

    This is the planet-free limit of the comet periodic orbit: the polar
    angle of the binary is ``t`` and the extended phase advances with
    frequency ``1/q``.
    """

    def __init__(self, mu, q):
        self.mu = float(mu)
        self.delta = 0.0
        self.q = q
        self.period = TWO_PI * q
        self.nu = 1.0 / q

    def positions(self, t):
        t = np.asarray(t, dtype=float)
        e = np.array([np.cos(t), np.sin(t)])
        return -self.mu * e, (1.0 - self.mu) * e, np.zeros_like(e)

    def masses(self):
        return 1.0 - self.mu, self.mu, 0.0


def default_primaries(params, primaries=None):
    if primaries is not None:
        return primaries
    if params.delta != 0.0:
        raise DomainError("delta > 0 needs primaries from a periodic orbit record")
    return CircularPrimaries(params.mu, params.q)


# ---------------------------------------------------------------------------
# small helpers


def _check_chart(state, *charts):
    if state.chart not in charts:
        names = ", ".join(c.value for c in charts)
        raise ChartMismatchError(f"state chart {state.chart.value} not in ({names})")


def _dist(v):
    d = math.hypot(v[0], v[1])
    if d < COLLISION_FLOOR:
        raise CollisionError(f"separation {d:.3e} below floor")
    return d


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def rotator_coupling(rh, G, k, alpha):
    """Remainder coupling the rotator to the outer body.

    Returns ``(f, df/drh, df/dG)`` for
    ``f = [k^2 G^2 + (2 k rh + k^2 rh^2)(2 alpha G - alpha^2 rh^2)] / (2 alpha (1 + k rh)^2)``.
    The same expression serves the tilde system with ``k = sqrt(delta)`` and
    ``G`` the cross product ``q2 x v2``.
    """
    r = 1.0 + k * rh
    s = 2.0 * k * rh + k * k * rh * rh
    lin = 2.0 * alpha * G - alpha * alpha * rh * rh
    num = k * k * G * G + s * lin
    f = num / (2.0 * alpha * r * r)
    df_dG = (k * k * G + alpha * s) / (alpha * r * r)
    num_r = 2.0 * k * r * lin - 2.0 * alpha * alpha * rh * s
    df_dr = num_r / (2.0 * alpha * r * r) - num * k / (alpha * r ** 3)
    return f, df_dr, df_dG


def _require_alpha(params):
    if params.alpha == 0.0:
        raise DomainError("the rotator systems need mu > 0")


def _require_delta(params):
    if params.delta <= 0.0:
        raise DomainError("this Hamiltonian is singular at delta = 0")


# ---------------------------------------------------------------------------
# three-body systems


def h_three_body(params, z):
    mu, d = params.mu, params.delta
    _require_delta(params)
    xS, xJ, xP = z[0:2], z[2:4], z[4:6]
    yS, yJ, yP = z[6:8], z[8:10], z[10:12]
    kin = yS @ yS / (2 * (1 - mu)) + yJ @ yJ / (2 * mu) + yP @ yP / (2 * d)
    pot = d * ((1 - mu) / _dist(xP - xS) + mu / _dist(xP - xJ)) \
        + params.alpha / _dist(xS - xJ)
    return kin - pot


def f_three_body(params, z):
    mu, d = params.mu, params.delta
    _require_delta(params)
    xS, xJ, xP = z[0:2], z[2:4], z[4:6]
    out = np.empty(12)
    out[0:2] = z[6:8] / (1 - mu)
    out[2:4] = z[8:10] / mu
    out[4:6] = z[10:12] / d
    aPS = d * (1 - mu) * (xP - xS) / _dist(xP - xS) ** 3
    aPJ = d * mu * (xP - xJ) / _dist(xP - xJ) ** 3
    aSJ = params.alpha * (xS - xJ) / _dist(xS - xJ) ** 3
    out[6:8] = aPS - aSJ
    out[8:10] = aPJ + aSJ
    out[10:12] = -aPS - aPJ
    return out


def h_jacobi(params, z):
    """Three-body Hamiltonian in Jacobi variables on ``P0 = 0``."""
    _require_delta(params)
    mu, d = params.mu, params.delta
    if np.hypot(z[6], z[7]) > 1e-12 * (1.0 + np.abs(z[8:]).max()):
        raise DomainError("Jacobi Hamiltonian is defined on P0 = 0")
    Q1, Q2, P1, P2 = z[2:4], z[4:6], z[8:10], z[10:12]
    return ((d + 1) / (2 * d) * (P2 @ P2)
            - d * ((1 - mu) / _dist(Q2 + mu * Q1) + mu / _dist(Q2 - (1 - mu) * Q1))
            + P1 @ P1 / (2 * params.alpha) - params.alpha / _dist(Q1))


def h_jacobi_polar(params, z):
    _require_delta(params)
    mu, d, a = params.mu, params.delta, params.alpha
    r, th, R, Th = z[2], z[3], z[8], z[9]
    Q2, P2 = z[4:6], z[10:12]
    e = np.array([np.cos(th), np.sin(th)])
    return ((d + 1) / (2 * d) * (P2 @ P2)
            - d * ((1 - mu) / _dist(Q2 + mu * r * e) + mu / _dist(Q2 - (1 - mu) * r * e))
            + (R * R + Th * Th / (r * r)) / (2 * a) - a / r)


def _rot_unpack(params, state_chart, z):
    if state_chart is Chart.RotatingPolar:
        r, R, Om = z[0], z[1], z[3]
        q2, p2 = z[4:6], z[6:8]
    else:
        r, R, Om = z[0], z[1], params.alpha
        q2, p2 = z[2:4], z[4:6]
    return r, R, Om, q2, p2


def h_rotating(params, z, chart=Chart.RotatingPolar):
    _require_delta(params)
    _require_alpha(params)
    mu, d, a = params.mu, params.delta, params.alpha
    r, R, Om, q2, p2 = _rot_unpack(params, chart, z)
    e1 = np.array([1.0, 0.0])
    w = _cross(q2, p2)
    return ((d + 1) / (2 * d) * (p2 @ p2)
            - d * ((1 - mu) / _dist(q2 + r * mu * e1) + mu / _dist(q2 - r * (1 - mu) * e1))
            + R * R / (2 * a) + (Om - w) ** 2 / (2 * a * r * r) - a / r)


def _two_center_grad(q, r, mu):
    """Value and gradients of ``-(1-mu)/|q + mu r e1| - mu/|q - (1-mu) r e1|``."""
    pS = np.array([-mu * r, 0.0])
    pJ = np.array([(1 - mu) * r, 0.0])
    dS = q - pS
    dJ = q - pJ
    nS = _dist(dS)
    nJ = _dist(dJ)
    val = -(1 - mu) / nS - mu / nJ
    gq = (1 - mu) * dS / nS ** 3 + mu * dJ / nJ ** 3
    # d/dr through the body positions
    gr = -(1 - mu) * dS[0] / nS ** 3 * (-mu) - mu * dJ[0] / nJ ** 3 * (1 - mu)
    return val, gq, gr


def f_rotating(params, z):
    """Vector field of the rotating polar Hamiltonian (8 coordinates)."""
    _require_delta(params)
    _require_alpha(params)
    mu, d, a = params.mu, params.delta, params.alpha
    r, R, th, Om = z[0], z[1], z[2], z[3]
    q2, p2 = z[4:6], z[6:8]
    w = _cross(q2, p2)
    _, gq, gr = _two_center_grad(q2, r, mu)
    L = (Om - w) / (a * r * r)
    out = np.empty(8)
    out[0] = R / a
    out[1] = -(d * gr - (Om - w) ** 2 / (a * r ** 3) + a / (r * r))
    out[2] = L
    out[3] = 0.0
    # dH/dp = (d+1)/d p - L * dw/dp ; dw/dp = (-q_y, q_x)
    out[4] = (d + 1) / d * p2[0] + L * q2[1]
    out[5] = (d + 1) / d * p2[1] - L * q2[0]
    # dH/dq = d*gq - L * dw/dq ; dw/dq = (p_y, -p_x)
    out[6] = -(d * gq[0] - L * p2[1])
    out[7] = -(d * gq[1] + L * p2[0])
    return out


# ---------------------------------------------------------------------------
# rescaled comet systems


def _tilde_parts(params, z):
    mu, d, a = params.mu, params.delta, params.alpha
    rt, Rt = z[0], z[1]
    q, v = z[2:4], z[4:6]
    k = np.sqrt(d)
    r = 1.0 + k * rt
    w = _cross(q, v)
    return mu, d, a, rt, Rt, q, v, k, r, w


def h_tilde_parts(params, z):
    """Return the pieces ``(three-body, rotator, remainder, f, g)`` of the
    first rescaled Hamiltonian."""
    _require_alpha(params)
    mu, d, a, rt, Rt, q, v, k, r, w = _tilde_parts(params, z)
    e1 = np.array([1.0, 0.0])
    pot1 = (1 - mu) / _dist(q + mu * e1) + mu / _dist(q - (1 - mu) * e1)
    potr = (1 - mu) / _dist(q + mu * r * e1) + mu / _dist(q - (1 - mu) * r * e1)
    rpc3bp = 0.5 * (v @ v) - pot1 - w
    rot = 0.5 * (Rt * Rt / a + a * rt * rt)
    f, _, _ = rotator_coupling(rt, w, k, a)
    g = pot1 - potr
    rem = 0.5 * d * (v @ v) + f + g
    return rpc3bp, rot, rem, f, g


def h_tilde(params, z):
    p = h_tilde_parts(params, z)
    return p[0] + p[1] + p[2]


def f_tilde(params, z):
    _require_alpha(params)
    mu, d, a, rt, Rt, q, v, k, r, w = _tilde_parts(params, z)
    _, gq, gr = _two_center_grad(q, r, mu)
    _, df_dr, df_dw = rotator_coupling(rt, w, k, a)
    dH_dw = -1.0 + df_dw
    out = np.empty(6)
    out[0] = Rt / a
    out[1] = -(a * rt + df_dr + gr * k)
    # dH/dv = (1+d) v + dH_dw * (-q_y, q_x)
    out[2] = (1 + d) * v[0] - dH_dw * q[1]
    out[3] = (1 + d) * v[1] + dH_dw * q[0]
    # dH/dq = gq + dH_dw * (v_y, -v_x)
    out[4] = -(gq[0] + dH_dw * v[1])
    out[5] = -(gq[1] - dH_dw * v[0])
    return out


def h_hat(params, z):
    """Second rescaled Hamiltonian (Cartesian hat variables)."""
    _require_alpha(params)
    mu, d, eps, a = params.mu, params.delta, params.epsilon, params.alpha
    rh, Rh = z[0], z[1]
    qh, vh = z[2:4], z[4:6]
    k = np.sqrt(d / eps)
    r = 1.0 + k * rh
    e2, e3 = eps * eps, eps ** 3
    e1 = np.array([1.0, 0.0])
    G = _cross(qh, vh)
    pot = (1 - mu) / _dist(qh + e2 * mu * r * e1) + mu / _dist(qh - e2 * (1 - mu) * r * e1)
    f, _, _ = rotator_coupling(rh, G, k, a)
    return (-G + e3 * ((1 + d) * 0.5 * (vh @ vh) - pot)
            + 0.5 * (Rh * Rh / a + a * rh * rh) + f)


def comet_parts(params, z):
    """Decompose the comet polar Hamiltonian.

    Returns
    -------
    dict
        ``truncated`` (the decoupled truncated Hamiltonian), ``mu_term``
        (difference between the two-centre and the Kepler potential at
        ``r = 1``), ``f``, ``g``, ``kinetic_delta`` and ``remainder``
        (``f + g + kinetic_delta``).
    """
    _require_alpha(params)
    mu, d, eps, a = params.mu, params.delta, params.epsilon, params.alpha
    rh, Rh, rho, ups, phi, G = z
    if rho < COLLISION_FLOOR:
        raise CollisionError("rho below collision floor")
    e2, e3 = eps * eps, eps ** 3
    k = np.sqrt(d / eps)
    r = 1.0 + k * rh
    cphi = np.cos(phi)

    def pot(rr):
        cS = e2 * mu * rr
        cJ = -e2 * (1 - mu) * rr
        dS = np.sqrt(rho * rho + 2 * rho * cS * cphi + cS * cS)
        dJ = np.sqrt(rho * rho + 2 * rho * cJ * cphi + cJ * cJ)
        if min(dS, dJ) < COLLISION_FLOOR:
            raise CollisionError("comet hits a primary")
        return (1 - mu) / dS + mu / dJ

    kep = 0.5 * (ups * ups + G * G / (rho * rho))
    trunc = -G + e3 * (kep - 1.0 / rho) + 0.5 * (Rh * Rh / a + a * rh * rh)
    p1 = pot(1.0)
    mu_term = -e3 * (p1 - 1.0 / rho)
    f, _, _ = rotator_coupling(rh, G, k, a)
    g = e3 * (p1 - pot(r))
    kin_d = d * e3 * kep
    return dict(truncated=trunc, mu_term=mu_term, f=f, g=g,
                kinetic_delta=kin_d, remainder=f + g + kin_d)


def h_comet(params, z):
    p = comet_parts(params, z)
    return p["truncated"] + p["mu_term"] + p["remainder"]


def h_comet_truncated(params, z):
    _require_alpha(params)
    eps, a = params.epsilon, params.alpha
    rh, Rh, rho, ups, phi, G = z
    return (-G + eps ** 3 * (0.5 * (ups * ups + G * G / (rho * rho)) - 1.0 / rho)
            + 0.5 * (Rh * Rh / a + a * rh * rh))


def f_comet(params, z):
    _require_alpha(params)
    return kernels.comet_rhs(np.asarray(z, dtype=float), params.mu, params.epsilon,
                             params.delta, False)


def f_comet_truncated(params, z):
    _require_alpha(params)
    return kernels.comet_rhs(np.asarray(z, dtype=float), params.mu, params.epsilon,
                             params.delta, True)


def theta_rate(params, z):
    """Angular speed of the inner binary along a comet polar state."""
    k = np.sqrt(params.delta / params.epsilon)
    rh, G = z[0], z[5]
    r = 1.0 + k * rh
    return (1.0 - params.delta * G / (params.alpha * params.epsilon)) / (r * r)


# ---------------------------------------------------------------------------
# asteroid systems


def _primary_list(primaries, t):
    xS, xJ, xP = primaries.positions(t)
    mS, mJ, mP = primaries.masses()
    return [(m, x) for m, x in ((mS, xS), (mJ, xJ), (mP, xP)) if m > 0.0]


def asteroid_potential(primaries, xA, t):
    """Potential ``sum m_i / |xA - x_i(t)|`` of the primaries at the asteroid."""
    val = 0.0
    for m, xi in _primary_list(primaries, t):
        val += m / _dist(xA - xi)
    return val


def increment_general(primaries, xi, psi, t):
    """Potential minus its monopole, computed without cancellation.

    Uses ``sum m_i x_i = 0`` so the dipole part vanishes identically, and
    rearranges each ``1/d_i - 1/xi - c_i/xi^2`` algebraically.
    """
    if np.isinf(xi):
        return 0.0  # the increment decays like xi^-3
    # scaled by u = 1/xi so that huge distances do not overflow
    u = 1.0 / xi
    e = np.array([np.cos(psi), np.sin(psi)])
    total = 0.0
    for m, xb in _primary_list(primaries, t):
        c = float(xb @ e)
        n = float(xb @ xb)
        D = np.sqrt(1.0 - 2 * c * u + n * u * u)  # |x - x_i| / xi
        if xi * D < COLLISION_FLOOR:
            raise CollisionError("asteroid hits a primary")
        gap = (2 * c - n * u) / (1.0 + D)
        total += m * (c * (2.0 + D) * gap - n) * u ** 3 / (D * (1.0 + D))
    return total


def h_asteroid(params, z, primaries):
    t = z[4] / primaries.nu
    return 0.5 * (z[2] ** 2 + z[3] ** 2) - asteroid_potential(primaries, z[0:2], t)


def f_asteroid(params, z, primaries):
    t = z[4] / primaries.nu
    xA = z[0:2]
    acc = np.zeros(2)
    for m, xb in _primary_list(primaries, t):
        dv = xA - xb
        acc -= m * dv / _dist(dv) ** 3
    return np.array([z[2], z[3], acc[0], acc[1], primaries.nu])


def h_asteroid_polar(params, z, primaries):
    xi, Xi, psi, Psi, s = z
    t = s / primaries.nu
    tot = 1.0 + primaries.delta
    return (0.5 * (Xi * Xi + Psi * Psi / (xi * xi)) - tot / xi
            - increment_general(primaries, xi, psi, t))


def h_mcgehee(params, z, primaries, action=0.0):
    """Extended Hamiltonian in McGehee variables (plus ``nu * action``)."""
    x, Xi, psi, Psi, s = z
    if x < 0.0:
        raise DomainError("McGehee Hamiltonian needs x >= 0")
    t = s / primaries.nu
    with np.errstate(divide="ignore", over="ignore"):
        xi = 2.0 / (x * x)  # infinite at x = 0, where the increment vanishes
    tot = 1.0 + primaries.delta
    return (primaries.nu * action + 0.5 * (Xi * Xi + Psi * Psi * x ** 4 / 4.0)
            - tot * x * x / 2.0 - increment_general(primaries, xi, psi, t))


def jacobi_constant(params, z, primaries):
    """Jacobi first integral of the planet-free asteroid problem."""
    if primaries.delta != 0.0:
        raise DomainError("the Jacobi constant exists only for delta = 0")
    x, Xi, psi, Psi, s = z
    t = s / primaries.nu
    xi = 2.0 / (x * x)
    xA = xi * np.array([np.cos(psi), np.sin(psi)])
    return (0.5 * (Xi * Xi + Psi * Psi * x ** 4 / 4.0) - Psi
            - asteroid_potential(primaries, xA, t))


def _mcgehee_forces(primaries, xi, psi, t):
    e = np.array([np.cos(psi), np.sin(psi)])
    eperp = np.array([-np.sin(psi), np.cos(psi)])
    dV_dxi = 0.0
    dV_dpsi = 0.0
    for m, xb in _primary_list(primaries, t):
        c = float(xb @ e)
        cp = float(xb @ eperp)
        d = np.sqrt(xi * xi - 2 * xi * c + float(xb @ xb))
        if d < COLLISION_FLOOR:
            raise CollisionError("asteroid hits a primary")
        dV_dxi -= m * (xi - c) / d ** 3
        dV_dpsi += m * xi * cp / d ** 3
    return dV_dxi, dV_dpsi


def f_mcgehee(params, z, primaries):
    x, Xi, psi, Psi, s = z
    if isinstance(primaries, CircularPrimaries):
        return kernels.mcgehee_rhs_circular(np.asarray(z, dtype=float), primaries.mu,
                                            primaries.nu, float(primaries.q))
    out = np.zeros(5)
    out[4] = primaries.nu
    if x == 0.0:
        return out
    xi = 2.0 / (x * x)
    dxi, dpsi = _mcgehee_forces(primaries, xi, psi, s / primaries.nu)
    out[0] = -0.25 * x ** 3 * Xi
    out[1] = 0.125 * Psi * Psi * x ** 6 + dxi
    out[2] = 0.25 * Psi * x ** 4
    out[3] = dpsi
    return out


def f_mcgehee_leading(params, z, primaries):
    """Leading-order field near infinity (all potential corrections dropped)."""
    x, Xi, psi, Psi, s = z
    tot = 1.0 + primaries.delta
    return np.array([-0.25 * x ** 3 * Xi, -0.25 * tot * x ** 4,
                     0.25 * Psi * x ** 4, 0.0, primaries.nu])


def f_qp(params, z, primaries):
    """Field in the ``(q, p, alpha, Psi, s)`` chart, by the chain rule."""
    from .transforms import qp_to_mcgehee
    d = primaries.delta
    m = qp_to_mcgehee(np.asarray(z, dtype=float), d)
    fm = f_mcgehee(params, m, primaries)
    sq = np.sqrt(1.0 + d)
    Xi, Psi = m[1], m[3]
    return np.array([0.5 * (sq * fm[0] - fm[1]), 0.5 * (sq * fm[0] + fm[1]),
                     (1 + d) * fm[2] + fm[3] * Xi + Psi * fm[1], fm[3], fm[4]])


def kepler_energy_mcgehee(z, total_mass=1.0):
    x, Xi, Psi = z[0], z[1], z[3]
    return 0.5 * (Xi * Xi + Psi * Psi * x ** 4 / 4.0) - total_mass * x * x / 2.0


# ---------------------------------------------------------------------------
# dispatch

_HAMILTONIANS = {
    "three_body": ((Chart.CartesianSixBody,), h_three_body),
    "jacobi": ((Chart.Jacobi,), h_jacobi),
    "jacobi_polar": ((Chart.JacobiPolar,), h_jacobi_polar),
    "rotating": ((Chart.RotatingPolar, Chart.RotatingReduced), None),
    "rescaled_tilde": ((Chart.RescaledTilde,), h_tilde),
    "rescaled_hat": ((Chart.RescaledHat,), h_hat),
    "comet": ((Chart.CometPolar,), h_comet),
    "comet_truncated": ((Chart.CometPolar,), h_comet_truncated),
    "asteroid": ((Chart.AsteroidCartesian,), None),
    "asteroid_polar": ((Chart.AsteroidPolar,), None),
    "asteroid_mcgehee": ((Chart.AsteroidMcGehee,), None),
    "jacobi_constant": ((Chart.AsteroidMcGehee,), None),
}

_TILDE_PARTS = {"tilde_three_body": 0, "tilde_rotator": 1, "tilde_remainder": 2,
                "tilde_f": 3, "tilde_g": 4}
_COMET_PARTS = {"comet_mu_term": "mu_term", "comet_f": "f", "comet_g": "g",
                "comet_remainder": "remainder", "comet_kinetic_delta": "kinetic_delta"}

HAMILTONIAN_TAGS = tuple(_HAMILTONIANS) + tuple(_TILDE_PARTS) + tuple(_COMET_PARTS)


def eval_hamiltonian(params, state, which, primaries=None, action=0.0):
    """Evaluate a Hamiltonian or one of its remainder sub-terms.

    Parameters
    ----------
    params : SystemParams
    state : ChartState
        Must be in the chart the Hamiltonian is written in.
    which : str
        One of :data:`HAMILTONIAN_TAGS`.
    primaries : object, optional
        Provider of the primaries' positions for the asteroid systems.
        Defaults to circular primaries when ``delta == 0``.
    action : float
        Value of the action conjugate to ``s`` in the extended McGehee
        Hamiltonian.

    Returns
    -------
    float
    """
    z = state.coords
    if which in _TILDE_PARTS:
        _check_chart(state, Chart.RescaledTilde)
        return float(h_tilde_parts(params, z)[_TILDE_PARTS[which]])
    if which in _COMET_PARTS:
        _check_chart(state, Chart.CometPolar)
        return float(comet_parts(params, z)[_COMET_PARTS[which]])
    if which not in _HAMILTONIANS:
        raise ModelError(f"unknown Hamiltonian {which!r}")
    charts, fn = _HAMILTONIANS[which]
    _check_chart(state, *charts)
    if which == "rotating":
        return float(h_rotating(params, z, state.chart))
    if which.startswith("asteroid") or which == "jacobi_constant":
        prim = default_primaries(params, primaries)
        if which == "asteroid":
            return float(h_asteroid(params, z, prim))
        if which == "asteroid_polar":
            return float(h_asteroid_polar(params, z, prim))
        if which == "asteroid_mcgehee":
            return float(h_mcgehee(params, z, prim, action))
        return float(jacobi_constant(params, z, prim))
    return float(fn(params, z))


_FIELDS = {
    "three_body": (Chart.CartesianSixBody, f_three_body, False),
    "rotating": (Chart.RotatingPolar, f_rotating, False),
    "rescaled_tilde": (Chart.RescaledTilde, f_tilde, False),
    "comet": (Chart.CometPolar, f_comet, False),
    "comet_truncated": (Chart.CometPolar, f_comet_truncated, False),
    "asteroid": (Chart.AsteroidCartesian, f_asteroid, True),
    "asteroid_mcgehee": (Chart.AsteroidMcGehee, f_mcgehee, True),
    "mcgehee_leading": (Chart.AsteroidMcGehee, f_mcgehee_leading, True),
    "qp": (Chart.QPChart, f_qp, True),
}

SYSTEM_TAGS = tuple(_FIELDS) + ("comet_rectified", "comet_rectified_truncated")


def system_chart(which):
    if which.startswith("comet_rectified"):
        return Chart.CometPolar
    return _FIELDS[which][0]


def make_rhs(params, which, primaries=None):
    """Return ``f(t, z)`` for the integrator."""
    if which in ("comet_rectified", "comet_rectified_truncated"):
        trunc = which.endswith("truncated")
        mu, eps, d = params.mu, params.epsilon, params.delta
        _require_alpha(params)

        def rect(phi, z):
            w = kernels.comet_rhs(z, mu, eps, d, trunc)
            return w / w[4]
        return rect
    if which not in _FIELDS:
        raise ModelError(f"unknown system {which!r}")
    _, fn, needs_prim = _FIELDS[which]
    if needs_prim:
        prim = default_primaries(params, primaries)
        return lambda t, z: fn(params, z, prim)
    return lambda t, z: fn(params, z)


def eval_vector_field(params, state, which, primaries=None):
    """Time derivative of ``state`` under the system ``which``.

    For ``comet_rectified*`` the derivative is with respect to the comet
    angle ``phi`` (its own component is then 1).
    """
    _check_chart(state, system_chart(which))
    return np.asarray(make_rhs(params, which, primaries)(0.0, state.coords.copy()))
