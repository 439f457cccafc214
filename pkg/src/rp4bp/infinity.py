"""Parabolic infinity: homoclinic parabolas, the Melnikov potential,
scattering-map models and numerical shooting of the invariant manifolds.

Multipole conventions
---------------------
The increment ``V(rho, theta) = sum m_i / |rho e^{i theta} - a_i| - 1/rho`` of
the circular binary (``a_S = -mu``, ``a_J = 1 - mu`` on the rotating axis) has
the Laplace expansion ``sum_k V_k(rho) e^{i k theta}`` with

    V_k(rho) = sum_n M_n g_{(n-k)/2} g_{(n+k)/2} rho^{-n-1},

where ``M_n = sum m_i a_i^n`` and ``g_j = binom(2j, j) / 4^j``; the sum runs
over ``n >= max(2, |k|)`` with ``n = k`` mod 2.  The series converges for
``|rho| > max |a_i|`` and is used for complex ``rho`` on shifted contours.

Exponential smallness
---------------------
Along the parabola the ``k``-th Fourier mode of the Melnikov potential is of
size ``exp(-k Psi^3 / 3)``.  It is computed on the line ``Im tau = -c`` where
the integrand is a narrow Gaussian, and reported scaled by ``exp(k Psi^3/3)``
together with the logarithm of the scale.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .core_model import (
    Chart,
    ChartState,
    CircularPrimaries,
    DomainError,
    ModelError,
    TWO_PI,
    increment_general,
    jacobi_constant,
    make_rhs,
    parse_branch,
)
from ._kernels_py import increment_potential
from .integrate import IntegratorConfig, Trajectory, propagate, write_csv
from .transforms import mcgehee_to_qp, qp_to_mcgehee

PSI_MIN = 5.0
TAIL_TOL = 1e-13
_STEP_FRACTION = 0.05
_CHUNK = 40.0


class MelnikovError(ModelError):
    """Quadrature failure or a degenerate critical point."""


class EscapeError(ModelError):
    """A shot trajectory left the parabolic regime."""


# ---------------------------------------------------------------------------
# multipole series


def _g(j):
    return math.comb(2 * j, j) / 4.0 ** j


def multipole_moments(mu, nmax):
    """Moments ``M_n = (1-mu)(-mu)^n + mu (1-mu)^n`` for ``n = 0..nmax``."""
    n = np.arange(nmax + 1)
    return (1.0 - mu) * (-mu) ** n + mu * (1.0 - mu) ** n


def _series_order(mu, rho_min, tol=1e-18):
    a = max(mu, 1.0 - mu)
    ratio = a / rho_min
    if ratio >= 0.75:
        raise DomainError(f"multipole series too slow at |rho| = {rho_min:.3g}")
    if ratio == 0.0:
        return 2
    return int(min(600, max(4, math.ceil(math.log(tol) / math.log(ratio)) + 2)))


def harmonic_coefficients(mu, k, nmax):
    """Coefficients ``c_n`` of ``V_k(rho) = sum_n c_n rho^{-n-1}``."""
    k = abs(int(k))
    mom = multipole_moments(mu, nmax)
    c = np.zeros(nmax + 1)
    for n in range(max(2, k), nmax + 1):
        if (n - k) % 2 == 0:
            c[n] = mom[n] * _g((n - k) // 2) * _g((n + k) // 2)
    return c


def potential_harmonic(rho, mu, k, deriv=0, nmax=None):
    """Mode ``V_k`` of the binary increment, or its ``rho``-derivatives.

    Parameters
    ----------
    rho : array_like, real or complex
        Radius; ``|rho|`` must exceed ``max(mu, 1-mu)`` by a safe margin.
    mu : float
    k : int
    deriv : {0, 1, 2}
    nmax : int, optional
        Truncation order, chosen from ``min |rho|`` by default.
    """
    rho = np.asarray(rho)
    if nmax is None:
        nmax = _series_order(mu, float(np.min(np.abs(rho))))
    c = harmonic_coefficients(mu, k, nmax)
    n = np.arange(nmax + 1)
    # d^j/drho^j rho^{-n-1} = (-1)^j (n+1)...(n+j) rho^{-n-1-j}
    if deriv == 1:
        c = -(n + 1) * c
    elif deriv == 2:
        c = (n + 1) * (n + 2) * c
    elif deriv != 0:
        raise ValueError("deriv must be 0, 1 or 2")
    w = 1.0 / rho
    acc = np.zeros_like(w)
    for cn in c[::-1]:
        acc = acc * w + cn
    return acc * w ** (1 + deriv)


def averaged_increment(rho, mu, deriv=0):
    """Angle average of the binary increment (the ``k = 0`` mode)."""
    return potential_harmonic(rho, mu, 0, deriv)


def increment_bound(rho, mu):
    """Bound ``|V(rho, theta)| <= alpha / (rho^2 (rho - a_max))``."""
    a = max(mu, 1.0 - mu)
    return mu * (1.0 - mu) / (rho * rho * (rho - a))


# ---------------------------------------------------------------------------
# parabolas


def time_of_tau(Psi0, tau, mass=1.0):
    """Time ``(Psi0^3 / (2 M^2)) (tau + tau^3 / 3)`` along the parabola."""
    return Psi0 ** 3 / (2.0 * mass * mass) * (tau + tau ** 3 / 3.0)


def tau_of_t(Psi0, t, mass=1.0):
    """Invert :func:`time_of_tau`.

    The cubic ``tau^3 + 3 tau - 3 b = 0`` has the single real root
    ``w - 1/w`` with ``w = cbrt(3b/2 + sqrt(9b^2/4 + 1))``; the oddness of
    the root is used for ``b < 0`` and a Newton step polishes the result.
    """
    if not Psi0 > 0:
        raise DomainError("Psi0 must be positive")
    t = np.asarray(t, dtype=float)
    b = 2.0 * mass * mass * t / Psi0 ** 3
    h = 1.5 * np.abs(b)
    w = np.cbrt(h + np.sqrt(h * h + 1.0))
    tau = np.sign(b) * (w - 1.0 / w)
    # Newton on tau + tau^3/3 - b
    tau = tau - (tau + tau ** 3 / 3.0 - b) / (1.0 + tau * tau)
    return tau if tau.ndim else float(tau)


@dataclass(frozen=True)
class ParabolaPoint:
    """Point of the unperturbed homoclinic parabola with its labels."""

    tau: float
    t: float
    psi0: float
    Psi0: float
    s0: float
    state: ChartState

    @property
    def alpha_h(self):
        return 2.0 * math.atan(self.tau)


def _params_nu_mass(params):
    if params is None:
        return 1e-3, 1.0
    return 1.0 / params.q, 1.0 + params.delta


def parabola(psi0, Psi0, s0, tau=None, t=None, params=None):
    """Closed-form homoclinic parabola of the Kepler problem at infinity.

    Parameters
    ----------
    psi0, Psi0, s0 : float
        Perihelion direction, angular momentum and phase at perihelion.
    tau, t : float
        Curve parameter or time; exactly one must be given.
    params : SystemParams, optional
        Supplies the phase rate ``1/q`` and the total mass ``1 + delta``.

    Returns
    -------
    ParabolaPoint
    """
    if not Psi0 > 0:
        raise DomainError("Psi0 must be positive")
    if (tau is None) == (t is None):
        raise ValueError("give exactly one of tau and t")
    nu, mass = _params_nu_mass(params)
    if tau is None:
        tau = tau_of_t(Psi0, t, mass)
    tau = float(tau)
    tt = time_of_tau(Psi0, tau, mass)
    w = 1.0 + tau * tau
    x = 2.0 * math.sqrt(mass) / (Psi0 * math.sqrt(w))
    Xi = 2.0 * mass * tau / (Psi0 * w)
    psi = psi0 + 2.0 * math.atan(tau)
    state = ChartState(Chart.AsteroidMcGehee, [x, Xi, psi, Psi0, s0 + nu * tt])
    return ParabolaPoint(tau, tt, psi0, Psi0, s0, state)


def parabola_derivative(point, params=None):
    """Time derivative of the closed form, from its ``tau``-derivative."""
    nu, mass = _params_nu_mass(params)
    tau, Psi0 = point.tau, point.Psi0
    w = 1.0 + tau * tau
    dt = Psi0 ** 3 * w / (2.0 * mass * mass)
    dx = -2.0 * math.sqrt(mass) * tau / (Psi0 * w ** 1.5)
    dXi = 2.0 * mass * (1.0 - tau * tau) / (Psi0 * w * w)
    dpsi = 2.0 / w
    return np.array([dx / dt, dXi / dt, dpsi / dt, 0.0, nu])


def parabola_trajectory(psi0, Psi0, s0, taus, params=None):
    """States of the closed form at the parameters ``taus``, shape (n, 5)."""
    return np.array([parabola(psi0, Psi0, s0, tau=u, params=params).state.coords
                     for u in np.atleast_1d(taus)])


# ---------------------------------------------------------------------------
# Melnikov potential


@dataclass(frozen=True)
class MelnikovEvaluation:
    """Value of the Melnikov potential with its error budget.

    ``phase`` is the reduced angle ``psi0 - q s0 + sigma`` on which the value
    depends.  ``quadrature_error`` collects the quadrature and series
    truncation estimates; ``tail_bound`` bounds the neglected ``|tau| > T``.
    """

    psi0: float
    Psi0: float
    s0: float
    sigma: float
    phase: float
    value: float
    quadrature_error: float
    tail_bound: float


@dataclass(frozen=True)
class MelnikovHarmonics:
    """Fourier modes of the Melnikov potential in the reduced angle.

    ``L(phase) = mean + 2 sum_k Re(B_k e^{i k phase})`` with
    ``B_k = exp(-k * scale_exponent) * scaled[k-1]``.
    """

    mu: float
    Psi0: float
    mass: float
    mean: float
    mean_error: float
    tail_bound: float
    cutoff: float
    scaled: np.ndarray
    scaled_error: np.ndarray
    scale_exponent: float
    contour_shift: float

    def mode(self, k):
        """Unscaled ``B_k`` (underflows to zero for large ``Psi0``)."""
        if k == 0:
            return complex(self.mean)
        return self.scaled[k - 1] * math.exp(-k * self.scale_exponent)

    @property
    def leading(self):
        """Index of the first non-vanishing harmonic (0 if all vanish)."""
        mags = np.abs(self.scaled)
        top = mags.max() if mags.size else 0.0
        for k, m in enumerate(mags, start=1):
            if m > 1e-12 * top and m > 0.0:
                return k
        return 0

    def value(self, phase):
        phase = np.asarray(phase, dtype=float)
        out = np.full(phase.shape, self.mean)
        for k in range(1, self.scaled.size + 1):
            bk = self.mode(k)
            out = out + 2.0 * (bk.real * np.cos(k * phase) - bk.imag * np.sin(k * phase))
        return out

    def scaled_derivative(self, phase, order=1):
        """``d^order L / d phase^order`` times ``exp(k0 * scale_exponent)``."""
        k0 = self.leading
        phase = np.asarray(phase, dtype=float)
        out = np.zeros(phase.shape)
        if k0 == 0:
            return out
        for k in range(k0, self.scaled.size + 1):
            w = math.exp(-(k - k0) * self.scale_exponent)
            if w == 0.0:
                break
            b = self.scaled[k - 1] * w
            z = (1j * k) ** order * b * np.exp(1j * k * phase)
            out = out + 2.0 * z.real
        return out


def _check_psi(Psi0, psi_min):
    if not Psi0 >= psi_min:
        raise DomainError(
            f"Psi0 = {Psi0} below the validity threshold {psi_min} of the tail bound")


def _cutoff(mu, Psi0, mass, tol):
    """Half-width ``T`` of the ``tau`` window with its tail bound."""
    alpha = mu * (1.0 - mu)
    a = max(mu, 1.0 - mu)
    if alpha == 0.0:
        return 1.0, 0.0
    T = (16.0 * alpha * mass / (3.0 * Psi0 ** 3 * tol)) ** (1.0 / 3.0)
    T = max(T, 10.0)
    rho_T = Psi0 ** 2 * (1.0 + T * T) / (2.0 * mass)
    kappa = 1.0 / (1.0 - a / rho_T)
    bound = 16.0 * alpha * kappa * mass / (3.0 * Psi0 ** 3 * T ** 3)
    return T, bound


def _mean_integrand(mu, Psi0, mass, deriv=0):
    """Integrand in ``tau`` of the mean mode or of its ``Psi0``-derivatives."""

    def f(tau):
        w = 1.0 + tau * tau
        rho = Psi0 * Psi0 * w / (2.0 * mass)
        J = Psi0 ** 3 * w / (2.0 * mass * mass)
        v0 = averaged_increment(rho, mu)
        if deriv == 0:
            return v0 * J
        drho = Psi0 * w / mass
        dJ = 1.5 * Psi0 * Psi0 * w / (mass * mass)
        v1 = averaged_increment(rho, mu, 1)
        if deriv == 1:
            return v1 * drho * J + v0 * dJ
        d2rho = w / mass
        d2J = 3.0 * Psi0 * w / (mass * mass)
        v2 = averaged_increment(rho, mu, 2)
        return v2 * drho * drho * J + v1 * d2rho * J + 2.0 * v1 * drho * dJ + v0 * d2J

    return f


def _quad_even(f, T):
    """``2 * int_0^T f`` with breakpoints on a geometric ladder."""
    edges = [0.0]
    e = 1.0
    while e < T:
        edges.append(e)
        e *= 4.0
    edges.append(T)
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, ev = quad(f, a, b, epsabs=1e-17, epsrel=1e-13, limit=200)
        total += v
        err += ev
    return 2.0 * total, 2.0 * err


def mean_mode(mu, Psi0, mass=1.0, deriv=0, tol=TAIL_TOL):
    """Mean ``B_0`` of the Melnikov potential (or a ``Psi0``-derivative).

    Returns ``(value, quadrature_error, tail_bound)``.  Derivative tails are
    bounded by the same formula scaled by ``(deriv + 3) / Psi0`` per order.
    """
    if mu == 0.0:
        return 0.0, 0.0, 0.0
    T, bound = _cutoff(mu, Psi0, mass, tol)
    val, err = _quad_even(_mean_integrand(mu, Psi0, mass, deriv), T)
    for j in range(deriv):
        bound *= (j + 3.0) / Psi0 * 2.0
    return val, err, bound


def _contour_shift(mu, Psi0, mass):
    a = max(mu, 1.0 - mu)
    c_scale = 1.0 - Psi0 ** -1.5 * mass
    c_safe = math.sqrt(max(0.0, 1.0 - 4.0 * a * mass / Psi0 ** 2))
    return max(0.0, min(c_scale, c_safe))


def scaled_mode(mu, Psi0, k, mass=1.0, shift=None):
    """Scaled mode ``exp(k Psi0^3 / (3 M^2)) B_k`` on the shifted line.

    Returns ``(value, error_estimate, shift)``; the value is complex and its
    imaginary part vanishes by the reversibility of the parabola.
    """
    if k < 1:
        raise ValueError("k must be positive")
    A = Psi0 ** 3 / (2.0 * mass * mass)
    c = _contour_shift(mu, Psi0, mass) if shift is None else float(shift)
    expo = k * A * (2.0 / 3.0)
    rho_min = Psi0 ** 2 * (1.0 - c * c) / (2.0 * mass)
    nmax = _series_order(mu, rho_min)
    coef = harmonic_coefficients(mu, k, nmax)
    if not np.any(coef):
        return 0j, 0.0, c
    f_c = 2.0 / 3.0 - c + c ** 3 / 3.0
    if c > 0:
        U = math.sqrt((60.0 + k * A * f_c) / (k * A * c))
    else:
        U = 60.0
    U = min(U, 60.0)

    def integrand(u):
        tau = u - 1j * c
        w = 1.0 + tau * tau
        rho = Psi0 * Psi0 * w / (2.0 * mass)
        wr = 1.0 / rho
        acc = 0j
        for cn in coef[::-1]:
            acc = acc * wr + cn
        vk = acc * wr
        rot = ((1.0 + 1j * tau) / (1.0 - 1j * tau)) ** k
        tt = A * (tau + tau ** 3 / 3.0)
        return vk * rot * np.exp(-1j * k * tt + expo) * A * w

    pts = [0.0] if c > 0 else None
    lim = 400 if c > 0 else 4000
    re, e1 = quad(lambda u: integrand(u).real, -U, U, points=pts, limit=lim,
                  epsabs=1e-16, epsrel=1e-12)
    im, e2 = quad(lambda u: integrand(u).imag, -U, U, points=pts, limit=lim,
                  epsabs=1e-16, epsrel=1e-12)
    return complex(re, im), e1 + e2, c


def melnikov_harmonics(mu, Psi0, harmonics=8, mass=1.0, psi_min=PSI_MIN, tol=TAIL_TOL):
    """Mean and scaled Fourier modes of the Melnikov potential."""
    _check_psi(Psi0, psi_min)
    mean, mean_err, tail = mean_mode(mu, Psi0, mass, tol=tol)
    scaled = np.zeros(harmonics, dtype=complex)
    errs = np.zeros(harmonics)
    c = _contour_shift(mu, Psi0, mass)
    if mu > 0.0:
        for k in range(1, harmonics + 1):
            scaled[k - 1], errs[k - 1], c = scaled_mode(mu, Psi0, k, mass)
    T, _ = _cutoff(mu, Psi0, mass, tol)
    return MelnikovHarmonics(mu, Psi0, mass, mean, mean_err, tail, T, scaled, errs,
                             Psi0 ** 3 / (3.0 * mass * mass), c)


def reduced_phase(params, psi0, s0, sigma):
    """Angle ``psi0 - q s0 + sigma`` on which the potential depends."""
    return psi0 - params.q * s0 + sigma


def _melnikov_params(params):
    if params.delta != 0.0:
        raise DomainError("the Melnikov potential is defined for delta = 0")


def melnikov_L0(params, psi0, Psi0, s0, sigma, harmonics=8, psi_min=PSI_MIN,
                tol=TAIL_TOL, _cache=None):
    """Melnikov potential of the binary along the shifted parabola.

    Parameters
    ----------
    params : SystemParams
        ``delta`` must vanish.
    psi0, Psi0, s0 : float
        Labels of the unperturbed parabola.
    sigma : float
        Time shift along the parabola.
    harmonics : int
        Number of Fourier modes added to the mean.

    Returns
    -------
    MelnikovEvaluation
    """
    _melnikov_params(params)
    h = _cache or melnikov_harmonics(params.mu, Psi0, harmonics, psi_min=psi_min, tol=tol)
    phase = reduced_phase(params, psi0, s0, sigma)
    val = float(h.value(phase))
    err = h.mean_error + 2.0 * float(np.sum(h.scaled_error * np.exp(
        -np.arange(1, h.scaled.size + 1) * h.scale_exponent)))
    return MelnikovEvaluation(psi0, Psi0, s0, sigma, float(np.mod(phase, TWO_PI)), val,
                              err, h.tail_bound)


def melnikov_direct(params, psi0, Psi0, s0, sigma, t_max=1e5, panel=2.0, nodes=16):
    """Potential along the parabola by direct quadrature in time.

    Independent of the harmonic route: the full increment of the binary is
    evaluated at the true angles of the labels ``(psi0, s0, sigma)`` with
    composite Gauss-Legendre rules of width ``panel`` (resolving the binary
    period) on ``|t| <= t_max``.  Beyond that only the averaged increment is
    kept; the dropped oscillating part is of order ``mu (1-mu) rho^-3``.
    """
    _melnikov_params(params)
    mu, mass = params.mu, 1.0
    if mu == 0.0:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    n = int(math.ceil(2.0 * t_max / panel))
    edges = np.linspace(-t_max, t_max, n + 1)
    a, b = edges[:-1, None], edges[1:, None]
    t = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    wt = (0.5 * (b - a) * w).ravel()
    tau = tau_of_t(Psi0, t, mass)
    rho = Psi0 * Psi0 * (1.0 + tau * tau) / (2.0 * mass)
    # binary angle q s0 - sigma + t at parabola time t
    ang = psi0 + 2.0 * np.arctan(tau) - (params.q * s0 - sigma + t)
    core = float(np.sum(increment_potential(rho, ang, mu) * wt))

    def tail(u):
        r = Psi0 * Psi0 * (1.0 + u * u) / (2.0 * mass)
        return float(averaged_increment(r, mu)) * Psi0 ** 3 * (1.0 + u * u) / (2.0 * mass ** 2)
    tau_c = float(tau_of_t(Psi0, t_max, mass))
    return core + 2.0 * quad(tail, tau_c, np.inf, epsabs=1e-17, limit=200)[0]


@dataclass(frozen=True)
class CriticalPoints:
    """Critical points of ``sigma -> L0`` near the two symmetric phases.

    ``second_derivatives`` are scaled by ``exp(leading * scale_exponent)``;
    ``log_scale`` is the natural log of the factor that undoes the scaling.
    """

    sigma_minus: float
    sigma_plus: float
    second_derivatives: tuple
    log_scale: float
    leading_harmonic: int
    zeros: np.ndarray
    degenerate: bool


def _circ(a):
    return (a + math.pi) % TWO_PI - math.pi


def melnikov_critical_points(params, psi0, Psi0, s0, harmonics=8, n_grid=720,
                             psi_min=PSI_MIN, threshold=1e-8, _cache=None):
    """Zeros of the scaled derivative of the potential in ``sigma``.

    The derivative is sampled on ``n_grid`` points, sign changes are
    polished with Brent's method and the zeros closest to the reduced phases
    ``0`` and ``pi`` are returned.

    Raises
    ------
    MelnikovError
        If all harmonics vanish (no critical structure at all).
    """
    _melnikov_params(params)
    h = _cache or melnikov_harmonics(params.mu, Psi0, harmonics, psi_min=psi_min)
    k0 = h.leading
    if k0 == 0:
        raise MelnikovError("the potential is constant in sigma")
    base = reduced_phase(params, psi0, s0, 0.0)

    def d1(sig):
        return float(h.scaled_derivative(base + sig, 1))

    # half-step offset keeps zeros at the symmetric phases inside an interval
    grid = np.linspace(0.0, TWO_PI, n_grid + 1) - math.pi / n_grid
    vals = np.array([d1(g) for g in grid])
    zeros = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            zeros.append(a)
        elif fa * fb < 0.0:
            zeros.append(brentq(d1, a, b, xtol=1e-15, rtol=1e-15))
    zeros = np.array(sorted(z % TWO_PI for z in zeros))
    if zeros.size == 0:
        raise MelnikovError("no critical points found")
    # critical phases closest to reduced angle 0 and pi
    dist0 = np.abs([_circ(base + z) for z in zeros])
    distpi = np.abs([_circ(base + z - math.pi) for z in zeros])
    sm = float(zeros[np.argmin(dist0)])
    sp = float(zeros[np.argmin(distpi)])
    d2 = tuple(float(h.scaled_derivative(base + s, 2)) for s in (sm, sp))
    scale = float(np.max(np.abs(vals))) or 1.0
    degenerate = min(abs(d2[0]), abs(d2[1])) < threshold * scale
    return CriticalPoints(sm, sp, d2, -k0 * h.scale_exponent, k0, zeros, degenerate)


def melnikov_sweep(params, psi0, Psi0, s0, sigmas, harmonics=8, psi_min=PSI_MIN):
    """Potential and scaled derivative on a grid of ``sigma`` values.

    Returns a dict of arrays: ``sigma``, ``value``, ``scaled_derivative``,
    ``quadrature_error`` and ``tail_bound``, plus the scalar ``log_scale``.
    """
    _melnikov_params(params)
    h = melnikov_harmonics(params.mu, Psi0, harmonics, psi_min=psi_min)
    sig = np.asarray(sigmas, dtype=float)
    phase = reduced_phase(params, psi0, s0, sig)
    ev = melnikov_L0(params, psi0, Psi0, s0, 0.0, _cache=h)
    return dict(sigma=sig, value=h.value(phase), scaled_derivative=h.scaled_derivative(phase),
                quadrature_error=np.full(sig.shape, ev.quadrature_error),
                tail_bound=np.full(sig.shape, ev.tail_bound),
                log_scale=-h.leading * h.scale_exponent)


# ---------------------------------------------------------------------------
# scattering map


@dataclass(frozen=True)
class ScatteringMapModel:
    """First-order scattering map ``(psi, Psi) -> (psi + s f(Psi), Psi)``.

    ``f_numeric`` is the ``Psi``-derivative of the potential at the critical
    phase of the channel, ``f_asymptotic`` the leading closed form and
    ``twist`` the numerical derivative of ``f_numeric``.  ``orientation`` is
    the sign ``s`` used when the map is applied; +1 reproduces the closed
    form, -1 matches the advance of the asymptotic direction measured by
    direct integration (see :func:`measure_asymptotic_shift`).
    """

    branch: int
    mu: float
    delta: float
    Psi_grid: np.ndarray
    f_numeric: np.ndarray
    f_asymptotic: np.ndarray
    twist: np.ndarray
    f_error: np.ndarray
    orientation: int = 1
    _spline: object = field(default=None, repr=False, compare=False)

    def f(self, Psi):
        """Interpolated shift function; raises outside the grid."""
        Psi = np.asarray(Psi, dtype=float)
        lo, hi = self.Psi_grid[0], self.Psi_grid[-1]
        if np.any(Psi < lo - 1e-12) or np.any(Psi > hi + 1e-12):
            raise DomainError(f"Psi outside the model grid [{lo}, {hi}]")
        if self.Psi_grid.size == 1:
            return np.full(Psi.shape, self.f_numeric[0])
        return self._spline(Psi)

    def shift(self, Psi):
        return self.orientation * self.f(Psi)

    def with_orientation(self, orientation):
        if orientation not in (1, -1):
            raise DomainError("orientation must be +1 or -1")
        return ScatteringMapModel(self.branch, self.mu, self.delta, self.Psi_grid,
                                  self.f_numeric, self.f_asymptotic, self.twist, self.f_error,
                                  orientation, self._spline)

    def to_csv(self, path, metadata=None):
        meta = dict(branch=self.branch, mu=self.mu, delta=self.delta,
                    orientation=self.orientation)
        meta.update(metadata or {})
        write_csv(path, ["Psi", "f_numeric", "f_asymptotic", "twist", "f_error"],
                  np.column_stack([self.Psi_grid, self.f_numeric, self.f_asymptotic,
                                   self.twist, self.f_error]), meta)


def f_asymptotic(mu, Psi):
    """Leading closed form ``-3 pi mu (1-mu) / (2 Psi^4)``."""
    return -3.0 * math.pi * mu * (1.0 - mu) / (2.0 * np.asarray(Psi, dtype=float) ** 4)


def scattering_shift(mu, Psi, branch=1, mass=1.0, harmonics=8, psi_min=PSI_MIN):
    """``Psi``-derivative of the potential at the channel's critical phase.

    Returns ``(f, error)``.  The mean mode is differentiated under the
    integral; the harmonic modes (only relevant below ``Psi ~ 5``) are
    differentiated by central differences of their unscaled values.
    """
    _check_psi(Psi, psi_min)
    if mu == 0.0:
        return 0.0, 0.0
    d, err, tail = mean_mode(mu, Psi, mass, deriv=1)
    sgn = 1.0 if branch == -1 else -1.0  # channel phase 0 (minus) or pi (plus)
    h = 1e-4 * Psi
    for k in range(1, harmonics + 1):
        expo = k * Psi ** 3 / (3.0 * mass * mass)
        if expo > 700.0 or math.exp(-expo) < 1e-20:
            break
        vals = []
        for P in (Psi + h, Psi - h):
            bk, _, _ = scaled_mode(mu, P, k, mass)
            vals.append((bk * math.exp(-k * P ** 3 / (3.0 * mass * mass))).real)
        d += 2.0 * (sgn ** k) * (vals[0] - vals[1]) / (2.0 * h)
    return d, err + tail


def scattering_model(params, Psi_grid, branch=1, harmonics=8, psi_min=PSI_MIN):
    """Tabulate the first-order scattering shift on ``Psi_grid``.

    For ``delta > 0`` the parabola is taken with total mass ``1 + delta``;
    the planet's own potential is outside this first-order model.
    """
    branch = parse_branch(branch)
    grid = np.asarray(sorted(np.atleast_1d(Psi_grid)), dtype=float)
    if grid.size == 0:
        raise DomainError("empty Psi grid")
    if np.any(grid < psi_min):
        raise DomainError(f"grid reaches below Psi_min = {psi_min}")
    mass = 1.0 + params.delta
    mu = params.mu
    f = np.zeros(grid.size)
    err = np.zeros(grid.size)
    twist = np.zeros(grid.size)
    for i, P in enumerate(grid):
        f[i], err[i] = scattering_shift(mu, P, branch, mass, harmonics, psi_min)
        if mu == 0.0:
            continue
        h = 1e-3 * P
        fp, _ = scattering_shift(mu, P + h, branch, mass, harmonics, 0.0)
        fm, _ = scattering_shift(mu, P - h, branch, mass, harmonics, 0.0)
        twist[i] = (fp - fm) / (2.0 * h)
    spline = CubicSpline(grid, f) if grid.size > 1 else None
    return ScatteringMapModel(branch, mu, params.delta, grid, f, f_asymptotic(mu, grid),
                              twist, err, 1, spline)


# ---------------------------------------------------------------------------
# flyby integration with an averaged far field


def averaged_mcgehee_rhs(mu, nu, mass=1.0):
    """McGehee field of the angle-averaged binary (valid far from it)."""

    def f(t, z):
        x, Xi, psi, Psi, s = z
        x2 = x * x
        x4 = x2 * x2
        rho = 2.0 / x2
        dv = float(averaged_increment(rho, mu, 1)) if mu else 0.0
        return np.array([-0.25 * x2 * x * Xi, 0.125 * Psi * Psi * x4 * x2 - 0.25 * mass * x4 + dv,
                         0.25 * Psi * x4, 0.0, nu])

    return f


class _Glued:
    """Dense output glued from consecutive segments."""

    def __init__(self, pieces):
        self.pieces = sorted(pieces, key=lambda p: p[0])

    def _one(self, t):
        for lo, hi, sol in self.pieces:
            if lo <= t <= hi:
                return sol(t)
        return (self.pieces[0] if t < self.pieces[0][0] else self.pieces[-1])[2](t)

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self._one(float(t))
        return np.column_stack([self._one(float(s)) for s in t])


def flyby(params, z0, t_span, config=None, primaries=None, far_field=300.0, events=()):
    """Integrate the asteroid in McGehee variables, averaging the far field.

    Beyond the radius ``far_field`` the binary is replaced by its angle
    average (circular primaries only); inside, the exact field is used.
    ``far_field = inf`` disables the averaging.  Extra terminal ``events``
    (callables of ``(t, z)`` with solve_ivp attributes) stop the run.

    Returns
    -------
    (Trajectory, event) where ``event`` is the index of the extra event that
    stopped the run, or None.
    """
    config = config or IntegratorConfig()
    if primaries is None:
        if params.delta != 0.0:
            raise DomainError("delta > 0 needs explicit primaries")
        primaries = CircularPrimaries(params.mu, params.q)
    averaged_ok = isinstance(primaries, CircularPrimaries) and np.isfinite(far_field)
    x_ff = math.sqrt(2.0 / far_field) if averaged_ok else 0.0
    f_exact = make_rhs(params, "asteroid_mcgehee", primaries)
    f_avg = averaged_mcgehee_rhs(primaries.mu, primaries.nu, 1.0 + primaries.delta)
    t0, t1 = map(float, t_span)
    sign = 1.0 if t1 >= t0 else -1.0
    z = np.asarray(z0, dtype=float)
    pieces, ts, ys = [], [], []
    t = t0
    stop = None
    far = averaged_ok and z[0] < x_ff
    switches = 0
    while sign * (t1 - t) > 0:

        def switch(tt, w):
            return w[0] - x_ff
        switch.terminal = True
        switch.direction = 1.0 if far else -1.0
        evs = [switch] if averaged_ok else []
        evs += list(events)
        # cap the step by the local Kepler time so no perihelion is skipped
        cap = _STEP_FRACTION * (2.0 / (z[0] * z[0])) ** 1.5
        if config.max_step > 0:
            cap = min(cap, config.max_step)
        t_next = t + sign * min(abs(t1 - t), _CHUNK * cap)
        sol = propagate(f_avg if far else f_exact, z, (t, t_next),
                        replace(config, max_step=cap), events=evs or None)
        pieces.append((min(sol.t[0], sol.t[-1]), max(sol.t[0], sol.t[-1]), sol.sol))
        ts.append(sol.t)
        ys.append(sol.y.T)
        t = sol.t[-1]
        z = sol.y[:, -1]
        if sol.status == 0:
            continue
        fired = [i for i, te in enumerate(sol.t_events) if te.size]
        extra = [i - (1 if averaged_ok else 0) for i in fired if not (averaged_ok and i == 0)]
        if extra:
            stop = extra[0]
            break
        # the regime flips on the switching event, not on the sign of x - x_ff
        far = not far
        switches += 1
        if switches > 10000:
            raise EscapeError("too many far-field switches")
    t_all = np.concatenate(ts)
    y_all = np.concatenate(ys)
    if sign < 0:
        t_all, y_all = t_all[::-1], y_all[::-1]
    keep = np.concatenate([[True], np.diff(t_all) > 0])
    return Trajectory(Chart.AsteroidMcGehee, t_all[keep], y_all[keep], _Glued(pieces)), stop


# ---------------------------------------------------------------------------
# manifold shooting


def asymptotic_state(params, psi0, Psi0, side, fiber_param, x_init, primaries=None):
    """Point of the stable or unstable manifold at ``x = x_init``.

    The position along the manifold is taken from the parabola with the
    same labels; the contracting coordinate of the ``(q, p)`` chart is then
    fixed by the Jacobi integral of the asteroid (for ``delta = 0``) or by
    the Kepler energy (``delta > 0``), which makes the point exact for
    ``mu = delta = 0`` and accurate to ``O(mu x^5)`` otherwise.

    Returns
    -------
    (t_init, ndarray of shape (5,))
    """
    if side not in ("stable", "unstable"):
        raise DomainError("side must be 'stable' or 'unstable'")
    nu, mass = _params_nu_mass(params)
    w = 4.0 * mass / (Psi0 * Psi0 * x_init * x_init)
    if w <= 1.0:
        raise DomainError("x_init must be below the perihelion value 2/Psi0")
    tau = math.sqrt(w - 1.0) * (-1.0 if side == "unstable" else 1.0)
    pt = parabola(psi0, Psi0, fiber_param, tau=tau, params=params)
    x, _, psi, Psi, s = pt.state.coords
    if params.delta == 0.0:
        prim = primaries or CircularPrimaries(params.mu, params.q)
        dV = increment_general(prim, 2.0 / (x * x), psi, s / prim.nu) if params.mu else 0.0
    else:
        dV = 0.0
    rad = mass * x * x - Psi * Psi * x ** 4 / 4.0 + 2.0 * dV
    if rad < 0:
        raise EscapeError("no real radial momentum at the initial point")
    Xi = math.sqrt(rad) * (-1.0 if side == "unstable" else 1.0)
    # the (q, p) chart makes the asymptotic coordinate explicit
    qp = mcgehee_to_qp(np.array([x, Xi, psi, Psi, s]), params.delta)
    return pt.t, qp_to_mcgehee(qp, params.delta)


@dataclass
class ShotTrajectory:
    """Result of :func:`manifold_shoot`.

    ``trajectory`` runs from the initial point toward the inner region.
    ``asymptotic`` holds the check toward infinity: the final ``x``, ``Xi``
    and the drift of ``Psi`` along the integration to ``x < x_check``.
    """

    side: str
    psi0: float
    Psi0: float
    fiber_param: float
    trajectory: Trajectory
    asymptotic: dict

    def __call__(self, t):
        return self.trajectory(t)


def manifold_shoot(params, psi0, Psi0, side, fiber_param=0.0, x_init=1e-2, tau_end=3.0,
                   config=None, primaries=None, far_field=300.0, x_check=1e-4,
                   check=True):
    """Shoot the stable or unstable manifold of the point at infinity.

    The labels are those of the unperturbed parabola: ``psi0`` is the
    perihelion direction, ``fiber_param`` the phase ``s`` at perihelion.  The
    unstable side starts at ``tau < 0`` and runs forward to ``tau_end``; the
    stable side starts at ``tau > 0`` and runs backward to ``-tau_end``.

    With ``check`` the initial point is also integrated toward infinity
    until ``x < x_check`` and the drift of ``Psi`` is recorded.

    Raises
    ------
    EscapeError
        If the trajectory leaves the parabolic regime (``x`` grows past the
        perihelion scale by a factor 2 or the run fails).
    """
    config = config or IntegratorConfig()
    nu, mass = _params_nu_mass(params)
    t_init, z0 = asymptotic_state(params, psi0, Psi0, side, fiber_param, x_init, primaries)
    t_end = time_of_tau(Psi0, tau_end if side == "unstable" else -tau_end, mass)
    tr, _ = flyby(params, z0, (t_init, t_end), config, primaries, far_field)
    if np.any(tr.states[:, 0] > 4.0 * math.sqrt(mass) / Psi0):
        raise EscapeError("shot trajectory left the parabolic regime")
    asym = {}
    if check:
        asym = _asymptotic_check(params, z0, t_init, side, config, primaries, far_field,
                                 x_check, Psi0)
    return ShotTrajectory(side, psi0, Psi0, fiber_param, tr, asym)


def _asymptotic_check(params, z0, t_init, side, config, primaries, far_field, x_check, Psi0):
    def reach(t, z):
        return z[0] - x_check
    reach.terminal = True
    reach.direction = -1.0
    # time to reach x_check along the parabola, with margin
    mass = 1.0 + params.delta
    tau_c = math.sqrt(max(4.0 * mass / (Psi0 * Psi0 * x_check * x_check) - 1.0, 1.0))
    span = 2.0 * abs(time_of_tau(Psi0, tau_c, mass))
    t1 = t_init - span if side == "unstable" else t_init + span
    tr, stop = flyby(params, z0, (t_init, t1), config, primaries, far_field, events=[reach])
    zf = tr.states[0] if side == "unstable" else tr.states[-1]
    return dict(x_end=float(zf[0]), Xi_end=float(zf[1]), psi_end=float(zf[2]),
                Psi_drift=float(np.max(np.abs(tr.states[:, 3] - z0[3]))),
                reached=stop is not None, t_end=float(tr.t_min if side == "unstable" else tr.t_max))


# ---------------------------------------------------------------------------
# measured shift of the asymptotic direction


def kepler_elements(z, mass=1.0):
    """Perihelion direction, eccentricity and energy of the osculating conic."""
    x, Xi, psi, Psi, s = z
    r = 2.0 / (x * x)
    E = 0.5 * (Xi * Xi + Psi * Psi / (r * r)) - mass / r
    p = Psi * Psi / mass
    e = math.sqrt(max(0.0, 1.0 + 2.0 * E * Psi * Psi / (mass * mass)))
    cosnu = (p / r - 1.0) / e if e > 0 else 1.0
    nu_ = math.acos(max(-1.0, min(1.0, cosnu))) * (1.0 if Xi * Psi > 0 else -1.0)
    return psi - nu_, e, E


def homoclinic_passage(params, psi0, Psi0, fiber_param=0.0, x_init=1e-2, config=None,
                       far_field=300.0, primaries=None):
    """One passage along the unstable manifold, from ``x_init`` back to it.

    The run stops at the outgoing crossing of ``x = x_init`` or at the
    apocenter of a captured orbit, whichever comes first, so the orbit is
    never followed into a second revolution.

    Returns
    -------
    (Trajectory, ndarray) : the passage and its final state.
    """
    t0, z0 = asymptotic_state(params, psi0, Psi0, "unstable", fiber_param, x_init, primaries)

    def out(t, z):
        return z[0] - x_init
    out.terminal = True
    out.direction = -1.0

    def apocenter(t, z):
        return z[1]
    apocenter.terminal = True
    apocenter.direction = -1.0
    tr, stop = flyby(params, z0, (t0, -4.0 * t0), config, primaries, far_field,
                     events=[out, apocenter])
    if stop is None:
        raise EscapeError("the passage did not return to x_init")
    return tr, tr.states[-1]


def psi_splitting(params, psi0, Psi0, fiber_param=0.0, x_init=1e-2, config=None,
                  far_field=300.0):
    """Change of ``Psi`` across one passage of the unstable manifold.

    To first order in ``mu`` this is the derivative of the Melnikov
    potential in the reduced phase ``psi0 - q * fiber_param``.
    """
    _, z1 = homoclinic_passage(params, psi0, Psi0, fiber_param, x_init, config, far_field)
    return float(z1[3] - Psi0)


def measure_asymptotic_shift(params, Psi0, psi0=0.0, fiber_param=0.0, x_init=1e-2,
                             config=None, far_field=300.0):
    """Advance of the osculating perihelion over one passage.

    The unstable manifold is shot from ``x_init`` and followed to the same
    ``x`` on the outgoing side; the difference of the osculating perihelion
    directions is the shift of the asymptotic direction up to ``O(x_init^3)``.
    """
    mass = 1.0 + params.delta
    tr, z1 = homoclinic_passage(params, psi0, Psi0, fiber_param, x_init, config, far_field)
    p0 = kepler_elements(tr.states[0], mass)[0]
    p1 = kepler_elements(z1, mass)[0]
    return _circ(p1 - p0)
