"""Pure-Python reference implementations of the hot numerical kernels.

These functions mirror the compiled versions in ``_kernels.pyx`` one to one.
They are used whenever the extension module is not built, and they serve as
the reference the compiled kernels are tested against.
"""

import numpy as np


def comet_rhs(z, mu, eps, delta, truncated):
    """Hamiltonian vector field of the comet Hamiltonian in polar variables.

    Parameters
    ----------
    z : sequence of float
        State ``(rh, Rh, rho, Ups, phi, G)``.
    mu, eps, delta : float
        Mass ratio, comet rescaling parameter and planet mass.
    truncated : bool
        If true, evaluate the decoupled truncated Hamiltonian instead of the
        full one (Kepler potential, no remainder terms).

    Returns
    -------
    numpy.ndarray
        Time derivative of ``z``.
    """
    rh, Rh, rho, ups, phi, G = z[0], z[1], z[2], z[3], z[4], z[5]
    alpha = mu * (1.0 - mu)
    e3 = eps ** 3
    out = np.empty(6)
    if truncated:
        out[0] = Rh / alpha
        out[1] = -alpha * rh
        out[2] = e3 * ups
        out[3] = e3 * (G * G / rho ** 3 - 1.0 / rho ** 2)
        out[4] = -1.0 + e3 * G / rho ** 2
        out[5] = 0.0
        return out

    k = np.sqrt(delta / eps)
    r = 1.0 + k * rh
    kin = e3 * (1.0 + delta)
    cphi = np.cos(phi)
    sphi = np.sin(phi)
    e2 = eps * eps
    cS = e2 * mu * r
    cJ = -e2 * (1.0 - mu) * r
    dS = np.sqrt(rho * rho + 2.0 * rho * cS * cphi + cS * cS)
    dJ = np.sqrt(rho * rho + 2.0 * rho * cJ * cphi + cJ * cJ)
    wS = (1.0 - mu) / dS ** 3
    wJ = mu / dJ ** 3
    dpot_rho = e3 * (wS * (rho + cS * cphi) + wJ * (rho + cJ * cphi))
    dpot_phi = -e3 * rho * sphi * (wS * cS + wJ * cJ)
    dpot_r = e3 * (wS * (cS + rho * cphi) * e2 * mu
                   - wJ * (cJ + rho * cphi) * e2 * (1.0 - mu))

    # rotator-coupling remainder f(rh, G)
    s = 2.0 * k * rh + k * k * rh * rh
    num = k * k * G * G + s * (2.0 * alpha * G - alpha * alpha * rh * rh)
    df_dG = (k * k * G + alpha * s) / (alpha * r * r)
    num_r = 2.0 * k * r * (2.0 * alpha * G - alpha * alpha * rh * rh) \
        - 2.0 * alpha * alpha * rh * s
    df_dr = num_r / (2.0 * alpha * r * r) - num * k / (alpha * r ** 3)

    out[0] = Rh / alpha
    out[1] = -(alpha * rh + df_dr + dpot_r * k)
    out[2] = kin * ups
    out[3] = -(-kin * G * G / rho ** 3 + dpot_rho)
    out[4] = -1.0 + kin * G / rho ** 2 + df_dG
    out[5] = -dpot_phi
    return out


def mcgehee_rhs_circular(z, mu, nu, q):
    """McGehee vector field of the asteroid around circular primaries.

    Parameters
    ----------
    z : sequence of float
        State ``(x, Xi, psi, Psi, s)``.
    mu : float
        Mass ratio of the primaries, which move on the unit circle with
        polar angle ``q * s``.
    nu : float
        Frequency of the phase variable ``s``.
    q : float
        Ratio between the primaries' angle and ``s``.

    Returns
    -------
    numpy.ndarray
        Time derivative of ``z``.
    """
    x, Xi, psi, Psi, s = z[0], z[1], z[2], z[3], z[4]
    out = np.zeros(5)
    out[4] = nu
    if x == 0.0:
        return out
    x2 = x * x
    x3 = x2 * x
    x4 = x2 * x2
    xi = 2.0 / x2
    a = psi - q * s
    ca = np.cos(a)
    sa = np.sin(a)
    dS = np.sqrt(xi * xi + 2.0 * mu * xi * ca + mu * mu)
    dJ = np.sqrt(xi * xi - 2.0 * (1.0 - mu) * xi * ca + (1.0 - mu) ** 2)
    wS = (1.0 - mu) / dS ** 3
    wJ = mu / dJ ** 3
    dV_dxi = -wS * (xi + mu * ca) - wJ * (xi - (1.0 - mu) * ca)
    dV_da = xi * sa * (wS * mu - wJ * (1.0 - mu))
    out[0] = -0.25 * x3 * Xi
    out[1] = 0.125 * Psi * Psi * x4 * x2 + dV_dxi
    out[2] = 0.25 * Psi * x4
    out[3] = dV_da
    return out


def increment_potential(xi, ang, mu):
    """Potential of the two primaries minus its monopole and dipole parts.

    The primaries sit at ``(-mu, 0)`` and ``(1 - mu, 0)``; the field point
    is ``xi * (cos ang, sin ang)``.  The difference is assembled from
    algebraically rearranged terms so that no cancellation of the leading
    ``1/xi`` and ``1/xi**2`` parts happens at large ``xi``.

    Parameters
    ----------
    xi : numpy.ndarray
        Radial distances (real, positive).
    ang : numpy.ndarray
        Angle of the field point relative to the primaries' axis.
    mu : float
        Mass ratio.

    Returns
    -------
    numpy.ndarray
        The increment ``sum m_i/|X - x_i| - 1/xi``.
    """
    xi = np.asarray(xi, dtype=float)
    ca = np.cos(ang)
    total = np.zeros(np.broadcast(xi, ca).shape)
    for m, pos in ((1.0 - mu, -mu), (mu, 1.0 - mu)):
        c = pos * ca
        n = pos * pos
        d = np.sqrt(xi * xi - 2.0 * xi * c + n)
        gap = (2.0 * xi * c - n) / (xi + d)
        num = c * (2.0 * xi + d) * gap - xi * n
        total = total + m * num / (xi * xi * d * (xi + d))
    return total
