# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numerical kernels.

Same signatures and results as ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin

cnp.import_array()


def comet_rhs(z, double mu, double eps, double delta, bint truncated):
    cdef double rh = z[0], Rh = z[1], rho = z[2], ups = z[3], phi = z[4], G = z[5]
    cdef double alpha = mu * (1.0 - mu)
    cdef double e3 = eps * eps * eps
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(6)
    cdef double k, r, kin, cphi, sphi, e2, cS, cJ, dS, dJ, wS, wJ
    cdef double dpot_rho, dpot_phi, dpot_r, s, num, df_dG, num_r, df_dr
    if truncated:
        out[0] = Rh / alpha
        out[1] = -alpha * rh
        out[2] = e3 * ups
        out[3] = e3 * (G * G / (rho * rho * rho) - 1.0 / (rho * rho))
        out[4] = -1.0 + e3 * G / (rho * rho)
        out[5] = 0.0
        return out

    k = sqrt(delta / eps)
    r = 1.0 + k * rh
    kin = e3 * (1.0 + delta)
    cphi = cos(phi)
    sphi = sin(phi)
    e2 = eps * eps
    cS = e2 * mu * r
    cJ = -e2 * (1.0 - mu) * r
    dS = sqrt(rho * rho + 2.0 * rho * cS * cphi + cS * cS)
    dJ = sqrt(rho * rho + 2.0 * rho * cJ * cphi + cJ * cJ)
    wS = (1.0 - mu) / (dS * dS * dS)
    wJ = mu / (dJ * dJ * dJ)
    dpot_rho = e3 * (wS * (rho + cS * cphi) + wJ * (rho + cJ * cphi))
    dpot_phi = -e3 * rho * sphi * (wS * cS + wJ * cJ)
    dpot_r = e3 * (wS * (cS + rho * cphi) * e2 * mu
                   - wJ * (cJ + rho * cphi) * e2 * (1.0 - mu))

    s = 2.0 * k * rh + k * k * rh * rh
    num = k * k * G * G + s * (2.0 * alpha * G - alpha * alpha * rh * rh)
    df_dG = (k * k * G + alpha * s) / (alpha * r * r)
    num_r = 2.0 * k * r * (2.0 * alpha * G - alpha * alpha * rh * rh) \
        - 2.0 * alpha * alpha * rh * s
    df_dr = num_r / (2.0 * alpha * r * r) - num * k / (alpha * r * r * r)

    out[0] = Rh / alpha
    out[1] = -(alpha * rh + df_dr + dpot_r * k)
    out[2] = kin * ups
    out[3] = kin * G * G / (rho * rho * rho) - dpot_rho
    out[4] = -1.0 + kin * G / (rho * rho) + df_dG
    out[5] = -dpot_phi
    return out


def mcgehee_rhs_circular(z, double mu, double nu, double q):
    cdef double x = z[0], Xi = z[1], psi = z[2], Psi = z[3], s = z[4]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(5)
    cdef double x2, x3, x4, xi, a, ca, sa, dS, dJ, wS, wJ
    out[4] = nu
    if x == 0.0:
        return out
    x2 = x * x
    x3 = x2 * x
    x4 = x2 * x2
    xi = 2.0 / x2
    a = psi - q * s
    ca = cos(a)
    sa = sin(a)
    dS = sqrt(xi * xi + 2.0 * mu * xi * ca + mu * mu)
    dJ = sqrt(xi * xi - 2.0 * (1.0 - mu) * xi * ca + (1.0 - mu) * (1.0 - mu))
    wS = (1.0 - mu) / (dS * dS * dS)
    wJ = mu / (dJ * dJ * dJ)
    out[0] = -0.25 * x3 * Xi
    out[1] = 0.125 * Psi * Psi * x4 * x2 - wS * (xi + mu * ca) \
        - wJ * (xi - (1.0 - mu) * ca)
    out[2] = 0.25 * Psi * x4
    out[3] = xi * sa * (wS * mu - wJ * (1.0 - mu))
    return out


def increment_potential(xi_in, ang_in, double mu):
    xi_b, ang_b = np.broadcast_arrays(np.asarray(xi_in, dtype=np.float64),
                                      np.asarray(ang_in, dtype=np.float64))
    shape = xi_b.shape
    cdef double[::1] xi = np.ascontiguousarray(xi_b).ravel()
    cdef double[::1] ang = np.ascontiguousarray(ang_b).ravel()
    cdef Py_ssize_t n = xi.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] res = np.empty(n)
    cdef double X, ca, c, nn, d, gap, num, tot, m, pos
    cdef int j
    for i in range(n):
        X = xi[i]
        ca = cos(ang[i])
        tot = 0.0
        for j in range(2):
            if j == 0:
                m = 1.0 - mu
                pos = -mu
            else:
                m = mu
                pos = 1.0 - mu
            c = pos * ca
            nn = pos * pos
            d = sqrt(X * X - 2.0 * X * c + nn)
            gap = (2.0 * X * c - nn) / (X + d)
            num = c * (2.0 * X + d) * gap - X * nn
            tot += m * num / (X * X * d * (X + d))
        res[i] = tot
    return res.reshape(shape)
