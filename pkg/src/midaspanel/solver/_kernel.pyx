# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner sweeps for the panel solvers.

Hot path of every fit: proximal block-coordinate passes for the
sparse-group LASSO and exact coordinate descent for the elastic net.
The pure-Python twin lives in ``_kernel_py``; both must keep identical
update order so results agree to rounding.
"""

from libc.math cimport fabs, sqrt

import numpy as np

BACKEND = "compiled"


def sg_sweep(double[::1, :] X, double[::1] r, double[::1] beta,
             long[::1] gstart, long[::1] gstop, double[::1] glip,
             double[::1] thr1, double[::1] thr2,
             long[::1] active, double[::1] work):
    """One proximal block-coordinate pass over the listed groups.

    X must be Fortran-ordered so columns are contiguous.  ``r`` and
    ``beta`` are updated in place; returns the largest coefficient change.
    """
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t na = active.shape[0]
    cdef Py_ssize_t a, g, j, i, gs, ge
    cdef double maxd = 0.0
    cdef double s, v, u, t, norm2, norm, scale, delta, ad

    for a in range(na):
        g = active[a]
        if glip[g] <= 0.0:
            continue
        gs = gstart[g]
        ge = gstop[g]
        t = thr1[g]
        norm2 = 0.0
        for j in range(gs, ge):
            s = 0.0
            for i in range(n):
                s += X[i, j] * r[i]
            v = beta[j] + s / glip[g]
            if v > t:
                u = v - t
            elif v < -t:
                u = v + t
            else:
                u = 0.0
            work[j] = u
            norm2 += u * u
        scale = 1.0
        if thr2[g] > 0.0:
            norm = sqrt(norm2)
            if norm <= thr2[g]:
                scale = 0.0
            else:
                scale = 1.0 - thr2[g] / norm
        for j in range(gs, ge):
            u = work[j] * scale
            delta = u - beta[j]
            if delta != 0.0:
                beta[j] = u
                for i in range(n):
                    r[i] -= delta * X[i, j]
            ad = fabs(delta)
            if ad > maxd:
                maxd = ad
    return maxd


def en_sweep(double[::1, :] X, double[::1] r, double[::1] beta,
             double[::1] colnorm2, long[::1] active,
             double thr_l1, double ridge, double inv_n):
    """One exact coordinate-descent pass of the elastic net."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t na = active.shape[0]
    cdef Py_ssize_t a, j, i
    cdef double maxd = 0.0
    cdef double z, az, bnew, delta, ad, cn

    for a in range(na):
        j = active[a]
        cn = colnorm2[j]
        if cn <= 0.0:
            continue
        z = 0.0
        for i in range(n):
            z += X[i, j] * r[i]
        z = z * inv_n + cn * beta[j]
        az = fabs(z) - thr_l1
        if az <= 0.0:
            bnew = 0.0
        else:
            bnew = az / (cn + ridge)
            if z < 0.0:
                bnew = -bnew
        delta = bnew - beta[j]
        if delta != 0.0:
            beta[j] = bnew
            for i in range(n):
                r[i] -= delta * X[i, j]
        ad = fabs(delta)
        if ad > maxd:
            maxd = ad
    return maxd
