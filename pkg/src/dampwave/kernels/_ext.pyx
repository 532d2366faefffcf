# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the damped leapfrog sweep, the elastic stencil and
the direct log-kernel sum.

All lattice arrays carry a one-node zero halo, shape ``(2, n+2, n+2)`` for
vector fields and ``(n+2, n+2)`` for scalars.  Boxes are half-open ranges of
padded indices and must lie inside ``[1, n+1)``.  Reductions run in plain
row-major order so results are reproducible bit for bit.
"""
import numpy as np

from libc.math cimport atan, log, sqrt


def leapfrog_step(double[:, :, ::1] up, double[:, :, ::1] uc,
                  double[:, :, ::1] un, double[:, ::1] V,
                  double[:, ::1] inv_den, double[:, :, ::1] v,
                  double a2, double c2, double dx, double dt,
                  Py_ssize_t i0, Py_ssize_t i1, Py_ssize_t j0, Py_ssize_t j1):
    cdef double idx2 = 1.0 / (dx * dx)
    cdef double iq = 0.25 / (dx * dx)
    cdef double dt2 = dt * dt
    cdef double hdt = 0.5 * dt
    cdef double i2dt = 0.5 / dt
    cdef double K = 0.0, KV = 0.0, W = 0.0, U = 0.0, UV = 0.0, X = 0.0
    cdef double p, q, d11p, d22p, d12p, d11q, d22q, d12q, L1, L2
    cdef double vv, pp, qp, n1, n2, w1, w2, uu
    cdef Py_ssize_t i, j
    for i in range(i0, i1):
        for j in range(j0, j1):
            p = uc[0, i, j]
            q = uc[1, i, j]
            d11p = (uc[0, i + 1, j] - 2.0 * p + uc[0, i - 1, j]) * idx2
            d22p = (uc[0, i, j + 1] - 2.0 * p + uc[0, i, j - 1]) * idx2
            d12p = (uc[0, i + 1, j + 1] - uc[0, i + 1, j - 1]
                    - uc[0, i - 1, j + 1] + uc[0, i - 1, j - 1]) * iq
            d11q = (uc[1, i + 1, j] - 2.0 * q + uc[1, i - 1, j]) * idx2
            d22q = (uc[1, i, j + 1] - 2.0 * q + uc[1, i, j - 1]) * idx2
            d12q = (uc[1, i + 1, j + 1] - uc[1, i + 1, j - 1]
                    - uc[1, i - 1, j + 1] + uc[1, i - 1, j - 1]) * iq
            L1 = a2 * (d11p + d22p) + c2 * (d11p + d12q)
            L2 = a2 * (d11q + d22q) + c2 * (d12p + d22q)
            vv = V[i, j]
            pp = up[0, i, j]
            qp = up[1, i, j]
            n1 = (2.0 * p - pp + dt2 * L1 + hdt * vv * pp) * inv_den[i, j]
            n2 = (2.0 * q - qp + dt2 * L2 + hdt * vv * qp) * inv_den[i, j]
            un[0, i, j] = n1
            un[1, i, j] = n2
            v[0, i, j] += hdt * (pp + p)
            v[1, i, j] += hdt * (qp + q)
            w1 = (n1 - pp) * i2dt
            w2 = (n2 - qp) * i2dt
            K += w1 * w1 + w2 * w2
            KV += vv * (w1 * w1 + w2 * w2)
            W -= p * L1 + q * L2
            uu = p * p + q * q
            U += uu
            UV += vv * uu
            X += p * w1 + q * w2
    cdef double cell = dx * dx
    return (K * cell, KV * cell, W * cell, U * cell, UV * cell, X * cell)


def elastic_apply(double[:, :, ::1] u, double[:, :, ::1] out,
                  double a2, double c2, double dx,
                  Py_ssize_t i0, Py_ssize_t i1, Py_ssize_t j0, Py_ssize_t j1):
    cdef double idx2 = 1.0 / (dx * dx)
    cdef double iq = 0.25 / (dx * dx)
    cdef double p, q, d11p, d22p, d12p, d11q, d22q, d12q
    cdef Py_ssize_t i, j
    for i in range(i0, i1):
        for j in range(j0, j1):
            p = u[0, i, j]
            q = u[1, i, j]
            d11p = (u[0, i + 1, j] - 2.0 * p + u[0, i - 1, j]) * idx2
            d22p = (u[0, i, j + 1] - 2.0 * p + u[0, i, j - 1]) * idx2
            d12p = (u[0, i + 1, j + 1] - u[0, i + 1, j - 1]
                    - u[0, i - 1, j + 1] + u[0, i - 1, j - 1]) * iq
            d11q = (u[1, i + 1, j] - 2.0 * q + u[1, i - 1, j]) * idx2
            d22q = (u[1, i, j + 1] - 2.0 * q + u[1, i, j - 1]) * idx2
            d12q = (u[1, i + 1, j + 1] - u[1, i + 1, j - 1]
                    - u[1, i - 1, j + 1] + u[1, i - 1, j - 1]) * iq
            out[0, i, j] = a2 * (d11p + d22p) + c2 * (d11p + d12q)
            out[1, i, j] = a2 * (d11q + d22q) + c2 * (d12p + d22q)


cdef inline double _log_corner(double x, double y) nogil:
    # antiderivative F with d2F/dxdy = log|(x, y)|
    cdef double r2 = x * x + y * y
    cdef double s = 0.0
    if r2 == 0.0:
        return 0.0
    s = x * y * (log(r2) - 3.0)
    if x != 0.0:
        s += x * x * atan(y / x)
    if y != 0.0:
        s += y * y * atan(x / y)
    return 0.5 * s


cdef inline double _grad_corner(double x, double y) nogil:
    # antiderivative G with d2G/dxdy = x / (x^2 + y^2)
    cdef double r2 = x * x + y * y
    cdef double s = 0.0
    if r2 == 0.0:
        return 0.0
    s = 0.5 * y * log(r2)
    if x != 0.0:
        s += x * atan(y / x)
    return s


def potential_direct(double[::1] sx, double[::1] sy, double[:, ::1] rho,
                     double[::1] ex, double[::1] ey, double dx, double near):
    cdef Py_ssize_t P = ex.shape[0]
    cdef Py_ssize_t S = sx.shape[0]
    h_arr = np.zeros((2, P), dtype=np.float64)
    g_arr = np.zeros((2, 2, P), dtype=np.float64)
    cdef double[:, ::1] h = h_arr
    cdef double[:, :, ::1] g = g_arr
    cdef double cell = dx * dx
    cdef double hd = 0.5 * dx
    # lattice pairs at exactly ``near`` must land on the far side under round-off
    cdef double near2 = near * near * (1.0 - 1e-9)
    cdef double X, Y, r2, k, gx, gy, a1, b1, a2, b2, h0, h1, g00, g01, g10, g11
    cdef double scale = -1.0 / (2.0 * 3.141592653589793)
    cdef Py_ssize_t p, s
    for p in range(P):
        h0 = 0.0
        h1 = 0.0
        g00 = 0.0
        g01 = 0.0
        g10 = 0.0
        g11 = 0.0
        for s in range(S):
            X = ex[p] - sx[s]
            Y = ey[p] - sy[s]
            r2 = X * X + Y * Y
            if r2 >= near2:
                k = 0.5 * cell * log(r2)
                gx = cell * X / r2
                gy = cell * Y / r2
            else:
                # offsets z = y - x over the source cell
                a1 = -X - hd
                b1 = -X + hd
                a2 = -Y - hd
                b2 = -Y + hd
                k = (_log_corner(b1, b2) - _log_corner(a1, b2)
                     - _log_corner(b1, a2) + _log_corner(a1, a2))
                gx = -(_grad_corner(b1, b2) - _grad_corner(a1, b2)
                       - _grad_corner(b1, a2) + _grad_corner(a1, a2))
                gy = -(_grad_corner(b2, b1) - _grad_corner(a2, b1)
                       - _grad_corner(b2, a1) + _grad_corner(a2, a1))
            h0 += k * rho[0, s]
            h1 += k * rho[1, s]
            g00 += gx * rho[0, s]
            g01 += gy * rho[0, s]
            g10 += gx * rho[1, s]
            g11 += gy * rho[1, s]
        h[0, p] = scale * h0
        h[1, p] = scale * h1
        g[0, 0, p] = scale * g00
        g[0, 1, p] = scale * g01
        g[1, 0, p] = scale * g10
        g[1, 1, p] = scale * g11
    return h_arr, g_arr
