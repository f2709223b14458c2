# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contract as _kernels_py."""
import numpy as np
from libc.math cimport cos, sin, sqrt, log, asinh, hypot, M_PI

cdef extern from "math.h" nogil:
    double j0(double x)


cdef inline void _end_terms(double s, double R, double a, double b, double k, bint touch, bint both,
                            double sign, double* A, double* G) noexcept nogil:
    cdef double rho = hypot(s, R)
    cdef double c = cos(k * rho)
    cdef double sn = sin(k * rho)
    cdef double num = a + b * s
    cdef double p0 = c * num / (4.0 * M_PI)
    cdef double dp0 = (-k * sn * (s / rho) * num + c * b) / (4.0 * M_PI)
    cdef double L, a_true
    if touch:
        L = asinh(s / R) if R > 0 else 0.0
        if not both and R > 0:
            # report the exact log coefficient; the IBP remainder goes to G
            a_true = sign * a * j0(k * R) / (4.0 * M_PI)
            A[0] += a_true
            G[0] += (sign * (p0 - dp0 * s) - a_true) * log(R)
    else:
        L = log(rho + s)
    G[0] += sign * (p0 * L - dp0 * (s * L - rho))


def inner_pieces(R, s_lo, s_hi, alpha, beta, double k, touch_lo, touch_hi, nodes, weights, int panels):
    cdef const double[::1] R_ = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[::1] lo_ = np.ascontiguousarray(s_lo, dtype=np.float64)
    cdef const double[::1] hi_ = np.ascontiguousarray(s_hi, dtype=np.float64)
    cdef const double[::1] al_ = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[::1] be_ = np.ascontiguousarray(beta, dtype=np.float64)
    cdef const unsigned char[::1] tl_ = np.ascontiguousarray(touch_lo, dtype=np.uint8)
    cdef const unsigned char[::1] th_ = np.ascontiguousarray(touch_hi, dtype=np.uint8)
    cdef const double[::1] x_ = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] w_ = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = R_.shape[0], m = x_.shape[0]
    A_np = np.zeros(n)
    Gr_np = np.zeros(n)
    Gi_np = np.zeros(n)
    cdef double[::1] A = A_np, Gr = Gr_np, Gi = Gi_np
    cdef Py_ssize_t i, p, j
    cdef bint both
    cdef double Ri, a, b, span, hw, mid, s, rho, c, sn, num, rp, rpp, d2, H, acc_r, acc_i, sinc, w
    cdef double inv4pi = 1.0 / (4.0 * M_PI)
    with nogil:
        for i in range(n):
            Ri = R_[i]
            a = al_[i]
            b = be_[i]
            both = th_[i] and tl_[i] and Ri > 0
            _end_terms(hi_[i], Ri, a, b, k, th_[i], both, 1.0, &A[i], &Gr[i])
            _end_terms(lo_[i], Ri, a, b, k, tl_[i], both, -1.0, &A[i], &Gr[i])
            span = hi_[i] - lo_[i]
            hw = 0.5 * span / panels
            acc_r = 0.0
            acc_i = 0.0
            for p in range(panels):
                mid = lo_[i] + (2 * p + 1) * hw
                for j in range(m):
                    s = mid + hw * x_[j]
                    w = hw * w_[j]
                    rho = hypot(s, Ri)
                    c = cos(k * rho)
                    sn = sin(k * rho)
                    num = a + b * s
                    rp = s / rho
                    rpp = Ri * Ri / (rho * rho * rho)
                    d2 = (-k * k * c * rp * rp * num - k * sn * rpp * num - 2.0 * k * sn * rp * b) * inv4pi
                    if both:
                        H = s * asinh(s / Ri) - rho
                    else:
                        H = s * log(rho + s) - rho
                    acc_r += w * d2 * H
                    sinc = sn / rho if rho > 0 else k
                    acc_i -= w * sinc * num * inv4pi
            Gr[i] += acc_r
            Gi[i] = acc_i
    return A_np, Gr_np, Gi_np
