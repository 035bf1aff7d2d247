# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical core; mirrors stockloan._core_py function for function.

Scalar loops over libc math — see the Python twin for the shared
conventions and documentation.
"""

from libc.math cimport erfc, exp, log, sqrt

import numpy as np

cdef double INV_SQRT2 = 0.7071067811865475244008444


cdef inline double ncdf(double x) noexcept nogil:
    return 0.5 * erfc(-x * INV_SQRT2)


cdef inline double step_half(double t) noexcept nogil:
    if t > 0.0:
        return 1.0
    if t < 0.0:
        return 0.0
    return 0.5


cdef inline double end_step(double x, double w, double end_scale) noexcept nogil:
    # endpoint step in ln(x/w), smeared over the final panel when
    # end_scale > 0 (see the Python twin)
    if end_scale > 0.0:
        return ncdf(log(x / w) / end_scale)
    return step_half(log(x / w))


cdef inline double q1_eval(double x, double y, double z, double w, double ay,
                           double r, double q, double sigma, double eta,
                           double end_scale) noexcept nogil:
    cdef double gap = y - z
    cdef double sq, d1, d2, re
    re = r - eta
    if gap <= 0.0:
        return (x * q - ay * re) * end_step(x, w, end_scale)
    sq = sigma * sqrt(gap)
    d1 = (log(x / w) + (r - q + 0.5 * sigma * sigma) * gap) / sq
    d2 = d1 - sq
    return x * q * exp(-q * gap) * ncdf(d1) - ay * re * exp(-re * gap) * ncdf(d2)


cdef inline double m1_eval(double x, double y, double z,
                           double r, double q, double sigma) noexcept nogil:
    cdef double sq, d1
    if y <= 0.0:
        return (x - z) * step_half(log(x / z))
    sq = sigma * sqrt(y)
    d1 = (log(x / z) + (r - q + 0.5 * sigma * sigma) * y) / sq
    return x * exp(-q * y) * ncdf(d1) - z * exp(-r * y) * ncdf(d1 - sq)


def q1_sum(double x, double y, double[::1] us, double[::1] ws, double[::1] bs,
           double r, double q, double sigma, double eta,
           double principal, double maturity, double end_scale=0.0):
    cdef double ay = principal * exp(eta * (maturity - y))
    cdef double acc = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(us.shape[0]):
            acc += ws[i] * q1_eval(x, y, us[i], bs[i], ay, r, q, sigma, eta, end_scale)
    return acc


def q_smooth_sum(double x, double y, double[::1] us, double[::1] ws, double[::1] bs,
                 double r, double q, double sigma, double eta,
                 double principal, double maturity, double lam,
                 double end_scale=0.0):
    cdef double ay = principal * exp(eta * (maturity - y))
    cdef double fac = (x / ay) ** lam
    cdef double xr = ay * ay / x
    cdef double acc = 0.0
    cdef Py_ssize_t i
    with nogil:
        for i in range(us.shape[0]):
            acc += ws[i] * (q1_eval(x, y, us[i], bs[i], ay, r, q, sigma, eta, end_scale)
                            - fac * q1_eval(xr, y, us[i], bs[i], ay, r, q, sigma, eta, end_scale))
    return acc


def nr_values(spots, taus, double[::1] grid_taus, double[::1] grid_vals,
              double r, double q, double sigma, double eta,
              double principal, double maturity):
    cdef double[::1] s_view = np.ascontiguousarray(spots, dtype=np.float64)
    cdef double[::1] t_view = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t n_pts = s_view.shape[0]
    out = np.empty(n_pts, dtype=np.float64)
    cdef double[::1] o_view = out
    cdef Py_ssize_t n = grid_taus.shape[0] - 1
    cdef double a0 = principal * exp(eta * maturity)
    cdef Py_ssize_t p, i, k, lo_idx, hi_idx, mid_idx
    cdef double s, t, frac, bf, a_t, d, acc, w, payoff, scale_k
    with nogil:
        for p in range(n_pts):
            s = s_view[p]
            t = t_view[p]
            if t <= 0.0:
                payoff = s - a0
                o_view[p] = payoff if payoff > 0.0 else 0.0
                continue
            # largest k with grid_taus[k] <= t (grid may be non-uniform)
            lo_idx = 0
            hi_idx = n
            while lo_idx < hi_idx:
                mid_idx = (lo_idx + hi_idx + 1) >> 1
                if grid_taus[mid_idx] <= t:
                    lo_idx = mid_idx
                else:
                    hi_idx = mid_idx - 1
            k = lo_idx
            if k < n:
                frac = (t - grid_taus[k]) / (grid_taus[k + 1] - grid_taus[k])
                bf = exp((1.0 - frac) * log(grid_vals[k]) + frac * log(grid_vals[k + 1]))
            else:
                bf = grid_vals[n]
            a_t = principal * exp(eta * (maturity - t))
            acc = m1_eval(s, t, a0, r, q, sigma)
            if k >= 1:
                scale_k = sigma * sqrt(0.5 * (grid_taus[k] - grid_taus[k - 1]))
                for i in range(k + 1):
                    w = 0.0
                    if i >= 1:
                        w += 0.5 * (grid_taus[i] - grid_taus[i - 1])
                    if i <= k - 1:
                        w += 0.5 * (grid_taus[i + 1] - grid_taus[i])
                    acc += w * q1_eval(s, t, grid_taus[i], grid_vals[i], a_t, r, q,
                                       sigma, eta, scale_k)
            d = t - grid_taus[k]
            if d > 0.0:
                acc += 0.5 * d * (
                    q1_eval(s, t, grid_taus[k], grid_vals[k], a_t, r, q, sigma, eta, 0.0)
                    + (s * q - a_t * (r - eta)) * end_step(s, bf, sigma * sqrt(0.5 * d))
                )
            # floor at the exit payoff: the representation saturates onto it
            # deep in the money, so this only smooths discretization error
            payoff = s - a_t
            if acc < payoff:
                acc = payoff
            if acc < 0.0:
                acc = 0.0
            o_view[p] = acc
    return out


def tree_value_nr(double s0, double[::1] debt, double up, double prob_up,
                  double discount):
    cdef Py_ssize_t n_steps = debt.shape[0] - 1
    prices_arr = np.empty(n_steps + 1, dtype=np.float64)
    vals_arr = np.empty(n_steps + 1, dtype=np.float64)
    cdef double[::1] prices = prices_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t i, j
    cdef double pdown = 1.0 - prob_up
    cdef double ex
    with nogil:
        for j in range(n_steps + 1):
            prices[j] = s0 * up ** (2.0 * j - n_steps)
            ex = prices[j] - debt[n_steps]
            vals[j] = ex if ex > 0.0 else 0.0
        for i in range(n_steps - 1, -1, -1):
            for j in range(i + 1):
                prices[j] = prices[j] * up
                vals[j] = discount * (prob_up * vals[j + 1] + pdown * vals[j])
                ex = prices[j] - debt[i]
                if ex > vals[j]:
                    vals[j] = ex
    return vals_arr[0]


def tree_value_mc(double s0, double[::1] debt, long[::1] trig_lo,
                  double[:, ::1] trig_vals, double up, double prob_up,
                  double discount):
    cdef Py_ssize_t n_steps = debt.shape[0] - 1
    cdef Py_ssize_t band = trig_vals.shape[1]
    prices_arr = np.empty(n_steps + 1, dtype=np.float64)
    vals_arr = np.empty(n_steps + 1, dtype=np.float64)
    cdef double[::1] prices = prices_arr
    cdef double[::1] vals = vals_arr
    cdef Py_ssize_t i, j, m
    cdef double pdown = 1.0 - prob_up
    cdef double ex, cont
    with nogil:
        for j in range(n_steps + 1):
            prices[j] = s0 * up ** (2.0 * j - n_steps)
            ex = prices[j] - debt[n_steps]
            vals[j] = ex if ex > 0.0 else 0.0
        for i in range(n_steps - 1, -1, -1):
            for j in range(i + 1):
                prices[j] = prices[j] * up
                cont = discount * (prob_up * vals[j + 1] + pdown * vals[j])
                if prices[j] <= debt[i]:
                    m = j - trig_lo[i]
                    if 0 <= m < band:
                        vals[j] = trig_vals[i, m]
                    else:
                        vals[j] = 0.0
                else:
                    ex = prices[j] - debt[i]
                    vals[j] = ex if ex > cont else cont
    return vals_arr[0]


def tree_exercise_scan(double s0, double[::1] debt, double up, double prob_up,
                       double discount, long scan_levels):
    cdef Py_ssize_t n_steps = debt.shape[0] - 1
    cdef Py_ssize_t scan = scan_levels if scan_levels < n_steps else n_steps
    prices_arr = np.empty(n_steps + 1, dtype=np.float64)
    vals_arr = np.empty(n_steps + 1, dtype=np.float64)
    flags_arr = np.full((scan + 1, scan + 1), -1, dtype=np.int8)
    cdef double[::1] prices = prices_arr
    cdef double[::1] vals = vals_arr
    cdef signed char[:, ::1] flags = flags_arr
    cdef Py_ssize_t i, j
    cdef double pdown = 1.0 - prob_up
    cdef double ex, cont
    cdef double scale = debt[0] if debt[0] > s0 else s0
    with nogil:
        for j in range(n_steps + 1):
            prices[j] = s0 * up ** (2.0 * j - n_steps)
            ex = prices[j] - debt[n_steps]
            vals[j] = ex if ex > 0.0 else 0.0
            if n_steps <= scan:
                flags[n_steps, j] = 1 if ex > 0.0 else 0
        for i in range(n_steps - 1, -1, -1):
            for j in range(i + 1):
                prices[j] = prices[j] * up
                cont = discount * (prob_up * vals[j + 1] + pdown * vals[j])
                ex = prices[j] - debt[i]
                if i <= scan:
                    flags[i, j] = 1 if (ex > 0.0 and ex + 1e-12 * scale >= cont) else 0
                vals[j] = ex if ex > cont else cont
    return vals_arr[0], flags_arr
