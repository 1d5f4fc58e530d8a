# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend; semantics match ``_ref`` to fp reordering error."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, tanh

cnp.import_array()


def rbf_eval(double[:, ::1] centers, double[::1] inv_bw2, double norm_const,
             double[::1] weights, object x, bint want_input_grad):
    """Weighted sum of normalized Gaussian bases; see the reference backend."""
    cdef cnp.ndarray[double, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] xv = xa
    cdef Py_ssize_t k = centers.shape[0]
    cdef Py_ssize_t n = centers.shape[1]
    cdef cnp.ndarray[double, ndim=1] f_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] f = f_arr
    cdef cnp.ndarray[double, ndim=1] g_arr
    cdef double[::1] g
    cdef double value = 0.0
    cdef double s, d, wf
    cdef Py_ssize_t i, j
    if want_input_grad:
        g_arr = np.zeros(n, dtype=np.float64)
        g = g_arr
        for i in range(k):
            s = 0.0
            for j in range(n):
                d = xv[j] - centers[i, j]
                s += d * d * inv_bw2[j]
            f[i] = norm_const * exp(-0.5 * s)
            wf = weights[i] * f[i]
            value += wf
            for j in range(n):
                g[j] -= wf * (xv[j] - centers[i, j]) * inv_bw2[j]
        return value, f_arr, g_arr
    for i in range(k):
        s = 0.0
        for j in range(n):
            d = xv[j] - centers[i, j]
            s += d * d * inv_bw2[j]
        f[i] = norm_const * exp(-0.5 * s)
        value += weights[i] * f[i]
    return value, f_arr, None


cdef inline double _softplus(double a) nogil:
    if a >= 0.0:
        return a + log1p(exp(-a))
    return log1p(exp(a))


cdef inline double _sigmoid(double a) nogil:
    cdef double ea
    if a >= 0.0:
        return 1.0 / (1.0 + exp(-a))
    ea = exp(a)
    return ea / (1.0 + ea)


def mlp_eval(double[::1] params, object sizes, object x, int out_act,
             bint want_param_grad, bint want_input_grad):
    """ReLU network mapping ``x`` to exp(-squash(a)); see the reference backend."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n_layers = sz.shape[0] - 1
    cdef Py_ssize_t total_act = 0
    cdef Py_ssize_t max_w = 0
    cdef Py_ssize_t l, i, j
    for l in range(sz.shape[0]):
        total_act += sz[l]
        if sz[l] > max_w:
            max_w = sz[l]

    # Flat activation buffer holds the input followed by every layer output;
    # preactivations reuse the same layout shifted past the input block.
    cdef cnp.ndarray[double, ndim=1] acts_arr = np.empty(total_act, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] pre_arr = np.empty(total_act - sz[0], dtype=np.float64)
    cdef double[::1] acts = acts_arr
    cdef double[::1] pre = pre_arr
    cdef Py_ssize_t n_in, n_out, aoff, poff, woff
    cdef double a, g, gprime, value

    for j in range(sz[0]):
        acts[j] = xa[j]
    aoff = 0
    poff = 0
    woff = 0
    for l in range(n_layers):
        n_in = sz[l]
        n_out = sz[l + 1]
        for i in range(n_out):
            a = params[woff + n_in * n_out + i]
            for j in range(n_in):
                a += params[woff + i * n_in + j] * acts[aoff + j]
            pre[poff + i] = a
            if l < n_layers - 1 and a < 0.0:
                a = 0.0
            acts[aoff + n_in + i] = a
        aoff += n_in
        poff += n_out
        woff += n_in * n_out + n_out

    a = pre[poff - 1]
    if out_act == 0:
        g = tanh(a)
        gprime = 1.0 - g * g
    else:
        g = _softplus(a)
        gprime = _sigmoid(a)
    value = exp(-g)

    if not (want_param_grad or want_input_grad):
        return value, None, None

    cdef cnp.ndarray[double, ndim=1] pg_arr
    cdef double[::1] pg
    cdef cnp.ndarray[double, ndim=1] delta_arr = np.empty(max_w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] newd_arr = np.empty(max_w, dtype=np.float64)
    cdef double[::1] delta = delta_arr
    cdef double[::1] newd = newd_arr
    cdef double[::1] tmp
    cdef double acc
    if want_param_grad:
        pg_arr = np.empty(params.shape[0], dtype=np.float64)
        pg = pg_arr

    delta[0] = -gprime * value
    for l in range(n_layers - 1, -1, -1):
        n_in = sz[l]
        n_out = sz[l + 1]
        aoff -= n_in
        poff -= n_out
        woff -= n_in * n_out + n_out
        if want_param_grad:
            for i in range(n_out):
                pg[woff + n_in * n_out + i] = delta[i]
                for j in range(n_in):
                    pg[woff + i * n_in + j] = delta[i] * acts[aoff + j]
        for j in range(n_in):
            acc = 0.0
            for i in range(n_out):
                acc += params[woff + i * n_in + j] * delta[i]
            if l > 0 and pre[poff - n_in + j] <= 0.0:
                acc = 0.0
            newd[j] = acc
        tmp = delta
        delta = newd
        newd = tmp

    cdef cnp.ndarray[double, ndim=1] ig_arr
    if want_input_grad:
        ig_arr = np.empty(sz[0], dtype=np.float64)
        for j in range(sz[0]):
            ig_arr[j] = delta[j]
    return (
        value,
        pg_arr if want_param_grad else None,
        ig_arr if want_input_grad else None,
    )


cdef Py_ssize_t _simplex_project(double[::1] w, double total,
                                 cnp.uint8_t[::1] free) nogil:
    """Exact in-place projection onto {w >= 0, sum w = total}.

    Uniform shift of the unclamped components with clamping of negatives; a
    final touch-up spreads the fp residual and clamps the few-ulp negatives
    the shift can leave behind.  Returns the free-set size.
    """
    cdef Py_ssize_t k = w.shape[0]
    cdef Py_ssize_t i, inner, nfree
    cdef double ssum, shift, resid
    cdef bint changed
    for i in range(k):
        free[i] = 1
    nfree = k
    for inner in range(k + 1):
        if nfree == 0:
            return 0
        ssum = 0.0
        for i in range(k):
            if free[i]:
                ssum += w[i]
        shift = (ssum - total) / nfree
        changed = False
        for i in range(k):
            if free[i]:
                w[i] -= shift
                if w[i] < 0.0:
                    w[i] = 0.0
                    free[i] = 0
                    nfree -= 1
                    changed = True
        if not changed:
            break
    resid = -total
    for i in range(k):
        resid += w[i]
    shift = resid / nfree
    for i in range(k):
        if free[i]:
            w[i] -= shift
            if w[i] < 0.0:
                w[i] = 0.0
    return nfree


def project_simplex_cap(double[::1] w, double total, object feats, double cap,
                        int max_outer=100):
    """In-place projection onto {w >= 0, sum w = total, w @ feats <= cap}.

    Plain simplex projection first; if the cap then binds, its multiplier is
    bracketed and bisected as in the reference backend.  Returns the number
    of simplex projections spent; -1 when the cap cannot be met.
    """
    cdef Py_ssize_t k = w.shape[0]
    cdef double tol = 1e-12
    if fabs(total) > 1.0:
        tol = 1e-12 * fabs(total)
    cdef bint has_cap = feats is not None
    cdef double[::1] fv
    cdef cnp.ndarray[double, ndim=1] orig_arr
    cdef double[::1] orig
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] free_arr = np.empty(k, dtype=np.uint8)
    cdef cnp.uint8_t[::1] free = free_arr
    cdef Py_ssize_t i, j, it, nsel, passes
    cdef double s, fmin, cap_tol, lo, hi, mid, scale, thresh
    cdef bint bracketed

    if has_cap:
        fv = feats
        orig_arr = np.empty(k, dtype=np.float64)
        orig = orig_arr
        for i in range(k):
            orig[i] = w[i]

    _simplex_project(w, total, free)
    if not has_cap:
        return 1
    s = 0.0
    for i in range(k):
        s += w[i] * fv[i]
    if s <= cap + tol:
        return 1
    fmin = fv[0]
    for i in range(1, k):
        if fv[i] < fmin:
            fmin = fv[i]
    if total * fmin > cap + tol:
        return -1
    scale = fabs(cap)
    if scale < 1.0:
        scale = 1.0
    cap_tol = 1e-9 * scale

    passes = 1
    lo = 0.0
    hi = 1.0
    bracketed = False
    for it in range(2 * max_outer):
        for i in range(k):
            w[i] = orig[i] - hi * fv[i]
        _simplex_project(w, total, free)
        passes += 1
        s = 0.0
        for i in range(k):
            s += w[i] * fv[i]
        if s <= cap:
            bracketed = True
            break
        lo = hi
        hi *= 2.0
    if not bracketed:
        # The cap is reached only in the limit of a huge multiplier, meaning
        # all mass must sit on the smallest feature values.
        scale = fabs(fmin)
        if scale < 1.0:
            scale = 1.0
        thresh = fmin + 1e-12 * scale
        nsel = 0
        for i in range(k):
            if fv[i] <= thresh:
                w[nsel] = orig[i]
                nsel += 1
        _simplex_project(w[:nsel], total, free[:nsel])
        # Scatter the packed prefix back out to the selected slots.  Walking
        # down keeps every pending packed slot j at or below the write slot.
        j = nsel - 1
        for i in range(k - 1, -1, -1):
            if fv[i] <= thresh:
                w[i] = w[j]
                j -= 1
            else:
                w[i] = 0.0
        passes += 1
        s = 0.0
        for i in range(k):
            s += w[i] * fv[i]
        return passes if s <= cap + cap_tol else -1

    for it in range(max_outer):
        if hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        for i in range(k):
            w[i] = orig[i] - mid * fv[i]
        _simplex_project(w, total, free)
        passes += 1
        s = 0.0
        for i in range(k):
            s += w[i] * fv[i]
        if s > cap:
            lo = mid
        else:
            hi = mid
    for i in range(k):
        w[i] = orig[i] - hi * fv[i]
    _simplex_project(w, total, free)
    passes += 1
    s = 0.0
    for i in range(k):
        s += w[i] * fv[i]
    if s <= cap + cap_tol:
        return passes
    return -1
