# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the batch ranking-loss kernel.

Mirrors kernels/_ref.py: same query construction, same accumulation
order (ascending query index), same closed forms. Keep the two in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p, pow

cnp.import_array()

BACKEND_NAME = "cython"

DEF V_O = 0
DEF V_IU = 1
DEF V_IUP = 2
DEF V_IB = 3
DEF V_DS = 4
DEF V_DQ = 5
DEF V_AP = 6


cdef inline double _sig(double x, double tau, double* deriv) nogil:
    cdef double t = x / tau
    cdef double v, e
    if t >= 0:
        v = 1.0 / (1.0 + exp(-t))
    else:
        e = exp(t)
        v = e / (1.0 + e)
    deriv[0] = v * (1.0 - v) / tau
    return v


cdef inline double _loss_value(int variant, double r, double rp,
                               double b, double alpha) nogil:
    cdef double br
    if variant == V_O:
        return r
    elif variant == V_IU:
        return (1.0 + r) * log1p(r)
    elif variant == V_IUP:
        return (1.0 + r) * log1p(r) - r
    elif variant == V_IB:
        br = b * r
        return (br - log1p(br)) / (b * b)
    elif variant == V_DS:
        return log1p(r)
    elif variant == V_DQ:
        return 1.0 - pow(1.0 + r, -alpha)
    else:  # V_AP
        return 1.0 - (1.0 + rp) / (1.0 + rp + r)


cdef inline double _loss_dneg(int variant, double r, double rp,
                              double b, double alpha) nogil:
    cdef double denom
    if variant == V_O:
        return 1.0
    elif variant == V_IU:
        return log1p(r) + 1.0
    elif variant == V_IUP:
        return log1p(r)
    elif variant == V_IB:
        return r / (1.0 + b * r)
    elif variant == V_DS:
        return 1.0 / (1.0 + r)
    elif variant == V_DQ:
        return alpha * pow(1.0 + r, -alpha - 1.0)
    else:  # V_AP
        denom = 1.0 + rp + r
        return (1.0 + rp) / (denom * denom)


cdef inline double _loss_dpos(double r, double rp) nogil:
    cdef double denom = 1.0 + rp + r
    return -r / (denom * denom)


def rank_loss_and_grad(cnp.ndarray[cnp.float64_t, ndim=2] sims,
                       cnp.ndarray[cnp.int64_t, ndim=1] labels,
                       int variant, double tau, double b, double alpha):
    """Loss and d(loss)/d(similarity) over all within-batch queries."""
    cdef Py_ssize_t n = sims.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((n, n))
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pos_idx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] neg_idx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_neg = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_pos = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d_neg = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d_pos = np.empty(n)

    cdef Py_ssize_t q, i, j, npos, nneg
    cdef int n_queries = 0
    cdef long lq
    cdef double total = 0.0, qsum, w, si, g, gp, acc, di, r, rp

    for q in range(n):
        lq = labels[q]
        for j in range(n):
            if j != q and labels[j] == lq:
                n_queries += 1
                break
    if n_queries == 0:
        return 0.0, grad, 0

    for q in range(n):
        lq = labels[q]
        npos = 0
        nneg = 0
        for j in range(n):
            if j == q:
                continue
            if labels[j] == lq:
                pos_idx[npos] = j
                npos += 1
            else:
                neg_idx[nneg] = j
                nneg += 1
        if npos == 0:
            continue

        for i in range(npos):
            si = sims[q, pos_idx[i]]
            r = 0.0
            for j in range(nneg):
                r += _sig(sims[q, neg_idx[j]] - si, tau, &gp)
            r_neg[i] = r
            if variant == V_AP:
                rp = 0.0
                for j in range(npos):
                    if j != i:
                        rp += _sig(sims[q, pos_idx[j]] - si, tau, &gp)
                r_pos[i] = rp
            else:
                r_pos[i] = 0.0

        qsum = 0.0
        for i in range(npos):
            qsum += _loss_value(variant, r_neg[i], r_pos[i], b, alpha)
            d_neg[i] = _loss_dneg(variant, r_neg[i], r_pos[i], b, alpha)
            if variant == V_AP:
                d_pos[i] = _loss_dpos(r_neg[i], r_pos[i])
        total += qsum / (npos * n_queries)

        w = 1.0 / (n_queries * npos)
        for i in range(npos):
            si = sims[q, pos_idx[i]]
            di = d_neg[i]
            acc = 0.0
            for j in range(nneg):
                _sig(sims[q, neg_idx[j]] - si, tau, &gp)
                grad[q, neg_idx[j]] += w * di * gp
                acc += gp
            grad[q, pos_idx[i]] -= w * di * acc
            if variant == V_AP:
                di = d_pos[i]
                acc = 0.0
                for j in range(npos):
                    if j == i:
                        continue
                    _sig(sims[q, pos_idx[j]] - si, tau, &gp)
                    grad[q, pos_idx[j]] += w * di * gp
                    acc += gp
                grad[q, pos_idx[i]] -= w * di * acc

    return total, grad, n_queries
