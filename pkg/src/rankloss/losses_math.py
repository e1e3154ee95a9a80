"""Closed-form loss values and rank derivatives shared by the numpy
kernel backend and the public loss API.

Variants (R is the relaxed count of negatives above a positive):

=============  ==============================  =========================
variant        loss per positive               d(loss)/dR
=============  ==============================  =========================
O              R                               1
I_u            (1+R) log(1+R)                  log(1+R) + 1
I_u_prime      (1+R) log(1+R) - R              log(1+R)
I_b            (bR - log(1+bR)) / b^2          R / (1+bR)
D_s            log(1+R)                        1 / (1+R)
D_q            1 - (1+R)^-a                    a (1+R)^-(a+1)
smooth_ap      1 - (1+R_p)/(1+R_p+R)           (1+R_p)/(1+R_p+R)^2
=============  ==============================  =========================

smooth_ap additionally depends on R_p, the relaxed count of positives
above the target positive; its partial w.r.t. R_p is -R/(1+R_p+R)^2.
"""

from __future__ import annotations

import numpy as np

VARIANT_CODES = {
    "O": 0,
    "I_u": 1,
    "I_u_prime": 2,
    "I_b": 3,
    "D_s": 4,
    "D_q": 5,
    "smooth_ap": 6,
}

VARIANT_NAMES = {code: name for name, code in VARIANT_CODES.items()}


def loss_terms(variant, r_neg, r_pos, b, alpha):
    """Per-positive loss values and derivatives, vectorized over R.

    Returns (values, d/dR_neg, d/dR_pos); the last is None except for
    smooth_ap.
    """
    # dtype-preserving: the finite-difference oracle evaluates in extended
    # precision through this same code path
    r = np.asarray(r_neg)
    if variant == VARIANT_CODES["O"]:
        return r, np.ones_like(r), None
    if variant == VARIANT_CODES["I_u"]:
        lg = np.log1p(r)
        return (1.0 + r) * lg, lg + 1.0, None
    if variant == VARIANT_CODES["I_u_prime"]:
        lg = np.log1p(r)
        return (1.0 + r) * lg - r, lg, None
    if variant == VARIANT_CODES["I_b"]:
        br = b * r
        return (br - np.log1p(br)) / (b * b), r / (1.0 + br), None
    if variant == VARIANT_CODES["D_s"]:
        return np.log1p(r), 1.0 / (1.0 + r), None
    if variant == VARIANT_CODES["D_q"]:
        base = (1.0 + r) ** (-alpha)
        return 1.0 - base, alpha * base / (1.0 + r), None
    if variant == VARIANT_CODES["smooth_ap"]:
        rp = np.asarray(r_pos)
        denom = 1.0 + rp + r
        value = 1.0 - (1.0 + rp) / denom
        d_neg = (1.0 + rp) / denom**2
        d_pos = -r / denom**2
        return value, d_neg, d_pos
    raise ValueError(f"unknown variant code {variant}")
