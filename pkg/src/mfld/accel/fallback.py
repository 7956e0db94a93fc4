"""Pure-numpy implementation of the self-balancing halving walk.

Reference implementation for the compiled extension; identical in behaviour
(up to floating-point summation order in the signed-discrepancy dot product).
"""

import math

import numpy as np


def halve_walk(K, log_term, uniforms):
    """Select one point per consecutive pair via the signed kernel walk.

    Args:
      K: (m, m) Gram matrix of the halve input under the thinning kernel.
      log_term: 2*ln(2/delta_i), with delta_i the per-round failure budget.
      uniforms: (m/2,) uniform draws, one per pair.

    Returns (m/2,) indices into the input: the selected half, in pair order.

    The walk keeps a signed discrepancy function f (coefficients +-1 over
    processed points) and a sub-Gaussian scale sig^2; each pair's swap
    probability is 0.5*(1 - theta/a) with theta = f(x) - f(y) clipped to the
    adaptive threshold a.
    """
    n2 = uniforms.shape[0]
    coef = np.zeros(2 * n2)
    out = np.empty(n2, dtype=np.intp)
    sig_sqd = 0.0
    for i in range(n2):
        ix = 2 * i
        iy = ix + 1
        b2 = K[ix, ix] + K[iy, iy] - 2.0 * K[ix, iy]
        if b2 < 0.0:
            b2 = 0.0
        a = max(math.sqrt(sig_sqd * b2 * log_term), b2)
        if sig_sqd == 0.0:
            sig_sqd = b2
        else:
            update = 1.0 + (b2 - 2.0 * a) * b2 / sig_sqd
            if update > 0.0:
                sig_sqd += b2 * update
        prob = 0.5
        if a > 0.0:
            theta = float(coef[:ix] @ (K[:ix, ix] - K[:ix, iy])) if i else 0.0
            theta = min(max(theta, -a), a)
            prob = 0.5 * (1.0 - theta / a)
        if uniforms[i] < prob:
            out[i] = iy
            coef[ix] = 1.0
            coef[iy] = -1.0
        else:
            out[i] = ix
            coef[ix] = -1.0
            coef[iy] = 1.0
    return out


def halve_walk_batch(K, log_term, uniforms):
    """Run `halve_walk` over a stack of blocks (b, m, m) -> (b, m/2)."""
    nb = K.shape[0]
    out = np.empty((nb, uniforms.shape[1]), dtype=np.intp)
    for b in range(nb):
        out[b] = halve_walk(K[b], log_term, uniforms[b])
    return out
