"""One-sided (Hestenes) Jacobi sweeps, compiled with numba.

The kernel orthogonalises the *rows* of a wide matrix ``m`` (rows <= cols) in
place and accumulates the applied plane rotations in ``v`` so that on exit
``a == v @ m`` and the rows of ``m`` are mutually orthogonal.
"""

import numba
import numpy as np

EPS = np.finfo(np.float64).eps


@numba.njit(cache=True)
def jacobi_rows(m, v, tol, max_sweeps):
    """Run cyclic-by-row sweeps until no pair needs rotating.

    Rows whose squared norm is at roundoff level relative to the whole matrix
    are numerically zero and are left alone; rotating them never converges.
    Returns the number of sweeps used, or -1 if ``max_sweeps`` was exhausted.
    """
    n = m.shape[0]
    ncols = m.shape[1]
    total = 0.0
    for i in range(n):
        for j in range(ncols):
            total += m[i, j] * m[i, j]
    floor = total * (n * 2.220446049250313e-16) ** 2
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for j in range(ncols):
                    mp = m[p, j]
                    mq = m[q, j]
                    alpha += mp * mp
                    beta += mq * mq
                    gamma += mp * mq
                if alpha <= floor or beta <= floor:
                    continue
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for j in range(ncols):
                    mp = m[p, j]
                    mq = m[q, j]
                    m[p, j] = c * mp - s * mq
                    m[q, j] = s * mp + c * mq
                for i in range(n):
                    vp = v[i, p]
                    vq = v[i, q]
                    v[i, p] = c * vp - s * vq
                    v[i, q] = s * vp + c * vq
        if not rotated:
            return sweep + 1
    return -1
