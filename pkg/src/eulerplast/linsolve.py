"""Matrix-free preconditioned conjugate gradients in a weighted inner product."""
import numpy as np

from .errors import LinearSolveFailure


def _dot(a, b, w):
    return float(np.sum(np.ascontiguousarray(a * b * w).ravel()))


def pcg(apply_A, b, x0, diag, weights, tol=1e-9, maxiter=500, mask=None, strict=True):
    """Solve A x = b for A self-adjoint positive definite w.r.t. ``weights``.

    ``diag`` is a positive Jacobi preconditioner of the same shape as b.
    ``mask`` (bool, broadcastable) restricts the unknowns; masked-out
    entries of x stay at their x0 values.  Convergence: weighted residual
    norm <= tol times the weighted norm of b.  Returns (x, iterations).  With ``strict=False`` the last
iterate is returned instead of raising when maxiter is reached (used for
inexact Newton directions).
    """
    w = weights
    if mask is not None:
        m = mask.astype(float)
        w = w * m
    x = np.array(x0, dtype=float, copy=True)
    r = b - apply_A(x)
    if mask is not None:
        r = r * m
    bnorm = np.sqrt(_dot(b, b, w))
    if bnorm == 0.0:
        bnorm = 1.0
    rnorm = np.sqrt(_dot(r, r, w))
    if rnorm <= tol * bnorm:
        return x, 0
    z = r / diag
    p = z.copy()
    rz = _dot(r, z, w)
    for k in range(1, maxiter + 1):
        Ap = apply_A(p)
        if mask is not None:
            Ap = Ap * m
        pAp = _dot(p, Ap, w)
        if not pAp > 0:
            raise LinearSolveFailure(f"conjugate gradients broke down (p.Ap = {pAp:.3e})")
        a = rz / pAp
        x = x + a * p
        r = r - a * Ap
        rnorm = np.sqrt(_dot(r, r, w))
        if not np.isfinite(rnorm):
            raise LinearSolveFailure("non-finite residual in conjugate gradients")
        if rnorm <= tol * bnorm:
            return x, k
        z = r / diag
        rz_new = _dot(r, z, w)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if not strict:
        return x, maxiter
    raise LinearSolveFailure(f"conjugate gradients stagnated: relative residual "
                             f"{rnorm / bnorm:.3e} after {maxiter} iterations")
