"""Pointwise tensor algebra and kinematic relations.

Tensors are numpy arrays whose trailing two axes hold a d x d matrix
(d = 2 or 3); any leading axes are batch axes, so every function works
on a single tensor as well as on a whole grid field.
"""
import numpy as np

from .errors import NonDeviatoricRate, SingularMatrix

SINGULAR_FLOOR = 1e-12


def identity(d, shape=()):
    out = np.zeros(tuple(shape) + (d, d))
    idx = np.arange(d)
    out[..., idx, idx] = 1.0
    return out


def trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def transpose(A):
    return np.swapaxes(A, -1, -2)


def ddot(A, B):
    """Full contraction A:B over the trailing two axes."""
    return np.sum(A * B, axis=(-2, -1))


def frob(A):
    return np.sqrt(ddot(A, A))


def sym(A):
    return 0.5 * (A + transpose(A))


def det(A):
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    if d == 2:
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    if d == 3:
        return (A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
                - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
                + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]))
    return np.linalg.det(A)


def cofactor(A):
    """Cofactor matrix, Cof A = det(A) A^{-T} for invertible A."""
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    C = np.empty_like(A)
    if d == 2:
        C[..., 0, 0] = A[..., 1, 1]
        C[..., 0, 1] = -A[..., 1, 0]
        C[..., 1, 0] = -A[..., 0, 1]
        C[..., 1, 1] = A[..., 0, 0]
        return C
    if d == 3:
        for i in range(3):
            i1, i2 = (i + 1) % 3, (i + 2) % 3
            for j in range(3):
                j1, j2 = (j + 1) % 3, (j + 2) % 3
                C[..., i, j] = A[..., i1, j1] * A[..., i2, j2] - A[..., i1, j2] * A[..., i2, j1]
        return C
    raise ValueError(f"cofactor supports d = 2, 3 only (got {d})")


def inverse(A, floor=SINGULAR_FLOOR):
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    D = det(A)
    scale = frob(A) ** d
    bad = ~(np.abs(D) > floor * scale)
    if np.any(bad):
        raise SingularMatrix(f"singular matrix: |det| = {np.min(np.abs(D)):.3e} at or below floor")
    return transpose(cofactor(A)) / D[..., None, None]


def dev(A):
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    return A - (trace(A) / d)[..., None, None] * identity(d)


def deformation_gradient(grad_xi):
    """F = (grad xi)^{-1}."""
    return inverse(grad_xi)


def elastic_strain(Fp, grad_xi):
    """Fe = (Fp grad xi)^{-1}, so that F = Fe Fp."""
    return inverse(np.asarray(Fp) @ np.asarray(grad_xi))


def velocity_gradient_split(grad_v, Fe, Lp):
    """Elastic distortion rate dFe/dt Fe^{-1} = grad v - Fe Lp Fe^{-1}."""
    Fe = np.asarray(Fe, dtype=float)
    return np.asarray(grad_v) - Fe @ np.asarray(Lp) @ inverse(Fe)


def expm(A, terms=6, radius=2.0 ** -5):
    """Matrix exponential by scaling and squaring around a Taylor core.

    Each matrix of a batch is scaled by its own power of two so that the
    result does not depend on what else is in the batch.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[-1]
    nrm = frob(A)
    s = np.zeros(nrm.shape, dtype=int)
    big = nrm > radius
    s[big] = np.ceil(np.log2(nrm[big] / radius)).astype(int)
    X = A / np.ldexp(1.0, s)[..., None, None]
    term = identity(d, A.shape[:-2])
    E = term.copy()
    for k in range(1, terms + 1):
        term = term @ X / k
        E = E + term
    for level in range(int(s.max()) if s.size else 0):
        mask = s > level
        E[mask] = E[mask] @ E[mask]
    return E


def exp_trace_free(L, tau):
    """exp(tau L) for trace-free L; raises NonDeviatoricRate otherwise."""
    L = np.asarray(L, dtype=float)
    tr = np.abs(trace(L))
    if np.any(tr > 1e-10 * np.maximum(frob(L), 1e-300)):
        raise NonDeviatoricRate("plastic rate has a nonzero trace")
    return expm(tau * L)
