"""Structured 2-D grid, collocated difference operators and field snapshots.

Values live on the (nx x ny) grid nodes x_ij = (i hx, j hy); the outer
ring of nodes sits on the walls of the box.  Each node owns the control
volume around it (half size on edges, quarter size in corners), which is
the quadrature used for every integral.  With these weights the ``sbp``
closure of the difference operator satisfies an exact summation-by-parts
identity, so discrete power identities close up to time-stepping error.

Array layout: a field is an ndarray of shape (nx, ny, *components);
gradients append one trailing axis holding the derivative direction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import os

import numpy as np

from .errors import ValidationError

CLOSURES = ("sbp", "second_order")


@dataclass(frozen=True)
class Grid:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        errs = []
        if self.nx < 8 or self.ny < 8:
            errs.append("grid needs nx, ny >= 8")
        if not (self.lx > 0 and self.ly > 0):
            errs.append("grid extent must be positive")
        if errs:
            raise ValidationError(errs)

    @property
    def hx(self):
        return self.lx / (self.nx - 1)

    @property
    def hy(self):
        return self.ly / (self.ny - 1)

    @property
    def h(self):
        return min(self.hx, self.hy)

    @property
    def extent(self):
        return (self.lx, self.ly)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @cached_property
    def coords(self):
        """Node positions, shape (nx, ny, 2)."""
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        X, Y = np.meshgrid(x, y, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def edge_weights(self):
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        return wx, wy

    @cached_property
    def cellvol(self):
        """Control-volume area of every node, shape (nx, ny)."""
        wx, wy = self.edge_weights
        return np.outer(wx, wy)

    @cached_property
    def boundary_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[[0, -1], :] = True
        m[:, [0, -1]] = True
        return m

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    @property
    def area(self):
        return self.lx * self.ly


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def integrate(grid, f):
    """Sum of f over all control volumes (fixed-order pairwise summation)."""
    f = np.asarray(f, dtype=float)
    return float(np.sum(np.ascontiguousarray(f * grid.cellvol).ravel()))


def inner(grid, a, b):
    """Weighted inner product of two fields of equal shape."""
    w = grid.cellvol.reshape(grid.shape + (1,) * (np.ndim(a) - 2))
    return float(np.sum(np.ascontiguousarray(a * b * w).ravel()))


# ---------------------------------------------------------------------------
# Difference operators
# ---------------------------------------------------------------------------

def _sl(axis, s, ndim):
    idx = [slice(None)] * ndim
    idx[axis] = s
    return tuple(idx)


def diff(f, axis, h, closure="sbp"):
    """First derivative along a grid axis (0 = x, 1 = y).

    Interior nodes use centered differences.  At the walls ``sbp`` uses the
    first-order one-sided difference that pairs with the node weights into
    an exact summation-by-parts rule; ``second_order`` uses the three-point
    one-sided formula.
    """
    f = np.asarray(f, dtype=float)
    nd = f.ndim
    out = np.empty_like(f)
    out[_sl(axis, slice(1, -1), nd)] = (f[_sl(axis, slice(2, None), nd)]
                                        - f[_sl(axis, slice(None, -2), nd)]) / (2.0 * h)
    f0, f1, f2 = (f[_sl(axis, k, nd)] for k in (0, 1, 2))
    g0, g1, g2 = (f[_sl(axis, k, nd)] for k in (-1, -2, -3))
    if closure == "sbp":
        out[_sl(axis, 0, nd)] = (f1 - f0) / h
        out[_sl(axis, -1, nd)] = (g0 - g1) / h
    elif closure == "second_order":
        out[_sl(axis, 0, nd)] = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
        out[_sl(axis, -1, nd)] = (3.0 * g0 - 4.0 * g1 + g2) / (2.0 * h)
    else:
        raise ValueError(f"unknown closure {closure!r}")
    return out


def gradient(grid, f, closure="sbp"):
    """Gradient; for a vector field v the result G has G[..., i, k] = d v_i / d x_k."""
    return np.stack([diff(f, 0, grid.hx, closure), diff(f, 1, grid.hy, closure)], axis=-1)


def divergence(grid, T, closure="sbp"):
    """Contract the trailing axis of T with the derivative direction."""
    T = np.asarray(T, dtype=float)
    return diff(T[..., 0], 0, grid.hx, closure) + diff(T[..., 1], 1, grid.hy, closure)


def sym_velocity_gradient(grid, v, closure="sbp"):
    G = gradient(grid, v, closure)
    return 0.5 * (G + np.swapaxes(G, -1, -2))


def zero_normal_derivative(G):
    """Remove the wall-normal derivative component at wall nodes.

    Applied to a gradient field this realizes a zero normal derivative on
    the walls, which is what the even-mirror ghost layer encodes.
    """
    G = np.array(G, dtype=float, copy=True)
    G[0, :, ..., 0] = 0.0
    G[-1, :, ..., 0] = 0.0
    G[:, 0, ..., 1] = 0.0
    G[:, -1, ..., 1] = 0.0
    return G


def neumann_gradient(grid, f):
    return zero_normal_derivative(gradient(grid, f))


def tensor_norm(G, ncomp_axes):
    """Frobenius norm over the trailing ``ncomp_axes`` axes."""
    axes = tuple(range(-ncomp_axes, 0))
    return np.sqrt(np.sum(G * G, axis=axes))


def p_laplacian_operator(grid, e_field, nu, exponent, coeff=None):
    """div(nu |grad e|^{p-2} grad e) with zero normal derivative of e on the walls.

    ``coeff`` optionally replaces |grad e|^{p-2} by a frozen field.
    """
    G = neumann_gradient(grid, e_field)
    if coeff is None:
        coeff = tensor_norm(G, G.ndim - 2) ** (exponent - 2.0)
    flux = nu * coeff.reshape(coeff.shape + (1,) * (G.ndim - 2)) * G
    return divergence(grid, flux)


def laplacian_compact(grid, theta, kappa, wall_flux=None):
    """Conservative compact-stencil div(kappa grad theta) per unit control volume.

    ``wall_flux`` is the inward boundary heat flux per unit wall length at
    every node (only wall nodes are read).  The weighted sum of the result
    equals the boundary integral of the flux exactly.
    """
    theta = np.asarray(theta, dtype=float)
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), theta.shape)
    wx, wy = grid.edge_weights
    net = np.zeros_like(theta)
    kx = 0.5 * (kappa[1:, :] + kappa[:-1, :])
    qx = kx * (theta[1:, :] - theta[:-1, :]) / grid.hx * wy[None, :]
    net[:-1, :] += qx
    net[1:, :] -= qx
    ky = 0.5 * (kappa[:, 1:] + kappa[:, :-1])
    qy = ky * (theta[:, 1:] - theta[:, :-1]) / grid.hy * wx[:, None]
    net[:, :-1] += qy
    net[:, 1:] -= qy
    if wall_flux is not None:
        net += wall_flux_density(grid, wall_flux) * grid.cellvol
    return net / grid.cellvol


def wall_length(grid):
    """Wall length attributed to every node (zero in the interior)."""
    wx, wy = grid.edge_weights
    L = np.zeros(grid.shape)
    L[0, :] += wy
    L[-1, :] += wy
    L[:, 0] += wx
    L[:, -1] += wx
    return L


def wall_flux_density(grid, flux):
    """Convert a nodal wall flux (per length) to a source per unit volume."""
    return np.asarray(flux, dtype=float) * wall_length(grid) / grid.cellvol


def boundary_integral(grid, flux):
    return float(np.sum(np.ascontiguousarray(np.asarray(flux) * wall_length(grid)).ravel()))


# ---------------------------------------------------------------------------
# Boundary conditions
# ---------------------------------------------------------------------------

def zero_boundary(grid, v):
    v = np.array(v, dtype=float, copy=True)
    v[grid.boundary_mask] = 0.0
    return v


def mirror_ghost(f, parity=1):
    """Pad one ghost layer on every side by reflection about the wall nodes.

    parity=+1 gives an even mirror (zero normal derivative), -1 an odd one
    (zero wall value).
    """
    f = np.asarray(f, dtype=float)
    pad = [(1, 1), (1, 1)] + [(0, 0)] * (f.ndim - 2)
    g = np.pad(f, pad, mode="reflect")
    if parity < 0:
        g[0, :] *= -1.0
        g[-1, :] *= -1.0
        g[:, 0] *= -1.0
        g[:, -1] *= -1.0
    return g


def apply_boundary_conditions(grid, state):
    """Return a copy of ``state`` with the wall velocity set to zero."""
    from dataclasses import replace
    return replace(state, v=zero_boundary(grid, state.v))


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------

MAGIC = "EPFLD1"
HEADER_BYTES = 64


def write_snapshot(path, grid, name, values, meta=None):
    """Write a field as a 64-byte text header plus little-endian doubles.

    Data are stored row-major with rows running along y: index
    (j, i, component).
    """
    values = np.asarray(values, dtype=float)
    ncomp = int(np.prod(values.shape[2:], dtype=int))
    header = f"{MAGIC} {grid.nx} {grid.ny} {ncomp} {name}"
    if len(header) >= HEADER_BYTES:
        raise ValueError(f"field name too long: {name!r}")
    header = header.ljust(HEADER_BYTES - 1) + "\n"
    data = np.ascontiguousarray(np.swapaxes(values.reshape(grid.nx, grid.ny, ncomp), 0, 1), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(data.tobytes())
    lines = [f"name = {name}", f"nx = {grid.nx}", f"ny = {grid.ny}", f"ncomp = {ncomp}",
             f"shape = {' '.join(str(s) for s in values.shape[2:]) or 'scalar'}",
             f"lx = {grid.lx!r}", f"ly = {grid.ly!r}", "layout = row-major (j, i, component), float64 little-endian"]
    for k, v in (meta or {}).items():
        lines.append(f"{k} = {v}")
    with open(str(path) + ".meta", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Return (name, nx, ny, array of shape (nx, ny, *shape)) for a snapshot file."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES).decode("ascii")
        raw = fh.read()
    parts = header.split()
    if not parts or parts[0] != MAGIC:
        raise ValueError(f"{path}: not an {MAGIC} snapshot")
    nx, ny, ncomp, name = int(parts[1]), int(parts[2]), int(parts[3]), parts[4]
    data = np.frombuffer(raw, dtype="<f8").reshape(ny, nx, ncomp)
    values = np.swapaxes(data, 0, 1).astype(float)
    shape = ()
    meta_path = str(path) + ".meta"
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            for line in fh:
                k, _, v = line.partition("=")
                if k.strip() == "shape" and v.strip() != "scalar":
                    shape = tuple(int(s) for s in v.split())
    if shape:
        values = values.reshape(nx, ny, *shape)
    elif ncomp == 1:
        values = values[..., 0]
    return name, nx, ny, values
