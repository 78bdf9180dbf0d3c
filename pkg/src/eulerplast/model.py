"""Bundle of everything a time step needs besides the state."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .constitutive import CutoffParams, DissipationParams, MaterialModel
from .fields import Grid


@dataclass(frozen=True)
class SolverSettings:
    lin_tol: float = 1e-9
    lin_maxiter: int = 500
    picard_momentum: int = 1
    picard_flow_max: int = 30
    picard_flow_tol: float = 1e-8
    cfl_cap: float = 0.9


@dataclass(frozen=True)
class UniformGravity:
    g: tuple = (0.0, 0.0)
    kind = "uniform"

    def __call__(self, grid, t=0.0):
        return np.broadcast_to(np.asarray(self.g, dtype=float), grid.shape + (2,))

    @property
    def is_zero(self):
        return not any(self.g)


@dataclass(frozen=True)
class StirringForce:
    """Divergence-free body acceleration g = A curl(sin^2(pi x/L) sin^2(pi y/L)) / pi."""
    amplitude: float = 0.1
    kind = "stirring"

    def __call__(self, grid, t=0.0):
        x = grid.coords[..., 0] / grid.lx
        y = grid.coords[..., 1] / grid.ly
        sx, sy = np.sin(math.pi * x), np.sin(math.pi * y)
        gx = self.amplitude * sx ** 2 * np.sin(2 * math.pi * y)
        gy = -self.amplitude * np.sin(2 * math.pi * x) * sy ** 2
        return np.stack([gx, gy], axis=-1)

    @property
    def is_zero(self):
        return self.amplitude == 0.0


@dataclass(frozen=True)
class Model:
    grid: Grid
    material: MaterialModel
    dissipation: DissipationParams = field(default_factory=DissipationParams)
    cutoff: CutoffParams = field(default_factory=CutoffParams)
    gravity: object = field(default_factory=UniformGravity)
    solver: SolverSettings = field(default_factory=SolverSettings)
    hardening_in_total: bool = True

    def rho_R(self, X):
        return self.material.rho_R * self.material.scale(X)

    def wave_speed(self):
        """Upper bound of the elastic (longitudinal) wave speed over the domain."""
        s = np.asarray(self.material.scale(self.grid.coords), dtype=float)
        m = self.material
        return math.sqrt((m.K_E + 2.0 * m.G_E) * float(s.max()) / (m.rho_R * float(s.min())))
