"""Small builders shared by the tests."""
import numpy as np

from eulerplast.config import parse_config
from eulerplast.scenarios import build_model


def model_for(scenario="shear_heating", extra="", nx=None):
    text = f"[run]\nscenario = {scenario}\n{extra}"
    if nx:
        text += f"\n[grid]\nnx = {nx}\nny = {nx}\n"
    return build_model(parse_config(text))


def uniform_Fp(grid, M=None):
    M = np.eye(2) if M is None else M
    return np.broadcast_to(M, grid.shape + (2, 2)).copy()
