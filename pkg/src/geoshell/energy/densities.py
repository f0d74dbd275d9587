"""Pointwise elastic densities and material parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InadmissibleStateError


@dataclass(frozen=True)
class MaterialParams:
    """Lamé constants and shell thickness; the defaults are the usual λ = μ = 1, δ = 0.01."""

    lam: float = 1.0
    mu: float = 1.0
    delta: float = 0.01

    def __post_init__(self):
        if self.lam < 0 or self.mu <= 0 or self.delta <= 0:
            raise ValueError(f"invalid material parameters {self}")

    def as_array(self):
        return np.array([self.lam, self.mu, self.delta], dtype=float)


def membrane_density(G, params=MaterialParams()):
    """Isotropic membrane density of a 2x2 Cauchy-Green tensor ``G``; zero at the identity."""
    G = np.asarray(G, dtype=float)
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if not det > 0.0:
        raise InadmissibleStateError(f"det G = {det:.3g} <= 0")
    lam, mu = params.lam, params.mu
    return (0.5 * mu * np.trace(G) + 0.25 * lam * det
            - 0.25 * (2.0 * mu + lam) * np.log(det) - mu - 0.25 * lam)


def bending_density(Q):
    """Squared Frobenius norm of a 2x2 relative shape operator."""
    Q = np.asarray(Q, dtype=float)
    return float(np.sum(Q * Q))
