"""Isotropic linear elasticity in 2D: kinematics, Lame stress, energy density.

Functions accept plain arrays or tape values alike, so the same expressions
serve training (on the tape) and post-processing (plain numpy).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PLANE_STRESS = "plane_stress"
PLANE_STRAIN = "plane_strain"


@dataclass(frozen=True)
class Material:
    E: float
    nu: float
    assumption: str = PLANE_STRESS

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"Poisson's ratio must lie in (-1, 0.5), got {self.nu}")
        if self.assumption not in (PLANE_STRESS, PLANE_STRAIN):
            raise ValueError(f"unknown plane assumption {self.assumption!r}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        """Lame's first parameter of the 3D material."""
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def lam_eff(self) -> float:
        """In-plane lambda: unchanged for plane strain, 2 lam mu / (lam + 2 mu) for plane stress."""
        if self.assumption == PLANE_STRAIN:
            return self.lam
        return 2.0 * self.lam * self.mu / (self.lam + 2.0 * self.mu)

    @property
    def constrained_modulus(self) -> float:
        """sigma_xx / eps_xx when eps_yy = eps_xy = 0."""
        return self.lam_eff + 2.0 * self.mu

    def compliance(self) -> np.ndarray:
        """Inverse of the in-plane stiffness in (xx, yy, xy) tensor components."""
        lam, mu = self.lam_eff, self.mu
        C = np.array([[lam + 2 * mu, lam, 0.0], [lam, lam + 2 * mu, 0.0], [0.0, 0.0, 2 * mu]])
        return np.linalg.inv(C)


class Strain(NamedTuple):
    xx: object
    yy: object
    xy: object  # tensor component, half the engineering shear


class Stress(NamedTuple):
    xx: object
    yy: object
    xy: object


def strain_from_gradient(dux_dx, dux_dy, duy_dx, duy_dy) -> Strain:
    return Strain(dux_dx, duy_dy, 0.5 * (dux_dy + duy_dx))


def stress(material: Material, eps: Strain) -> Stress:
    lam, mu = material.lam_eff, material.mu
    trace = lam * (eps.xx + eps.yy)
    return Stress(trace + 2.0 * mu * eps.xx, trace + 2.0 * mu * eps.yy, 2.0 * mu * eps.xy)


def energy_density(sig: Stress, eps: Strain):
    return 0.5 * (sig.xx * eps.xx + sig.yy * eps.yy + 2.0 * (sig.xy * eps.xy))


def strain_energy_density(material: Material, eps: Strain):
    return energy_density(stress(material, eps), eps)


def von_mises(sig: Stress):
    sxx, syy, sxy = (np.asarray(c, dtype=float) for c in sig)
    return np.sqrt(sxx * sxx - sxx * syy + syy * syy + 3.0 * sxy * sxy)


def traction(sig: Stress, normal) -> tuple:
    """sigma . n for unit normal(s) n = (nx, ny)."""
    nx, ny = normal
    return sig.xx * nx + sig.xy * ny, sig.xy * nx + sig.yy * ny
