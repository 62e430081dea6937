"""Poroelastic constants per region and the jump-stabilization weight."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class RegionMaterial:
    """Linear isotropic poroelastic skeleton plus a single fluid.

    ``K_s`` and ``K_f`` accept ``math.inf`` for incompressible grains or
    fluid; ``1/inf`` is exactly zero in IEEE arithmetic so the undrained
    limit carries no rounding.
    """

    K_dr: float
    nu: float
    phi0: float
    kappa: float
    K_s: float = math.inf
    K_f: float = math.inf
    mu_f: float = 1.0e-3
    rho_f: float = 1000.0
    rho_s: float = 2700.0

    @property
    def grains_incompressible(self):
        return math.isinf(self.K_s)

    @property
    def fluid_incompressible(self):
        return math.isinf(self.K_f)

    def validate(self):
        if not self.K_dr > 0:
            raise ConfigError(f"K_dr must be positive, got {self.K_dr}")
        if self.nu >= 0.5:
            raise ConfigError(
                f"nu={self.nu} gives an incompressible skeleton, which is not supported")
        if not self.nu > -1:
            raise ConfigError(f"nu must exceed -1, got {self.nu}")
        if not 0 < self.phi0 < 1:
            raise ConfigError(f"phi0 must lie in (0, 1), got {self.phi0}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be non-negative, got {self.kappa}")
        if not self.K_s > 0 or not self.K_f > 0:
            raise ConfigError("K_s and K_f must be positive")
        if not self.mu_f > 0 or not self.rho_f > 0:
            raise ConfigError("mu_f and rho_f must be positive")
        b = 1.0 - self.K_dr / self.K_s
        if not 0 < b <= 1:
            raise ConfigError(f"Biot coefficient {b} outside (0, 1]; need K_s > K_dr")
        return self


@dataclass(frozen=True)
class Moduli:
    G: float
    lam: float
    b: float
    invN: float
    invM: float


def derive_moduli(m: RegionMaterial) -> Moduli:
    m.validate()
    G = 3.0 * m.K_dr * (1.0 - 2.0 * m.nu) / (2.0 * (1.0 + m.nu))
    lam = m.K_dr - 2.0 * G / 3.0
    b = 1.0 - m.K_dr / m.K_s
    invN = (b - m.phi0) / m.K_s
    invM = invN + m.phi0 / m.K_f
    return Moduli(G=G, lam=lam, b=b, invN=invN, invM=invM)


@dataclass(frozen=True)
class StabilizationConfig:
    enabled: bool = False
    c: float = 1.0
    # None means every region
    regions: frozenset | None = None

    def __post_init__(self):
        if self.enabled and not self.c > 0:
            raise ConfigError(f"stabilization constant c must be positive, got {self.c}")
        if self.regions is not None:
            object.__setattr__(self, "regions", frozenset(int(r) for r in self.regions))


def compute_tau(lam: float, G: float, c: float) -> float:
    """Jump-stabilization weight ``c * 9 / (32 (lam + 4 G))`` in 1/Pa."""
    denom = lam + 4.0 * G
    if not denom > 0:
        raise ConfigError(f"lam + 4G must be positive, got {denom}")
    if c < 0:
        raise ConfigError(f"c must be non-negative, got {c}")
    return c * 9.0 / (32.0 * denom)
