"""Stability diagnostics: 1D amplification factor, oscillation index, null-space residual."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .errors import ConfigError
from .mesh import StructuredMesh, checkerboard_vector, interior_nodes

OSCILLATORY_THRESHOLD = 0.5
SMOOTH_THRESHOLD = 0.1


@dataclass(frozen=True)
class VonNeumannParams:
    M_biot: float
    b: float
    K_dr: float
    k: float
    mu: float
    dx: float
    dt: float
    tau: float
    theta: float

    def validate(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ConfigError("dx and dt must be positive")
        if self.tau < 0 or self.k < 0:
            raise ConfigError("tau and k must be non-negative")
        if not 0 <= self.theta <= math.pi:
            raise ConfigError(f"theta must lie in [0, pi], got {self.theta}")
        return self


def amplification_factor(p: VonNeumannParams) -> float:
    """Nonzero amplification root of the 1D explicit fixed-stress scheme with jump stabilization.

    Numerator and denominator are divided by the Biot modulus so that an
    infinite modulus is handled exactly.
    """
    p.validate()
    # 1 - cos(theta) without cancellation at small theta
    one_minus_cos = 2.0 * math.sin(0.5 * p.theta) ** 2
    inv_m = 0.0 if math.isinf(p.M_biot) else 1.0 / p.M_biot
    storage = p.dx ** 2 * p.mu * (p.K_dr * inv_m + p.b ** 2)
    stab = 2.0 * p.mu * p.K_dr * p.dx ** 3 * p.tau * one_minus_cos
    drain = 2.0 * p.K_dr * p.dt * p.k * one_minus_cos
    return (storage + stab) / (storage + drain + stab)


def stability_sweep(base: VonNeumannParams, thetas, dts, taus):
    """Rows ``(theta, dt, tau, gamma)`` over the product grid; checks ``gamma <= 1``."""
    rows = []
    for theta, dt, tau in product(thetas, dts, taus):
        g = amplification_factor(replace(base, theta=float(theta), dt=float(dt), tau=float(tau)))
        rows.append((float(theta), float(dt), float(tau), g))
    worst = max(r[3] for r in rows)
    if worst > 1.0:
        raise AssertionError(f"amplification factor {worst!r} exceeds one")
    return rows


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "dt", "tau", "gamma"])
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])


def _jump_ratio(p, left, right, cells):
    mean = p[cells].mean()
    spread = np.sum((p[cells] - mean) ** 2)
    jumps = np.sum((p[left] - p[right]) ** 2)
    return jumps, spread


def oscillation_index(p, mesh: StructuredMesh, regions=None) -> float:
    """Face-jump energy over variance, relative to the checkerboard's own ratio.

    Only cells in ``regions`` (all cells if ``None``) and faces with both
    neighbours in it count.  Returns 0 for a constant field, 1 for the
    checkerboard; values are clipped to 1 because the checkerboard is not
    exactly the top eigenvector of the masked face graph.
    """
    p = np.asarray(p, dtype=float)
    inside = mesh.cells_in_regions(regions)
    f = mesh.interior_faces
    on = inside[f.left] & inside[f.right]
    if not on.any():
        raise ConfigError(f"mask {regions!r} contains no interior face")
    left, right = f.left[on], f.right[on]
    cells = np.flatnonzero(inside)
    jumps, spread = _jump_ratio(p, left, right, cells)
    scale = np.max(np.abs(p[cells])) if len(cells) else 0.0
    if spread <= (1e-14 * scale) ** 2 * len(cells) or spread == 0.0:
        return 0.0
    cb = checkerboard_vector(mesh)
    cb_jumps, cb_spread = _jump_ratio(cb, left, right, cells)
    if cb_spread == 0.0:
        raise ConfigError(f"checkerboard is constant on mask {regions!r}")
    return float(min(1.0, (jumps / spread) / (cb_jumps / cb_spread)))


def interior_dofs(mesh: StructuredMesh) -> np.ndarray:
    nodes = interior_nodes(mesh)
    return (3 * nodes[:, None] + np.arange(3)).ravel()


def nullspace_residual(B, p_mode, dofs) -> float:
    """max |B^T p_mode| over the selected displacement dofs."""
    g = B.T @ np.asarray(p_mode, dtype=float)
    dofs = np.asarray(dofs, dtype=np.int64)
    return float(np.max(np.abs(g[dofs]))) if len(dofs) else 0.0
