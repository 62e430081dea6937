"""Benchmark scenarios: the cantilever plate and the spiral staircase."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .assembly import SourceLoad, TractionLoad, assemble_loads, assemble_system
from .errors import ConfigError
from .materials import RegionMaterial, StabilizationConfig
from .mesh import SIDES, StructuredMesh, build_mesh, select_boundary
from .steppers import CoupledProblem

DAY = 86400.0
MONTH = 30.0 * DAY
YEAR = 365.0 * DAY

BC_KINDS = ("fixed", "roller", "free")


@dataclass
class Scenario:
    name: str
    mesh: StructuredMesh
    materials: dict
    mechanical_bcs: dict
    tractions: tuple = ()
    sources: tuple = ()
    p0: float = 0.0
    index_regions: tuple | None = None
    stab_regions: tuple | None = None
    body_force: tuple | None = None
    # (side, component, value) displacement constraints on top of mechanical_bcs
    prescribed: tuple = ()
    params: object = None

    def __post_init__(self):
        missing = set(SIDES) - set(self.mechanical_bcs)
        if missing:
            raise ConfigError(f"no mechanical condition for sides {sorted(missing)}")
        for side, kind in self.mechanical_bcs.items():
            if side not in SIDES or kind not in BC_KINDS:
                raise ConfigError(f"bad mechanical condition {side!r}: {kind!r}")

    def constraints(self):
        """Sorted constrained dofs and their values."""
        values = {}
        for side, kind in self.mechanical_bcs.items():
            if kind == "free":
                continue
            nodes = select_boundary(self.mesh, side).nodes
            comps = range(3) if kind == "fixed" else [SIDES.index(side) // 2]
            for c in comps:
                for dof in 3 * nodes + c:
                    values[int(dof)] = 0.0
        for side, comp, value in self.prescribed:
            for dof in 3 * select_boundary(self.mesh, side).nodes + int(comp):
                values[int(dof)] = float(value)
        dofs = np.array(sorted(values), dtype=np.int64)
        return dofs, np.array([values[d] for d in dofs])

    def stabilization_for(self, stab: StabilizationConfig) -> StabilizationConfig:
        if stab.enabled and stab.regions is None and self.stab_regions is not None:
            return replace(stab, regions=frozenset(self.stab_regions))
        return stab

    def build_problem(self, stab: StabilizationConfig | None = None) -> CoupledProblem:
        stab = self.stabilization_for(stab or StabilizationConfig())
        system = assemble_system(self.mesh, self.materials, stab)
        dofs, values = self.constraints()
        return CoupledProblem(system, dofs, values)

    def loads(self, t):
        return assemble_loads(self.mesh, t, self.tractions, self.sources, self.body_force)


def _apply_overrides(params, overrides):
    names = {f.name for f in fields(params)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown scenario parameter(s): {sorted(unknown)}")
    return replace(params, **overrides)


@dataclass(frozen=True)
class CantileverParams:
    nx: int = 20
    nz: int = 20
    length: float = 1.0
    height: float = 1.0
    thickness: float = 1.0
    K_dr: float = 5.0e9
    nu: float = 0.25
    K_s: float = math.inf
    K_f: float = math.inf
    phi0: float = 0.05
    kappa: float = 0.0
    mu_f: float = 1.0e-3
    rho_f: float = 1000.0
    force: float = 100.0
    period: float = 10.0 * DAY
    freeze_time: float | None = None
    freeze_force: float | None = None
    p0: float = 0.0


def build_cantilever(**overrides) -> Scenario:
    """Plate clamped on x-, sinusoidal vertical load on z+, one cell thick in y."""
    prm = _apply_overrides(CantileverParams(), overrides)
    mesh = build_mesh(prm.nx, 1, prm.nz, prm.length / prm.nx, prm.thickness,
                      prm.height / prm.nz)
    mat = RegionMaterial(K_dr=prm.K_dr, nu=prm.nu, phi0=prm.phi0, kappa=prm.kappa,
                         K_s=prm.K_s, K_f=prm.K_f, mu_f=prm.mu_f, rho_f=prm.rho_f)
    bcs = {"x-": "fixed", "x+": "free", "y-": "roller", "y+": "roller",
           "z-": "free", "z+": "free"}
    load = TractionLoad("z+", prm.force, (0.0, 0.0, 1.0), prm.period,
                        prm.freeze_time, prm.freeze_force)
    return Scenario("cantilever", mesh, {0: mat.validate()}, bcs, tractions=(load,),
                    p0=prm.p0, params=prm)


CHANNEL, BARRIER = 0, 1
# quadrant (qx, qy) visited in this order as the staircase climbs
_SPIRAL = ((0, 0), (1, 0), (1, 1), (0, 1))


@dataclass(frozen=True)
class StaircaseParams:
    n: int = 12
    cell_size: float = 100.0
    layers: int = 4
    K_dr: float = 5.0e9
    nu: float = 0.25
    K_s: float = math.inf
    K_f: float = math.inf
    channel_kappa: float = 9.8e-13
    channel_phi0: float = 0.2
    barrier_kappa: float = 0.0
    barrier_phi0: float = 0.05
    mu_f: float = 1.0e-3
    rho_f: float = 1000.0
    injection_rate: float = 1.0
    injection_end: float = 30.0 * YEAR
    injection_cells: tuple | None = None
    p0: float = 0.0


def staircase_region(prm: StaircaseParams):
    half = prm.n // 2
    per_layer = prm.n // prm.layers

    def region(i, j, k):
        quad = _SPIRAL.index((int(i >= half), int(j >= half)))
        layer = k // per_layer
        steps = {layer % 4, (layer + 1) % 4}
        return CHANNEL if quad in steps else BARRIER

    return region


def default_injection_cells(prm: StaircaseParams):
    """Four bottom cells at the centre of the first channel quadrant."""
    c = prm.n // 4
    return tuple(int(i + prm.n * j) for j in (c - 1, c) for i in (c - 1, c))


def build_staircase(**overrides) -> Scenario:
    """Drained channel spiralling upward through an undrained barrier.

    The n^3 grid is split into 2x2 quadrant columns and ``layers`` vertical
    slabs; in slab ``L`` the channel occupies quadrants ``L`` and ``L+1`` of
    the spiral order, so consecutive steps share a face.
    """
    prm = _apply_overrides(StaircaseParams(), overrides)
    if prm.n < 4 or prm.n % 2 or prm.layers < 1 or prm.n % prm.layers:
        raise ConfigError(
            f"staircase layout needs even n >= 4 divisible by layers, got n={prm.n}, "
            f"layers={prm.layers}")
    h = prm.cell_size
    mesh = build_mesh(prm.n, prm.n, prm.n, h, h, h, staircase_region(prm))
    common = dict(K_dr=prm.K_dr, nu=prm.nu, K_s=prm.K_s, K_f=prm.K_f, mu_f=prm.mu_f,
                  rho_f=prm.rho_f)
    mats = {
        CHANNEL: RegionMaterial(phi0=prm.channel_phi0, kappa=prm.channel_kappa, **common).validate(),
        BARRIER: RegionMaterial(phi0=prm.barrier_phi0, kappa=prm.barrier_kappa, **common).validate(),
    }
    cells = prm.injection_cells
    if cells is None:
        cells = default_injection_cells(prm)
    cells = tuple(int(c) for c in cells)
    if any(c < 0 or c >= mesh.n_cells for c in cells):
        raise ConfigError("injection cell index out of range")
    if any(mesh.region_of_cell[c] != CHANNEL for c in cells):
        raise ConfigError("injection cells must lie in the channel region")
    bcs = {s: "roller" for s in SIDES}
    bcs["z+"] = "free"
    src = SourceLoad(cells, prm.injection_rate, prm.rho_f, 0.0, prm.injection_end)
    return Scenario("staircase", mesh, mats, bcs, sources=(src,), p0=prm.p0,
                    index_regions=(BARRIER,), stab_regions=(BARRIER,), params=prm)


BUILDERS = {"cantilever": build_cantilever, "staircase": build_staircase}


def build_scenario(name, **overrides) -> Scenario:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {sorted(BUILDERS)}") from None
    return builder(**overrides)
