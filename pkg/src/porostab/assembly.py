"""Discrete operators of the coupled displacement/pressure system.

Displacement dofs are node-major: dof ``3*node + component``.  Pressures are
one per cell.  Matrices are returned in CSR form; COO duplicates are summed
by scipy in a fixed order, so assembly is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError
from .materials import RegionMaterial, StabilizationConfig, compute_tau, derive_moduli
from .mesh import StructuredMesh, select_boundary

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# natural coordinates of local node a + 2b + 4c
_LOCAL = np.array([[2 * a - 1, 2 * b - 1, 2 * c - 1]
                   for c in range(2) for b in range(2) for a in range(2)], dtype=float)


def shape_gradients(xi, h):
    """Physical gradients (8, 3) of the trilinear basis on a box with edges ``h``."""
    xi = np.asarray(xi, dtype=float)
    grads = np.empty((8, 3))
    for a, s in enumerate(_LOCAL):
        f = 1.0 + s * xi
        grads[a, 0] = s[0] * f[1] * f[2]
        grads[a, 1] = f[0] * s[1] * f[2]
        grads[a, 2] = f[0] * f[1] * s[2]
    # d(xi)/dx = 2/h on an axis-aligned box
    return grads / 8.0 * (2.0 / np.asarray(h, dtype=float))


def _strain_matrix(grads):
    Bm = np.zeros((6, 24))
    for a in range(8):
        gx, gy, gz = grads[a]
        c = 3 * a
        Bm[0, c] = gx
        Bm[1, c + 1] = gy
        Bm[2, c + 2] = gz
        Bm[3, c + 1], Bm[3, c + 2] = gz, gy
        Bm[4, c], Bm[4, c + 2] = gz, gx
        Bm[5, c], Bm[5, c + 1] = gy, gx
    return Bm


def elasticity_tensor(lam, G):
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] = lam + 2.0 * G
    C[np.arange(3, 6), np.arange(3, 6)] = G
    return C


def element_stiffness(h, lam, G):
    """24x24 Q1 stiffness of a box by 2x2x2 Gauss quadrature."""
    detJ = np.prod(h) / 8.0
    if not detJ > 0:
        raise ConfigError(f"degenerate element with edges {h}")
    C = elasticity_tensor(lam, G)
    Ke = np.zeros((24, 24))
    for x in _GAUSS:
        for y in _GAUSS:
            for z in _GAUSS:
                Bm = _strain_matrix(shape_gradients((x, y, z), h))
                Ke += Bm.T @ C @ Bm * detJ
    return Ke


def element_divergence(h):
    """Row vector (24,) of the integrated basis divergence over one box.

    ``int dN_a/dx_i dV = s_i * (area of the face normal to i) / 4`` exactly,
    so every entry has the same magnitude per axis and checkerboard sums
    cancel without rounding.
    """
    hx, hy, hz = (float(v) for v in h)
    if not (hx > 0 and hy > 0 and hz > 0):
        raise ConfigError(f"degenerate element with edges {h}")
    quarter = np.array([hy * hz, hx * hz, hx * hy]) / 4.0
    return (_LOCAL * quarter).ravel()


def element_dofs(mesh: StructuredMesh):
    nodes = mesh.cell_nodes
    return (3 * nodes[:, :, None] + np.arange(3)).reshape(mesh.n_cells, 24)


@dataclass(frozen=True)
class CellProperties:
    """Per-cell material arrays gathered from the region table."""

    b: np.ndarray
    K_dr: np.ndarray
    lam: np.ndarray
    G: np.ndarray
    invN: np.ndarray
    invM: np.ndarray
    phi0: np.ndarray
    kappa: np.ndarray
    mu_f: np.ndarray
    rho_f: np.ndarray
    rho_s: np.ndarray


def cell_properties(mesh: StructuredMesh, materials: dict[int, RegionMaterial]) -> CellProperties:
    missing = set(mesh.regions()) - set(materials)
    if missing:
        raise ConfigError(f"no material for regions {sorted(missing)}")
    fields = {name: np.empty(mesh.n_cells) for name in CellProperties.__dataclass_fields__}
    for region, mat in materials.items():
        on = mesh.region_of_cell == region
        if not on.any():
            continue
        mod = derive_moduli(mat)
        vals = dict(b=mod.b, K_dr=mat.K_dr, lam=mod.lam, G=mod.G, invN=mod.invN,
                    invM=mod.invM, phi0=mat.phi0, kappa=mat.kappa, mu_f=mat.mu_f,
                    rho_f=mat.rho_f, rho_s=mat.rho_s)
        for name, v in vals.items():
            fields[name][on] = v
    return CellProperties(**fields)


def assemble_stiffness(mesh, materials, dirichlet=None):
    """Global elastic stiffness; Dirichlet dofs eliminated when given."""
    props = cell_properties(mesh, materials)
    h = np.array(mesh.spacing)
    dofs = element_dofs(mesh)
    Ke = np.empty((mesh.n_cells, 24, 24))
    for region in mesh.regions():
        on = mesh.region_of_cell == region
        i = np.flatnonzero(on)[0]
        Ke[on] = element_stiffness(h, props.lam[i], props.G[i])
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    n = 3 * mesh.n_nodes
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A = 0.5 * (A + A.T)
    if dirichlet is not None:
        A = eliminate_dirichlet(A, dirichlet)
    return A


def assemble_divergence(mesh: StructuredMesh):
    """Unweighted integrated divergence, shape (n_cells, 3 n_nodes)."""
    row = element_divergence(np.array(mesh.spacing))
    dofs = element_dofs(mesh)
    rows = np.repeat(np.arange(mesh.n_cells), 24)
    vals = np.tile(row, mesh.n_cells)
    return sp.coo_matrix((vals, (rows, dofs.ravel())),
                         shape=(mesh.n_cells, 3 * mesh.n_nodes)).tocsr()


def assemble_coupling(mesh, materials):
    """B with entries ``b_e * int_e dN_a/dx_i``."""
    props = cell_properties(mesh, materials)
    return (sp.diags(props.b) @ assemble_divergence(mesh)).tocsr()


def _face_laplacian(n_cells, left, right, weight):
    rows = np.concatenate([left, right, left, right])
    cols = np.concatenate([left, right, right, left])
    vals = np.concatenate([weight, weight, -weight, -weight])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_cells, n_cells)).tocsr()


def apply_face_laplacian(mesh, weight, x):
    """``L x`` for the face graph Laplacian with ``weight``, summed as fluxes.

    Summing ``w_f (x_L - x_R)`` face by face cancels constants exactly, which
    the assembled matrix product does not.
    """
    f = mesh.interior_faces
    flux = weight * (x[f.left] - x[f.right])
    n = mesh.n_cells
    return np.bincount(f.left, flux, n) - np.bincount(f.right, flux, n)


def face_transmissibilities(mesh, materials):
    """Interior-face TPFA transmissibilities in m^3/(Pa s)."""
    props = cell_properties(mesh, materials)
    f = mesh.interior_faces
    mob = props.kappa / props.mu_f
    half_l = mob[f.left] * f.area / (0.5 * f.distance)
    half_r = mob[f.right] * f.area / (0.5 * f.distance)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where((half_l > 0) & (half_r > 0),
                     half_l * half_r / (half_l + half_r), 0.0)
    return t


def assemble_tpfa(mesh, materials):
    f = mesh.interior_faces
    return _face_laplacian(mesh.n_cells, f.left, f.right,
                           face_transmissibilities(mesh, materials))


def stabilization_weights(mesh, materials, stab: StabilizationConfig):
    f = mesh.interior_faces
    if not stab.enabled:
        return np.zeros(len(f))
    props = cell_properties(mesh, materials)
    tau = np.array([compute_tau(l, g, stab.c) for l, g in zip(props.lam, props.G)])
    inside = mesh.cells_in_regions(stab.regions)
    masked = inside[f.left] & inside[f.right]
    vols = mesh.cell_volumes
    w = 0.5 * (tau[f.left] + tau[f.right]) * 0.5 * (vols[f.left] + vols[f.right])
    return np.where(masked, w, 0.0)


def assemble_stabilization(mesh, materials, stab: StabilizationConfig):
    """Graph Laplacian acting on the pressure increment (units m^3/Pa)."""
    f = mesh.interior_faces
    return _face_laplacian(mesh.n_cells, f.left, f.right,
                           stabilization_weights(mesh, materials, stab))


def eliminate_dirichlet(A, dofs):
    """Zero rows and columns of ``dofs`` and put ones on their diagonal."""
    dofs = np.asarray(dofs, dtype=np.int64)
    keep = np.ones(A.shape[0])
    keep[dofs] = 0.0
    P = sp.diags(keep)
    fixed = sp.diags(1.0 - keep)
    return (P @ A @ P + fixed).tocsr()


@dataclass(frozen=True)
class AssembledSystem:
    mesh: StructuredMesh
    props: CellProperties
    A: sp.csr_matrix
    Div: sp.csr_matrix
    B: sp.csr_matrix
    T: sp.csr_matrix
    S: sp.csr_matrix
    D_fim: np.ndarray
    D_fs: np.ndarray
    t_face: np.ndarray
    s_face: np.ndarray

    @property
    def volumes(self):
        return self.mesh.cell_volumes

    def cell_strain(self, u):
        """Cell-averaged volumetric strain."""
        return (self.Div @ u) / self.volumes

    def total_stress(self, u, p):
        """Cell volumetric total stress ``K_dr eps_v - b p``."""
        return self.props.K_dr * self.cell_strain(u) - self.props.b * p


def assemble_system(mesh, materials, stab: StabilizationConfig | None = None) -> AssembledSystem:
    stab = stab or StabilizationConfig()
    props = cell_properties(mesh, materials)
    Div = assemble_divergence(mesh)
    V = mesh.cell_volumes
    f = mesh.interior_faces
    t_face = face_transmissibilities(mesh, materials)
    s_face = stabilization_weights(mesh, materials, stab)
    return AssembledSystem(
        mesh=mesh,
        props=props,
        A=assemble_stiffness(mesh, materials),
        Div=Div,
        B=(sp.diags(props.b) @ Div).tocsr(),
        T=_face_laplacian(mesh.n_cells, f.left, f.right, t_face),
        S=_face_laplacian(mesh.n_cells, f.left, f.right, s_face),
        D_fim=props.invM * V,
        D_fs=(props.invM + props.b ** 2 / props.K_dr) * V,
        t_face=t_face,
        s_face=s_face,
    )


# --- loads -----------------------------------------------------------------

def traction_forces(mesh, side, traction):
    """Consistent nodal forces (3 n_nodes,) for a uniform traction vector (Pa)."""
    bset = select_boundary(mesh, side)
    if len(bset.faces) == 0:
        raise ConfigError(f"no boundary faces on side {side!r}")
    F = np.zeros((mesh.n_nodes, 3))
    axis = int(np.argmax(np.abs(bset.faces.normal[0])))
    coord = mesh.node_ijk[bset.nodes]
    # each face of a box shares its force equally among its 4 corners
    counts = np.ones(len(bset.nodes))
    for ax in range(3):
        if ax == axis:
            continue
        n = mesh.shape[ax]
        interior = (coord[:, ax] > 0) & (coord[:, ax] < n)
        counts = counts * np.where(interior, 2.0, 1.0)
    area = bset.faces.area[0]
    F[bset.nodes] += np.outer(counts * area / 4.0, np.asarray(traction, dtype=float))
    return F.ravel()


def body_forces(mesh, force_density):
    """Consistent nodal loads for a uniform body force (N/m^3) per cell."""
    force_density = np.atleast_2d(force_density)
    if force_density.shape[0] == 1:
        force_density = np.repeat(force_density, mesh.n_cells, axis=0)
    F = np.zeros((mesh.n_nodes, 3))
    share = mesh.cell_volume / 8.0
    np.add.at(F, mesh.cell_nodes.ravel(), np.repeat(force_density * share, 8, axis=0))
    return F.ravel()


def source_vector(mesh, cells, mass_rate, rho_f):
    """Volumetric sources (m^3/s), split equally over ``cells``."""
    q = np.zeros(mesh.n_cells)
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) == 0:
        if mass_rate != 0:
            raise ConfigError("non-zero injection rate without source cells")
        return q
    q[cells] += mass_rate / rho_f / len(cells)
    return q


@dataclass(frozen=True)
class TractionLoad:
    """Uniform traction on one boundary side with a given total force (N).

    The force is ``-force * sin(2 pi t / period)`` when ``period`` is set and
    the constant ``force`` otherwise.  After ``freeze_time`` it is held at
    ``freeze_force`` (default: ``+force``).
    """

    side: str
    force: float
    direction: tuple = (0.0, 0.0, 1.0)
    period: float | None = None
    freeze_time: float | None = None
    freeze_force: float | None = None

    def total_force(self, t):
        if self.freeze_time is not None and t > self.freeze_time * (1 + 1e-12):
            return self.force if self.freeze_force is None else self.freeze_force
        if self.period is None:
            return self.force
        return -self.force * np.sin(2.0 * np.pi * t / self.period)


@dataclass(frozen=True)
class SourceLoad:
    """Constant mass injection (kg/s) spread over ``cells`` during (start, end]."""

    cells: tuple
    mass_rate: float
    rho_f: float = 1000.0
    start: float = 0.0
    end: float = np.inf

    def active(self, t):
        eps = 1e-9 * max(1.0, abs(t))
        return self.start + eps < t <= self.end + eps


@dataclass(frozen=True)
class Loads:
    time: float
    Q_u: np.ndarray
    Q_p: np.ndarray


def assemble_loads(mesh, t, tractions=(), sources=(), body_force=None) -> Loads:
    """Nodal forces and cell volumetric sources at time ``t``."""
    Q_u = np.zeros(3 * mesh.n_nodes)
    for load in tractions:
        area = select_boundary(mesh, load.side).faces.area.sum()
        direction = np.asarray(load.direction, dtype=float)
        Q_u += traction_forces(mesh, load.side, direction * load.total_force(t) / area)
    if body_force is not None:
        Q_u += body_forces(mesh, body_force)
    Q_p = np.zeros(mesh.n_cells)
    for src in sources:
        if src.active(t):
            Q_p += source_vector(mesh, src.cells, src.mass_rate, src.rho_f)
    return Loads(time=t, Q_u=Q_u, Q_p=Q_p)
