"""Quasi-static finite elements for single actuators under cavity pressure.

Linear tetrahedra with a corotational stiffness (large rotation, small
strain) and follower cavity-pressure loads recomputed on the deformed
configuration at every Newton iteration.  Units: positions in mm,
pressures and moduli in kPa at the API (converted to N/mm^2 internally),
forces in N.  The bottom element layer of generated actuator meshes is
tagged stiffer in place of a woven strain-limiting sheet, which shifts
the neutral axis downward and makes pressurization bend the beam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import ConvergenceError, ValidationError

#: In-plane stiffness multiplier of the strain-limiting bottom layer.
STRAIN_LIMIT_SCALE = 100.0

KPA_TO_N_PER_MM2 = 1e-3


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic linear-elastic material (E in kPa)."""

    youngs_modulus: float = 400.0
    poisson_ratio: float = 0.45

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValidationError("youngs_modulus", "must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValidationError("poisson_ratio", "must be in [0, 0.5)")


class TetMesh:
    """Tetrahedral mesh with tagged cavity surfaces and clamped nodes.

    cavity_faces maps a cavity id to (F, 3) triangle node indices whose
    normals point into the cavity interior (out of the material).
    stiffness_scale is a per-element stiffness multiplier (1.0 default,
    STRAIN_LIMIT_SCALE for the strain-limiting layer).
    """

    def __init__(self, nodes, tets, cavity_faces=None, fixed_nodes=(),
                 stiffness_scale=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.tets = np.asarray(tets, dtype=int)
        self.cavity_faces = {int(k): np.asarray(v, dtype=int)
                             for k, v in (cavity_faces or {}).items()}
        self.fixed_nodes = np.asarray(sorted(set(int(i) for i in fixed_nodes)),
                                      dtype=int)
        if stiffness_scale is None:
            stiffness_scale = np.ones(len(self.tets))
        self.stiffness_scale = np.asarray(stiffness_scale, dtype=float)
        self.validate()

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def tet_count(self):
        return len(self.tets)

    def tet_volumes(self, positions=None):
        x = self.nodes if positions is None else positions
        a, b, c, d = (x[self.tets[:, i]] for i in range(4))
        return np.einsum("ij,ij->i", np.cross(b - a, c - a), d - a) / 6.0

    def validate(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise ValidationError("nodes", "must be an (N, 3) array")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise ValidationError("tets", "must be an (M, 4) array")
        if len(self.stiffness_scale) != len(self.tets):
            raise ValidationError("stiffness_scale",
                                  "one scale per element required")
        n = self.node_count
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= n):
            raise ValidationError("tets", "node index out of range")
        if len(self.fixed_nodes) and (self.fixed_nodes.min() < 0
                                      or self.fixed_nodes.max() >= n):
            raise ValidationError("fixed_nodes", "node index out of range")
        vols = self.tet_volumes()
        if np.any(vols <= 0):
            bad = int(np.argmin(vols))
            raise ValidationError(
                "tets", f"element {bad} has non-positive volume {vols[bad]:.3g}")
        for cid, faces in self.cavity_faces.items():
            if faces.size and (faces.min() < 0 or faces.max() >= n):
                raise ValidationError(f"cavity[{cid}]",
                                      "node index out of range")
            edges = {}
            for tri in faces:
                for e in ((tri[0], tri[1]), (tri[1], tri[2]),
                          (tri[2], tri[0])):
                    e = (int(e[0]), int(e[1]))
                    if e in edges:
                        raise ValidationError(
                            f"cavity[{cid}]", f"duplicated directed edge {e}")
                    edges[e] = True
            for a, b in edges:
                if (b, a) not in edges:
                    raise ValidationError(
                        f"cavity[{cid}]",
                        f"open surface: edge ({a},{b}) has no mate")
            if faces.size and self.cavity_volume(cid) <= 0:
                raise ValidationError(
                    f"cavity[{cid}]", "face normals do not point into the "
                    "cavity interior")

    def boundary_faces(self):
        """All outward-oriented boundary triangles (including cavity walls)."""
        face_order = ((0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3))
        seen = {}
        for t in self.tets:
            for fo in face_order:
                tri = (int(t[fo[0]]), int(t[fo[1]]), int(t[fo[2]]))
                key = tuple(sorted(tri))
                if key in seen:
                    seen.pop(key)
                else:
                    seen[key] = tri
        return np.array(list(seen.values()), dtype=int)

    def cavity_volume(self, cavity_id, positions=None):
        """Enclosed volume [mm^3]; positive when normals point into the
        cavity (i.e. outward from the enclosed void as seen from the gas)."""
        x = self.nodes if positions is None else positions
        tri = self.cavity_faces[cavity_id]
        a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
        return -float(np.einsum("ij,ij->", a, np.cross(b, c))) / 6.0


# -- structured meshing -----------------------------------------------------

def _axis_breaks(spans, target):
    """Breakpoints covering consecutive spans, each subdivided to ~target."""
    pts = [0.0]
    for length in spans:
        n = max(1, int(math.ceil(length / target - 1e-9)))
        step = length / n
        base = pts[-1]
        pts.extend(base + step * (i + 1) for i in range(n))
    return np.array(pts)


_HEX_TETS = ((0, 1, 2, 6), (0, 2, 3, 6), (0, 3, 7, 6),
             (0, 7, 4, 6), (0, 4, 5, 6), (0, 5, 1, 6))


def _grid_mesh(xs, ys, zs, keep_cell, cavity_of_cell, fixed_plane="x0",
               scale_of_cell=None):
    """Hex grid -> 6 tets per kept cell; cavity surfaces from dropped cells."""
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1
    nid = np.arange((nx + 1) * (ny + 1) * (nz + 1)).reshape(
        nx + 1, ny + 1, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    tets, scales = [], []
    tet_owner_cavity = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if not keep_cell(i, j, k):
                    continue
                corner = [nid[i, j, k], nid[i + 1, j, k],
                          nid[i + 1, j + 1, k], nid[i, j + 1, k],
                          nid[i, j, k + 1], nid[i + 1, j, k + 1],
                          nid[i + 1, j + 1, k + 1], nid[i, j + 1, k + 1]]
                sc = 1.0 if scale_of_cell is None else scale_of_cell(i, j, k)
                for t in _HEX_TETS:
                    tets.append([corner[t[0]], corner[t[1]],
                                 corner[t[2]], corner[t[3]]])
                    scales.append(sc)
    tets = np.array(tets, dtype=int)

    # orient positively
    a, b, c, d = (nodes[tets[:, i]] for i in range(4))
    vols = np.einsum("ij,ij->i", np.cross(b - a, c - a), d - a)
    flip = vols < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()

    # boundary faces (appear once), outward-oriented by construction
    face_order = ((0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3))
    seen = {}
    for t in tets:
        for fo in face_order:
            tri = (int(t[fo[0]]), int(t[fo[1]]), int(t[fo[2]]))
            key = tuple(sorted(tri))
            if key in seen:
                seen.pop(key)
            else:
                seen[key] = tri
    boundary = list(seen.values())

    cavities = {}
    if cavity_of_cell is not None:
        for tri in boundary:
            centroid = nodes[list(tri)].mean(axis=0)
            cid = cavity_of_cell(centroid)
            if cid is not None:
                cavities.setdefault(cid, []).append(tri)

    used = np.unique(tets)
    remap = -np.ones(len(nodes), dtype=int)
    remap[used] = np.arange(len(used))
    nodes = nodes[used]
    tets = remap[tets]
    cavities = {cid: remap[np.array(tris, dtype=int)]
                for cid, tris in cavities.items()}

    if fixed_plane == "x0":
        fixed = np.nonzero(np.abs(nodes[:, 0] - xs[0]) < 1e-9)[0]
    else:
        raise ValidationError("fixed_plane", f"unknown {fixed_plane!r}")
    return TetMesh(nodes, tets, cavities, fixed, np.array(scales))


def generate_beam_mesh(length, width, height, nx, ny, nz):
    """Solid rectangular cantilever beam clamped at x = 0."""
    if min(length, width, height) <= 0 or min(nx, ny, nz) < 1:
        raise ValidationError("beam", "degenerate dimensions")
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, width, ny + 1)
    zs = np.linspace(0.0, height, nz + 1)
    return _grid_mesh(xs, ys, zs, lambda i, j, k: True, None)


def generate_actuator_mesh(geometry, resolution=2, coarse_mm=4.0):
    """Rectangular bellows actuator: one internal cavity per segment.

    resolution = elements through the wall thickness (>= 2).  The lowest
    element layer is the strain-limiting layer (STRAIN_LIMIT_SCALE).
    Clamped at the x = 0 end face.
    """
    if resolution < 2:
        raise ValidationError("resolution",
                              "need >= 2 elements through the wall")
    g = geometry
    t = g.wall_thickness
    L, W, H = g.finger_length, g.width, g.height
    n = g.segment_count
    gap = max(g.segment_gap, t)
    inner_w = W - 2 * t
    inner_h = H - 2 * t
    cav_len = (L - 2 * t - (n - 1) * gap) / n
    if inner_w <= 0 or inner_h <= 0 or cav_len <= 0:
        raise ValidationError("geometry",
                              "walls leave no room for the cavity chain")
    fine = t / resolution
    coarse = max(coarse_mm, fine)

    x_spans, x_kinds = [t], ["wall"]
    for i in range(n):
        x_spans.append(cav_len)
        x_kinds.append("cav")
        if i < n - 1:
            x_spans.append(gap)
            x_kinds.append("wall")
    x_spans.append(t)
    x_kinds.append("wall")

    def breaks(spans, kinds):
        pts = [0.0]
        for length_, kind in zip(spans, kinds):
            target = fine if kind == "wall" else coarse
            m = max(1, int(math.ceil(length_ / target - 1e-9)))
            step = length_ / m
            base = pts[-1]
            pts.extend(base + step * (q + 1) for q in range(m))
        return np.array(pts)

    xs = breaks(x_spans, x_kinds)
    ys = breaks([t, inner_w, t], ["wall", "cav", "wall"])
    zs = breaks([t, inner_h, t], ["wall", "cav", "wall"])

    x0s = np.cumsum([0.0] + x_spans)
    cav_x = [(x0s[i], x0s[i + 1]) for i, kind in enumerate(x_kinds)
             if kind == "cav"]
    y_lo, y_hi = t, t + inner_w
    z_lo, z_hi = t, t + inner_h
    eps = 1e-9

    def cavity_index(p):
        x, y, z = p
        if not (y_lo - eps <= y <= y_hi + eps
                and z_lo - eps <= z <= z_hi + eps):
            return None
        for ci, (a, b) in enumerate(cav_x):
            if a - eps <= x <= b + eps:
                return ci
        return None

    xc = 0.5 * (xs[:-1] + xs[1:])
    yc = 0.5 * (ys[:-1] + ys[1:])
    zc = 0.5 * (zs[:-1] + zs[1:])

    def is_void(i, j, k):
        if not (y_lo < yc[j] < y_hi and z_lo < zc[k] < z_hi):
            return False
        return any(a < xc[i] < b for a, b in cav_x)

    def keep(i, j, k):
        return not is_void(i, j, k)

    def cavity_of_cell(centroid):
        # only faces strictly inside the cavity boxes' closed surface
        return cavity_index(centroid)

    def scale_of_cell(i, j, k):
        return STRAIN_LIMIT_SCALE if k == 0 else 1.0

    return _grid_mesh(xs, ys, zs, keep, cavity_of_cell,
                      scale_of_cell=scale_of_cell)


# -- element matrices -------------------------------------------------------

def _elastic_matrix(material):
    e = material.youngs_modulus * KPA_TO_N_PER_MM2
    nu = material.poisson_ratio
    f = e / ((1 + nu) * (1 - 2 * nu))
    c = np.zeros((6, 6))
    c[:3, :3] = f * nu
    np.fill_diagonal(c[:3, :3], f * (1 - nu))
    c[3, 3] = c[4, 4] = c[5, 5] = f * (1 - 2 * nu) / 2
    return c


def _element_data(mesh, material):
    """Per-element reference inverse shape matrix, volume and 12x12 Ke."""
    x = mesh.nodes
    tets = mesh.tets
    a = x[tets[:, 0]]
    dm = np.stack([x[tets[:, i]] - a for i in (1, 2, 3)], axis=2)  # (M,3,3)
    vol = np.linalg.det(dm) / 6.0
    dm_inv = np.linalg.inv(dm)
    # shape-function gradients: rows of dm_inv are the grads of N1..N3
    grads = np.empty((len(tets), 4, 3))
    grads[:, 1:, :] = dm_inv
    grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
    bmat = np.zeros((len(tets), 6, 12))
    for i in range(4):
        gx, gy, gz = grads[:, i, 0], grads[:, i, 1], grads[:, i, 2]
        c = 3 * i
        bmat[:, 0, c] = gx
        bmat[:, 1, c + 1] = gy
        bmat[:, 2, c + 2] = gz
        bmat[:, 3, c] = gy
        bmat[:, 3, c + 1] = gx
        bmat[:, 4, c + 1] = gz
        bmat[:, 4, c + 2] = gy
        bmat[:, 5, c] = gz
        bmat[:, 5, c + 2] = gx
    cmat = _elastic_matrix(material)
    ke = np.einsum("mji,jk,mkl->mil", bmat, cmat, bmat)
    ke *= (vol * mesh.stiffness_scale)[:, None, None]
    return dm_inv, vol, ke


def _rotations(mesh, dm_inv, positions):
    """Per-element rotation from batched polar decomposition of F."""
    a = positions[mesh.tets[:, 0]]
    ds = np.stack([positions[mesh.tets[:, i]] - a for i in (1, 2, 3)], axis=2)
    f = ds @ dm_inv
    u, _s, vt = np.linalg.svd(f)
    r = u @ vt
    det = np.linalg.det(r)
    neg = det < 0
    if np.any(neg):
        u = u.copy()
        u[neg, :, 2] *= -1.0
        r = u @ vt
    return r


def _block_rotation(r):
    m = len(r)
    rb = np.zeros((m, 12, 12))
    for i in range(4):
        rb[:, 3 * i:3 * i + 3, 3 * i:3 * i + 3] = r
    return rb


def apply_cavity_pressure(mesh, cavity_id, pressure_kpa, positions=None):
    """Nodal follower forces [N] from cavity pressure on the (possibly
    deformed) configuration.  Each face spreads p * area / 3 to its three
    nodes, pressing out of the cavity into the material."""
    if cavity_id not in mesh.cavity_faces:
        raise ValidationError("cavity_id", f"no cavity {cavity_id!r}")
    x = mesh.nodes if positions is None else positions
    tri = mesh.cavity_faces[cavity_id]
    forces = np.zeros_like(mesh.nodes)
    if tri.size == 0:
        return forces
    a, b, c = x[tri[:, 0]], x[tri[:, 1]], x[tri[:, 2]]
    # area vectors point into the cavity; pressure pushes the other way
    area_vec = 0.5 * np.cross(b - a, c - a)
    f_face = -(pressure_kpa * KPA_TO_N_PER_MM2) * area_vec / 3.0
    for col in range(3):
        np.add.at(forces, tri[:, col], f_face)
    return forces


@dataclass(frozen=True)
class LoadCase:
    """External loading: fixed nodal forces [N] and cavity pressures [kPa]."""

    nodal_forces: np.ndarray | None = None
    cavity_pressures: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-8
    atol: float = 1e-12
    max_iterations: int = 50
    cg_rtol: float = 1e-8
    cg_maxiter: int = 50000
    load_steps: int = 1


@dataclass(frozen=True)
class SolveResult:
    """displacements is the (N, 3) nodal field [mm]; diagnostics carry the
    Newton residual norms and the net follower-force magnitude per cavity
    recorded at every iterate."""

    displacements: np.ndarray
    iterations: int
    residual_history: tuple
    cavity_net_force: dict


def _external_forces(mesh, loads, positions):
    f = np.zeros_like(mesh.nodes)
    if loads.nodal_forces is not None:
        nf = np.asarray(loads.nodal_forces, dtype=float)
        if nf.shape != mesh.nodes.shape:
            raise ValidationError("nodal_forces",
                                  f"expected shape {mesh.nodes.shape}")
        f += nf
    net = {}
    for cid, p in loads.cavity_pressures.items():
        fc = apply_cavity_pressure(mesh, cid, p, positions)
        total = fc.sum(axis=0)
        scale = np.abs(fc).sum() + 1e-30
        net[cid] = float(np.linalg.norm(total) / scale)
        f += fc
    return f, net


def solve_quasistatic(mesh, material, loads, options=SolverOptions()):
    """Newton iteration with corotational stiffness and follower loads.

    Returns a SolveResult; raises ConvergenceError (with the residual
    history) if the residual does not drop below rtol * initial within
    max_iterations, or if the preconditioned CG linear solve fails.
    """
    if len(mesh.fixed_nodes) == 0:
        raise ValidationError("fixed_nodes",
                              "at least one clamped node is required")
    dm_inv, _vol, ke = _element_data(mesh, material)
    n = mesh.node_count
    free = np.ones(n, dtype=bool)
    free[mesh.fixed_nodes] = False
    free_dofs = np.repeat(free, 3)

    tets = mesh.tets
    dof_idx = (3 * tets[:, :, None] + np.arange(3)[None, None, :]).reshape(
        len(tets), 12)
    rows = np.repeat(dof_idx, 12, axis=1).ravel()
    cols = np.tile(dof_idx, (1, 12)).ravel()

    u = np.zeros((n, 3))
    history = []
    cavity_net = {cid: [] for cid in loads.cavity_pressures}
    total_iters = 0

    for step in range(1, options.load_steps + 1):
        frac = step / options.load_steps
        step_loads = LoadCase(
            nodal_forces=None if loads.nodal_forces is None
            else frac * np.asarray(loads.nodal_forces, dtype=float),
            cavity_pressures={cid: frac * p for cid, p
                              in loads.cavity_pressures.items()})
        ref_norm = None
        for _it in range(options.max_iterations):
            positions = mesh.nodes + u
            f_ext, net = _external_forces(mesh, step_loads, positions)
            for cid, rel in net.items():
                cavity_net[cid].append(rel)
            r = _rotations(mesh, dm_inv, positions)
            rb = _block_rotation(r)
            xe = positions[tets].reshape(len(tets), 12)
            x0e = mesh.nodes[tets].reshape(len(tets), 12)
            local = np.einsum("mji,mj->mi", rb, xe) - x0e
            f_el = np.einsum("mij,mjk,mk->mi", rb, ke, local)
            f_int = np.zeros(3 * n)
            np.add.at(f_int, dof_idx.ravel(), f_el.ravel())
            resid = f_ext.ravel() - f_int
            resid[~free_dofs] = 0.0
            rnorm = float(np.linalg.norm(resid))
            history.append(rnorm)
            total_iters += 1
            if ref_norm is None:
                ref_norm = rnorm
            if rnorm <= max(options.rtol * ref_norm, options.atol):
                break
            kc = np.einsum("mij,mjk,mlk->mil", rb, ke, rb)
            kmat = sp.coo_matrix((kc.ravel(), (rows, cols)),
                                 shape=(3 * n, 3 * n)).tocsr()
            kff = kmat[free_dofs][:, free_dofs]
            diag = kff.diagonal()
            if np.any(diag <= 0):
                raise ConvergenceError("singular tangent: non-positive "
                                       "diagonal entry", history)
            precon = sp.diags(1.0 / diag)
            du, info = cg(kff, resid[free_dofs], rtol=options.cg_rtol,
                          atol=0.0, maxiter=options.cg_maxiter, M=precon)
            if info != 0:
                raise ConvergenceError(
                    f"linear solve failed (CG info {info})", history)
            step_u = np.zeros(3 * n)
            step_u[free_dofs] = du
            u = u + step_u.reshape(n, 3)
        else:
            raise ConvergenceError(
                f"no convergence in {options.max_iterations} iterations "
                f"(load step {step}/{options.load_steps})", history)

    return SolveResult(displacements=u, iterations=total_iters,
                       residual_history=tuple(history),
                       cavity_net_force={cid: tuple(v)
                                         for cid, v in cavity_net.items()})


def surface_traction_forces(mesh, node_mask, traction):
    """Consistent nodal forces [N] for a uniform traction [kPa vector]
    applied on every boundary triangle whose nodes all satisfy node_mask."""
    node_mask = np.asarray(node_mask, dtype=bool)
    traction = np.asarray(traction, dtype=float) * KPA_TO_N_PER_MM2
    forces = np.zeros_like(mesh.nodes)
    for tri in mesh.boundary_faces():
        if node_mask[tri].all():
            a, b, c = mesh.nodes[tri]
            area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
            for i in tri:
                forces[i] += traction * area / 3.0
    return forces


def strain_energy(mesh, material, displacements, corotational=False):
    """Elastic energy [N*mm] of a displacement field.

    corotational=True measures strains in each element's rotated frame
    (consistent with solve_quasistatic); False is the plain linear form."""
    dm_inv, _vol, ke = _element_data(mesh, material)
    u = np.asarray(displacements, dtype=float)
    if not corotational:
        ue = u[mesh.tets].reshape(len(mesh.tets), 12)
        return float(0.5 * np.einsum("mi,mij,mj->", ue, ke, ue))
    positions = mesh.nodes + u
    r = _rotations(mesh, dm_inv, positions)
    rb = _block_rotation(r)
    xe = positions[mesh.tets].reshape(len(mesh.tets), 12)
    x0e = mesh.nodes[mesh.tets].reshape(len(mesh.tets), 12)
    local = np.einsum("mji,mj->mi", rb, xe) - x0e
    return float(0.5 * np.einsum("mi,mij,mj->", local, ke, local))


def fem_bend_angle(mesh, displacements):
    """Bend angle [deg]: rigid-fit rotation of the tip slab relative to
    its reference pose (zero field gives exactly zero)."""
    u = np.asarray(displacements, dtype=float)
    if u.shape != mesh.nodes.shape:
        raise ValidationError("displacements",
                              f"expected shape {mesh.nodes.shape}")
    x = mesh.nodes[:, 0]
    span = x.max() - x.min()
    tip = x >= x.max() - max(0.05 * span, 1e-9)
    p = mesh.nodes[tip]
    q = p + u[tip]
    pc = p - p.mean(axis=0)
    qc = q - q.mean(axis=0)
    h = pc.T @ qc
    uu, _s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ uu.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ uu.T
    ctheta = (np.trace(r) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, ctheta))))


# -- mesh and result I/O ----------------------------------------------------

MESH_FORMAT_TAG = "softhand-mesh 1"
DISPLACEMENT_CSV_HEADER = "node_id,ux,uy,uz"


def save_mesh(mesh, path):
    """ASCII format: tag line, then `nodes N`, `tets M` (4 indices +
    stiffness scale), one `cavity ID F` block per cavity, `fixed K`."""
    with open(path, "w") as fh:
        fh.write(MESH_FORMAT_TAG + "\n")
        fh.write(f"nodes {mesh.node_count}\n")
        for p in mesh.nodes:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        fh.write(f"tets {mesh.tet_count}\n")
        for t, s in zip(mesh.tets, mesh.stiffness_scale):
            fh.write(f"{t[0]} {t[1]} {t[2]} {t[3]} {s:.17g}\n")
        for cid in sorted(mesh.cavity_faces):
            tris = mesh.cavity_faces[cid]
            fh.write(f"cavity {cid} {len(tris)}\n")
            for tri in tris:
                fh.write(f"{tri[0]} {tri[1]} {tri[2]}\n")
        fh.write(f"fixed {len(mesh.fixed_nodes)}\n")
        for i in mesh.fixed_nodes:
            fh.write(f"{i}\n")


def load_mesh(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != MESH_FORMAT_TAG:
        raise ValidationError("path", "not a mesh file (bad format tag)")
    pos = 1

    def expect(keyword):
        nonlocal pos
        parts = lines[pos].split()
        if parts[0] != keyword:
            raise ValidationError("path",
                                  f"expected '{keyword}', got {lines[pos]!r}")
        pos += 1
        return parts[1:]

    (count,) = expect("nodes")
    n = int(count)
    nodes = np.array([[float(v) for v in lines[pos + i].split()]
                      for i in range(n)])
    pos += n
    (count,) = expect("tets")
    m = int(count)
    rows = [lines[pos + i].split() for i in range(m)]
    pos += m
    tets = np.array([[int(v) for v in r[:4]] for r in rows])
    scale = np.array([float(r[4]) for r in rows])
    cavities = {}
    while pos < len(lines) and lines[pos].startswith("cavity"):
        _kw, cid, cnt = lines[pos].split()
        pos += 1
        f = int(cnt)
        cavities[int(cid)] = np.array(
            [[int(v) for v in lines[pos + i].split()] for i in range(f)])
        pos += f
    (count,) = expect("fixed")
    k = int(count)
    fixed = [int(lines[pos + i]) for i in range(k)]
    return TetMesh(nodes, tets, cavities, fixed, scale)


def displacement_csv(displacements):
    lines = [DISPLACEMENT_CSV_HEADER]
    for i, (ux, uy, uz) in enumerate(np.asarray(displacements, dtype=float)):
        lines.append(f"{i},{ux:.9g},{uy:.9g},{uz:.9g}")
    return "\n".join(lines) + "\n"
