"""P1 finite-element assembly for the displacement and phase-field problems.

All integrals use the symmetric three-point rule on triangles (exact for
quadratics). Strains are constant per element; the phase field and its
degradation vary over the element and are sampled at the quadrature points.
The history field is stored per quadrature point with shape ``(E, 3)``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import material as mat
from .material import MaterialParams
from .mesh import DofMap, Mesh

__all__ = [
    "AssemblyError",
    "State",
    "AssembledSystem",
    "Discretization",
    "discretization",
    "assemble_displacement",
    "displacement_residual",
    "assemble_phasefield",
    "total_energy",
    "compute_traction",
    "element_strains",
    "QUAD_BARY",
]

# barycentric coordinates of the quadrature points; weights are area / 3
QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_EDGE_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


class AssemblyError(ValueError):
    """Raised for degenerate or inverted elements."""


@dataclass
class State:
    """Stacked unknowns of the coupled problem plus the history field."""

    u: np.ndarray
    phi: np.ndarray
    history: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh) -> "State":
        return cls(np.zeros(2 * mesh.n_nodes), np.zeros(mesh.n_nodes), np.zeros((mesh.n_triangles, 3)))

    def copy(self) -> "State":
        return State(self.u.copy(), self.phi.copy(), self.history.copy())

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.phi])


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: bool = False


class _Pattern:
    """Fixed sparsity pattern with a scatter map from element entries."""

    def __init__(self, conn: np.ndarray, n: int):
        k = conn.shape[1]
        rows = np.repeat(conn, k, axis=1).ravel()
        cols = np.tile(conn, (1, k)).ravel()
        keys = rows * n + cols
        uniq, self.scatter = np.unique(keys, return_inverse=True)
        self.scatter = self.scatter.ravel()
        self.rows = uniq // n
        self.cols = uniq % n
        self.n = n
        A = sp.csr_matrix((np.arange(len(uniq), dtype=float) + 1.0, (self.rows, self.cols)), shape=(n, n))
        A.sort_indices()
        # unique-entry index stored at each CSR data slot
        self.perm = A.data.astype(np.int64) - 1
        self.indptr = A.indptr
        self.indices = A.indices
        self.rows_csr = np.repeat(np.arange(n), np.diff(A.indptr))
        self.cols_csr = A.indices
        self.diag_pos = np.full(n, -1, dtype=np.int64)
        dmask = self.rows_csr == self.cols_csr
        self.diag_pos[self.rows_csr[dmask]] = np.flatnonzero(dmask)

    def build(self, element_values: np.ndarray) -> sp.csr_matrix:
        summed = np.bincount(self.scatter, weights=element_values.ravel(), minlength=len(self.perm))
        data = summed[self.perm]
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    def eliminate(self, A: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
        """Zero rows and columns of ``dofs`` and put ones on their diagonal."""
        if len(dofs) == 0:
            return A
        flag = np.zeros(self.n, dtype=bool)
        flag[dofs] = True
        kill = flag[self.rows_csr] | flag[self.cols_csr]
        A.data[kill] = 0.0
        A.data[self.diag_pos[dofs]] = 1.0
        return A


class Discretization:
    """Precomputed element geometry and sparsity for one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        nodes, tris = mesh.nodes, mesh.triangles
        area = mesh.areas()
        if np.any(area <= 0.0):
            bad = int(np.flatnonzero(area <= 0.0)[0])
            raise AssemblyError(f"element {bad} has non-positive area {area[bad]:.3e}")
        self.area = area
        p = nodes[tris]
        x, y = p[:, :, 0], p[:, :, 1]
        # shape-function gradients dN_i/dx = b_i / 2A, dN_i/dy = c_i / 2A
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        self.dNdx = b / (2 * area[:, None])
        self.dNdy = c / (2 * area[:, None])
        E = len(tris)
        # strain-displacement matrices, engineering shear, dofs [u0x,u0y,u1x,...]
        B = np.zeros((E, 3, 6))
        B[:, 0, 0::2] = self.dNdx
        B[:, 1, 1::2] = self.dNdy
        B[:, 2, 0::2] = self.dNdy
        B[:, 2, 1::2] = self.dNdx
        self.B = B
        self.udofs = np.empty((E, 6), dtype=np.int64)
        self.udofs[:, 0::2] = 2 * tris
        self.udofs[:, 1::2] = 2 * tris + 1
        self.u_pattern = _Pattern(self.udofs, 2 * mesh.n_nodes)
        self.s_pattern = _Pattern(tris, mesh.n_nodes)
        # reference element matrices
        self.qN = QUAD_BARY  # (q, i)
        mass_ref = np.einsum("qi,qj->ij", self.qN, self.qN) / 3.0
        self.elem_mass = area[:, None, None] * mass_ref
        self.elem_stiff = area[:, None, None] * (
            self.dNdx[:, :, None] * self.dNdx[:, None, :] + self.dNdy[:, :, None] * self.dNdy[:, None, :]
        )
        self.mass = self.s_pattern.build(self.elem_mass)
        self.stiff = self.s_pattern.build(self.elem_stiff)
        self._edge_owner = _edge_owners(mesh)

    # ------------------------------------------------------------------
    def strains(self, u: np.ndarray) -> np.ndarray:
        """Element strains ``[xx, yy, xy]`` (tensor shear)."""
        ue = u[self.udofs]
        v = np.einsum("eij,ej->ei", self.B, ue)
        v[:, 2] *= 0.5
        return v

    def phi_at_quad(self, phi: np.ndarray) -> np.ndarray:
        return phi[self.mesh.triangles] @ self.qN.T

    def l2_norm_scalar(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(v @ (self.mass @ v), 0.0)))

    def l2_norm_vector(self, u: np.ndarray) -> float:
        ux, uy = u[0::2], u[1::2]
        return float(np.sqrt(max(ux @ (self.mass @ ux) + uy @ (self.mass @ uy), 0.0)))

    # ------------------------------------------------------------------
    def element_stress(self, eps: np.ndarray, g: np.ndarray, params: MaterialParams) -> np.ndarray:
        """Degraded stress per element for a per-element degradation value."""
        if params.use_split:
            sp_, sm_ = mat.stress_pm(eps, params)
            return g[:, None] * sp_ + sm_
        return g[:, None] * mat.elastic_stress(eps, params)

    def displacement(self, state: State, params: MaterialParams, dofmap: DofMap, load_step=0,
                     with_tangent: bool = True):
        eps = self.strains(state.u)
        g_q, _ = mat.degradation(self.phi_at_quad(state.phi), params)
        g_mean = g_q.mean(axis=1)
        sig = self.element_stress(eps, g_mean, params)
        fe = self.area[:, None] * np.einsum("eij,ei->ej", self.B, sig)
        res = np.bincount(self.udofs.ravel(), weights=fe.ravel(), minlength=dofmap.n_u)
        res -= self._external_load(params, dofmap, load_step)
        res[dofmap.dirichlet_u] = 0.0
        if not with_tangent:
            return None, res
        if params.use_split:
            c_plus, c_minus = mat.split_tangents(eps, params)
            D = g_mean[:, None, None] * c_plus + c_minus
        else:
            D = g_mean[:, None, None] * params.elasticity_matrix()
        ke = self.area[:, None, None] * np.einsum("eki,ekl,elj->eij", self.B, D, self.B)
        K = self.u_pattern.build(ke)
        K = self.u_pattern.eliminate(K, dofmap.dirichlet_u)
        return K, res

    def _external_load(self, params: MaterialParams, dofmap: DofMap, load_step) -> np.ndarray:
        f = np.zeros(dofmap.n_u)
        bx, by = params.body_force
        if bx or by:
            # integral of a P1 basis function is area / 3
            w = np.repeat(self.area / 3.0, 3)
            nodes = self.mesh.triangles.ravel()
            f[0::2] += np.bincount(nodes, weights=bx * w, minlength=self.mesh.n_nodes)
            f[1::2] += np.bincount(nodes, weights=by * w, minlength=self.mesh.n_nodes)
        for tag, (tx, ty) in dofmap.tractions:
            edges = self.mesh.edges_with_tag(tag)
            length = np.linalg.norm(self.mesh.nodes[edges[:, 1]] - self.mesh.nodes[edges[:, 0]], axis=1)
            for k in (0, 1):
                np.add.at(f, 2 * edges[:, k], 0.5 * length * tx * load_step)
                np.add.at(f, 2 * edges[:, k] + 1, 0.5 * length * ty * load_step)
        return f

    def phasefield(self, state: State, params: MaterialParams, dofmap: DofMap) -> AssembledSystem:
        H = state.history
        w = self.area[:, None] / 3.0 * H  # (E, q)
        mh = np.einsum("eq,qi,qj->eij", w, self.qN, self.qN)
        c = 2.0 * (1.0 - params.kappa)
        ke = (params.gc / params.ell) * self.elem_mass + params.gc * params.ell * self.elem_stiff + c * mh
        A = self.s_pattern.build(ke)
        rhs = np.bincount(self.mesh.triangles.ravel(), weights=(c * w @ self.qN).ravel(),
                          minlength=self.mesh.n_nodes)
        constrained = len(dofmap.dirichlet_phi) > 0
        if constrained:
            vals = np.zeros(self.mesh.n_nodes)
            vals[dofmap.dirichlet_phi] = dofmap.dirichlet_phi_value
            rhs = rhs - A @ vals
            A = self.s_pattern.eliminate(A, dofmap.dirichlet_phi)
            rhs[dofmap.dirichlet_phi] = dofmap.dirichlet_phi_value
        return AssembledSystem(A, rhs, constrained)

    def energy(self, state: State, params: MaterialParams, dofmap: DofMap | None = None, load_step=0) -> float:
        eps = self.strains(state.u)
        phi_q = self.phi_at_quad(state.phi)
        g_q, _ = mat.degradation(phi_q, params)
        g_int = (self.area[:, None] / 3.0 * g_q).sum(axis=1)
        if params.use_split:
            pp, pm = mat.psi_pm(eps, params)
            e_mech = g_int @ pp + self.area @ pm
        else:
            e_mech = g_int @ mat.psi_total(eps, params)
        phi = state.phi
        e_crack = 0.5 * params.gc * (phi @ (self.mass @ phi) / params.ell + params.ell * phi @ (self.stiff @ phi))
        e_ext = 0.0
        if dofmap is not None:
            e_ext = self._external_load(params, dofmap, load_step) @ state.u
        else:
            bx, by = params.body_force
            if bx or by:
                w = np.repeat(self.area / 3.0, 3)
                nodes = self.mesh.triangles.ravel()
                e_ext = bx * (w @ state.u[0::2][nodes]) + by * (w @ state.u[1::2][nodes])
        return float(e_crack + e_mech - e_ext)

    def traction(self, state: State, params: MaterialParams, tag: str) -> tuple[float, float]:
        edges = self.mesh.edges_with_tag(tag)
        owners = np.array([self._edge_owner[(int(a), int(b))] for a, b in edges], dtype=np.int64)
        eps = self.strains(state.u)[owners]
        pa, pb = self.mesh.nodes[edges[:, 0]], self.mesh.nodes[edges[:, 1]]
        d = pb - pa
        normal_len = np.column_stack([d[:, 1], -d[:, 0]])  # outward normal times length
        if params.use_split:
            s_plus, s_minus = mat.stress_pm(eps, params)
        else:
            s_plus, s_minus = mat.elastic_stress(eps, params), np.zeros_like(eps)
        tau = np.zeros(2)
        for s in _EDGE_GAUSS:
            phi = (1 - s) * state.phi[edges[:, 0]] + s * state.phi[edges[:, 1]]
            g, _ = mat.degradation(phi, params)
            sig = g[:, None] * s_plus + s_minus
            tx = sig[:, 0] * normal_len[:, 0] + sig[:, 2] * normal_len[:, 1]
            ty = sig[:, 2] * normal_len[:, 0] + sig[:, 1] * normal_len[:, 1]
            tau += 0.5 * np.array([tx.sum(), ty.sum()])
        return float(tau[0]), float(tau[1])


def _edge_owners(mesh: Mesh) -> dict:
    owners = {}
    for t, (a, b, c) in enumerate(mesh.triangles.tolist()):
        owners[(a, b)] = t
        owners[(b, c)] = t
        owners[(c, a)] = t
    return {(int(a), int(b)): owners[(int(a), int(b))] for a, b in mesh.boundary_edges}


_CACHE: "weakref.WeakKeyDictionary[Mesh, Discretization]" = weakref.WeakKeyDictionary()


def discretization(mesh: Mesh) -> Discretization:
    """Cached :class:`Discretization` for ``mesh``."""
    disc = _CACHE.get(mesh)
    if disc is None:
        disc = Discretization(mesh)
        _CACHE[mesh] = disc
    return disc


def element_strains(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    return discretization(mesh).strains(u)


def assemble_displacement(mesh, state, params, dofmap, load_step=0):
    """Tangent and residual of the displacement equation.

    Dirichlet rows and columns of the tangent are replaced by identity and
    the residual vanishes on Dirichlet dofs, so a Newton correction solves
    ``K du = -r`` with ``du = 0`` on the constrained set.

    Raises
    ------
    AssemblyError
        If the mesh has an element with non-positive area.
    """
    return discretization(mesh).displacement(state, params, dofmap, load_step)


def displacement_residual(mesh, state, params, dofmap, load_step=0) -> np.ndarray:
    return discretization(mesh).displacement(state, params, dofmap, load_step, with_tangent=False)[1]


def assemble_phasefield(mesh, state, params, dofmap) -> AssembledSystem:
    """Linear phase-field system for the current history field.

    ``(gc/ell) M + gc ell K + 2(1-kappa) M_H`` with right-hand side
    ``2(1-kappa) M_H 1``; ``M_H`` is the history-weighted mass matrix.
    """
    return discretization(mesh).phasefield(state, params, dofmap)


def total_energy(mesh, state, params, dofmap=None, load_step=0) -> float:
    """Crack surface plus degraded elastic energy minus external work."""
    return discretization(mesh).energy(state, params, dofmap, load_step)


def compute_traction(mesh, state, params, boundary_tag: str) -> tuple[float, float]:
    """Integral of the degraded stress times the outward normal over a tagged boundary."""
    return discretization(mesh).traction(state, params, boundary_tag)
