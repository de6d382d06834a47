"""Space-frame finite-element surrogate of a compliant part.

Nodes carry 6 DOFs in the order [u_x, u_y, u_z, w_x, w_y, w_z]; node ``i``
(0-based) owns rows ``6*i .. 6*i+5`` of the global system.  Elements are
3D Euler-Bernoulli beams.  Gravity is lumped: half of each element's weight
goes to the translational DOFs of each end node and no nodal torques appear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from .errors import DegenerateElementError, InvalidSpecError, SingularSystemError

DOF_PER_NODE = 6
TRANSLATIONAL = (0, 1, 2)
LENGTH_TOL = 1e-12


@dataclass(frozen=True)
class Section:
    """Material and cross-section constants of a beam section."""

    E: float
    G: float
    A: float
    Iy: float
    Iz: float
    J: float
    rho: float

    def __post_init__(self):
        for name in ("E", "G", "A", "Iy", "Iz", "J", "rho"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise InvalidSpecError(f"section property {name} must be positive, got {val!r}")


@dataclass(frozen=True)
class FrameSpec:
    """Parameters of the half-cylinder surrogate (see :func:`build_frame_model`)."""

    n_rings: int = 20
    n_stringers: int = 9
    radius: float = 1.0
    length: float = 6.0
    E: float = 1.0e3
    G: float = 4.0e2
    A: float = 1.0e-2
    Iy: float = 1.0e-4
    Iz: float = 1.0e-4
    J: float = 2.0e-4
    rho: float = 1.0
    gravity: tuple = (0.0, 0.0, -1.0)

    @property
    def section(self):
        return Section(self.E, self.G, self.A, self.Iy, self.Iz, self.J, self.rho)

    def to_json(self):
        return {
            "n_rings": self.n_rings, "n_stringers": self.n_stringers,
            "radius": self.radius, "length": self.length,
            "E": self.E, "G": self.G, "A": self.A, "Iy": self.Iy, "Iz": self.Iz,
            "J": self.J, "rho": self.rho, "gravity": list(self.gravity),
        }

    @classmethod
    def from_json(cls, obj):
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise InvalidSpecError(f"unknown frame spec keys: {sorted(unknown)}")
        kw = dict(obj)
        if "gravity" in kw:
            g = kw["gravity"]
            if len(g) != 3:
                raise InvalidSpecError("gravity must have 3 components")
            kw["gravity"] = tuple(float(v) for v in g)
        for key in ("n_rings", "n_stringers"):
            if key in kw:
                if int(kw[key]) != kw[key]:
                    raise InvalidSpecError(f"{key} must be an integer")
                kw[key] = int(kw[key])
        return cls(**kw)


@dataclass(frozen=True)
class MeshModel:
    nodes: np.ndarray                 # (N, 3)
    elements: np.ndarray              # (n_el, 3) int: node_a, node_b, section id
    sections: tuple
    gravity: np.ndarray               # (3,)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        elements = np.array(self.elements, dtype=int).reshape(-1, 3)
        gravity = np.array(self.gravity, dtype=float).reshape(3)
        if nodes.ndim != 2 or nodes.shape[1] != 3:
            raise InvalidSpecError("nodes must be an (N, 3) array")
        if nodes.shape[0] < 4:
            raise InvalidSpecError("a model needs at least 4 nodes")
        sections = tuple(self.sections)
        for sec in sections:
            if not isinstance(sec, Section):
                raise InvalidSpecError("sections must be Section instances")
        n = nodes.shape[0]
        for k, (a, b, sid) in enumerate(elements):
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise InvalidSpecError(f"element {k} has invalid end nodes ({a}, {b})")
            if not 0 <= sid < len(sections):
                raise InvalidSpecError(f"element {k} references missing section {sid}")
            if np.linalg.norm(nodes[b] - nodes[a]) <= LENGTH_TOL:
                raise DegenerateElementError(f"element {k} has zero length")
        for arr in (nodes, elements, gravity):
            arr.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "gravity", gravity)
        object.__setattr__(self, "sections", sections)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_dof(self):
        return DOF_PER_NODE * self.n_nodes

    def total_mass(self):
        m = 0.0
        for a, b, sid in self.elements:
            sec = self.sections[sid]
            m += sec.rho * sec.A * np.linalg.norm(self.nodes[b] - self.nodes[a])
        return m


@dataclass(frozen=True)
class GlobalSystem:
    K: sparse.csr_matrix
    F_g: np.ndarray

    def __post_init__(self):
        K = sparse.csr_matrix(self.K, dtype=float)
        F = np.asarray(self.F_g, dtype=float).ravel()
        if K.shape[0] != K.shape[1] or K.shape[0] != F.size:
            from .errors import DimensionMismatchError
            raise DimensionMismatchError(
                f"K is {K.shape[0]}x{K.shape[1]} but F_g has {F.size} entries")
        if K.shape[0] % DOF_PER_NODE:
            from .errors import DimensionMismatchError
            raise DimensionMismatchError("system size is not a multiple of 6")
        F.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "F_g", F)

    @property
    def n_nodes(self):
        return self.K.shape[0] // DOF_PER_NODE


@dataclass(frozen=True)
class ReducedSystem:
    """K* (factored), F_g*, u_g = A* F_g* and the reduced DOF map.

    ``kept_nodes[p]`` is the original node id sitting at reduced node
    position ``p``; reduced DOF ``6*p + k`` is component ``k`` of that node.
    """

    kstar: np.ndarray
    kstar_factor: tuple
    F_g_star: np.ndarray
    u_g: np.ndarray
    kept_nodes: np.ndarray
    prespecified: tuple

    @property
    def n_reduced_nodes(self):
        return self.kept_nodes.size

    @property
    def n_dof(self):
        return self.u_g.size

    def node_position(self, node):
        pos = self._positions().get(int(node))
        if pos is None:
            raise KeyError(f"node {node} is not part of the reduced system")
        return pos

    def dof(self, node, component):
        return DOF_PER_NODE * self.node_position(node) + component

    def dof_map(self):
        """Reduced DOF index -> (node id, component)."""
        return {DOF_PER_NODE * p + k: (int(node), k)
                for p, node in enumerate(self.kept_nodes) for k in range(DOF_PER_NODE)}

    def _positions(self):
        cache = self.__dict__.get("_pos_cache")
        if cache is None:
            cache = {int(nd): p for p, nd in enumerate(self.kept_nodes)}
            object.__setattr__(self, "_pos_cache", cache)
        return cache

    def solve(self, rhs):
        return linalg.cho_solve(self.kstar_factor, rhs, check_finite=False)

    def translational_dofs(self, nodes=None):
        nodes = self.kept_nodes if nodes is None else nodes
        return np.array([self.dof(nd, k) for nd in nodes for k in TRANSLATIONAL], dtype=int)


def build_frame_model(spec):
    """Half-cylinder grid of beams: ``n_rings`` semicircular arcs joined by stringers.

    The cylinder axis is global x.  Ring ``r`` sits at ``x = r * length /
    (n_rings - 1)``; stringer ``j`` at angle ``pi * j / (n_stringers - 1)``
    with ``y = R cos(theta)``, ``z = R sin(theta)`` so the two straight edges
    lie in the plane z = 0.  Node id = ``r * n_stringers + j``.
    """
    if spec.n_rings < 2 or spec.n_stringers < 3:
        raise InvalidSpecError("need n_rings >= 2 and n_stringers >= 3")
    if not (spec.radius > 0 and spec.length > 0):
        raise InvalidSpecError("radius and length must be positive")
    section = spec.section
    nr, ns = spec.n_rings, spec.n_stringers
    xs = np.linspace(0.0, spec.length, nr)
    theta = np.linspace(0.0, math.pi, ns)
    nodes = np.empty((nr * ns, 3))
    for r in range(nr):
        for j in range(ns):
            nodes[r * ns + j] = (xs[r], spec.radius * math.cos(theta[j]),
                                 spec.radius * math.sin(theta[j]))
    elements = []
    for r in range(nr):
        for j in range(ns - 1):
            elements.append((r * ns + j, r * ns + j + 1, 0))
    for j in range(ns):
        for r in range(nr - 1):
            elements.append((r * ns + j, (r + 1) * ns + j, 0))
    meta = {"kind": "half-cylinder", "n_rings": nr, "n_stringers": ns}
    return MeshModel(nodes=nodes, elements=np.array(elements), sections=(section,),
                     gravity=np.array(spec.gravity, dtype=float), meta=meta)


def edge_nodes(model):
    """Node ids along the two straight edges (theta = 0 and theta = pi), ring order."""
    ns = model.meta.get("n_stringers")
    nr = model.meta.get("n_rings")
    if ns is None:
        raise InvalidSpecError("edge nodes are only defined for half-cylinder models")
    first = [r * ns for r in range(nr)]
    last = [r * ns + ns - 1 for r in range(nr)]
    return first, last


def local_frame(xa, xb):
    """Rows are the element's local x, y, z axes in global coordinates."""
    ex = np.asarray(xb, dtype=float) - np.asarray(xa, dtype=float)
    length = np.linalg.norm(ex)
    if length <= LENGTH_TOL:
        raise DegenerateElementError("element has zero length")
    ex = ex / length
    ref = np.array([0.0, 0.0, 1.0])
    if abs(ex @ ref) > 0.999:
        ref = np.array([0.0, 1.0, 0.0])
    ey = np.cross(ref, ex)
    ey /= np.linalg.norm(ey)
    ez = np.cross(ex, ey)
    return np.vstack([ex, ey, ez]), length


def beam_local_stiffness(section, length):
    """12x12 Euler-Bernoulli beam stiffness in element coordinates."""
    if not length > LENGTH_TOL:
        raise DegenerateElementError(f"element length {length!r} is not positive")
    E, G, A = section.E, section.G, section.A
    Iy, Iz, J = section.Iy, section.Iz, section.J
    L = float(length)
    L2, L3 = L * L, L * L * L
    k = np.zeros((12, 12))
    ea = E * A / L
    k[0, 0] = k[6, 6] = ea
    k[0, 6] = k[6, 0] = -ea
    gj = G * J / L
    k[3, 3] = k[9, 9] = gj
    k[3, 9] = k[9, 3] = -gj
    # bending in the local x-y plane: v, theta_z
    a, bb, cc, dd = 12 * E * Iz / L3, 6 * E * Iz / L2, 4 * E * Iz / L, 2 * E * Iz / L
    v1, r1, v2, r2 = 1, 5, 7, 11
    blk = np.array([[a, bb, -a, bb], [bb, cc, -bb, dd], [-a, -bb, a, -bb], [bb, dd, -bb, cc]])
    idx = [v1, r1, v2, r2]
    k[np.ix_(idx, idx)] = blk
    # bending in the local x-z plane: w, theta_y (opposite rotation sign)
    a, bb, cc, dd = 12 * E * Iy / L3, 6 * E * Iy / L2, 4 * E * Iy / L, 2 * E * Iy / L
    blk = np.array([[a, -bb, -a, -bb], [-bb, cc, bb, dd], [-a, bb, a, bb], [-bb, dd, bb, cc]])
    idx = [2, 4, 8, 10]
    k[np.ix_(idx, idx)] = blk
    return k


def beam_element_stiffness(section, length, orientation):
    """Global-frame element stiffness ``T^T k T`` for a 3x3 local-to-global rotation.

    ``orientation`` has the element's local axes as rows (see :func:`local_frame`).
    """
    lam = np.asarray(orientation, dtype=float)
    if lam.shape != (3, 3) or not np.allclose(lam @ lam.T, np.eye(3), atol=1e-10):
        raise ValueError("orientation must be a 3x3 orthonormal matrix")
    k = beam_local_stiffness(section, length)
    T = np.kron(np.eye(4), lam)
    kg = T.T @ k @ T
    return 0.5 * (kg + kg.T)


def assemble_system(model):
    """Scatter-add element stiffnesses and lumped gravity into K and F_g."""
    n_dof = model.n_dof
    rows, cols, vals = [], [], []
    F = np.zeros(n_dof)
    for a, b, sid in model.elements:
        sec = model.sections[sid]
        lam, length = local_frame(model.nodes[a], model.nodes[b])
        ke = beam_element_stiffness(sec, length, lam)
        dofs = np.r_[DOF_PER_NODE * a: DOF_PER_NODE * a + 6, DOF_PER_NODE * b: DOF_PER_NODE * b + 6]
        rows.append(np.repeat(dofs, 12))
        cols.append(np.tile(dofs, 12))
        vals.append(ke.ravel())
        half = 0.5 * sec.rho * sec.A * length * model.gravity
        F[DOF_PER_NODE * a: DOF_PER_NODE * a + 3] += half
        F[DOF_PER_NODE * b: DOF_PER_NODE * b + 3] += half
    if rows:
        K = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(n_dof, n_dof)).tocsr()
    else:
        K = sparse.csr_matrix((n_dof, n_dof))
    # the element matrices are symmetric, but summation order can differ per triangle
    K = ((K + K.T) * 0.5).tocsr()
    K.sum_duplicates()
    return GlobalSystem(K=K, F_g=F)


def rigid_body_modes(nodes, about=None):
    """6 infinitesimal rigid-body displacement fields (translations, rotations)."""
    nodes = np.asarray(nodes, dtype=float)
    about = nodes.mean(axis=0) if about is None else np.asarray(about, dtype=float)
    n = nodes.shape[0]
    modes = np.zeros((DOF_PER_NODE * n, 6))
    for k in range(3):
        modes[k::6, k] = 1.0
    rel = nodes - about
    for k in range(3):
        omega = np.zeros(3)
        omega[k] = 1.0
        modes[0::6, 3 + k] = np.cross(omega, rel)[:, 0]
        modes[1::6, 3 + k] = np.cross(omega, rel)[:, 1]
        modes[2::6, 3 + k] = np.cross(omega, rel)[:, 2]
        modes[3 + k::6, 3 + k] = 1.0
    return modes


def factor_spd(K, pivot_tol=1e-12):
    """Cholesky factor of a dense SPD matrix; nonpositive or vanishing pivots raise.

    A pivot counts as vanishing when it falls below ``pivot_tol`` times the
    matching diagonal entry: the rounding-level remnant of a mechanism.
    """
    K = np.asarray(K, dtype=float)
    try:
        L = linalg.cholesky(K, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"stiffness factorization failed: {exc}") from exc
    piv = np.diag(L) ** 2
    diag = np.diag(K)
    bad = np.flatnonzero(piv <= pivot_tol * np.maximum(diag, np.finfo(float).tiny))
    if bad.size:
        raise SingularSystemError(
            f"near-zero pivot at reduced DOF {int(bad[0])}: structure has a mechanism")
    return (L, True)


def reduce_system(system, prespecified):
    """Delete all 6 DOFs of the 3 pre-specified nodes, factor K*, solve for u_g."""
    pre = tuple(int(p) for p in prespecified)
    if len(pre) != 3 or len(set(pre)) != 3:
        raise InvalidSpecError("exactly three distinct pre-specified nodes are required")
    return _reduce(system, pre)


def _reduce(system, clamped):
    n_nodes = system.n_nodes
    for p in clamped:
        if not 0 <= p < n_nodes:
            raise InvalidSpecError(f"clamped node {p} does not exist")
    kept = np.array([i for i in range(n_nodes) if i not in set(clamped)], dtype=int)
    dofs = (DOF_PER_NODE * kept[:, None] + np.arange(DOF_PER_NODE)).ravel()
    kstar = system.K[dofs][:, dofs].toarray()
    kstar = 0.5 * (kstar + kstar.T)
    factor = factor_spd(kstar)
    F = np.array(system.F_g[dofs])
    u_g = linalg.cho_solve(factor, F, check_finite=False)
    for arr in (kstar, F, u_g, kept):
        arr.setflags(write=False)
    return ReducedSystem(kstar=kstar, kstar_factor=factor, F_g_star=F, u_g=u_g,
                         kept_nodes=kept, prespecified=tuple(clamped))


def apply_inverse_columns(reduced, dof_indices):
    """Columns of A* = (K*)^-1 at the requested reduced DOFs, by direct solves."""
    idx = np.asarray(dof_indices, dtype=int).ravel()
    n = reduced.n_dof
    if idx.size == 0:
        return np.zeros((n, 0))
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError("reduced DOF index out of range")
    E = np.zeros((n, idx.size))
    E[idx, np.arange(idx.size)] = 1.0
    return reduced.solve(E)
