"""Fixture-design problem, its lifted conic relaxation, and certificates.

Forces live only at the translational DOFs of the potential nodes.  With
``F`` the 3*N_PT vector of those forces and ``B`` the matching columns of
A* = (K*)^-1, the displacement is ``U = u_g + B F``.  The complementarity
``U(m(l)) F(l) = 0`` becomes, after lifting ``F F^T`` to ``S1``, the linear
rows ``c_l F_l + sum_k G(l, k) S1(l, k) = 0`` with ``c = u_g[m]`` and
``G = B[m, :]``.  The relaxation keeps ``S2 = [[S1, F], [F^T, 1]] >= 0`` and
penalizes ``tr(S2)`` (its nuclear norm, since S2 is PSD).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import PSD, ConicProgram, Free, NonNeg, SecondOrder, Settings, solve, svec_index
from .conic.cones import smat
from .errors import (EmptyLayoutError, InvalidPotentialError, InvalidSpecError,
                     NotApplicableError, SolverFailureError)
from .fe_model import DOF_PER_NODE, apply_inverse_columns
from .layouts import FixtureLayout, default_w_mask

SQRT2 = math.sqrt(2.0)


def dof_index_map(reduced, potential):
    """Reduced DOF index (0-based) of every force component l = 0 .. 3*N_PT-1.

    Component ``l`` is axis ``l % 3`` of potential node ``l // 3``.
    """
    potential = list(potential)
    if not potential:
        raise InvalidPotentialError("potential set is empty")
    pos = np.array([reduced.node_position(nd) for nd in potential], dtype=int)
    return (DOF_PER_NODE * pos[:, None] + np.arange(3)).ravel()


@dataclass(frozen=True)
class FixtureDesignProblem:
    reduced: object
    potential: tuple
    n_a: int
    w_mask: np.ndarray
    dofs: np.ndarray      # m(l), 0-based reduced indices
    B: np.ndarray         # (6 N1, 3 N_PT)
    c: np.ndarray         # u_g[m]
    G: np.ndarray         # B[m, :]

    @property
    def n_pt(self):
        return len(self.potential)

    @property
    def n_force(self):
        return 3 * len(self.potential)

    def displacement(self, F):
        return self.reduced.u_g + self.B @ F

    def delta_sq(self, F):
        U = self.displacement(F)[self.w_mask]
        return float(U @ U)

    def delta_sq_gradient(self, F):
        U = self.displacement(F)
        WU = np.zeros_like(U)
        WU[self.w_mask] = U[self.w_mask]
        return 2.0 * (self.B.T @ WU)

    def group_norms(self, F):
        return np.linalg.norm(np.asarray(F).reshape(-1, 3), axis=1)

    def complementarity_residual(self, F):
        """Per-component value of ``c_l F_l + sum_k G(l,k) F_k F_l``."""
        F = np.asarray(F, dtype=float)
        return F * (self.c + self.G @ F)

    def lifted_residual(self, F, S1):
        """Per-component value of ``c_l F_l + sum_k G(l,k) S1(l,k)``."""
        F = np.asarray(F, dtype=float)
        return self.c * F + np.einsum("lk,lk->l", self.G, S1)


def build_problem(reduced, potential, n_a, W_nodes=None):
    pre = set(reduced.prespecified)
    pot = sorted(int(p) for p in potential)
    if len(set(pot)) != len(pot):
        raise InvalidPotentialError("potential set has duplicate nodes")
    if not pot:
        raise InvalidPotentialError("potential set is empty")
    clash = sorted(pre.intersection(pot))
    if clash:
        raise InvalidPotentialError(f"potential nodes {clash} are pre-specified")
    for nd in pot:
        try:
            reduced.node_position(nd)
        except KeyError:
            raise InvalidPotentialError(f"potential node {nd} is not in the model") from None
    if not 1 <= int(n_a) <= len(pot):
        raise InvalidSpecError(f"fixture budget n_a={n_a} must lie in [1, {len(pot)}]")
    dofs = dof_index_map(reduced, pot)
    B = apply_inverse_columns(reduced, dofs)
    c = np.array(reduced.u_g[dofs])
    G = np.array(B[dofs, :])
    if W_nodes is None:
        w_mask = default_w_mask(reduced)
    else:
        w_mask = reduced.translational_dofs(sorted(int(v) for v in W_nodes))
    for arr in (dofs, B, c, G, w_mask):
        arr.setflags(write=False)
    return FixtureDesignProblem(reduced=reduced, potential=tuple(pot), n_a=int(n_a),
                                w_mask=w_mask, dofs=dofs, B=B, c=c, G=G)


def relaxation_variable_count(n_pt):
    """Model variables of the relaxation: F, t, q and the svec of S2."""
    n = 3 * n_pt
    return n + n_pt + 1 + (n + 1) * (n + 2) // 2


@dataclass(frozen=True)
class Relaxation:
    """Conic encoding of the relaxation plus where each model variable lives."""

    problem: FixtureDesignProblem
    lam: float
    mu: float
    program: ConicProgram
    q_index: int
    t_index: np.ndarray
    F_index: np.ndarray
    S2_slice: slice
    side: int
    deformation_offset: float

    @property
    def model_variable_count(self):
        """F, t, q and svec(S2); t is implicit (group norms) when lam = 0."""
        npt = self.problem.n_pt
        return 1 + npt + self.F_index.size + (self.S2_slice.stop - self.S2_slice.start)


def assemble_relaxation(problem, lam, mu):
    """Standard-form conic program of the group-lasso + trace-penalized lift.

    Variables, in order: q >= 0; per potential node the cone
    (t_i, f_i) with ||f_i|| <= t_i; an epigraph cone (z0, z1, z_r) with
    z0 - z1 = 1 and z0 + z1 = q, so q >= ||z_r||^2; finally svec(S2).
    The deformation ``||W^1/2 (u_g + B F)||^2`` is compressed through a thin
    QR of the weighted columns into ``||R F + d||^2 + offset``.
    """
    if lam < 0 or mu < 0:
        raise InvalidSpecError("lambda and mu must be nonnegative")
    npt = problem.n_pt
    n = problem.n_force
    side = n + 1
    Bw = problem.B[problem.w_mask]
    uw = problem.reduced.u_g[problem.w_mask]
    Q, R = np.linalg.qr(Bw, mode="reduced")
    d = Q.T @ uw
    resid = uw - Q @ d
    offset = float(resid @ resid)
    k = R.shape[0]

    # with lam = 0 the epigraph heads t carry no cost and appear in no row, so
    # their cones have no dual interior; F is then emitted as a free block
    with_t = lam > 0
    n_node = 4 * npt if with_t else n
    n_epi = 2 + k
    n_psd = side * (side + 1) // 2
    q0 = 0
    node0 = 1
    epi0 = node0 + n_node
    psd0 = epi0 + n_epi
    nvar = psd0 + n_psd
    if with_t:
        t_index = node0 + 4 * np.arange(npt)
        F_index = (t_index[:, None] + 1 + np.arange(3)).ravel()
    else:
        t_index = np.zeros(0, dtype=int)
        F_index = node0 + np.arange(n)

    def s2(i, j):
        return psd0 + svec_index(side, i, j)

    m = 2 + k + n + 1 + n
    A = np.zeros((m, nvar))
    b = np.zeros(m)
    row = 0
    A[row, epi0] = 1.0
    A[row, epi0 + 1] = -1.0
    b[row] = 1.0
    row += 1
    A[row, epi0] = 1.0
    A[row, epi0 + 1] = 1.0
    A[row, q0] = -1.0
    row += 1
    # z_r - R F = d
    for j in range(k):
        A[row, epi0 + 2 + j] = 1.0
        A[row, F_index] = -R[j]
        b[row] = d[j]
        row += 1
    # S2 border equals F
    for l in range(n):
        A[row, s2(l, n)] = 1.0 / SQRT2
        A[row, F_index[l]] = -1.0
        row += 1
    A[row, s2(n, n)] = 1.0
    b[row] = 1.0
    row += 1
    # lifted complementarity rows
    G = problem.G
    for l in range(n):
        A[row, F_index[l]] = problem.c[l]
        for kk in range(n):
            coef = G[l, kk] if kk == l else G[l, kk] / SQRT2
            A[row, s2(l, kk)] += coef
        row += 1

    c = np.zeros(nvar)
    c[q0] = 1.0
    c[t_index] = lam
    for i in range(side):
        c[s2(i, i)] = mu
    node_cones = [SecondOrder(4)] * npt if with_t else [Free(n)]
    cones = [NonNeg(1)] + node_cones + [SecondOrder(n_epi), PSD(side)]
    program = ConicProgram(c=c, A=A, b=b, cones=cones, offset=offset)
    return Relaxation(problem=problem, lam=float(lam), mu=float(mu), program=program,
                      q_index=q0, t_index=t_index, F_index=F_index,
                      S2_slice=slice(psd0, nvar), side=side, deformation_offset=offset)


@dataclass
class RelaxationSolution:
    F: np.ndarray
    t: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    deformation: float
    lasso: float
    trace: float
    lam: float
    mu: float
    solver_status: str
    iterations: int
    solve_time: float
    force_scale: float = 1.0
    conic: object = field(default=None, repr=False)

    @property
    def objective(self):
        return self.deformation + self.lasso + self.trace

    @property
    def objective_terms(self):
        return {"deformation": self.deformation, "lasso": self.lasso, "trace": self.trace}


def unpack(relaxation, conic_solution):
    x = conic_solution.x
    prob = relaxation.problem
    F = np.array(x[relaxation.F_index])
    t = np.array(x[relaxation.t_index]) if relaxation.t_index.size else prob.group_norms(F)
    S2 = smat(x[relaxation.S2_slice], relaxation.side)
    n = prob.n_force
    return RelaxationSolution(
        F=F, t=t, S1=S2[:n, :n].copy(), S2=S2,
        deformation=prob.delta_sq(F),
        lasso=relaxation.lam * float(prob.group_norms(F).sum()),
        trace=relaxation.mu * float(np.trace(S2)),
        lam=relaxation.lam, mu=relaxation.mu,
        solver_status=conic_solution.status.value,
        iterations=conic_solution.iterations,
        solve_time=conic_solution.solve_time,
        force_scale=float(np.linalg.norm(prob.reduced.F_g_star)),
        conic=conic_solution,
    )


def solve_relaxation(problem, lam, mu, settings=None, require_optimal=True):
    t0 = time.perf_counter()
    relax = assemble_relaxation(problem, lam, mu)
    sol = solve(relax.program, settings or Settings())
    if require_optimal and sol.status.value != "Optimal":
        raise SolverFailureError(
            f"relaxation solve at lambda={lam:.6g}, mu={mu:.6g} ended {sol.status.value}",
            status=sol.status)
    out = unpack(relax, sol)
    out.solve_time = time.perf_counter() - t0
    return out


def check_assumption_pre(problem):
    """True when every gravity displacement at a potential DOF is nonzero."""
    a = np.abs(problem.c)
    top = a.max() if a.size else 0.0
    if top == 0.0:
        return False
    return bool(a.min() > 1e-12 * top)


def check_assumption_post(problem, F):
    """True when some force component meets a nonzero gravity displacement."""
    F = np.asarray(getattr(F, "F", F), dtype=float)
    prod = np.abs(F * problem.c)
    scale = np.abs(F).max() * np.abs(problem.c).max() if F.size else 0.0
    if scale == 0.0:
        return False
    return bool(prod.max() > 1e-10 * scale)


@dataclass
class RankCertificate:
    is_rank_one: bool
    rho_sq: float
    parallel_residual: float
    eig_ratio: float

    def to_json(self):
        return {"is_rank_one": bool(self.is_rank_one), "rho_sq": float(self.rho_sq),
                "parallel_residual": float(self.parallel_residual),
                "eig_ratio": float(self.eig_ratio)}


def certify_rank_one(sol, eig_ratio_tol=1e-6):
    """Check S1 = v v^T with v = rho F and rho^2 = 1.

    ``sol`` is a :class:`RelaxationSolution` or an ``(F, S1)`` pair.
    """
    if isinstance(sol, RelaxationSolution):
        F, S1, fscale = sol.F, sol.S1, sol.force_scale
    else:
        F, S1 = (np.asarray(a, dtype=float) for a in sol)
        fscale = 0.0
    F = np.asarray(F, dtype=float)
    nF = np.linalg.norm(F)
    if nF <= max(1e-7 * fscale, 1e-8):
        raise NotApplicableError("force vector is numerically zero")
    S1 = 0.5 * (S1 + S1.T)
    w, V = np.linalg.eigh(S1)
    lmax = w[-1]
    if lmax <= 0:
        raise NotApplicableError("lifted block has no positive eigenvalue")
    ratio = (w[-2] / lmax) if w.size > 1 else 0.0
    v = math.sqrt(lmax) * V[:, -1]
    rho_sq = float((v @ F) ** 2 / nF ** 4)
    FF = np.outer(F, F)
    resid = float(np.linalg.norm(S1 - FF) / max(1.0, np.linalg.norm(FF)))
    return RankCertificate(bool(ratio <= eig_ratio_tol), rho_sq, resid, float(ratio))


def slackness_residual(problem, F):
    """max_l |U(m(l)) F_l| / (1 + max|U| max|F|) with U = u_g + B F."""
    F = np.asarray(getattr(F, "F", F), dtype=float)
    U = problem.displacement(F)
    num = np.abs(U[problem.dofs] * F).max() if F.size else 0.0
    return float(num / (1.0 + np.abs(U).max() * np.abs(F).max()))


def extract_layout(problem, F, rel_threshold=1e-3):
    """Nodes whose force magnitude exceeds rel_threshold * max, capped at n_a."""
    F = np.asarray(getattr(F, "F", F), dtype=float)
    mags = problem.group_norms(F)
    top = mags.max() if mags.size else 0.0
    if top < 1e-12:
        raise EmptyLayoutError("all fixture forces are numerically zero")
    keep = np.flatnonzero(mags > rel_threshold * top)
    if keep.size > problem.n_a:
        # largest magnitude first, lowest node id on ties
        order = sorted(keep, key=lambda i: (-mags[i], problem.potential[i]))
        keep = np.array(order[: problem.n_a])
    return FixtureLayout(tuple(problem.potential[i] for i in keep))
