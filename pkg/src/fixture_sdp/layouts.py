"""Fixture layouts and their exact evaluation.

Two independent routes produce the displacement field of a layout:

* :func:`evaluate_layout` removes the translational DOFs of the fixture
  nodes from K* and re-solves (what an FEA package would do);
* :func:`evaluate_layout_reactions` keeps K* and solves for the fixture
  reactions that zero those DOFs, ``U = u_g + A*_sel r``.

:class:`LayoutEvaluator` is the batched form of the second route that the
search baselines and the relaxation's re-evaluation share.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import kernels
from .errors import InvalidPotentialError, SingularSystemError
from .fe_model import DOF_PER_NODE, apply_inverse_columns, factor_spd

OBJECTIVES = ("total_delta_sq", "max_node_deformation")


@dataclass(frozen=True)
class FixtureLayout:
    selected: tuple

    def __post_init__(self):
        sel = tuple(sorted(int(v) for v in self.selected))
        if len(set(sel)) != len(sel):
            raise ValueError("layout contains duplicate nodes")
        object.__setattr__(self, "selected", sel)

    @property
    def cardinality(self):
        return len(self.selected)

    def __iter__(self):
        return iter(self.selected)

    def __len__(self):
        return len(self.selected)


@dataclass
class LayoutEvaluation:
    selected: tuple
    U: np.ndarray
    delta_sq: float
    max_node_deformation: float
    reactions: dict

    def objective(self, name):
        if name == "total_delta_sq":
            return self.delta_sq
        if name == "max_node_deformation":
            return self.max_node_deformation
        raise ValueError(f"unknown objective {name!r}")

    def to_json(self):
        return {
            "selected": [int(v) for v in self.selected],
            "delta_sq": float(self.delta_sq),
            "max_node_deformation": float(self.max_node_deformation),
            "reactions": [
                {"node": int(nd), "fx": float(f[0]), "fy": float(f[1]), "fz": float(f[2])}
                for nd, f in sorted(self.reactions.items())
            ],
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2)


def default_w_mask(reduced):
    """Translational DOFs of every node in the reduced system."""
    return reduced.translational_dofs()


def w_mask_for_nodes(reduced, nodes):
    return reduced.translational_dofs(nodes)


def _check_layout(reduced, layout):
    sel = tuple(layout.selected if isinstance(layout, FixtureLayout) else sorted(layout))
    pre = set(reduced.prespecified)
    for nd in sel:
        if nd in pre:
            raise InvalidPotentialError(f"node {nd} is already pre-specified")
        reduced.node_position(nd)
    return sel


def _metrics(reduced, U, w_mask):
    delta_sq = float(U[w_mask] @ U[w_mask])
    trans = U.reshape(-1, DOF_PER_NODE)[:, :3]
    maxdef = float(np.sqrt((trans * trans).sum(axis=1)).max()) if trans.size else 0.0
    return delta_sq, maxdef


def evaluate_layout(reduced, layout, w_mask=None):
    """Exact evaluation: eliminate the fixtures' translational DOFs and re-solve."""
    sel = _check_layout(reduced, layout)
    w_mask = default_w_mask(reduced) if w_mask is None else np.asarray(w_mask, dtype=int)
    n = reduced.n_dof
    if not sel:
        U = np.array(reduced.u_g)
        return LayoutEvaluation(sel, U, *_metrics(reduced, U, w_mask), reactions={})
    fixed = reduced.translational_dofs(sel)
    free = np.setdiff1d(np.arange(n), fixed)
    Kff = reduced.kstar[np.ix_(free, free)]
    factor = factor_spd(Kff)
    U = np.zeros(n)
    U[free] = linalg.cho_solve(factor, reduced.F_g_star[free], check_finite=False)
    r = reduced.kstar[fixed] @ U - reduced.F_g_star[fixed]
    reactions = {nd: r[3 * k: 3 * k + 3].copy() for k, nd in enumerate(sel)}
    return LayoutEvaluation(sel, U, *_metrics(reduced, U, w_mask), reactions=reactions)


def evaluate_layout_reactions(reduced, layout, w_mask=None):
    """Same quantities via the fixture reactions: solve A*_ss r = -u_g[s]."""
    sel = _check_layout(reduced, layout)
    w_mask = default_w_mask(reduced) if w_mask is None else np.asarray(w_mask, dtype=int)
    if not sel:
        U = np.array(reduced.u_g)
        return LayoutEvaluation(sel, U, *_metrics(reduced, U, w_mask), reactions={})
    fixed = reduced.translational_dofs(sel)
    Bsel = apply_inverse_columns(reduced, fixed)
    Gsel = Bsel[fixed]
    Gsel = 0.5 * (Gsel + Gsel.T)
    try:
        r = linalg.solve(Gsel, -reduced.u_g[fixed], assume_a="pos")
    except linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    U = reduced.u_g + Bsel @ r
    U[fixed] = 0.0
    reactions = {nd: r[3 * k: 3 * k + 3].copy() for k, nd in enumerate(sel)}
    return LayoutEvaluation(sel, U, *_metrics(reduced, U, w_mask), reactions=reactions)


class LayoutEvaluator:
    """Shared exact oracle over subsets of a fixed potential set.

    Precomputes the compliance columns at the potential translational DOFs
    once; each evaluation is then a small SPD solve of size 3 * n_a.  Results
    are cached per subset and ``n_evaluations`` counts distinct layouts.
    """

    def __init__(self, reduced, potential, w_mask=None, B=None, backend=None):
        self.reduced = reduced
        self.potential = tuple(int(p) for p in potential)
        pre = set(reduced.prespecified)
        if pre & set(self.potential):
            raise InvalidPotentialError("potential set overlaps pre-specified nodes")
        self.w_mask = default_w_mask(reduced) if w_mask is None else np.asarray(w_mask, dtype=int)
        pdofs = reduced.translational_dofs(self.potential)
        if B is None:
            B = apply_inverse_columns(reduced, pdofs)
        tdofs = reduced.translational_dofs()
        self.G = np.ascontiguousarray(0.5 * (B[pdofs] + B[pdofs].T))
        self.c = np.ascontiguousarray(reduced.u_g[pdofs])
        self.Bt = np.ascontiguousarray(B[tdofs])
        self.ut = np.ascontiguousarray(reduced.u_g[tdofs])
        wt = np.zeros(reduced.n_dof)
        wt[self.w_mask] = 1.0
        self.wt = np.ascontiguousarray(wt[tdofs])
        self.backend = kernels.get_backend(backend)
        self._cache = {}
        self.n_evaluations = 0

    def fork(self):
        """Same precomputed data, empty cache and evaluation counter."""
        twin = copy.copy(self)
        twin._cache = {}
        twin.n_evaluations = 0
        return twin

    def positions(self, nodes):
        index = {nd: k for k, nd in enumerate(self.potential)}
        return tuple(sorted(index[int(nd)] for nd in nodes))

    def evaluate_positions(self, subsets):
        """(delta_sq, max_node_deformation) arrays for rows of position indices."""
        subsets = np.atleast_2d(np.asarray(subsets, dtype=np.int64))
        if subsets.shape[1] == 0:
            d = float(self.ut @ (self.wt * self.ut))
            m = float(np.sqrt((self.ut.reshape(-1, 3) ** 2).sum(axis=1)).max())
            return np.full(subsets.shape[0], d), np.full(subsets.shape[0], m)
        return self.backend.evaluate_subsets(self.G, self.c, self.Bt, self.ut, self.wt, subsets)

    def __call__(self, positions, objective="total_delta_sq"):
        if objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {objective!r}")
        key = tuple(sorted(int(p) for p in positions))
        hit = self._cache.get(key)
        if hit is None:
            d, m = self.evaluate_positions(np.array([key], dtype=np.int64).reshape(1, len(key)))
            hit = (float(d[0]), float(m[0]))
            self._cache[key] = hit
            self.n_evaluations += 1
        return hit[0] if objective == "total_delta_sq" else hit[1]

    def evaluate_nodes(self, nodes, objective="total_delta_sq"):
        return self(self.positions(nodes), objective)
