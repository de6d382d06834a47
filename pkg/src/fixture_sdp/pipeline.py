"""End-to-end relaxation pipeline: tune or fix (lambda, mu), solve, certify,
extract a layout and re-evaluate it exactly."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyLayoutError, NotApplicableError
from .formulation import (check_assumption_post, check_assumption_pre, certify_rank_one,
                          extract_layout, slackness_residual, solve_relaxation)
from .layouts import FixtureLayout, evaluate_layout_reactions
from .tuning import TuningTrace, numerical_rank, select_lambda, select_mu, tune

AUTO = "auto"


@dataclass
class PipelineResult:
    layout: FixtureLayout
    evaluation: object          # LayoutEvaluation of the extracted layout
    lam: float
    mu: float
    solution: object            # RelaxationSolution (None for the trivial case)
    certificate: object         # RankCertificate or None
    assumption_pre: bool
    assumption_post: bool
    relaxation_slackness: float
    rounded_slackness: float
    rank_S2: int
    trace: object = None
    mu_certified: bool = None
    timings: dict = field(default_factory=dict)
    n_stiffness_solves: int = 0

    def to_json(self):
        ev = self.evaluation.to_json()
        cert = self.certificate.to_json() if self.certificate is not None else None
        sol = self.solution
        return {
            "layout": ev["selected"],
            "delta_sq": ev["delta_sq"],
            "max_node_deformation": ev["max_node_deformation"],
            "reactions": ev["reactions"],
            "lambda": self.lam,
            "mu": self.mu,
            "mu_certified": self.mu_certified,
            "rank_certificate": cert,
            "rank_S2": self.rank_S2,
            "assumption_pre": self.assumption_pre,
            "assumption_post": self.assumption_post,
            "slackness_residual": self.rounded_slackness,
            "relaxation_slackness_residual": self.relaxation_slackness,
            "solver_status": sol.solver_status if sol is not None else None,
            "objective_terms": sol.objective_terms if sol is not None else None,
            "stiffness_solves": self.n_stiffness_solves,
            "timings": self.timings,
        }


def rounded_forces(problem, evaluation):
    """Force vector of the exact constrained solve, laid out like F."""
    F = np.zeros(problem.n_force)
    index = {nd: k for k, nd in enumerate(problem.potential)}
    for nd, r in evaluation.reactions.items():
        k = index[nd]
        F[3 * k:3 * k + 3] = r
    return F


def evaluate_exact(problem, layout):
    """Exact re-evaluation of a layout (reaction route, with reactions)."""
    return evaluate_layout_reactions(problem.reduced, layout, problem.w_mask)


def run_pipeline(problem, lam=AUTO, mu=AUTO, *, rel_threshold=1e-3, eig_ratio_tol=1e-6,
                 require_rank_one=True, settings=None, tune_kwargs=None):
    """Solve the relaxation for ``problem`` and return the re-evaluated layout.

    ``lam``/``mu`` are numbers or ``"auto"``.  With both on ``"auto"`` the
    full tuning sequence runs; with only one automatic, that one is selected
    with the other held fixed.
    """
    timings = {}
    t0 = time.perf_counter()
    pre = check_assumption_pre(problem)
    trace = None
    mu_certified = None
    if not np.any(problem.c) and not np.any(problem.reduced.u_g):
        # no load: nothing deforms and no fixture carries force
        layout = FixtureLayout(())
        evaluation = evaluate_exact(problem, layout)
        timings["total"] = time.perf_counter() - t0
        return PipelineResult(layout=layout, evaluation=evaluation, lam=0.0, mu=0.0,
                              solution=None, certificate=None, assumption_pre=pre,
                              assumption_post=False, relaxation_slackness=0.0,
                              rounded_slackness=0.0, rank_S2=0, timings=timings,
                              n_stiffness_solves=problem.n_force + 2)
    kw = dict(rel_threshold=rel_threshold, eig_ratio_tol=eig_ratio_tol, settings=settings)
    if lam == AUTO and mu == AUTO:
        res = tune(problem, require_rank_one=require_rank_one, **kw, **(tune_kwargs or {}))
        lam, mu, sol, trace, mu_certified = res.lam, res.mu, res.solution, res.trace, \
            res.mu_certified
    elif lam == AUTO:
        trace = TuningTrace()
        lam, sol = select_lambda(problem, float(mu), trace=trace, **kw)
        mu = float(mu)
    elif mu == AUTO:
        trace = TuningTrace()
        mu, sol = select_mu(problem, float(lam), trace=trace, **kw)
        lam = float(lam)
        mu_certified = True
    else:
        lam, mu = float(lam), float(mu)
        sol = solve_relaxation(problem, lam, mu, settings)
    timings["relaxation"] = time.perf_counter() - t0

    try:
        cert = certify_rank_one(sol, eig_ratio_tol)
    except NotApplicableError:
        cert = None
    post = check_assumption_post(problem, sol.F)
    try:
        layout = extract_layout(problem, sol.F, rel_threshold)
    except EmptyLayoutError:
        layout = FixtureLayout(())
    t1 = time.perf_counter()
    evaluation = evaluate_exact(problem, layout)
    timings["evaluation"] = time.perf_counter() - t1
    timings["total"] = time.perf_counter() - t0
    return PipelineResult(
        layout=layout, evaluation=evaluation, lam=float(lam), mu=float(mu), solution=sol,
        certificate=cert, assumption_pre=pre, assumption_post=post,
        relaxation_slackness=slackness_residual(problem, sol.F),
        rounded_slackness=slackness_residual(problem, rounded_forces(problem, evaluation)),
        rank_S2=numerical_rank(sol.S2, eig_ratio_tol), trace=trace,
        mu_certified=mu_certified, timings=timings,
        # B columns, u_g and the final constrained solve
        n_stiffness_solves=problem.n_force + 2,
    )

