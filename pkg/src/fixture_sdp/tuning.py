"""Penalty selection: bisection on lambda for the cardinality, escalation of mu for rank.

Every relaxation solve made here is logged as one :class:`TuningRecord`.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (BudgetUnreachableError, MonotonicityError, NotApplicableError,
                     RankNotAchievedError)
from .formulation import RelaxationSolution, certify_rank_one, solve_relaxation

log = logging.getLogger(__name__)

ZERO_FLOOR = 1e-12
TRACE_COLUMNS = ("lambda", "mu", "cardinality", "rank", "objective", "seconds")


def cardinality(sol, rel_threshold=1e-3):
    """Number of node groups whose force norm exceeds rel_threshold * max."""
    if isinstance(sol, RelaxationSolution):
        F = sol.F
    else:
        F = np.asarray(sol, dtype=float)
    mags = np.linalg.norm(F.reshape(-1, 3), axis=1) if F.ndim == 1 else np.asarray(F)
    top = mags.max() if mags.size else 0.0
    if top < ZERO_FLOOR:
        return 0
    return int(np.count_nonzero(mags > rel_threshold * top))


def numerical_rank(S, eig_ratio_tol=1e-6):
    S = np.asarray(S, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    top = w[-1] if w.size else 0.0
    if top <= 1e-14:
        return 0
    return int(np.count_nonzero(w > eig_ratio_tol * top))


@dataclass
class TuningRecord:
    lam: float
    mu: float
    cardinality: int
    rank: int
    objective: float
    seconds: float
    phase: str = ""


@dataclass
class TuningTrace:
    records: list = field(default_factory=list)
    final_lambda: float = None
    final_mu: float = None

    def add(self, rec):
        self.records.append(rec)
        log.info("%s lam=%.6g mu=%.6g card=%d rank=%d obj=%.6g (%.2fs)", rec.phase, rec.lam,
                 rec.mu, rec.cardinality, rec.rank, rec.objective, rec.seconds)

    def __len__(self):
        return len(self.records)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([repr(float(r.lam)), repr(float(r.mu)), r.cardinality, r.rank,
                        repr(float(r.objective)), f"{r.seconds:.6f}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


class _Prober:
    """Solve-and-log helper shared by the selectors."""

    def __init__(self, problem, trace, rel_threshold, eig_ratio_tol, settings):
        self.problem = problem
        self.trace = trace if trace is not None else TuningTrace()
        self.rel_threshold = rel_threshold
        self.eig_ratio_tol = eig_ratio_tol
        self.settings = settings

    def __call__(self, lam, mu, phase):
        t0 = time.perf_counter()
        sol = solve_relaxation(self.problem, lam, mu, self.settings)
        rec = TuningRecord(lam=float(lam), mu=float(mu),
                           cardinality=cardinality(sol, self.rel_threshold),
                           rank=numerical_rank(sol.S2, self.eig_ratio_tol),
                           objective=sol.objective, seconds=time.perf_counter() - t0,
                           phase=phase)
        self.trace.add(rec)
        return sol, rec


def _is_rank_one(sol, eig_ratio_tol):
    try:
        return certify_rank_one(sol, eig_ratio_tol).is_rank_one
    except NotApplicableError:
        return False


def select_mu(problem, lam=1.0, mu0=1.0, growth=2.0, max_steps=12, *, trace=None,
              rel_threshold=1e-3, eig_ratio_tol=1e-6, settings=None):
    """Escalate mu = mu0 * growth**k, k = 0..max_steps, until the lift certifies rank 1.

    Returns ``(mu, solution)``.  Raises :class:`RankNotAchievedError` (with the
    trace attached) when no escalation passes.
    """
    if mu0 <= 0 or growth <= 1:
        raise ValueError("need mu0 > 0 and growth > 1")
    probe = _Prober(problem, trace, rel_threshold, eig_ratio_tol, settings)
    for k in range(max_steps + 1):
        mu = mu0 * growth ** k
        sol, _ = probe(lam, mu, "mu")
        if _is_rank_one(sol, eig_ratio_tol):
            return mu, sol
    raise RankNotAchievedError(
        f"lifted block not rank one after {max_steps} escalations (mu up to {mu:.6g})",
        trace=probe.trace)


LAMBDA_PHASES = ("bracket", "bisect")


def _check_monotone(trace, mu):
    pts = sorted((r.lam, r.cardinality) for r in trace.records
                 if r.mu == mu and r.phase in LAMBDA_PHASES)
    for (l1, c1), (l2, c2) in zip(pts, pts[1:]):
        if l2 > l1 and c2 > c1:
            raise MonotonicityError(
                f"cardinality rose from {c1} to {c2} as lambda grew from {l1:.6g} to {l2:.6g}",
                trace=trace)


def select_lambda(problem, mu, n_a=None, lam_lo=0.0, lam_hi_0=1.0, max_iter=30, *,
                  trace=None, rel_threshold=1e-3, eig_ratio_tol=1e-6, settings=None,
                  max_doublings=60):
    """Bisection on lambda so the extracted cardinality meets the budget.

    Returns ``(lambda, solution)``.  An exact hit of ``n_a`` stops the search.
    Otherwise the returned solution is the smallest-cardinality probe above
    ``n_a`` (extraction then truncates it), or a probe with exactly ``n_a``.
    """
    n_a = problem.n_a if n_a is None else int(n_a)
    probe = _Prober(problem, trace, rel_threshold, eig_ratio_tol, settings)
    if lam_hi_0 <= lam_lo:
        raise ValueError("lam_hi_0 must exceed lam_lo")

    hi = float(lam_hi_0)
    sol_hi, rec = probe(hi, mu, "bracket")
    lo, sol_lo = float(lam_lo), None
    if rec.cardinality == n_a:
        _check_monotone(probe.trace, mu)
        return hi, sol_hi
    if rec.cardinality > n_a:
        for _ in range(max_doublings):
            lo, sol_lo = hi, sol_hi
            hi *= 2.0
            sol_hi, rec = probe(hi, mu, "bracket")
            _check_monotone(probe.trace, mu)
            if rec.cardinality <= n_a:
                break
        else:
            raise BudgetUnreachableError(
                f"cardinality still above {n_a} at lambda={hi:.6g}", trace=probe.trace)
        if rec.cardinality == n_a:
            return hi, sol_hi
    else:
        sol_lo, rec_lo = probe(lo, mu, "bracket")
        _check_monotone(probe.trace, mu)
        if rec_lo.cardinality < n_a:
            raise BudgetUnreachableError(
                f"cardinality {rec_lo.cardinality} < {n_a} even at lambda={lo:.6g}",
                trace=probe.trace)
        if rec_lo.cardinality == n_a:
            return lo, sol_lo

    for _ in range(max_iter):
        if hi - lo < 1e-3 * hi:
            break
        mid = 0.5 * (lo + hi)
        sol, rec = probe(mid, mu, "bisect")
        _check_monotone(probe.trace, mu)
        if rec.cardinality == n_a:
            return mid, sol
        if rec.cardinality > n_a:
            lo, sol_lo = mid, sol
        else:
            hi, sol_hi = mid, sol
    # never hit n_a exactly: nearest cardinality above, truncated on extraction
    return lo, sol_lo


@dataclass
class TuningResult:
    lam: float
    mu: float
    solution: RelaxationSolution
    trace: TuningTrace
    rank_one: bool
    mu_certified: bool


def tune(problem, n_a=None, *, lam_pilot=1.0, mu0=1.0, growth=2.0, max_steps=12,
         max_iter=30, rel_threshold=1e-3, eig_ratio_tol=1e-6, require_rank_one=True,
         settings=None):
    """mu by escalation at a pilot lambda, then lambda by bisection, then a rank re-check.

    When no mu certifies rank one, ``require_rank_one=True`` re-raises the
    :class:`RankNotAchievedError`; otherwise tuning continues at ``mu0`` (the
    least perturbing penalty tried) and the result is flagged uncertified.
    """
    trace = TuningTrace()
    kw = dict(trace=trace, rel_threshold=rel_threshold, eig_ratio_tol=eig_ratio_tol,
              settings=settings)
    certified = True
    try:
        mu, _ = select_mu(problem, lam_pilot, mu0, growth, max_steps, **kw)
    except RankNotAchievedError:
        if require_rank_one:
            raise
        certified = False
        mu = mu0
    lam, sol = select_lambda(problem, mu, n_a, max_iter=max_iter, **kw)
    rank_one = _is_rank_one(sol, eig_ratio_tol)
    if certified and not rank_one:
        # the pilot mu may not carry over to the tuned lambda: escalate once more
        try:
            mu, sol = select_mu(problem, lam, mu, growth, max_steps, **kw)
            rank_one = True
        except RankNotAchievedError:
            if require_rank_one:
                raise
            certified = False
    trace.final_lambda, trace.final_mu = lam, mu
    return TuningResult(lam=lam, mu=mu, solution=sol, trace=trace, rank_one=rank_one,
                        mu_certified=certified)
