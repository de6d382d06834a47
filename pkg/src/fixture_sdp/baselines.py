"""Search baselines over fixture subsets: exhaustive enumeration, simulated
annealing and uniform random sampling.

All three score candidates through :class:`~fixture_sdp.layouts.LayoutEvaluator`,
the same exact constrained solve used to re-evaluate relaxation layouts.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpecError, TooLargeError
from .layouts import OBJECTIVES, FixtureLayout, LayoutEvaluator

EXHAUSTIVE_CAP = 10 ** 6
_CHUNK = 4096


def _evaluator(reduced, potential, W_mask, backend, evaluator):
    if evaluator is not None:
        return evaluator
    return LayoutEvaluator(reduced, sorted(potential), w_mask=W_mask, backend=backend)


def _check_budget(n_pt, n_a):
    if not 1 <= n_a <= n_pt:
        raise InvalidSpecError(f"fixture budget {n_a} must lie in [1, {n_pt}]")


@dataclass
class ExhaustiveResult:
    layout: FixtureLayout
    value: float
    objective: str
    layouts: np.ndarray        # (C, n_a) node ids, lexicographic
    delta_sq: np.ndarray
    max_node_deformation: np.ndarray

    @property
    def n_evaluations(self):
        return int(self.delta_sq.size)

    def values(self):
        return self.delta_sq if self.objective == "total_delta_sq" else self.max_node_deformation

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["layout", "delta_sq", "max_node_deformation"])
        for nodes, d, m in zip(self.layouts, self.delta_sq, self.max_node_deformation):
            w.writerow([" ".join(str(int(v)) for v in nodes), repr(float(d)), repr(float(m))])
        return _emit(buf.getvalue(), path)


def _emit(text, path):
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def exhaustive_search(reduced, potential, n_a, W_mask=None, objective="total_delta_sq", *,
                      cap=EXHAUSTIVE_CAP, backend=None, evaluator=None):
    """Score every ``n_a``-subset; ties go to the lexicographically smallest node list."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    ev = _evaluator(reduced, potential, W_mask, backend, evaluator)
    n_pt = len(ev.potential)
    _check_budget(n_pt, n_a)
    total = math.comb(n_pt, n_a)
    if total > cap:
        raise TooLargeError(f"C({n_pt}, {n_a}) = {total} subsets exceeds the cap {cap}")
    order = np.argsort(ev.potential)  # positions in increasing node id
    combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations(order, n_a)),
                         dtype=np.int64, count=total * n_a).reshape(total, n_a)
    dsq = np.empty(total)
    mdef = np.empty(total)
    for start in range(0, total, _CHUNK):
        sl = slice(start, start + _CHUNK)
        dsq[sl], mdef[sl] = ev.evaluate_positions(combos[sl])
    nodes = np.asarray(ev.potential)[combos]
    vals = dsq if objective == "total_delta_sq" else mdef
    best = int(np.argmin(vals))  # first minimum == lexicographically smallest
    return ExhaustiveResult(layout=FixtureLayout(tuple(int(v) for v in nodes[best])),
                            value=float(vals[best]), objective=objective, layouts=nodes,
                            delta_sq=dsq, max_node_deformation=mdef)


@dataclass
class SAConfig:
    """Annealing schedule; ``None`` fields are calibrated per instance.

    T0 defaults to the sample standard deviation of 20 random-layout
    objectives, steps_per_T to N_PT and T_min to 1e-4 * T0.  With a budget the
    cooling factor is recomputed so the schedule spends roughly that many
    evaluations.
    """

    T0: float = None
    cooling: float = 0.95
    steps_per_T: int = None
    T_min: float = None
    seed: int = 0
    objective: str = "max_node_deformation"
    budget: int = None
    n_calibration: int = 20

    def __post_init__(self):
        if not 0.0 < self.cooling < 1.0:
            raise InvalidSpecError("cooling must lie in (0, 1)")
        if self.steps_per_T is not None and self.steps_per_T < 1:
            raise InvalidSpecError("steps_per_T must be at least 1")
        if self.objective not in OBJECTIVES:
            raise InvalidSpecError(f"unknown objective {self.objective!r}")
        if self.budget is not None and self.budget < 1:
            raise InvalidSpecError("budget must be positive")


@dataclass
class SAResult:
    layout: FixtureLayout
    value: float
    objective: str
    trajectory: list = field(default_factory=list)  # (step, T, current, best)
    n_evaluations: int = 0
    initial_value: float = None
    schedule: dict = field(default_factory=dict)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "temperature", "current", "best"])
        for step, T, cur, best in self.trajectory:
            w.writerow([step, repr(float(T)), repr(float(cur)), repr(float(best))])
        return _emit(buf.getvalue(), path)


def _random_subset(rng, n_pt, n_a):
    return tuple(sorted(int(v) for v in rng.choice(n_pt, size=n_a, replace=False)))


def simulated_annealing(reduced, potential, n_a, W_mask=None, config=None, *, backend=None,
                        evaluator=None):
    """Swap-neighbourhood annealing over ``n_a``-subsets of the potential set.

    A move swaps one selected node for one unselected node, both uniform.
    Improving moves are always accepted, others with ``exp(-delta / T)``.
    The evaluation count covers distinct layouts, calibration included.
    """
    config = config or SAConfig()
    ev = _evaluator(reduced, potential, W_mask, backend, evaluator)
    n_pt = len(ev.potential)
    _check_budget(n_pt, n_a)
    rng = np.random.default_rng(config.seed)
    obj = config.objective
    start_evals = ev.n_evaluations

    def used():
        return ev.n_evaluations - start_evals

    def f(state):
        return ev(state, obj)

    state = _random_subset(rng, n_pt, n_a)
    cur = f(state)
    init = cur
    T0 = config.T0
    if T0 is None:
        n_cal = config.n_calibration
        if config.budget is not None:
            n_cal = min(n_cal, max(2, config.budget // 5))
        sample = [f(_random_subset(rng, n_pt, n_a)) for _ in range(n_cal)]
        T0 = float(np.std(sample, ddof=1)) if len(sample) > 1 else 0.0
        if T0 <= 0.0:
            T0 = max(abs(cur), 1e-12) * 1e-3
    T_min = config.T_min if config.T_min is not None else 1e-4 * T0
    steps = config.steps_per_T or n_pt
    cooling = config.cooling
    if config.budget is not None:
        remaining = max(config.budget - used(), 1)
        levels = max(1, remaining // steps)
        if T0 > T_min:
            cooling = (T_min / T0) ** (1.0 / levels)
    schedule = {"T0": T0, "T_min": T_min, "steps_per_T": steps, "cooling": cooling}

    def exhausted():
        return config.budget is not None and used() >= config.budget

    best_state, best = state, cur
    traj = [(0, T0, cur, best)]
    T = T0
    step = 0
    while n_pt > n_a and T >= T_min and not exhausted():
        for _ in range(steps):
            if exhausted():
                break
            step += 1
            sel = set(state)
            out = state[int(rng.integers(n_a))]
            unselected = [p for p in range(n_pt) if p not in sel]
            inn = unselected[int(rng.integers(len(unselected)))]
            cand = tuple(sorted((sel - {out}) | {inn}))
            val = f(cand)
            delta = val - cur
            if delta <= 0 or rng.random() < math.exp(-delta / T):
                state, cur = cand, val
                if cur < best:
                    best_state, best = state, cur
            traj.append((step, T, cur, best))
        T *= cooling
    nodes = tuple(ev.potential[p] for p in best_state)
    return SAResult(layout=FixtureLayout(nodes), value=float(best), objective=obj,
                    trajectory=traj, n_evaluations=used(), initial_value=float(init),
                    schedule=schedule)


@dataclass
class RandomResult:
    values: np.ndarray         # sorted ascending
    layouts: list              # node tuples in the same order
    objective: str

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "layout", self.objective])
        for k, (lay, v) in enumerate(zip(self.layouts, self.values)):
            w.writerow([k, " ".join(str(v_) for v_ in lay), repr(float(v))])
        return _emit(buf.getvalue(), path)


def random_baseline(reduced, potential, n_a, W_mask=None, n_samples=200, seed=0,
                    objective="total_delta_sq", *, backend=None, evaluator=None):
    """Objectives of ``n_samples`` uniform random subsets, sorted ascending."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    ev = _evaluator(reduced, potential, W_mask, backend, evaluator)
    n_pt = len(ev.potential)
    _check_budget(n_pt, n_a)
    rng = np.random.default_rng(seed)
    subsets = np.array([_random_subset(rng, n_pt, n_a) for _ in range(int(n_samples))],
                       dtype=np.int64).reshape(int(n_samples), n_a)
    dsq, mdef = ev.evaluate_positions(subsets)
    vals = dsq if objective == "total_delta_sq" else mdef
    order = np.argsort(vals, kind="stable")
    layouts = [tuple(ev.potential[p] for p in subsets[k]) for k in order]
    return RandomResult(values=vals[order], layouts=layouts, objective=objective)
