"""Reproducible surrogate instances.

The standard instance is the default half-cylinder with 30 potential
locators spread along its two straight edges, 3 clamped corner nodes and a
budget of 8 fixtures.  Small seeded instances drive the oracle comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidSpecError
from .fe_model import FrameSpec, assemble_system, build_frame_model, edge_nodes, reduce_system
from .formulation import build_problem

STANDARD_N_PT = 30
STANDARD_N_A = 8


@dataclass(frozen=True)
class Instance:
    spec: FrameSpec
    model: object
    system: object
    reduced: object
    prespecified: tuple
    potential: tuple
    n_a: int
    seed: int = None

    def problem(self, W_nodes=None):
        return build_problem(self.reduced, self.potential, self.n_a, W_nodes)


def default_prespecified(model):
    """Three corners of the shell: both edges of the first ring, first edge of the last."""
    first, last = edge_nodes(model)
    return (first[0], last[0], first[-1])


def auto_potential(model, k, prespecified=()):
    """``k`` nodes evenly spaced along the two straight edges.

    The edge nodes (excluding pre-specified ones) are walked edge by edge in
    ring order and ``k`` of them are taken at evenly spaced ranks.
    """
    first, last = edge_nodes(model)
    pre = set(int(p) for p in prespecified)
    pool = [n for n in first + last if n not in pre]
    if not 1 <= k <= len(pool):
        raise InvalidSpecError(f"auto:{k} needs 1..{len(pool)} edge nodes")
    ranks = np.round(np.linspace(0, len(pool) - 1, k)).astype(int)
    return tuple(sorted(pool[r] for r in ranks))


def parse_potential(value, model, prespecified):
    """Accept a node list or the string ``"auto:k"``."""
    if isinstance(value, str):
        if not value.startswith("auto:"):
            raise InvalidSpecError(f"potential must be a node list or 'auto:k', got {value!r}")
        try:
            k = int(value[5:])
        except ValueError:
            raise InvalidSpecError(f"bad auto potential {value!r}") from None
        return auto_potential(model, k, prespecified)
    return tuple(sorted(int(v) for v in value))


def make_instance(spec, potential, n_a, prespecified=None, seed=None):
    model = build_frame_model(spec)
    system = assemble_system(model)
    pre = tuple(prespecified) if prespecified is not None else default_prespecified(model)
    pot = parse_potential(potential, model, pre)
    reduced = reduce_system(system, pre)
    return Instance(spec=spec, model=model, system=system, reduced=reduced,
                    prespecified=pre, potential=pot, n_a=int(n_a), seed=seed)


def standard_instance(n_pt=STANDARD_N_PT, n_a=STANDARD_N_A, spec=None):
    return make_instance(spec or FrameSpec(), f"auto:{n_pt}", n_a)


def small_instance(seed, n_pt, n_a):
    """Seeded small surrogate: random mesh size, stiffness ratio and locator pool.

    Potential nodes are drawn uniformly from every non-clamped node, so the
    instances are not restricted to the straight edges.
    """
    rng = np.random.default_rng(seed)
    base = FrameSpec()
    spec = replace(
        base,
        n_rings=int(rng.integers(5, 9)),
        n_stringers=int(rng.integers(4, 7)),
        length=float(rng.uniform(3.0, 6.0)),
        Iy=base.Iy * float(rng.uniform(0.5, 2.0)),
        Iz=base.Iz * float(rng.uniform(0.5, 2.0)),
    )
    model = build_frame_model(spec)
    pre = default_prespecified(model)
    pool = np.array([n for n in range(model.n_nodes) if n not in set(pre)])
    if n_pt > pool.size:
        raise InvalidSpecError(f"instance has only {pool.size} free nodes")
    pot = tuple(sorted(int(v) for v in rng.choice(pool, size=n_pt, replace=False)))
    return make_instance(spec, pot, n_a, prespecified=pre, seed=seed)


def oracle_suite(count=20, base_seed=1000):
    """Seeded (seed, N_PT, n_a) triples cycling through N_PT in {8,10,12}, n_a in {2,3}."""
    combos = [(n_pt, n_a) for n_pt in (8, 10, 12) for n_a in (2, 3)]
    return [(base_seed + i, *combos[i % len(combos)]) for i in range(count)]
