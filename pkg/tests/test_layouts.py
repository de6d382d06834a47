import json

import numpy as np
import pytest

from fixture_sdp import kernels
from fixture_sdp.errors import InvalidPotentialError
from fixture_sdp.fe_model import MeshModel, Section, assemble_system, reduce_system
from fixture_sdp.layouts import (FixtureLayout, LayoutEvaluator, evaluate_layout,
                                 evaluate_layout_reactions)


def _random_layouts(rng, potential, count):
    out = []
    for _ in range(count):
        k = int(rng.integers(1, min(5, len(potential)) + 1))
        out.append(tuple(int(v) for v in rng.choice(potential, size=k, replace=False)))
    return out


def test_routes_agree_on_random_layouts(small8, rng):
    red = small8.reduced
    pool = [int(n) for n in red.kept_nodes]
    for lay in _random_layouts(rng, pool, 50):
        a = evaluate_layout(red, lay)
        b = evaluate_layout_reactions(red, lay)
        assert np.linalg.norm(a.U - b.U) <= 1e-8 * np.linalg.norm(a.U)
        assert b.delta_sq == pytest.approx(a.delta_sq, rel=1e-8)
        for nd in lay:
            np.testing.assert_allclose(b.reactions[nd], a.reactions[nd], rtol=1e-7,
                                       atol=1e-9 * np.abs(a.reactions[nd]).max())
        assert np.abs(a.U[red.translational_dofs(lay)]).max() == 0.0


class TestProppedCantilever:
    """Beam clamped at one end (three coincident-axis clamped nodes), propped at the tip."""

    L, n = 3.0, 12
    sec = Section(E=100.0, G=40.0, A=0.01, Iy=2e-4, Iz=3e-4, J=5e-4, rho=1.0)

    def _reduced(self):
        x = np.r_[0.0, 0.05, 0.1, 0.1 + np.linspace(0.0, self.L, self.n + 1)[1:]]
        nodes = np.zeros((x.size, 3))
        nodes[:, 0] = x
        elements = [(i, i + 1, 0) for i in range(x.size - 1)]
        model = MeshModel(nodes=nodes, elements=elements, sections=(self.sec,),
                          gravity=(0.0, 0.0, -1.0))
        system = assemble_system(model)
        return model, system, reduce_system(system, (0, 1, 2))

    def test_reaction_closed_form(self):
        model, system, red = self._reduced()
        tip = model.n_nodes - 1
        # nodal loads on the free span; a measured from the effective clamp at node 2
        a = model.nodes[3:, 0] - model.nodes[2, 0]
        P = -system.F_g[6 * 3 + 2::6]
        expect = float(np.sum(P * a ** 2 * (3 * self.L - a) / (2 * self.L ** 3)))
        for route in (evaluate_layout, evaluate_layout_reactions):
            r = route(red, (tip,)).reactions[tip]
            assert r[2] == pytest.approx(expect, rel=1e-6)
            assert abs(r[0]) <= 1e-9 * expect and abs(r[1]) <= 1e-9 * expect


def test_empty_layout_is_gravity_sag(tiny):
    ev = evaluate_layout(tiny.reduced, ())
    np.testing.assert_array_equal(ev.U, tiny.reduced.u_g)
    assert ev.reactions == {}
    assert evaluate_layout_reactions(tiny.reduced, ()).delta_sq == ev.delta_sq


def test_layout_validation(tiny):
    with pytest.raises(InvalidPotentialError):
        evaluate_layout(tiny.reduced, (tiny.prespecified[0],))
    with pytest.raises(KeyError):
        evaluate_layout(tiny.reduced, (10_000,))
    with pytest.raises(ValueError):
        FixtureLayout((3, 3))
    assert FixtureLayout((9, 2, 5)).selected == (2, 5, 9)


def test_metrics(tiny):
    ev = evaluate_layout(tiny.reduced, (5, 14))
    U = ev.U.reshape(-1, 6)[:, :3]
    assert ev.delta_sq == pytest.approx(float((U ** 2).sum()))
    assert ev.max_node_deformation == pytest.approx(float(np.linalg.norm(U, axis=1).max()))
    assert ev.objective("total_delta_sq") == ev.delta_sq
    with pytest.raises(ValueError):
        ev.objective("bogus")
    obj = json.loads(ev.dumps())
    assert obj["selected"] == [5, 14] and len(obj["reactions"]) == 2


class TestEvaluator:
    def test_matches_exact_route(self, tiny):
        ev = LayoutEvaluator(tiny.reduced, tiny.potential)
        for lay in ((5, 9), (6, 10, 14), (13,)):
            ref = evaluate_layout(tiny.reduced, lay)
            assert ev.evaluate_nodes(lay) == pytest.approx(ref.delta_sq, rel=1e-10)
            assert ev.evaluate_nodes(lay, "max_node_deformation") == pytest.approx(
                ref.max_node_deformation, rel=1e-10)

    def test_cache_and_fork(self, tiny):
        ev = LayoutEvaluator(tiny.reduced, tiny.potential)
        ev((0, 1))
        ev((1, 0), "max_node_deformation")
        assert ev.n_evaluations == 1
        twin = ev.fork()
        assert twin.n_evaluations == 0 and ev.n_evaluations == 1
        twin((0, 1))
        assert twin.n_evaluations == 1 and ev.n_evaluations == 1
        with pytest.raises(ValueError):
            ev((0,), "bogus")

    def test_rejects_prespecified(self, tiny):
        with pytest.raises(InvalidPotentialError):
            LayoutEvaluator(tiny.reduced, (tiny.prespecified[0], 5))

    def test_empty_subset(self, tiny):
        ev = LayoutEvaluator(tiny.reduced, tiny.potential)
        d, _ = ev.evaluate_positions(np.zeros((1, 0), dtype=np.int64))
        assert d[0] == pytest.approx(evaluate_layout(tiny.reduced, ()).delta_sq)


@pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")
def test_backends_agree(small8, rng):
    ev = LayoutEvaluator(small8.reduced, small8.potential)
    subsets = np.array([np.sort(rng.choice(8, 3, replace=False)) for _ in range(200)])
    a = kernels.get_backend("python").evaluate_subsets(ev.G, ev.c, ev.Bt, ev.ut, ev.wt, subsets)
    b = kernels.get_backend("cython").evaluate_subsets(ev.G, ev.c, ev.Bt, ev.ut, ev.wt, subsets)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12)


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("FIXTURE_SDP_KERNEL", "python")
    assert kernels.get_backend().NAME == "python"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert "python" in kernels.available()
