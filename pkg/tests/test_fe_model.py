import math

import numpy as np
import pytest
from scipy import sparse

from fixture_sdp.errors import DegenerateElementError, InvalidSpecError, SingularSystemError
from fixture_sdp.fe_model import (FrameSpec, GlobalSystem, MeshModel, Section,
                                  apply_inverse_columns, assemble_system, beam_element_stiffness,
                                  beam_local_stiffness, build_frame_model, local_frame,
                                  reduce_system, rigid_body_modes)

SEC = Section(E=210.0, G=80.0, A=0.02, Iy=3e-4, Iz=5e-4, J=6e-4, rho=2.0)


def _line_model(n, length, section=SEC, gravity=(0.0, 0.0, -1.0)):
    """Straight cantilever along x split into n elements."""
    nodes = np.zeros((n + 1, 3))
    nodes[:, 0] = np.linspace(0.0, length, n + 1)
    elements = [(i, i + 1, 0) for i in range(n)]
    return MeshModel(nodes=nodes, elements=elements, sections=(section,), gravity=gravity)


def _cantilever_tip(model, load):
    """Clamp node 0 fully, apply ``load`` (6,) at the last node, return the tip DOFs."""
    sysm = assemble_system(model)
    K = sysm.K.toarray()[6:, 6:]
    f = np.zeros(K.shape[0])
    f[-6:] = load
    return np.linalg.solve(K, f)[-6:]


class TestMesh:
    def test_counts(self):
        spec = FrameSpec(n_rings=4, n_stringers=5)
        m = build_frame_model(spec)
        assert m.n_nodes == 20
        # 4 rings x 4 arc segments + 5 stringers x 3 bays
        assert m.elements.shape[0] == 4 * 4 + 5 * 3
        assert assemble_system(m).K.shape == (120, 120)

    def test_geometry(self):
        spec = FrameSpec(n_rings=3, n_stringers=5, radius=2.0, length=4.0)
        m = build_frame_model(spec)
        np.testing.assert_allclose(np.hypot(m.nodes[:, 1], m.nodes[:, 2]), 2.0)
        assert m.nodes[:, 0].max() == pytest.approx(4.0)
        assert np.all(m.nodes[:, 2] >= -1e-12)

    @pytest.mark.parametrize("kw", [dict(n_rings=1), dict(n_stringers=2), dict(radius=0.0),
                                    dict(length=-1.0), dict(E=0.0), dict(rho=-1.0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(InvalidSpecError):
            build_frame_model(FrameSpec(**kw))

    def test_degenerate_element(self):
        nodes = np.array([[0, 0, 0], [1, 0, 0], [1, 0, 0], [0, 1, 0]], float)
        with pytest.raises(DegenerateElementError):
            MeshModel(nodes=nodes, elements=[(1, 2, 0)], sections=(SEC,), gravity=(0, 0, -1))
        with pytest.raises(DegenerateElementError):
            beam_local_stiffness(SEC, 0.0)

    def test_spec_json_roundtrip(self):
        spec = FrameSpec(n_rings=7, gravity=(0.0, -1.0, 0.0))
        assert FrameSpec.from_json(spec.to_json()) == spec
        with pytest.raises(InvalidSpecError):
            FrameSpec.from_json({"n_ringz": 3})


class TestElement:
    def test_local_symmetric_psd_with_six_zero_modes(self):
        k = beam_local_stiffness(SEC, 1.7)
        np.testing.assert_allclose(k, k.T, atol=0)
        w = np.linalg.eigvalsh(k)
        assert np.sum(np.abs(w) < 1e-9 * w.max()) == 6
        assert w.min() > -1e-9 * w.max()

    def test_rigid_body_modes_free_energy(self, rng):
        xa, xb = rng.normal(size=3), rng.normal(size=3)
        lam, L = local_frame(xa, xb)
        ke = beam_element_stiffness(SEC, L, lam)
        R = rigid_body_modes(np.vstack([xa, xb]))
        assert np.abs(ke @ R).max() < 1e-9 * np.abs(ke).max()

    def test_axial_stiffness(self, rng):
        # a pure axial stretch of size d stores E A d^2 / (2 L)
        xa, xb = rng.normal(size=3), rng.normal(size=3)
        lam, L = local_frame(xa, xb)
        ke = beam_element_stiffness(SEC, L, lam)
        d = 1e-3
        u = np.zeros(12)
        u[6:9] = d * lam[0]
        assert 0.5 * u @ ke @ u == pytest.approx(SEC.E * SEC.A * d * d / (2 * L), rel=1e-12)

    def test_frame_orthonormal(self, rng):
        for _ in range(20):
            xa, xb = rng.normal(size=3), rng.normal(size=3)
            lam, _ = local_frame(xa, xb)
            np.testing.assert_allclose(lam @ lam.T, np.eye(3), atol=1e-12)
        lam, _ = local_frame([0, 0, 0], [0, 0, 2])  # vertical element uses the fallback ref
        np.testing.assert_allclose(lam[0], [0, 0, 1])

    def test_bad_orientation(self):
        with pytest.raises(ValueError):
            beam_element_stiffness(SEC, 1.0, 2 * np.eye(3))


class TestCantilever:
    """Tip deflections of a clamped straight beam against beam theory."""

    L = 2.5

    @pytest.mark.parametrize("n", [3, 8])
    def test_tip_loads(self, n):
        m = _line_model(n, self.L, gravity=(0, 0, 0))
        P = 0.3
        E, L = SEC.E, self.L
        tip = _cantilever_tip(m, [0, 0, -P, 0, 0, 0])
        assert tip[2] == pytest.approx(-P * L ** 3 / (3 * E * SEC.Iy), rel=1e-10)
        tip = _cantilever_tip(m, [0, P, 0, 0, 0, 0])
        assert tip[1] == pytest.approx(P * L ** 3 / (3 * E * SEC.Iz), rel=1e-10)
        tip = _cantilever_tip(m, [P, 0, 0, 0, 0, 0])
        assert tip[0] == pytest.approx(P * L / (E * SEC.A), rel=1e-10)
        tip = _cantilever_tip(m, [0, 0, 0, P, 0, 0])
        assert tip[3] == pytest.approx(P * L / (SEC.G * SEC.J), rel=1e-10)

    def test_distributed_self_weight_converges(self):
        # lumped gravity: tip deflection -> q L^4 / (8 E I) under refinement
        q = SEC.rho * SEC.A
        exact = -q * self.L ** 4 / (8 * SEC.E * SEC.Iy)
        errs = []
        for n in (4, 16, 64):
            m = _line_model(n, self.L)
            s = assemble_system(m)
            K = s.K.toarray()[6:, 6:]
            u = np.linalg.solve(K, s.F_g[6:])
            errs.append(abs(u[-4] / exact - 1.0))
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-3


class TestAssembly:
    def test_symmetric_rigid_modes(self):
        m = build_frame_model(FrameSpec(n_rings=4, n_stringers=5))
        K = assemble_system(m).K
        assert abs(K - K.T).max() == 0.0
        R = rigid_body_modes(m.nodes)
        assert np.abs(K @ R).max() < 1e-9 * abs(K).max()
        w = np.linalg.eigvalsh(K.toarray())
        assert np.sum(np.abs(w) < 1e-9 * w.max()) == 6

    def test_gravity_sum(self):
        spec = FrameSpec(n_rings=5, n_stringers=6, gravity=(0.1, -0.2, -1.0))
        m = build_frame_model(spec)
        F = assemble_system(m).F_g
        total = F.reshape(-1, 6).sum(axis=0)
        np.testing.assert_allclose(total[:3], m.total_mass() * np.array(spec.gravity),
                                   rtol=1e-12)
        np.testing.assert_array_equal(total[3:], 0.0)

    def test_deterministic(self):
        spec = FrameSpec(n_rings=4, n_stringers=5)
        a = assemble_system(build_frame_model(spec))
        b = assemble_system(build_frame_model(spec))
        assert (a.K != b.K).nnz == 0
        np.testing.assert_array_equal(a.F_g, b.F_g)

    def test_dimension_checks(self):
        from fixture_sdp.errors import DimensionMismatchError
        with pytest.raises(DimensionMismatchError):
            GlobalSystem(K=sparse.eye(12), F_g=np.zeros(11))
        with pytest.raises(DimensionMismatchError):
            GlobalSystem(K=sparse.eye(10), F_g=np.zeros(10))


class TestReduction:
    def test_reduced_solution(self, tiny):
        red = tiny.reduced
        assert red.n_reduced_nodes == tiny.model.n_nodes - 3
        res = red.kstar @ red.u_g - red.F_g_star
        assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(red.F_g_star)
        assert set(red.kept_nodes).isdisjoint(tiny.prespecified)

    def test_dof_mapping(self, tiny):
        red = tiny.reduced
        node = int(red.kept_nodes[4])
        assert red.dof(node, 2) == 6 * 4 + 2
        assert red.dof_map()[6 * 4 + 2] == (node, 2)
        with pytest.raises(KeyError):
            red.node_position(tiny.prespecified[0])

    def test_inverse_columns(self, tiny):
        red = tiny.reduced
        idx = [0, 7, 20]
        A = apply_inverse_columns(red, idx)
        np.testing.assert_allclose(red.kstar @ A, np.eye(red.n_dof)[:, idx], atol=1e-9)
        # A* is symmetric
        assert A[idx[1], 0] == pytest.approx(A[idx[0], 1], rel=1e-10)
        assert apply_inverse_columns(red, []).shape == (red.n_dof, 0)
        with pytest.raises(IndexError):
            apply_inverse_columns(red, [red.n_dof])

    def test_prespecified_validation(self, tiny):
        with pytest.raises(InvalidSpecError):
            reduce_system(tiny.system, (0, 0, 3))
        with pytest.raises(InvalidSpecError):
            reduce_system(tiny.system, (0, 3))
        with pytest.raises(InvalidSpecError):
            reduce_system(tiny.system, (0, 3, 999))

    def test_disconnected_part_is_singular(self):
        # two separate beams: clamping three nodes of one leaves the other free to move
        nodes = np.array([[0, 0, 0], [1, 0, 0], [2, 0.3, 0], [0, 5, 0], [1, 5, 0]], float)
        m = MeshModel(nodes=nodes, elements=[(0, 1, 0), (1, 2, 0), (3, 4, 0)],
                      sections=(SEC,), gravity=(0, 0, -1))
        with pytest.raises(SingularSystemError):
            reduce_system(assemble_system(m), (0, 1, 2))

    def test_three_clamps_remove_rigid_motion(self, tiny):
        w = np.linalg.eigvalsh(tiny.reduced.kstar)
        assert w.min() > 0
        assert math.isfinite(w.max() / w.min())
