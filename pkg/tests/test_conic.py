import json
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fixture_sdp.conic import (PSD, ConicProgram, Free, NonNeg, SecondOrder, Settings, Status,
                               Zero, residuals, smat, solve, svec, svec_index)
from fixture_sdp.conic.program import presolve

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _rand_sym(rng, n):
    X = rng.normal(size=(n, n))
    return X + X.T


def _rand_pd(rng, n):
    X = rng.normal(size=(n, n))
    return X @ X.T + 0.1 * np.eye(n)


# ---------------------------------------------------------------- svec / smat


@given(arrays(float, (5, 5), elements=finite))
def test_svec_roundtrip(X):
    X = X + X.T
    np.testing.assert_allclose(smat(svec(X)), X, rtol=0, atol=1e-12)


@given(arrays(float, (4, 4), elements=finite), arrays(float, (4, 4), elements=finite))
def test_svec_preserves_trace_inner_product(X, Y):
    X, Y = X + X.T, Y + Y.T
    assert svec(X) @ svec(Y) == pytest.approx(np.trace(X @ Y), rel=1e-10, abs=1e-8)


def test_svec_index():
    n = 5
    X = np.arange(n * n, dtype=float).reshape(n, n)
    X = X + X.T
    v = svec(X)
    for i in range(n):
        for j in range(n):
            scale = 1.0 if i == j else np.sqrt(2.0)
            assert v[svec_index(n, i, j)] == pytest.approx(scale * X[i, j])


# ------------------------------------------------------------ NT scalings


@st.composite
def soc_pair(draw, n=4):
    def point():
        tail = draw(arrays(float, n - 1, elements=st.floats(-3, 3)))
        slack = draw(st.floats(0.05, 3))
        return np.r_[np.linalg.norm(tail) + slack, tail]
    return point(), point()


@given(soc_pair())
def test_soc_scaling_identities(pair):
    x, s = pair
    cone = SecondOrder(4)
    W = cone.scaling(x, s)
    np.testing.assert_allclose(W.W(x), W.lam, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(W.WinvT(s), W.lam, rtol=1e-8, atol=1e-10)
    v = np.array([0.3, -1.0, 2.0, 0.5])
    np.testing.assert_allclose(W.Winv(W.W(v)), v, rtol=1e-8, atol=1e-10)


@given(st.integers(0, 10_000))
def test_psd_scaling_identities(seed):
    rng = np.random.default_rng(seed)
    n = 4
    x, s = svec(_rand_pd(rng, n)), svec(_rand_pd(rng, n))
    W = PSD(n).scaling(x, s)
    np.testing.assert_allclose(W.W(x), W.lam, atol=1e-8 * np.abs(W.lam).max())
    np.testing.assert_allclose(W.WinvT(s), W.lam, atol=1e-8 * np.abs(W.lam).max())
    # the NT scaling point is diagonal
    L = smat(W.lam, n)
    assert np.abs(L - np.diag(np.diag(L))).max() <= 1e-8 * np.abs(L).max()


@given(st.integers(0, 10_000))
def test_max_step_lands_on_boundary(seed):
    rng = np.random.default_rng(seed)
    for cone, lam in ((NonNeg(3), np.array([1.0, 2.0, 0.5])),
                      (SecondOrder(3), np.array([2.0, 0.5, -0.3])),
                      (PSD(3), svec(np.diag([1.0, 2.0, 0.5])))):
        d = rng.normal(size=cone.dim)
        a = cone.max_step(lam, d)
        if np.isfinite(a) and a > 0:
            assert cone.margin(lam + a * d) == pytest.approx(0.0, abs=1e-8)
            assert cone.margin(lam + 0.5 * a * d) > 0


# ------------------------------------------------------------ analytic suite


def norm_program():
    """min t s.t. (t, x) in SOC, x = (3, 4): optimum 5."""
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return ConicProgram(c=[1.0, 0.0, 0.0], A=A, b=[3.0, 4.0], cones=[SecondOrder(3)])


def trace_program():
    """min tr(X) s.t. X(0,0) = 1, X >= 0 (2x2): optimum 1."""
    c = svec(np.eye(2))
    A = np.zeros((1, 3))
    A[0, svec_index(2, 0, 0)] = 1.0
    return ConicProgram(c=c, A=A, b=[1.0], cones=[PSD(2)])


def infeasible_lp():
    """x1 + x2 = -1 with x >= 0."""
    return ConicProgram(c=[1.0, 1.0], A=[[1.0, 1.0]], b=[-1.0], cones=[NonNeg(2)])


def test_norm_problem():
    t0 = time.perf_counter()
    sol = solve(norm_program())
    assert time.perf_counter() - t0 < 1.0
    assert sol.status == Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(5.0, abs=1e-7)
    assert max(sol.residuals.as_tuple()) <= 1e-8


def test_trace_sdp():
    sol = solve(trace_program())
    assert sol.status == Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-7)
    assert max(sol.residuals.as_tuple()) <= 1e-8
    X = smat(sol.x)
    np.testing.assert_allclose(X, [[1, 0], [0, 0]], atol=1e-6)


def test_infeasible_lp_certificate():
    prog = infeasible_lp()
    sol = solve(prog)
    assert sol.status == Status.PRIMAL_INFEASIBLE
    # Farkas: b'y = 1, A'y + s = 0, s >= 0
    assert prog.b @ sol.y == pytest.approx(1.0)
    assert np.linalg.norm(prog.A.T @ sol.y + sol.s) <= 1e-8
    assert sol.s.min() >= -1e-12


def test_unbounded_lp():
    # min -x1 s.t. x1 - x2 = 0, x >= 0
    prog = ConicProgram(c=[-1.0, 0.0], A=[[1.0, -1.0]], b=[0.0], cones=[NonNeg(2)])
    sol = solve(prog)
    assert sol.status == Status.DUAL_INFEASIBLE
    assert prog.c @ sol.x == pytest.approx(-1.0)
    assert np.linalg.norm(prog.A @ sol.x) <= 1e-8


def test_zero_row_infeasible():
    prog = ConicProgram(c=[1.0, 1.0], A=[[0.0, 0.0], [1.0, 1.0]], b=[2.0, 1.0],
                        cones=[NonNeg(2)])
    sol = solve(prog)
    assert sol.status == Status.PRIMAL_INFEASIBLE
    assert sol.info["certificate"] == "zero-row"


def test_free_variables():
    # least squares-like: min t s.t. (t, x - a) in SOC with x free and x1 + x2 = 1
    a = np.array([2.0, 0.0])
    n = 5  # x (2 free), (t, z) SOC(3)
    c = np.zeros(n)
    c[2] = 1.0
    A = np.zeros((3, n))
    A[0, [0, 1]] = 1.0
    A[1, 0], A[1, 3] = 1.0, -1.0
    A[2, 1], A[2, 4] = 1.0, -1.0
    prog = ConicProgram(c=c, A=A, b=[1.0, a[0], a[1]], cones=[Free(2), SecondOrder(3)])
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL
    np.testing.assert_allclose(sol.x[:2], [1.5, -0.5], atol=1e-6)
    assert sol.primal_objective == pytest.approx(np.sqrt(0.5), abs=1e-7)
    assert Zero is Free


def test_presolve_duplicates():
    prog = ConicProgram(c=[1.0, 2.0], A=[[1.0, 1.0], [1.0, 1.0], [0.0, 0.0]],
                        b=[1.0, 1.0, 0.0], cones=[NonNeg(2)])
    keep, bad = presolve(prog)
    assert bad is None and list(keep) == [0]
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(1.0, abs=1e-7)


def test_residual_formula():
    prog = ConicProgram(c=[1.0, 1.0], A=[[1.0, 1.0]], b=[2.0], cones=[NonNeg(2)])
    r = residuals(prog, [2.0, 0.0], [1.0], [0.0, 0.0])
    assert r.as_tuple() == (0.0, 0.0, 0.0)
    r = residuals(prog, [2.0, 0.5], [1.0], [0.0, 0.5])
    assert r.primal == pytest.approx(0.5 / 3.0)
    assert r.dual == pytest.approx(0.5 / (1 + np.sqrt(2.0)))
    assert r.gap == pytest.approx(0.5 / 5.5)
    with pytest.raises(ValueError):
        residuals(prog, [1.0], [1.0], [0.0, 1.0])


def test_program_validation():
    with pytest.raises(ValueError):
        ConicProgram(c=[1.0, 2.0], A=[[1.0, 1.0]], b=[1.0], cones=[NonNeg(3)])
    with pytest.raises(ValueError):
        ConicProgram(c=[1.0, 2.0], A=[[1.0, 1.0, 1.0]], b=[1.0], cones=[NonNeg(2)])
    with pytest.raises(TypeError):
        ConicProgram(c=[1.0], A=[[1.0]], b=[1.0], cones=["nonneg"])
    with pytest.raises(TypeError):
        solve(norm_program(), bogus=1)


def test_json_roundtrip(tmp_path):
    prog = ConicProgram(c=[1.0, 0, 0, 0, 0, 0, 0], A=np.eye(7)[:2], b=[1.0, 0.0],
                        cones=[NonNeg(1), SecondOrder(3), PSD(2)], offset=0.25)
    prog.dump(tmp_path / "p.json")
    back = ConicProgram.load(tmp_path / "p.json")
    np.testing.assert_array_equal(back.A, prog.A)
    assert back.cones == prog.cones and back.offset == 0.25
    assert json.loads((tmp_path / "p.json").read_text())["format"] == "conic-program/1"


def test_deterministic():
    a, b = solve(trace_program()), solve(trace_program())
    np.testing.assert_array_equal(a.x, b.x)
    assert a.iterations == b.iterations


def test_iteration_limit():
    sol = solve(trace_program(), Settings(max_iter=2))
    assert sol.status == Status.ITER_LIMIT


# ------------------------------------------------------------ random problems


def _random_feasible(rng, m=4):
    """Mixed LP/SOC/PSD program with a strictly feasible primal and dual."""
    cones = [NonNeg(3), SecondOrder(4), PSD(3)]
    n = sum(k.dim for k in cones)
    x0 = np.r_[np.ones(3), [2.0, 0.3, -0.2, 0.5], svec(_rand_pd(rng, 3))]
    s0 = np.r_[np.ones(3), [1.5, -0.1, 0.4, 0.2], svec(_rand_pd(rng, 3))]
    A = rng.normal(size=(m, n))
    y0 = rng.normal(size=m)
    return ConicProgram(c=A.T @ y0 + s0, A=A, b=A @ x0, cones=cones)


@pytest.mark.parametrize("seed", range(5))
def test_random_optimality_conditions(seed):
    rng = np.random.default_rng(seed)
    prog = _random_feasible(rng)
    sol = solve(prog)
    assert sol.status == Status.OPTIMAL
    assert max(sol.residuals.as_tuple()) <= 1e-8
    # both iterates in their cones (self-dual blocks), weak duality gap ~ x's
    for cone, sl in prog.blocks():
        assert cone.margin(sol.x[sl]) >= -1e-8
        assert cone.margin(sol.s[sl]) >= -1e-8
    assert sol.x @ sol.s == pytest.approx(0.0, abs=1e-6 * (1 + abs(sol.primal_objective)))


@pytest.mark.parametrize("seed", range(3))
def test_against_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(100 + seed)
    prog = _random_feasible(rng)
    sol = solve(prog)
    x = cp.Variable(prog.n)
    X = cp.Variable((3, 3), symmetric=True)
    iu, ju = np.triu_indices(3)
    cons = [prog.A @ x == prog.b, x[:3] >= 0, cp.SOC(x[3], x[4:7]), X >> 0]
    cons += [x[7 + k] == (1.0 if i == j else np.sqrt(2.0)) * X[i, j]
             for k, (i, j) in enumerate(zip(iu, ju))]
    ref = cp.Problem(cp.Minimize(prog.c @ x), cons)
    ref.solve(solver=cp.CLARABEL)
    assert sol.primal_objective == pytest.approx(ref.value, rel=1e-6, abs=1e-7)
