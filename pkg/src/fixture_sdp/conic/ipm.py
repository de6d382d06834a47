"""Primal-dual interior-point method on the homogeneous self-dual embedding.

The embedding

    A x - b tau            = 0
   -A'y - s + c tau        = 0
    b'y - c'x - kappa      = 0,     x, s in K,  tau, kappa >= 0

is followed along its central path with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step.  Optimal solutions are read off as
(x, y, s) / tau; when tau -> 0 the iterates converge to an infeasibility
certificate instead.  The normal equations are formed densely.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .cones import Free
from .program import ConicSolution, Residuals, Status, presolve, residuals

log = logging.getLogger(__name__)


@dataclass
class Settings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    tol_infeas: float = 1e-8
    keep_history: bool = False


class _KKT:
    """Factorization of the reduced (normal-equation) KKT matrix."""

    def __init__(self, M, Af):
        self.m = M.shape[0]
        self.nf = Af.shape[1]
        if self.nf == 0:
            self.kind = "chol"
            self.M = M
            self.factor = self._chol(M)
        else:
            self.kind = "lu"
            K = np.block([[M, Af], [Af.T, np.zeros((self.nf, self.nf))]])
            self.M = K
            self.factor = linalg.lu_factor(K, check_finite=False)

    @staticmethod
    def _chol(M):
        scale = max(float(np.max(np.abs(np.diag(M)))), 1e-300) if M.size else 1.0
        reg = 0.0
        for _ in range(12):
            try:
                return linalg.cho_factor(
                    M + reg * np.eye(M.shape[0]), lower=True, check_finite=False
                )
            except linalg.LinAlgError:
                reg = scale * (1e-14 if reg == 0.0 else reg / scale * 100.0)
        raise np.linalg.LinAlgError("normal-equation matrix is not positive definite")

    def _raw(self, r):
        if self.kind == "chol":
            return linalg.cho_solve(self.factor, r, check_finite=False)
        return linalg.lu_solve(self.factor, r, check_finite=False)

    def solve(self, r):
        x = self._raw(r)
        # two rounds of refinement against the unregularized matrix
        for _ in range(2):
            x = x + self._raw(r - self.M @ x)
        return x


def _column_blocks(program):
    conic, free = [], []
    for cone, sl in program.blocks():
        if isinstance(cone, Free):
            free.append(np.arange(sl.start, sl.stop))
        else:
            conic.append((cone, sl))
    free_idx = np.concatenate(free) if free else np.zeros(0, dtype=int)
    return conic, free_idx


def solve(program, settings=None, **overrides):
    """Solve a :class:`ConicProgram`; never raises on infeasible input.

    Keyword overrides (``tol_feas``, ``tol_gap``, ``max_iter``...) patch the
    default :class:`Settings`.
    """
    settings = settings or Settings()
    for key, val in overrides.items():
        if not hasattr(settings, key):
            raise TypeError(f"unknown solver setting {key!r}")
        setattr(settings, key, val)
    t_start = time.perf_counter()

    keep, bad_row = presolve(program)
    if bad_row is not None:
        # a zero row with nonzero rhs: e_i is a Farkas certificate on its own
        y = np.zeros(program.m)
        y[bad_row] = np.sign(program.b[bad_row])
        return ConicSolution(
            x=np.zeros(program.n), y=y, s=np.zeros(program.n),
            status=Status.PRIMAL_INFEASIBLE,
            residuals=Residuals(np.inf, np.inf, np.inf), iterations=0,
            solve_time=time.perf_counter() - t_start,
            info={"certificate": "zero-row"},
        )

    rscale = 1.0 / np.linalg.norm(program.A[keep], axis=1) if keep.size else np.ones(0)
    A = program.A[keep] * rscale[:, None]
    b = program.b[keep] * rscale
    c = np.array(program.c)
    m, n = A.shape

    conic, free_idx = _column_blocks(program)
    Af = A[:, free_idx]
    cf = c[free_idx]
    nu = sum(cone.degree for cone, _ in conic) + 1

    x = np.zeros(n)
    s = np.zeros(n)
    for cone, sl in conic:
        x[sl] = cone.identity()
        s[sl] = cone.identity()
    y = np.zeros(m)
    tau = kappa = 1.0

    def full_y(yw):
        out = np.zeros(program.m)
        out[keep] = yw * rscale
        return out

    history = []
    status = Status.ITER_LIMIT
    res = Residuals(np.inf, np.inf, np.inf)
    it = 0
    info = {}
    for it in range(settings.max_iter + 1):
        # ---- convergence and certificate tests ---------------------------
        xh, yh, sh = x / tau, full_y(y) / tau, s / tau
        res = residuals(program, xh, yh, sh)
        pobj = float(c @ xh)
        dobj = float(program.b @ yh)
        if settings.keep_history:
            history.append((res.primal, res.dual, pobj, dobj, tau, kappa))
        if res.primal <= settings.tol_feas and res.dual <= settings.tol_feas \
                and res.gap <= settings.tol_gap:
            status = Status.OPTIMAL
            break
        bty = float(b @ y)
        if bty > 0:
            pinf = np.linalg.norm(A.T @ y + s) / bty
            if pinf <= settings.tol_infeas:
                status = Status.PRIMAL_INFEASIBLE
                xh, yh, sh = np.zeros(n), full_y(y) / bty, s / bty
                break
        ctx = float(c @ x)
        if ctx < 0:
            dinf = np.linalg.norm(A @ x) / -ctx
            if dinf <= settings.tol_infeas:
                status = Status.DUAL_INFEASIBLE
                xh, yh, sh = x / -ctx, np.zeros(program.m), np.zeros(n)
                break
        if it == settings.max_iter:
            break

        # ---- scaling and normal equations --------------------------------
        r_p = b * tau - A @ x
        r_d = c * tau - A.T @ y - s
        r_g = kappa + c @ x - b @ y
        mu = (sum(x[sl] @ s[sl] for _, sl in conic) + tau * kappa) / nu
        try:
            scal = [cone.scaling(x[sl], s[sl]) for cone, sl in conic]
            At = [sc.WinvT_rows(A[:, sl]) for sc, (_, sl) in zip(scal, conic)]
            M = sum(a @ a.T for a in At) if At else np.zeros((m, m))
            kkt = _KKT(M, Af)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            status = Status.NUMERICAL_FAILURE
            info["reason"] = str(exc)
            break

        def kkt_solve(rhs_y, rhs_f):
            sol = kkt.solve(np.concatenate([rhs_y, rhs_f]))
            return sol[:m], sol[m:]

        def hinv(sc, v):
            return sc.Winv(sc.WinvT(v))

        # second right-hand side is shared by predictor and corrector
        rhs2 = b.copy()
        hinv_c = []
        for sc, (_, sl) in zip(scal, conic):
            hc = hinv(sc, c[sl])
            hinv_c.append(hc)
            rhs2 += A[:, sl] @ hc
        dy2, dxf2 = kkt_solve(rhs2, cf)
        dx2 = np.zeros(n)
        dx2[free_idx] = dxf2
        for sc, at, hc, (_, sl) in zip(scal, At, hinv_c, conic):
            dx2[sl] = sc.Winv(at.T @ dy2) - hc
        den_tau = b @ dy2 - c @ dx2 + kappa / tau

        def linsolve(rp, rd, rg, qc, rtk):
            # A dx - b dtau = rp;  A'dy + ds - c dtau = rd (ds = 0 on free vars);  b'dy - c'dx - dkappa = rg
            # W dx + W^-T ds = qc (per cone);  tau dkappa + kappa dtau = rtk
            rhs1 = rp.copy()
            hq = []
            for sc, q, (_, sl) in zip(scal, qc, conic):
                h = sc.Winv(q) - hinv(sc, rd[sl])
                hq.append(h)
                rhs1 = rhs1 - A[:, sl] @ h
            dy1, dxf1 = kkt_solve(rhs1, rd[free_idx])
            dx1 = np.zeros(n)
            dx1[free_idx] = dxf1
            for sc, at, h, (_, sl) in zip(scal, At, hq, conic):
                dx1[sl] = sc.Winv(at.T @ dy1) + h
            dtau = (rg - b @ dy1 + c @ dx1 + rtk / tau) / den_tau
            dy = dy1 + dtau * dy2
            dx = dx1 + dtau * dx2
            ds = rd - A.T @ dy + c * dtau
            ds[free_idx] = 0.0
            dkappa = (rtk - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        def newton(eta, rc, rtk):
            rp, rd, rg = eta * r_p, eta * r_d, eta * r_g
            qc = [cone.jdiv(sc.lam, rcb) for sc, rcb, (cone, _) in zip(scal, rc, conic)]
            step = linsolve(rp, rd, rg, qc, rtk)
            # refine against the unreduced linearization; the normal equations
            # lose accuracy when some cone blocks approach their boundary
            for _ in range(2):
                dx, dy, ds, dtau, dkappa = step
                e_p = rp - (A @ dx - b * dtau)
                e_d = rd - (A.T @ dy + ds - c * dtau)
                e_g = rg - (b @ dy - c @ dx - dkappa)
                e_c = [q - (sc.W(dx[sl]) + sc.WinvT(ds[sl]))
                       for sc, q, (_, sl) in zip(scal, qc, conic)]
                e_t = rtk - (tau * dkappa + kappa * dtau)
                err = max(np.linalg.norm(e_p), np.linalg.norm(e_d), abs(e_g))
                if err <= 1e-15 * (1.0 + np.linalg.norm(rp) + np.linalg.norm(rd)):
                    break
                corr = linsolve(e_p, e_d, e_g, e_c, e_t)
                step = tuple(u + v for u, v in zip(step, corr))
            return step

        def step_length(dx, ds, dtau, dkappa):
            alpha = np.inf
            scaled = []
            for sc, (cone, sl) in zip(scal, conic):
                dxt = sc.W(dx[sl])
                dst = sc.WinvT(ds[sl])
                scaled.append((dxt, dst))
                alpha = min(alpha, cone.max_step(sc.lam, dxt), cone.max_step(sc.lam, dst))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha, scaled

        try:
            lamsq = [cone.jprod(sc.lam, sc.lam) for sc, (cone, _) in zip(scal, conic)]
            aff = newton(1.0, [-v for v in lamsq], -tau * kappa)
            a_aff, sc_aff = step_length(aff[0], aff[2], aff[3], aff[4])
            sigma = (1.0 - min(1.0, a_aff)) ** 3
            rc = []
            for sc, lsq, (dxt, dst), (cone, _) in zip(scal, lamsq, sc_aff, conic):
                rc.append(sigma * mu * cone.identity() - lsq - cone.jprod(dxt, dst))
            rtk = sigma * mu - tau * kappa - aff[3] * aff[4]
            dx, dy, ds, dtau, dkappa = newton(1.0 - sigma, rc, rtk)
            alpha, _ = step_length(dx, ds, dtau, dkappa)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            status = Status.NUMERICAL_FAILURE
            info["reason"] = str(exc)
            break
        alpha = min(1.0, settings.step_fraction * alpha)
        if not np.isfinite(alpha) or alpha < 1e-12:
            status = Status.NUMERICAL_FAILURE
            info["reason"] = f"step length collapsed ({alpha:.3g})"
            break

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa
        log.debug("it %3d  pres %.2e  dres %.2e  gap %.2e  mu %.2e  step %.3f",
                  it, res.primal, res.dual, res.gap, mu, alpha)

    if settings.keep_history:
        info["history"] = history
    info["tau"] = tau
    info["kappa"] = kappa
    return ConicSolution(
        x=xh, y=yh, s=sh, status=status, residuals=res, iterations=it,
        primal_objective=float(program.c @ xh) + program.offset,
        dual_objective=float(program.b @ yh) + program.offset,
        solve_time=time.perf_counter() - t_start, info=info,
    )
