"""Cone blocks and their Nesterov-Todd scalings.

Every block knows how to build the NT scaling ``W`` at a strictly interior
pair ``(x, s)``, i.e. the linear map with ``W x = W^{-T} s = lam``.  The
interior-point loop only ever touches the blocks through that interface.

PSD blocks are stored as ``svec``: the upper triangle in row-major order with
off-diagonal entries multiplied by sqrt(2), so the trace inner product of two
symmetric matrices equals the dot product of their svecs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

SQRT2 = math.sqrt(2.0)


@lru_cache(maxsize=64)
def _svec_index(n):
    iu, ju = np.triu_indices(n)
    scale = np.where(iu == ju, 1.0, SQRT2)
    iu.setflags(write=False)
    ju.setflags(write=False)
    scale.setflags(write=False)
    return iu, ju, scale


def svec_dim(n):
    return n * (n + 1) // 2


def side_from_svec_dim(d):
    n = int(round((math.sqrt(8 * d + 1) - 1) / 2))
    if svec_dim(n) != d:
        raise ValueError(f"{d} is not a triangular number")
    return n


def svec(X):
    """Pack symmetric matrices (last two axes) into scaled upper-triangle vectors."""
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    iu, ju, scale = _svec_index(n)
    return X[..., iu, ju] * scale


def smat(v, n=None):
    """Inverse of :func:`svec`; accepts a stack of vectors along leading axes."""
    v = np.asarray(v, dtype=float)
    if n is None:
        n = side_from_svec_dim(v.shape[-1])
    iu, ju, scale = _svec_index(n)
    X = np.zeros(v.shape[:-1] + (n, n))
    vals = v / scale
    X[..., iu, ju] = vals
    X[..., ju, iu] = vals
    return X


def svec_index(n, i, j):
    """Position of entry (i, j) of an n-by-n symmetric matrix inside its svec."""
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


@dataclass(frozen=True)
class Cone:
    """One block of the variable vector."""

    @property
    def dim(self):
        raise NotImplementedError

    @property
    def degree(self):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Free(Cone):
    """Unrestricted variables; their dual slacks live in the zero cone."""

    n: int

    @property
    def dim(self):
        return self.n

    @property
    def degree(self):
        return 0

    def to_json(self):
        return {"type": "zero", "n": self.n}


# Dual-side name used in the JSON container and by callers thinking in slacks.
Zero = Free


@dataclass(frozen=True)
class NonNeg(Cone):
    n: int

    @property
    def dim(self):
        return self.n

    @property
    def degree(self):
        return self.n

    def identity(self):
        return np.ones(self.n)

    def scaling(self, x, s):
        return _NonNegScaling(x, s)

    def jprod(self, u, v):
        return u * v

    def jdiv(self, lam, r):
        return r / lam

    def max_step(self, lam, d):
        neg = d < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-lam[neg] / d[neg]))

    def margin(self, x):
        return float(np.min(x)) if self.n else np.inf

    def to_json(self):
        return {"type": "nonneg", "n": self.n}


@dataclass(frozen=True)
class SecondOrder(Cone):
    """{(t, u) : t >= ||u||_2}, head first."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("second-order cone needs dimension >= 1")

    @property
    def dim(self):
        return self.n

    @property
    def degree(self):
        return 1

    def identity(self):
        e = np.zeros(self.n)
        e[0] = 1.0
        return e

    def scaling(self, x, s):
        return _SOCScaling(x, s)

    def jprod(self, u, v):
        out = np.empty(self.n)
        out[0] = u @ v
        out[1:] = u[0] * v[1:] + v[0] * u[1:]
        return out

    def jdiv(self, lam, r):
        # Solves the arrow system Arw(lam) z = r in closed form.
        l0, l1 = lam[0], lam[1:]
        det = _soc_det(lam)
        z = np.empty(self.n)
        z[0] = (l0 * r[0] - l1 @ r[1:]) / det
        z[1:] = (r[1:] - z[0] * l1) / l0
        return z

    def max_step(self, lam, d):
        a = d[0] * d[0] - d[1:] @ d[1:]
        b = lam[0] * d[0] - lam[1:] @ d[1:]
        c = _soc_det(lam)
        disc = b * b - a * c
        if disc < 0:
            return np.inf
        den = -b + math.sqrt(disc)
        if den <= 0:
            return np.inf
        return c / den

    def margin(self, x):
        return float(x[0] - np.linalg.norm(x[1:]))

    def to_json(self):
        return {"type": "soc", "n": self.n}


@dataclass(frozen=True)
class PSD(Cone):
    """Symmetric positive semidefinite matrices of a given side, stored as svec."""

    side: int

    @property
    def dim(self):
        return svec_dim(self.side)

    @property
    def degree(self):
        return self.side

    def identity(self):
        return svec(np.eye(self.side))

    def scaling(self, x, s):
        return _PSDScaling(x, s, self.side)

    def jprod(self, u, v):
        U = smat(u, self.side)
        V = smat(v, self.side)
        P = U @ V
        return svec(0.5 * (P + P.T))

    def jdiv(self, lam, r):
        # lam is the diagonal NT point; (lam o Z) = R has an entrywise solution.
        sig = np.diag(smat(lam, self.side))
        iu, ju, _ = _svec_index(self.side)
        return 2.0 * r / (sig[iu] + sig[ju])

    def max_step(self, lam, d):
        sig = np.diag(smat(lam, self.side))
        isq = 1.0 / np.sqrt(sig)
        D = smat(d, self.side) * isq[:, None] * isq[None, :]
        emin = linalg.eigvalsh(D, subset_by_index=[0, 0])[0]
        if emin >= 0:
            return np.inf
        return -1.0 / emin

    def margin(self, x):
        X = smat(x, self.side)
        return float(np.linalg.eigvalsh(X)[0])

    def to_json(self):
        return {"type": "psd", "side": self.side}


def cone_from_json(obj):
    kind = obj["type"]
    if kind in ("zero", "free"):
        return Free(int(obj["n"]))
    if kind == "nonneg":
        return NonNeg(int(obj["n"]))
    if kind == "soc":
        return SecondOrder(int(obj["n"]))
    if kind == "psd":
        return PSD(int(obj["side"]))
    raise ValueError(f"unknown cone type {kind!r}")


def _soc_det(x):
    nrm = np.linalg.norm(x[1:])
    return (x[0] - nrm) * (x[0] + nrm)


class _NonNegScaling:
    def __init__(self, x, s):
        self.d = np.sqrt(s / x)
        self.lam = np.sqrt(x * s)

    def W(self, v):
        return self.d * v

    WT = W

    def Winv(self, v):
        return v / self.d

    WinvT = Winv

    def WinvT_rows(self, A):
        return A / self.d


class _SOCScaling:
    def __init__(self, x, s):
        xdet = _soc_det(x)
        sdet = _soc_det(s)
        if xdet <= 0 or sdet <= 0:
            raise FloatingPointError("iterate left the second-order cone")
        xb = x / math.sqrt(xdet)
        sb = s / math.sqrt(sdet)
        gamma = math.sqrt(0.5 * (1.0 + xb @ sb))
        # normalized NT point, then its Jordan square root
        w = sb.copy()
        w[1:] -= xb[1:]
        w[0] += xb[0]
        w /= 2.0 * gamma
        w[0] += 1.0
        w /= math.sqrt(2.0 * w[0])
        self.beta = (sdet / xdet) ** 0.25
        J = np.ones(len(x))
        J[1:] = -1.0
        self.Wmat = self.beta * (2.0 * np.outer(w, w) - np.diag(J))
        Jw = J * w
        self.Winvmat = (2.0 * np.outer(Jw, Jw) - np.diag(J)) / self.beta
        self.lam = self.Wmat @ x

    def W(self, v):
        return self.Wmat @ v

    WT = W

    def Winv(self, v):
        return self.Winvmat @ v

    WinvT = Winv

    def WinvT_rows(self, A):
        return A @ self.Winvmat


class _PSDScaling:
    """Congruence scaling W(X) = R^T X R with R R^T the NT point."""

    def __init__(self, x, s, n):
        self.n = n
        X = smat(x, n)
        S = smat(s, n)
        try:
            Lx = linalg.cholesky(X, lower=True)
            Ls = linalg.cholesky(S, lower=True)
        except linalg.LinAlgError as exc:
            raise FloatingPointError("iterate left the PSD cone") from exc
        _, sig, Vt = linalg.svd(Ls.T @ Lx)
        V = Vt.T
        self.sig = sig
        rs = np.sqrt(sig)
        self.R = linalg.solve_triangular(Lx, V, lower=True, trans="T") * rs
        self.Q = (Lx @ V) / rs  # R^{-T}
        self.lam = svec(np.diag(sig))

    def W(self, v):
        return svec(self.R.T @ smat(v, self.n) @ self.R)

    def WT(self, v):
        return svec(self.R @ smat(v, self.n) @ self.R.T)

    def Winv(self, v):
        return svec(self.Q @ smat(v, self.n) @ self.Q.T)

    def WinvT(self, v):
        return svec(self.Q.T @ smat(v, self.n) @ self.Q)

    def WinvT_rows(self, A):
        if A.shape[0] == 0:
            return A.copy()
        mats = smat(A, self.n)
        return svec(np.matmul(np.matmul(self.Q.T, mats), self.Q))
