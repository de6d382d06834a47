"""Pure-numpy layout evaluation; reference for the compiled kernel."""

import numpy as np
from scipy import linalg

NAME = "python"


def evaluate_subsets(G, c, Bt, ut, wt, subsets):
    """Deformation metrics of many fixture subsets.

    Parameters
    ----------
    G : (3P, 3P) compliance block at the potential translational DOFs.
    c : (3P,) gravity displacement at those DOFs.
    Bt : (3N1, 3P) compliance columns restricted to all translational DOFs.
    ut : (3N1,) gravity displacement at all translational DOFs.
    wt : (3N1,) 0/1 weights of the deformation objective.
    subsets : (S, k) potential positions per subset.

    Returns
    -------
    delta_sq, max_def : (S,) arrays
    """
    subsets = np.asarray(subsets, dtype=np.int64)
    n_sub = subsets.shape[0]
    delta_sq = np.empty(n_sub)
    max_def = np.empty(n_sub)
    for s in range(n_sub):
        idx = (3 * subsets[s][:, None] + np.arange(3)).ravel()
        r = linalg.solve(G[np.ix_(idx, idx)], -c[idx], assume_a="pos", check_finite=False)
        U = ut + Bt[:, idx] @ r
        delta_sq[s] = U @ (wt * U)
        max_def[s] = np.sqrt((U.reshape(-1, 3) ** 2).sum(axis=1)).max()
    return delta_sq, max_def
