"""Text formats for exchanging stiffness systems with FEA tools.

K goes to Matrix Market coordinate format (1-based, lower triangle stored
for ``symmetric``); F_g is one decimal value per line.  Values are written
with 17 significant digits so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import sparse

from .errors import DimensionMismatchError, InvalidSpecError, ParseError, SymmetryViolationError
from .fe_model import FrameSpec, GlobalSystem

MM_BANNER = "%%MatrixMarket matrix coordinate real"


def write_matrix_market(path, K, comment=None):
    K = sparse.coo_matrix(K)
    lower = K.row >= K.col
    rows, cols, vals = K.row[lower], K.col[lower], K.data[lower]
    order = np.lexsort((rows, cols))
    rows, cols, vals = rows[order], cols[order], vals[order]
    with open(path, "w") as fh:
        fh.write(f"{MM_BANNER} symmetric\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{K.shape[0]} {K.shape[1]} {rows.size}\n")
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def read_matrix_market(path):
    """Read a real coordinate Matrix Market file into a symmetric CSR matrix.

    ``symmetric`` files store one triangle.  ``general`` files are accepted
    only when the data is exactly symmetric.
    """
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise ParseError(path, 1, "missing %%MatrixMarket banner")
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(path, 1, f"unsupported layout {obj} {fmt}")
    if field not in ("real", "integer", "double"):
        raise ParseError(path, 1, f"unsupported field {field}")
    if symmetry not in ("symmetric", "general"):
        raise ParseError(path, 1, f"unsupported symmetry {symmetry}")

    lineno = 1
    size_line = None
    for lineno in range(2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if text and not text.startswith("%"):
            size_line = text
            break
    if size_line is None:
        raise ParseError(path, lineno, "missing size line")
    try:
        nrow, ncol, nnz = (int(t) for t in size_line.split())
    except ValueError:
        raise ParseError(path, lineno, f"bad size line {size_line!r}") from None
    if nrow != ncol:
        raise DimensionMismatchError(f"{path}: stiffness matrix must be square, got {nrow}x{ncol}")

    rows = np.empty(nnz, dtype=int)
    cols = np.empty(nnz, dtype=int)
    vals = np.empty(nnz)
    k = 0
    for ln in range(lineno + 1, len(lines) + 1):
        text = lines[ln - 1].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(path, ln, f"expected 'row col value', got {text!r}")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(path, ln, f"cannot parse entry {text!r}") from None
        if not (1 <= i <= nrow and 1 <= j <= ncol):
            raise ParseError(path, ln, f"index ({i}, {j}) outside {nrow}x{ncol}")
        if k >= nnz:
            raise ParseError(path, ln, f"more than the declared {nnz} entries")
        if symmetry == "symmetric" and i < j:
            raise ParseError(path, ln, "symmetric files must store the lower triangle")
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise ParseError(path, len(lines), f"declared {nnz} entries, found {k}")

    K = sparse.coo_matrix((vals, (rows, cols)), shape=(nrow, ncol)).tocsr()
    K.sum_duplicates()
    if symmetry == "symmetric":
        diag = sparse.diags(K.diagonal())
        K = (K + K.T - diag).tocsr()
    else:
        diff = K - K.T
        if diff.nnz and np.abs(diff.data).max() > 0:
            raise SymmetryViolationError(f"{path}: general matrix data is not symmetric")
    K.sort_indices()
    return K


def write_vector(path, v):
    with open(path, "w") as fh:
        for val in np.asarray(v, dtype=float).ravel():
            fh.write(f"{float(val)!r}\n")


def read_vector(path):
    path = Path(path)
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                out.append(float(text))
            except ValueError:
                raise ParseError(path, ln, f"not a number: {text!r}") from None
    return np.array(out)


def save_system(system, k_path, f_path):
    write_matrix_market(k_path, system.K)
    write_vector(f_path, system.F_g)


def load_system(k_path, f_path):
    K = read_matrix_market(k_path)
    F = read_vector(f_path)
    if F.size != K.shape[0]:
        raise DimensionMismatchError(
            f"{f_path} has {F.size} values but K is {K.shape[0]}x{K.shape[1]}")
    return GlobalSystem(K=K, F_g=F)


def load_frame_spec(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, exc.msg) from None
    if not isinstance(obj, dict):
        raise InvalidSpecError("frame spec JSON must be an object")
    return FrameSpec.from_json(obj)


def save_frame_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
