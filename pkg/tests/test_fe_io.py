import numpy as np
import pytest
from scipy import sparse

from fixture_sdp import fe_io
from fixture_sdp.errors import (DimensionMismatchError, InvalidSpecError, ParseError,
                                SymmetryViolationError)
from fixture_sdp.fe_model import FrameSpec


def test_system_roundtrip_bit_exact(tiny, tmp_path):
    k, f = tmp_path / "K.mtx", tmp_path / "F_g.txt"
    fe_io.save_system(tiny.system, k, f)
    back = fe_io.load_system(k, f)
    assert (back.K != tiny.system.K).nnz == 0
    np.testing.assert_array_equal(back.F_g, tiny.system.F_g)
    assert k.read_text().startswith("%%MatrixMarket matrix coordinate real symmetric")


def _write(path, text):
    path.write_text(text)
    return path


def test_general_symmetric_accepted(tmp_path):
    p = _write(tmp_path / "g.mtx", "%%MatrixMarket matrix coordinate real general\n"
               "% comment\n2 2 3\n1 1 4.0\n1 2 1.5\n2 1 1.5\n")
    K = fe_io.read_matrix_market(p)
    np.testing.assert_array_equal(K.toarray(), [[4.0, 1.5], [1.5, 0.0]])


def test_general_asymmetric_rejected(tmp_path):
    p = _write(tmp_path / "g.mtx", "%%MatrixMarket matrix coordinate real general\n"
               "2 2 2\n1 2 1.0\n2 1 2.0\n")
    with pytest.raises(SymmetryViolationError):
        fe_io.read_matrix_market(p)


def test_symmetric_file_expanded(tmp_path):
    K = sparse.random(9, 9, density=0.4, random_state=3)
    K = (K + K.T).tocsr()
    fe_io.write_matrix_market(tmp_path / "k.mtx", K, comment="two\nlines")
    back = fe_io.read_matrix_market(tmp_path / "k.mtx")
    np.testing.assert_array_equal(back.toarray(), K.toarray())


def test_vector_length_mismatch(tiny, tmp_path):
    k, f = tmp_path / "K.mtx", tmp_path / "F_g.txt"
    fe_io.save_system(tiny.system, k, f)
    lines = f.read_text().splitlines()[:-1]
    f.write_text("\n".join(lines) + "\n")
    with pytest.raises(DimensionMismatchError):
        fe_io.load_system(k, f)


@pytest.mark.parametrize("body, line", [
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 x\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 1\n\n3 1 1.0\n", 5),
    ("%%MatrixMarket matrix array real general\n", 1),
    ("not a banner\n", 1),
])
def test_parse_errors_carry_line(tmp_path, body, line):
    p = _write(tmp_path / "bad.mtx", body)
    with pytest.raises(ParseError) as exc:
        fe_io.read_matrix_market(p)
    assert exc.value.lineno == line
    assert f":{line}:" in str(exc.value)


def test_vector_parse_error(tmp_path):
    p = _write(tmp_path / "f.txt", "1.0\n\n2.0\nabc\n")
    with pytest.raises(ParseError) as exc:
        fe_io.read_vector(p)
    assert exc.value.lineno == 4


def test_nonsquare(tmp_path):
    p = _write(tmp_path / "r.mtx", "%%MatrixMarket matrix coordinate real general\n2 3 0\n")
    with pytest.raises(DimensionMismatchError):
        fe_io.read_matrix_market(p)


def test_frame_spec_file(tmp_path):
    spec = FrameSpec(n_rings=6, radius=1.5)
    fe_io.save_frame_spec(spec, tmp_path / "s.json")
    assert fe_io.load_frame_spec(tmp_path / "s.json") == spec
    _write(tmp_path / "bad.json", "{\n  \"n_rings\": ,\n}")
    with pytest.raises(ParseError) as exc:
        fe_io.load_frame_spec(tmp_path / "bad.json")
    assert exc.value.lineno == 2
    _write(tmp_path / "list.json", "[1, 2]")
    with pytest.raises(InvalidSpecError):
        fe_io.load_frame_spec(tmp_path / "list.json")
