import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from xiga.errors import SolverError
from xiga.system import SparseSystem, assemble, condition_number, solve
from xiga.weakform import ElementContribution


def entry(i, j, v, fi=None, fv=None):
    fr = np.array([] if fi is None else [fi], dtype=np.int64)
    return ElementContribution(np.array([i]), np.array([j]), np.array([float(v)]),
                               fr, np.array([] if fv is None else [float(fv)]))


# --------------------------------------------------------------- assembly

def test_duplicates_are_summed():
    s = assemble([entry(0, 0, 1.0), entry(0, 0, 2.0)], 2)
    assert s.A[0, 0] == 3.0
    assert s.A.nnz == 1


def test_empty_assembly_is_zero():
    s = assemble([], 3)
    assert s.A.shape == (3, 3) and s.A.nnz == 0
    np.testing.assert_array_equal(s.f, np.zeros(3))


def test_out_of_range_index():
    with pytest.raises(IndexError):
        assemble([entry(0, 3, 1.0)], 3)


def test_dropped_local_dofs_are_skipped():
    c = ElementContribution.from_dense([0, -1, 2], [0, -1, 2], np.arange(9.0).reshape(3, 3), np.ones(3))
    s = assemble([c], 3)
    np.testing.assert_array_equal(s.A.toarray(), [[0, 0, 2], [0, 0, 0], [6, 0, 8]])
    np.testing.assert_array_equal(s.f, [1, 0, 1])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_assembly_is_order_independent(seed):
    rng = np.random.default_rng(seed)
    n = 6
    parts = []
    for _ in range(25):
        dofs = rng.choice(n, 3, replace=False)
        parts.append(ElementContribution.from_dense(dofs, dofs, rng.normal(size=(3, 3)) * 10.0 ** rng.integers(-8, 8),
                                                    rng.normal(size=3)))
    a = assemble(parts, n)
    b = assemble([parts[i] for i in rng.permutation(len(parts))], n)
    np.testing.assert_array_equal(a.A.indptr, b.A.indptr)
    np.testing.assert_array_equal(a.A.indices, b.A.indices)
    assert a.A.data.tobytes() == b.A.data.tobytes()
    assert a.f.tobytes() == b.f.tobytes()


# ------------------------------------------------------------------ solve

def test_identity_solve():
    f = np.zeros(4)
    f[0] = 1.0
    rep = solve(SparseSystem(sp.identity(4, format="csr"), f))
    np.testing.assert_array_equal(rep.u, f)
    assert rep.residual == 0.0


def test_diagonal_solve():
    rep = solve(SparseSystem(sp.csr_matrix(np.diag([2.0, 4.0])), np.array([2.0, 4.0])))
    np.testing.assert_allclose(rep.u, [1.0, 1.0], rtol=1e-15)


def test_singular_raises():
    with pytest.raises(SolverError):
        solve(SparseSystem(sp.csr_matrix((2, 2)), np.ones(2)))


def test_nonsymmetric_system():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(30, 30)) + 30 * np.eye(30)
    u = rng.normal(size=30)
    rep = solve(SparseSystem(sp.csr_matrix(A), A @ u))
    np.testing.assert_allclose(rep.u, u, rtol=1e-12)
    assert rep.residual <= 1e-14


# -------------------------------------------------------------- condition

@pytest.mark.parametrize("A,expect", [
    (np.eye(4), 4.0),
    (np.diag([1.0, 2.0]), 2.5),
])
def test_condition_number_examples(A, expect):
    assert condition_number(A) == pytest.approx(expect, rel=1e-14)
    assert condition_number(sp.csr_matrix(A)) == pytest.approx(expect, rel=1e-14)


def test_condition_number_singular():
    with pytest.raises(SolverError):
        condition_number(np.diag([1.0, 0.0]))


def test_condition_number_size_limit():
    with pytest.raises(ValueError):
        condition_number(sp.identity(10), threshold=5)
