import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xiga.splines import (
    KnotVector,
    TensorBSplineBasis,
    eval_basis_and_derivs,
    extraction_operator,
    find_span,
    gauss_lobatto_points,
    lagrange_derivs,
    tensor,
    tensor_eval,
)


def naive_basis(t, p, i, x):
    """Recursive Cox-de Boor with the right-closed last span."""
    if p == 0:
        if t[i] <= x < t[i + 1]:
            return 1.0
        last = np.flatnonzero(t < t[-1]).max()
        return 1.0 if (i == last and x == t[-1]) else 0.0
    out = 0.0
    if t[i + p] > t[i]:
        out += (x - t[i]) / (t[i + p] - t[i]) * naive_basis(t, p - 1, i, x)
    if t[i + p + 1] > t[i + 1]:
        out += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * naive_basis(t, p - 1, i + 1, x)
    return out


# --------------------------------------------------------------------- knots

def test_knot_vector_validation():
    with pytest.raises(ValueError):
        KnotVector([0, 0, 1, 0.5, 1], 1)
    with pytest.raises(ValueError):
        KnotVector([0, 0.2, 1, 1], 1)
    with pytest.raises(ValueError):
        KnotVector([0, 1], 1)
    with pytest.raises(ValueError):
        KnotVector([0, 0, 1, 1], 0)


def test_uniform_knot_vector():
    kv = KnotVector.uniform(2, 0.0, 2.0, 2)
    np.testing.assert_array_equal(kv.knots, [0, 0, 0, 1, 2, 2, 2])
    assert kv.n_basis == 4
    assert kv.n_elements == 2


@pytest.mark.parametrize("knots,p,xi,span", [
    ([0, 0, 1, 1], 1, 0.5, 1),
    ([0, 0, 0, 1, 2, 2, 2], 2, 2.0, 3),
    ([0, 0, 0, 1, 2, 2, 2], 2, 1.0, 3),
    ([0, 0, 0, 1, 2, 2, 2], 2, 0.0, 2),
])
def test_find_span(knots, p, xi, span):
    kv = KnotVector(knots, p)
    s = find_span(kv, xi)
    assert s == span
    assert kv.knots[s] < kv.knots[s + 1]


def test_find_span_out_of_range():
    with pytest.raises(ValueError):
        find_span(KnotVector([0, 0, 1, 1], 1), 1.5)


# ------------------------------------------------------------ 1D evaluation

def test_linear_hats():
    d = eval_basis_and_derivs(KnotVector([0, 0, 1, 1], 1), 0.5, 1)
    np.testing.assert_allclose(d[0], [0.5, 0.5])
    np.testing.assert_allclose(d[1], [-1.0, 1.0])


def test_open_end_interpolation():
    d = eval_basis_and_derivs(KnotVector([0, 0, 0, 1, 2, 2, 2], 2), 0.0, 0)
    np.testing.assert_allclose(d[0], [1.0, 0.0, 0.0], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 4), n=st.integers(1, 6), u=st.floats(0.0, 1.0))
def test_partition_of_unity_and_derivative(p, n, u):
    kv = KnotVector.uniform(p, -1.0, 2.0, n)
    x = -1.0 + 3.0 * u
    d = eval_basis_and_derivs(kv, x, min(p, 2))
    assert abs(d[0].sum() - 1.0) < 1e-13
    assert np.all(np.abs(d[1:].sum(axis=1)) < 1e-11)
    assert np.all(d[0] >= -1e-15)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_matches_naive_recursion(p):
    t = np.array([0.0] * (p + 1) + [0.3, 1.1, 1.5] + [2.0] * (p + 1))
    kv = KnotVector(t, p)
    rng = np.random.default_rng(p)
    for x in np.r_[rng.uniform(0, 2, 20), 0.0, 2.0, 1.1]:
        s = find_span(kv, x)
        vals = eval_basis_and_derivs(kv, x, 0)[0]
        ref = [naive_basis(t, p, s - p + j, x) for j in range(p + 1)]
        np.testing.assert_allclose(vals, ref, atol=1e-14)


@pytest.mark.parametrize("p", [2, 3])
def test_derivatives_by_finite_differences(p):
    kv = KnotVector.uniform(p, 0.0, 1.0, 3)
    x, eps = 0.41, 1e-6
    s = find_span(kv, x)
    d = eval_basis_and_derivs(kv, x, 2)
    dp = eval_basis_and_derivs(kv, np.array([x + eps]), 0, span=s)[0, 0]
    dm = eval_basis_and_derivs(kv, np.array([x - eps]), 0, span=s)[0, 0]
    np.testing.assert_allclose(d[1], (dp - dm) / (2 * eps), atol=1e-7)
    np.testing.assert_allclose(d[2], (dp - 2 * d[0] + dm) / eps ** 2, atol=1e-3)


def test_max_order_above_degree():
    with pytest.raises(ValueError):
        eval_basis_and_derivs(KnotVector([0, 0, 1, 1], 1), 0.2, 2)


# ----------------------------------------------------------- tensor product

def test_bilinear_center_values():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (1, 1)), (1, 1))
    te = tensor_eval(b, (0.5, 0.5))
    np.testing.assert_allclose(te.values, 0.25)


@settings(max_examples=40, deadline=None)
@given(p=st.integers(1, 3), x=st.floats(0, 3), y=st.floats(0, 2))
def test_tensor_partition_of_unity(p, x, y):
    b = TensorBSplineBasis.uniform(p, ((0, 0), (3, 2)), (3, 4))
    te = tensor_eval(b, (x, y))
    assert abs(te.values.sum() - 1.0) < 1e-12
    assert np.all(np.abs(te.gradients.sum(axis=0)) < 1e-10)


def test_corner_function_interpolates():
    b = TensorBSplineBasis.uniform(2, ((0, 0), (2, 2)), (2, 2))
    te = tensor_eval(b, (2.0, 2.0))
    k = b.n_basis - 1
    assert te.values[list(te.ids).index(k)] == pytest.approx(1.0, abs=1e-14)


def test_element_bookkeeping():
    b = TensorBSplineBasis.uniform(2, ((0, 0), (3, 2)), (3, 2))
    assert b.n_basis == 5 * 4
    assert b.element_index(4) == (1, 1)
    lo, hi = b.element_bounds(4)
    np.testing.assert_allclose(lo, [1, 1])
    np.testing.assert_allclose(hi, [2, 2])
    ids = b.element_basis_ids(4)
    assert len(ids) == 9
    for k in ids:
        assert 4 in b.basis_support(k)
    np.testing.assert_array_equal(b.locate([[0.5, 0.5], [3.0, 2.0], [1.0, 1.0]]), [0, 5, 4])
    with pytest.raises(ValueError):
        b.locate([[3.5, 0.0]])


@pytest.mark.parametrize("p", [1, 2, 3])
def test_element_evaluation_matches_tensor_eval(p):
    b = TensorBSplineBasis.uniform(p, ((0, 0), (2, 1.5)), (4, 3))
    rng = np.random.default_rng(0)
    for e in (0, 5, b.n_elements - 1):
        lo, hi = b.element_bounds(e)
        pts = lo + (hi - lo) * rng.uniform(0.05, 0.95, (5, 2))
        N, G = b.element_values_and_gradients(e, pts)
        for q, x in enumerate(pts):
            te = tensor_eval(b, x)
            np.testing.assert_array_equal(te.ids, b.element_basis_ids(e))
            np.testing.assert_allclose(N[q], te.values, atol=1e-13)
            np.testing.assert_allclose(G[q], te.gradients, atol=1e-11)


# --------------------------------------------------------------- extraction

def test_linear_extraction_is_identity():
    b = TensorBSplineBasis.uniform(1, ((0, 0), (1, 1)), (3, 3))
    for e in range(b.n_elements):
        np.testing.assert_allclose(extraction_operator(b, e).C, np.eye(4), atol=1e-15)


def test_quadratic_extraction_columns_sum_to_one():
    b = TensorBSplineBasis.uniform(2, ((0, 0), (1, 1)), (4, 4))
    C = extraction_operator(b, 5).C
    np.testing.assert_allclose(C.sum(axis=0), 1.0, atol=1e-14)


def test_cubic_extraction_reproduces_basis():
    b = TensorBSplineBasis.uniform(3, ((0, 0), (1, 1)), (4, 4))
    rng = np.random.default_rng(3)
    nodes = gauss_lobatto_points(3)
    for e in range(b.n_elements):
        op = extraction_operator(b, e)
        lo, hi = b.element_bounds(e)
        pts = lo + (hi - lo) * rng.uniform(size=(10, 2))
        s = 2 * (pts - lo) / (hi - lo) - 1
        Lx = lagrange_derivs(nodes, s[:, 0], 0)[0]
        Ly = lagrange_derivs(nodes, s[:, 1], 0)[0]
        lag = tensor(Lx, Ly)
        for q, x in enumerate(pts):
            te = tensor_eval(b, x, 0)
            np.testing.assert_allclose(op.C @ lag[q], te.values, atol=1e-12)


def test_extraction_rejects_bad_element():
    b = TensorBSplineBasis.uniform(2, ((0, 0), (1, 1)), (2, 2))
    with pytest.raises(ValueError):
        extraction_operator(b, 4)


def test_polynomial_extension_outside_element():
    # the element polynomial of a uniform cubic spline continues smoothly
    b = TensorBSplineBasis.uniform(3, ((0, 0), (4, 1)), (4, 1))
    X = b.element_derivs_1d(0, 1, np.array([2.5]), 0)[0, 0]
    kv = b.kv_x
    ref = eval_basis_and_derivs(kv, np.array([2.5]), 0, span=1 + 3)[0, 0]
    np.testing.assert_allclose(X, ref, atol=1e-12)
