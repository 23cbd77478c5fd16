import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from optoqubit.errors import DimensionMismatchError, InvalidStateError, KindMismatchError, SpaceMismatchError
from optoqubit.tensor_core import (
    TOL_HERM,
    DensityOperator,
    ModeSpec,
    Operator,
    TensorSpace,
    basis_ket,
    basis_state,
    boson_ladder,
    embed,
    number_op,
    partial_trace,
    qubit_ops,
    random_density,
)


def ket(dim, n):
    v = np.zeros(dim, dtype=complex)
    v[n] = 1
    return v


def test_ladder_entries():
    b = boson_ladder(ModeSpec.boson(5))
    for n in range(1, 5):
        assert b[n - 1, n] == pytest.approx(math.sqrt(n))
    assert np.count_nonzero(b) == 4


def test_ladder_dim2():
    b = boson_ladder(ModeSpec.boson(2))
    np.testing.assert_allclose(b @ ket(2, 1), ket(2, 0))
    np.testing.assert_allclose(b @ ket(2, 0), 0)


def test_number_operator():
    n = number_op(ModeSpec.boson(4))
    np.testing.assert_allclose(n @ ket(4, 3), 3 * ket(4, 3))


def test_commutator_truncation_artifact():
    b = boson_ladder(ModeSpec.boson(3))
    comm = b @ b.conj().T - b.conj().T @ b
    expected = np.eye(3)
    expected[2, 2] -= 3
    np.testing.assert_allclose(comm, expected)


@pytest.mark.parametrize("dim", [2, 4, 7])
def test_commutator_exact_below_top(dim):
    b = boson_ladder(ModeSpec.boson(dim))
    comm = b @ b.conj().T - b.conj().T @ b
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(dim - 1), atol=1e-14)


def test_ladder_rejects_qubit():
    with pytest.raises(KindMismatchError):
        boson_ladder(ModeSpec.qubit())


def test_mode_invariants():
    with pytest.raises(DimensionMismatchError):
        ModeSpec.boson(1)
    with pytest.raises(KindMismatchError):
        TensorSpace((ModeSpec.boson(3), ModeSpec.qubit()))
    assert TensorSpace.qubit_bosons(3, 4).dim == 24


def test_qubit_algebra():
    q = qubit_ops()
    g, e = ket(2, 0), ket(2, 1)
    np.testing.assert_allclose(q.sigma_minus @ e, g)
    np.testing.assert_allclose(q.sigma_plus @ q.sigma_minus, np.outer(e, e))
    np.testing.assert_allclose(q.sigma_z @ g, -g)
    np.testing.assert_allclose(q.sigma_plus @ q.sigma_minus + q.sigma_minus @ q.sigma_plus, np.eye(2))
    np.testing.assert_allclose(q.sigma_plus, q.sigma_minus.conj().T)


def test_embed_sigma_z_on_product():
    space = TensorSpace.qubit_bosons(3)
    sz = embed(qubit_ops().sigma_z, space, 0)
    k = basis_ket(space, (0, 2))
    np.testing.assert_allclose(sz.matrix @ k, -k)


def test_embed_disjoint_modes_commute():
    space = TensorSpace.qubit_bosons(4)
    b = embed(boson_ladder(space.modes[1]), space, 1)
    sm = embed(qubit_ops().sigma_minus, space, 0)
    np.testing.assert_allclose((b @ sm).matrix, (sm @ b).matrix)


def test_embed_trace_factorizes(rng):
    space = TensorSpace.qubit_bosons(3)
    a = rng.normal(size=(2, 2))
    c = rng.normal(size=(3, 3))
    prod = embed(a, space, 0) @ embed(c, space, 1)
    assert prod.trace() == pytest.approx(np.trace(a) * np.trace(c))


def test_embed_errors():
    space = TensorSpace.qubit_bosons(3)
    with pytest.raises(DimensionMismatchError):
        embed(np.eye(3), space, 2)
    with pytest.raises(DimensionMismatchError):
        embed(np.eye(2), space, 1)


@given(st.integers(0, 10_000))
def test_embed_preserves_adjoint_and_products(seed):
    rng = np.random.default_rng(seed)
    space = TensorSpace.qubit_bosons(3, 2)
    i = int(rng.integers(0, 3))
    d = space.modes[i].dim
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    c = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    assert embed(a.conj().T, space, i).allclose(embed(a, space, i).dag())
    assert embed(a @ c, space, i).allclose(embed(a, space, i) @ embed(c, space, i))


def dark_a(space):
    psi = basis_ket(space, (0, 1)) + basis_ket(space, (1, 0))
    return DensityOperator.from_ket(space, psi)


def test_basis_states_and_dark_pair():
    space = TensorSpace.qubit_bosons(4)
    rb = basis_state(space, (0, 0))
    ra = dark_a(space)
    assert rb.trace() == pytest.approx(1)
    np.testing.assert_allclose((ra @ ra).matrix, ra.matrix, atol=1e-14)
    assert abs((ra @ rb).trace()) < 1e-14
    with pytest.raises(DimensionMismatchError):
        basis_state(space, (0, 4))


def test_partial_trace_examples():
    space = TensorSpace.qubit_bosons(4)
    red = partial_trace(basis_state(space, (0, 0)), [1])
    np.testing.assert_allclose(red.matrix, np.diag([1, 0, 0, 0]))
    red = partial_trace(dark_a(space), [1])
    np.testing.assert_allclose(red.matrix, np.diag([0.5, 0.5, 0, 0]), atol=1e-14)
    with pytest.raises(DimensionMismatchError):
        partial_trace(basis_state(space, (0, 0)), [])


@given(st.integers(0, 10_000), st.sampled_from([(0,), (1,), (2,), (0, 2), (1, 2)]))
def test_partial_trace_preserves_trace_and_hermiticity(seed, keep):
    rng = np.random.default_rng(seed)
    space = TensorSpace.qubit_bosons(3, 2)
    rho = random_density(space, rng)
    red = partial_trace(rho, keep)
    assert red.trace() == pytest.approx(1, abs=1e-12)
    assert red.is_hermitian()


def test_density_invariants():
    space = TensorSpace.qubit_bosons(2)
    with pytest.raises(InvalidStateError):
        DensityOperator(space, np.eye(4))
    bad = np.diag([1.5, -0.5, 0, 0])
    with pytest.raises(InvalidStateError):
        DensityOperator(space, bad)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1
    m[0, 1] = 10 * TOL_HERM
    with pytest.raises(InvalidStateError):
        DensityOperator(space, m)


def test_operator_space_checks():
    a = Operator.identity(TensorSpace.bosons(3))
    b = Operator.identity(TensorSpace.bosons(4))
    with pytest.raises(SpaceMismatchError):
        a @ b
    with pytest.raises(DimensionMismatchError):
        Operator(TensorSpace.bosons(3), np.eye(4))


def test_index_is_mode0_major():
    space = TensorSpace.qubit_bosons(3, 4)
    assert space.index((1, 2, 3)) == 1 * 12 + 2 * 4 + 3
