import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_hermitian
from optoqubit.errors import DimensionMismatchError, SpaceMismatchError
from optoqubit.lindblad import (
    AuxParams,
    DissipatorTerm,
    EngineeredConfig,
    LindbladModel,
    NoiseRates,
    SystemParams,
    aux_jump_variant,
    build_effective_jc,
    build_full_hamiltonian,
    build_l0,
    build_l_aux,
    compile_model,
    effective_jc_parameters,
    engineered_model,
    noise_rates_from_cooperativity,
    qubit_operators,
    standard_dissipators,
    unvec,
    vec,
)
from optoqubit.tensor_core import DensityOperator, Operator, TensorSpace, basis_ket, basis_state, random_density


def test_vec_roundtrip_and_kron_identity(rng):
    a, x, b = (rng.normal(size=(3, 3)) for _ in range(3))
    np.testing.assert_allclose(unvec(vec(x), 3), x)
    np.testing.assert_allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x))


# --------------------------------------------------------------- Hamiltonians

def full_space(n_cav=1, cav=3, mech=3):
    return TensorSpace.qubit_bosons(*([cav] * n_cav), mech)


def test_uncoupled_hamiltonian_is_diagonal():
    p = SystemParams(1.3, 0.4, 0.7, 0.0, 0.0)
    space = full_space()
    h = build_full_hamiltonian(p, space).matrix
    np.testing.assert_allclose(h, np.diag(np.diag(h)))
    for q in range(2):
        for n1 in range(3):
            for nb in range(3):
                i = space.index((q, n1, nb))
                expected = 1.3 * n1 + (0.2 if q else -0.2) + 0.7 * nb
                assert h[i, i].real == pytest.approx(expected)


def test_beam_splitter_element():
    p = SystemParams(1.0, 0.3, 0.5, 0.07, 0.02)
    space = full_space()
    h = build_full_hamiltonian(p, space).matrix
    bra = basis_ket(space, (0, 0, 1))
    k = basis_ket(space, (0, 1, 0))
    assert bra.conj() @ h @ k == pytest.approx(0.07)


def test_signs_of_qubit_and_aux_terms():
    p = SystemParams(1.0, 0.0, 0.5, 0.1, 0.2, drive=0.05, aux=AuxParams(2.0, 0.3, 0.4))
    space = TensorSpace.qubit_bosons(2, 2, 3)
    h = build_full_hamiltonian(p, space).matrix
    el = lambda a, b: basis_ket(space, a).conj() @ h @ basis_ket(space, b)
    assert el((1, 0, 0, 0), (0, 1, 0, 0)) == pytest.approx(-0.2)  # -g_q a_1 sigma^+
    assert el((1, 0, 0, 0), (0, 0, 0, 0)) == pytest.approx(0.05)  # Omega sigma^+
    assert el((0, 0, 1, 1), (0, 0, 0, 0)) == pytest.approx(-0.3)  # -g_m^aux a_2^dag b^dag
    assert el((1, 0, 1, 0), (0, 0, 0, 0)) == pytest.approx(0.4)  # g_q^aux a_2^dag sigma^+
    assert el((1, 0, 0, 0), (0, 0, 1, 0)) == pytest.approx(0.0)  # no a_2 sigma^+ term


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_full_hamiltonian_hermitian(xs):
    p = SystemParams(*xs[:5], drive=xs[5])
    assert build_full_hamiltonian(p, full_space(cav=2, mech=3)).is_hermitian()


def test_full_hamiltonian_needs_modes():
    with pytest.raises(DimensionMismatchError):
        build_full_hamiltonian(SystemParams(1, 0, 0.5, 0.1, 0.1), TensorSpace.qubit_bosons(3))


def test_effective_jc_examples():
    eff = effective_jc_parameters(SystemParams(2.0, 1.0, 1.0, 0.1, 0.0))
    assert eff.g == 0 and eff.delta == 1.0
    eff = effective_jc_parameters(SystemParams(2.0, 1.0, 1.0, 0.1, 0.1))
    assert eff.g == pytest.approx(0.02)
    p = SystemParams(3.0, 1.0, 1.0, 0.2, 0.1)
    eff = effective_jc_parameters(p)
    assert eff.delta - eff.omega == pytest.approx(2 * (0.2**2 - 0.1**2) / 2.0)
    half = effective_jc_parameters(p, "second_order")
    assert half.g == pytest.approx(eff.g / 2)


def test_effective_jc_guards():
    with pytest.raises(ZeroDivisionError):
        effective_jc_parameters(SystemParams(1.0, 1.0, 0.5, 0.1, 0.1))
    with pytest.warns(UserWarning):
        effective_jc_parameters(SystemParams(1.0, 0.0, 0.5, 0.2, 0.01))
    model = build_effective_jc(SystemParams(2.0, 1.0, 1.0, 0.1, 0.1), 4)
    assert model.is_closed and model.hamiltonian.is_hermitian()


# --------------------------------------------------------------- dissipators

def apply_term(term, rho):
    L = compile_model(LindbladModel.from_terms(term.jump.space, [term]))
    return L.apply(rho)


def test_standard_dissipator_prefactors():
    space = full_space()
    terms = standard_dissipators(NoiseRates(kappa=0.3, gamma_q=0.2, gamma_m=0.1), space)
    rates = {t.label: t.rate for t in terms}
    assert rates == {"cav": pytest.approx(0.6), "q": 0.2, "m": 0.1}
    assert [t.label for t in standard_dissipators(NoiseRates(gamma_q=0.2), space)] == ["q"]
    with pytest.raises(ValueError):
        standard_dissipators(NoiseRates(gamma_q=-1), space)


def test_qubit_decay_and_localization_examples():
    space = TensorSpace.qubit_bosons(4)
    terms = standard_dissipators(NoiseRates(gamma_q=0.3), space, n_cavities=0)
    out = apply_term(terms[0], basis_state(space, (1, 0)))
    np.testing.assert_allclose(out.matrix, 0.3 * (basis_state(space, (0, 0)).matrix - basis_state(space, (1, 0)).matrix),
                               atol=1e-14)
    terms = standard_dissipators(NoiseRates(gamma_m=0.5), space, n_cavities=0)
    out = apply_term(terms[0], basis_state(space, (0, 0)))
    assert abs(out.trace()) < 1e-14
    assert out.matrix[space.index((0, 1)), space.index((0, 1))].real == pytest.approx(0.5)


def test_l0_dark_states():
    space = TensorSpace.qubit_bosons(5)
    j = build_l0(1.0, 1.0, space).jump.matrix
    psi_a = (basis_ket(space, (0, 1)) + basis_ket(space, (1, 0))) / math.sqrt(2)
    np.testing.assert_allclose(j @ psi_a, 0, atol=1e-14)
    for z in (0.2, 0.5, 1.0):
        j = build_l0(1.0, z, space).jump.matrix
        np.testing.assert_allclose(j @ basis_ket(space, (0, 0)), 0)
        np.testing.assert_allclose(j @ (z * basis_ket(space, (0, 1)) + basis_ket(space, (1, 0))), 0, atol=1e-14)
    for bad in (0.0, -0.1, 1.2):
        with pytest.raises(ValueError):
            build_l0(1.0, bad, space)


def test_l_aux_family():
    space = TensorSpace.qubit_bosons(4)
    q = qubit_operators(space)
    j = build_l_aux(1.0, space, 0.0).jump
    assert j.allclose(q["sp"])
    j = build_l_aux(1.0, space, 0.2).jump.matrix
    np.testing.assert_allclose(j @ basis_ket(space, (0, 0)), basis_ket(space, (1, 0)) - 0.2 * basis_ket(space, (0, 1)))
    b = Operator(space, np.kron(np.eye(2), np.diag(np.sqrt(np.arange(1, 4)), 1)))
    expected = {"sp-zbd": q["sp"] - 0.2 * b.dag(), "sp": q["sp"], "sp+zbd": q["sp"] + 0.2 * b.dag(), "bd": b.dag()}
    for name, op in expected.items():
        assert aux_jump_variant(name, 1.0, 0.2, space).jump.allclose(op)
    with pytest.raises(ValueError):
        aux_jump_variant("nope", 1.0, 0.2, space)


def test_cooperativity_mapping():
    assert noise_rates_from_cooperativity(100, 50) == (pytest.approx(0.005), pytest.approx(0.01))
    assert noise_rates_from_cooperativity(100, 50, zeta=0.2, convention="microscopic")[0] == pytest.approx(0.001)
    assert noise_rates_from_cooperativity(math.inf, math.inf) == (0.0, 0.0)


# --------------------------------------------------------------- compilation

def test_compile_trivial_and_space_check():
    space = TensorSpace.qubit_bosons(3)
    L = compile_model(LindbladModel.from_terms(space, []))
    assert not np.any(L.dense())
    with pytest.raises(SpaceMismatchError):
        LindbladModel(space, Operator.zero(space), (build_l0(1.0, 0.5, TensorSpace.qubit_bosons(4)),))


def test_compile_matches_direct_formula(rng):
    space = TensorSpace.qubit_bosons(3)
    h = Operator(space, random_hermitian(rng, 6))
    jumps = [Operator(space, rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))) for _ in range(2)]
    rates = [0.3, 1.1]
    model = LindbladModel(space, h, tuple(DissipatorTerm(r, j) for r, j in zip(rates, jumps)))
    rho = random_density(space, rng).matrix
    expected = -1j * (h.matrix @ rho - rho @ h.matrix)
    for r, j in zip(rates, jumps):
        jm = j.matrix
        jd = jm.conj().T
        expected += r * (jm @ rho @ jd - 0.5 * (jd @ jm @ rho + rho @ jd @ jm))
    np.testing.assert_allclose(compile_model(model).apply(rho).matrix, expected, atol=1e-12)


def test_pure_hamiltonian_spectrum(rng):
    space = TensorSpace.bosons(3)
    h = random_hermitian(rng, 3)
    lam = np.linalg.eigvalsh(h)
    L = compile_model(LindbladModel(space, Operator(space, h))).dense()
    got = np.sort_complex(np.round(np.linalg.eigvals(L), 10))
    want = np.sort_complex(np.round([1j * (a - b) for a in lam for b in lam], 10))
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_sparse_and_dense_agree(rng):
    model = engineered_model(EngineeredConfig(fock_dim=4))
    a = compile_model(model, sparse=False).dense()
    b = compile_model(model, sparse=True).dense()
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_compile_is_linear(rng):
    space = TensorSpace.qubit_bosons(3)
    h1, h2 = (Operator(space, random_hermitian(rng, 6)) for _ in range(2))
    t1 = build_l0(0.7, 0.4, space)
    t2 = build_l_aux(0.3, space, 0.4)
    m1 = LindbladModel(space, h1, (t1,))
    m2 = LindbladModel(space, h2, (t2,))
    merged = compile_model(m1 + m2).dense()
    np.testing.assert_allclose(merged, (compile_model(m1) + compile_model(m2)).dense(), atol=1e-12)


def random_model(seed, fock_dim=3):
    rng = np.random.default_rng(seed)
    space = TensorSpace.qubit_bosons(fock_dim)
    d = space.dim
    h = Operator(space, random_hermitian(rng, d))
    terms = []
    for _ in range(int(rng.integers(1, 4))):
        j = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        terms.append(DissipatorTerm(float(rng.uniform(0, 2)), Operator(space, j)))
    return LindbladModel(space, h, tuple(terms)), rng


@given(st.integers(0, 2**31))
def test_trace_preservation_property(seed):
    model, rng = random_model(seed)
    L = compile_model(model)
    one = vec(np.eye(model.space.dim))
    assert np.abs(one.conj() @ L.dense()).max() < 1e-10
    for _ in range(2):
        x = random_hermitian(rng, model.space.dim)
        assert abs(L.apply(x).trace()) < 1e-10


@given(st.integers(0, 2**31))
def test_hermiticity_preservation_property(seed):
    model, rng = random_model(seed)
    out = compile_model(model).apply(random_hermitian(rng, model.space.dim)).matrix
    assert np.abs(out - out.conj().T).max() < 1e-10


@given(st.integers(0, 2**31))
def test_spectrum_in_left_half_plane_property(seed):
    model, _ = random_model(seed)
    assert np.linalg.eigvals(compile_model(model).dense()).real.max() <= 1e-9


@given(st.floats(0.05, 1.0), st.floats(1.0, 1e4), st.floats(1.0, 1e4), st.floats(0.0, 3.0))
def test_engineered_models_are_valid_generators(zeta, c_q, c_m, gaux):
    model = engineered_model(EngineeredConfig(zeta=zeta, c_q=c_q, c_m=c_m, gamma_aux=gaux, fock_dim=4))
    ev = np.linalg.eigvals(compile_model(model).dense())
    assert ev.real.max() <= 1e-9


def test_density_input_accepted():
    space = TensorSpace.qubit_bosons(3)
    rho = DensityOperator.from_ket(space, basis_ket(space, (1, 0)))
    L = compile_model(LindbladModel.from_terms(space, [build_l0(1.0, 1.0, space)]))
    assert abs(L.apply(rho).trace()) < 1e-14
