import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clockforge.circuits import cat_circuit
from clockforge.clock import FkOptions, build_fk_hamiltonian
from clockforge.linalg import (
    ConvergenceError,
    DensityOperator,
    DimensionError,
    HermitianTermSum,
    RegisterShape,
    StateVector,
    Term,
    apply_channel,
    apply_local,
    eigensolve_hermitian,
    embed_operator,
    expectation,
    partial_trace,
    pure_trace_distance,
    random_channel,
    random_state,
    replace_channel,
    tensor_product,
    trace_distance,
)

Z = np.diag([1.0, -1.0])
X = np.array([[0.0, 1.0], [1.0, 0.0]])
KET0 = StateVector((2,), [1, 0])
KET1 = StateVector((2,), [0, 1])
PLUS = StateVector((2,), np.array([1, 1]) / math.sqrt(2))


def bell():
    return StateVector((2, 2), np.array([1, 0, 0, 1]) / math.sqrt(2))


def test_tensor_product_basis_and_linearity():
    assert np.allclose(tensor_product(KET0, KET1).amplitudes, [0, 1, 0, 0])
    assert np.allclose(tensor_product(PLUS, KET0).amplitudes, np.array([1, 0, 1, 0]) / math.sqrt(2))


def test_tensor_product_of_mixed_states():
    out = tensor_product(DensityOperator((2,), np.eye(2) / 2), DensityOperator((3,), np.eye(3) / 3))
    assert out.shape.dims == (2, 3)
    assert np.allclose(out.matrix, np.eye(6) / 6)


def test_tensor_product_kind_mismatch():
    with pytest.raises(TypeError):
        tensor_product(KET0, KET0.density())


def test_register_shape_rejects_small_dims():
    with pytest.raises(DimensionError):
        RegisterShape((2, 1))


def test_state_normalization_enforced():
    with pytest.raises(ValueError):
        StateVector((2,), [1, 1])
    StateVector((2,), [1, 1], subnormalized=True)


def test_partial_trace_examples():
    rho = StateVector.basis((2, 2), (0, 0)).density()
    assert np.allclose(partial_trace(rho, [1]).matrix, np.diag([1, 0]))
    assert np.allclose(partial_trace(bell().density(), [1]).matrix, np.eye(2) / 2)


def test_partial_trace_rejects_bad_site():
    with pytest.raises(DimensionError):
        partial_trace(bell().density(), [2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations([0, 1, 2, 3]))
def test_partial_trace_composes(seed, order):
    rng = np.random.default_rng(seed)
    rho = random_state((2, 3, 2, 2), rng).density()
    a, b = sorted(order[:1]), sorted(order[1:3])
    once = partial_trace(rho, a + b).matrix
    # trace b first, then a in the relabelled register
    step = partial_trace(rho, b)
    kept = [s for s in range(4) if s not in b]
    twice = partial_trace(step, [kept.index(s) for s in a]).matrix
    assert np.abs(once - twice).max() <= 1e-12


def test_trace_distance_examples():
    rho = PLUS.density()
    assert trace_distance(rho, rho) == pytest.approx(0, abs=1e-12)
    assert trace_distance(KET0.density(), KET1.density()) == pytest.approx(2)


def test_trace_distance_shape_mismatch():
    with pytest.raises(DimensionError):
        trace_distance(KET0.density(), bell().density())


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.99))
def test_pure_state_distance_against_overlap(delta):
    # |<a|b>|^2 = 1 - delta^2/4 gives trace distance exactly delta
    overlap = math.sqrt(1 - delta**2 / 4)
    a = np.array([1, 0], dtype=complex)
    b = np.array([overlap, math.sqrt(1 - overlap**2)], dtype=complex)
    direct = trace_distance(np.outer(a, a), np.outer(b, b))
    assert direct <= delta + 1e-9
    assert direct == pytest.approx(pure_trace_distance(a, b), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_distance_contracts(seed):
    rng = np.random.default_rng(seed)
    rho = random_state((2, 2), rng).density()
    sigma = random_state((2, 2), rng).density()
    before = trace_distance(rho, sigma)
    ch = random_channel((1,), (2,), rng)
    after = trace_distance(apply_channel(rho, ch), apply_channel(sigma, ch))
    assert after <= before + 1e-10
    reduced = trace_distance(partial_trace(rho, [0]), partial_trace(sigma, [0]))
    assert reduced <= before + 1e-10
    # triangle inequality
    tau = random_state((2, 2), rng).density()
    assert before <= trace_distance(rho, tau) + trace_distance(tau, sigma) + 1e-10


def test_replace_channel_is_erasure():
    rho = bell().density()
    out = apply_channel(rho, replace_channel((0,), (2,)))
    assert np.allclose(out.matrix, np.eye(4) / 4)


def test_eigensolve_small_examples():
    h = HermitianTermSum(RegisterShape.uniform(3), [Term((i,), np.diag([0.0, 1.0])) for i in range(3)])
    res = eigensolve_hermitian(h, how_many=2)
    assert res.values[0] == pytest.approx(0)
    assert abs(res.vectors[0, 0]) == pytest.approx(1)
    z = HermitianTermSum(RegisterShape.uniform(1), [Term((0,), Z)])
    assert np.allclose(eigensolve_hermitian(z, how_many=2).values, [-1, 1])


def test_eigensolve_cat_clock_without_output_check():
    h = build_fk_hamiltonian(cat_circuit(3), FkOptions(include_out=False))
    res = eigensolve_hermitian(h, how_many=3)
    assert res.values[0] == pytest.approx(0, abs=1e-10)
    assert res.values[1] > 1e-3
    assert np.all(res.residuals <= 1e-8)


def test_lanczos_path_agrees_with_dense():
    h = build_fk_hamiltonian(cat_circuit(4), FkOptions(include_out=True))
    dense = eigensolve_hermitian(h, how_many=3)
    lanczos = eigensolve_hermitian(h, how_many=3, dense_limit=1)
    assert lanczos.method == "lanczos"
    assert np.allclose(dense.values, lanczos.values, atol=1e-9)


def test_eigensolve_reports_bad_residual():
    h = build_fk_hamiltonian(cat_circuit(2), FkOptions())
    with pytest.raises(ConvergenceError):
        eigensolve_hermitian(h, how_many=1, residual_tol=-1.0)


def test_dense_cap_enforced(monkeypatch):
    monkeypatch.setenv("CLOCKFORGE_DENSE_CAP", "16")
    h = build_fk_hamiltonian(cat_circuit(3), FkOptions())
    with pytest.raises(DimensionError):
        h.to_sparse()


def test_expectation_examples():
    z = HermitianTermSum(RegisterShape.uniform(1), [Term((0,), Z)])
    assert expectation(z, KET0) == pytest.approx(1)
    assert expectation(z, PLUS) == pytest.approx(0, abs=1e-12)
    assert expectation(z, KET0.density()) == pytest.approx(1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_expectation_is_linear_in_terms(seed):
    rng = np.random.default_rng(seed)
    shape = RegisterShape((2, 3, 2))
    terms = []
    for support in ((0,), (1, 2), (2, 0)):
        d = math.prod(shape.dims[s] for s in support)
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        m = (a + a.conj().T) / 2
        terms.append(Term(support, m / np.abs(np.linalg.eigvalsh(m)).max()))
    psi = random_state(shape, rng)
    total = expectation(HermitianTermSum(shape, terms), psi)
    parts = sum(expectation(HermitianTermSum(shape, [t]), psi) for t in terms)
    assert total == pytest.approx(parts, abs=1e-10)
    # oracle: dense Kronecker embedding
    full = sum(embed_operator(t.matrix, t.support, shape.dims).toarray() for t in terms)
    assert total == pytest.approx(np.vdot(psi.amplitudes, full @ psi.amplitudes).real, abs=1e-10)


def test_apply_local_matches_kron():
    rng = np.random.default_rng(3)
    psi = random_state((2, 2, 2), rng).amplitudes
    out = apply_local(psi, (2, 2, 2), (2, 0), np.kron(X, Z))
    # site 2 gets X, site 0 gets Z
    want = np.kron(np.kron(Z, np.eye(2)), X) @ psi
    assert np.allclose(out, want)


def test_validate_flags_large_norm():
    h = HermitianTermSum(RegisterShape.uniform(1), [Term((0,), 2 * Z)])
    with pytest.raises(ValueError):
        h.validate()
    with pytest.raises(ValueError):
        HermitianTermSum(RegisterShape.uniform(1), [Term((0,), np.array([[0, 1], [0, 0]]))]).validate()


def test_term_rejects_unknown_tag():
    with pytest.raises(ValueError):
        Term((0,), Z, tag="bogus")
