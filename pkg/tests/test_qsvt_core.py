import numpy as np
import pytest

from qsvt_refine.blockenc import dilation_encoding
from qsvt_refine.invpoly import (
    ChebyshevSeries,
    enforce_qsvt_bounds,
    inverse_cheb_series,
    make_inverse_spec,
    max_abs_on_interval,
)
from qsvt_refine.numerics import StateVector, random_with_condition, svd
from qsvt_refine.qsp_phases import PhaseVector, find_phases
from qsvt_refine.qsvt_core import (
    PostSelectionError,
    apply_inverse_state,
    build_u_phi,
    extract_block,
    spectral_oracle,
)

T1 = ChebyshevSeries(np.array([0.0, 1.0]), "odd")


def bounded_inverse(kappa, eps):
    series = inverse_cheb_series(make_inverse_spec(kappa, eps))
    bounded, _ = enforce_qsvt_bounds(series)
    return bounded


def random_odd_series(rng, degree, peak):
    coefs = np.zeros(degree + 1)
    coefs[1::2] = rng.standard_normal((degree + 1) // 2)
    series = ChebyshevSeries(coefs, "odd")
    return ChebyshevSeries(coefs * (peak / max_abs_on_interval(series)), "odd")


def test_single_phase_zero_reproduces_matrix():
    a = random_with_condition(4, 4.0, 0)
    op = build_u_phi(dilation_encoding(a), PhaseVector(np.array([0.0])))
    np.testing.assert_allclose(extract_block(op), a, atol=1e-10)
    assert op.be_calls == 1


def test_u_phi_is_unitary_and_counts_calls():
    rng = np.random.default_rng(1)
    a = random_with_condition(4, 3.0, 1)
    enc = dilation_encoding(a)
    for d in (1, 2, 3, 6, 9):
        op = build_u_phi(enc, PhaseVector(rng.uniform(-np.pi, np.pi, d)))
        defect = np.linalg.norm(op.u_phi.conj().T @ op.u_phi - np.eye(8), 2)
        assert defect <= 1e-10
        assert op.be_calls == d
        assert op.parity == ("odd" if d % 2 else "even")


def test_convention_tag_mismatch_rejected():
    a = random_with_condition(2, 2.0, 3)
    phases = PhaseVector(np.array([0.0]), convention_tag="other")
    with pytest.raises(ValueError, match="convention"):
        build_u_phi(dilation_encoding(a), phases)


def test_block_norm_bounded():
    rng = np.random.default_rng(2)
    a = random_with_condition(4, 5.0, 2)
    op = build_u_phi(dilation_encoding(a), PhaseVector(rng.uniform(-1, 1, 5)))
    assert np.linalg.norm(extract_block(op), 2) <= 1.0 + 1e-9


def test_spectral_oracle_t1_and_t0():
    a = random_with_condition(4, 6.0, 4)
    np.testing.assert_allclose(spectral_oracle(a, T1), a, atol=1e-11)
    t0 = ChebyshevSeries(np.array([1.0]), "even")
    np.testing.assert_allclose(spectral_oracle(a, t0), np.eye(4), atol=1e-11)


def test_spectral_oracle_inverse_on_diagonal():
    kappa, eps = 5.0, 0.1
    series = inverse_cheb_series(make_inverse_spec(kappa, eps))
    a = np.diag([0.2, 0.4])
    got = spectral_oracle(a, series)
    want = np.diag([series.scale / 0.2, series.scale / 0.4])
    assert np.max(np.abs(np.diag(got - want))) <= 2 * eps * series.scale
    assert np.max(np.abs(got - np.diag(np.diag(got)))) <= 1e-12


def test_qsvt_identity_property():
    # the wiring regression: circuit block vs SVD ground truth
    rng = np.random.default_rng(7)
    for trial in range(10):
        n = int(rng.choice([2, 4]))
        degree = int(rng.choice([3, 7, 11, 15]))
        a = random_with_condition(n, float(rng.uniform(1.5, 8.0)), 100 + trial)
        target = random_odd_series(rng, degree, 0.8)
        phases = find_phases(target, tol=1e-10)
        op = build_u_phi(dilation_encoding(a), phases, target)
        diff = extract_block(op).real - spectral_oracle(a, target)
        assert np.linalg.norm(diff, 2) <= 1e-7, f"trial {trial}"


def test_even_case_block_structure():
    # d=2 with phases (0, 0) realizes T_2 exactly: block = V T2(S) V^H
    a = np.diag([0.3, 0.7])
    op = build_u_phi(dilation_encoding(a), PhaseVector(np.zeros(2)))
    want = np.diag([2 * 0.3**2 - 1.0, 2 * 0.7**2 - 1.0])
    np.testing.assert_allclose(extract_block(op).real, want, atol=1e-10)

    # non-diagonal check against the oracle route
    t2 = ChebyshevSeries(np.array([0.0, 0.0, 1.0]), "even")
    a = random_with_condition(4, 3.0, 11)
    op = build_u_phi(dilation_encoding(a), PhaseVector(np.zeros(2)))
    np.testing.assert_allclose(
        extract_block(op).real, spectral_oracle(a, t2), atol=1e-10
    )


def test_extract_block_inverse_polynomial_on_diagonal():
    # dilation of diag(0.5, 1.0) with the bounded inverse series: the real
    # block must sit within 2 eps scale of scale * diag(2, 1)
    kappa, eps = 2.0, 0.1
    series = bounded_inverse(kappa, eps)
    phases = find_phases(series, tol=1e-10)
    a = np.diag([0.5, 1.0])
    op = build_u_phi(dilation_encoding(a), phases, series)
    block = extract_block(op).real
    want = series.scale * np.diag([2.0, 1.0])
    assert np.max(np.abs(block - want)) <= 2.0 * eps * series.scale


def test_apply_inverse_identity_system():
    series = bounded_inverse(1.0, 0.1)
    phases = find_phases(series, tol=1e-10)
    enc = dilation_encoding(np.eye(2))
    rng = np.random.default_rng(0)
    b = rng.standard_normal(2)
    b = StateVector(b / np.linalg.norm(b))
    out, prob = apply_inverse_state(enc, phases, series, b)
    overlap = abs(np.vdot(out.amplitudes, b.amplitudes))
    assert overlap == pytest.approx(1.0, abs=1e-8)
    assert 0.0 < prob <= 1.0


def test_apply_inverse_preserves_eigenvector():
    a = np.diag([1.0, 0.5])
    series = bounded_inverse(2.0, 0.05)
    phases = find_phases(series, tol=1e-10)
    enc = dilation_encoding(a.conj().T)
    out, _ = apply_inverse_state(enc, phases, series, StateVector(np.array([0.0, 1.0])))
    assert abs(out.amplitudes[1]) == pytest.approx(1.0, abs=1e-9)


def test_apply_inverse_solves_to_polynomial_accuracy():
    kappa, eps = 4.0, 0.05
    a = random_with_condition(4, kappa, 21)
    series = bounded_inverse(kappa, eps)
    phases = find_phases(series, tol=1e-10)
    enc = dilation_encoding(a.conj().T)
    rng = np.random.default_rng(1)
    b = rng.standard_normal(4)
    b /= np.linalg.norm(b)
    out, prob = apply_inverse_state(enc, phases, series, StateVector(b))
    # multiplying back by A must recover the rhs direction
    recovered = a @ out.amplitudes.real
    recovered /= np.linalg.norm(recovered)
    fidelity = abs(np.dot(recovered, b))
    assert fidelity >= 1.0 - 10.0 * eps
    assert 0.0 < prob <= 1.0


def test_apply_inverse_post_selection_failure():
    # phase pi/2 realizes the zero polynomial; the kept component vanishes
    enc = dilation_encoding(0.5 * np.eye(2))
    series = ChebyshevSeries(np.array([0.0, 0.9]), "odd")
    phases = PhaseVector(np.array([np.pi / 2]))
    with pytest.raises(PostSelectionError):
        apply_inverse_state(enc, phases, series, StateVector(np.array([1.0, 0.0])))


def test_apply_inverse_input_validation():
    enc = dilation_encoding(0.5 * np.eye(2))
    series = bounded_inverse(2.0, 0.1)
    phases = find_phases(series, tol=1e-9)
    with pytest.raises(ValueError, match="not normalized"):
        apply_inverse_state(enc, phases, series, StateVector(np.array([1.0, 1.0])))
    even = ChebyshevSeries(np.array([0.0, 0.0, 0.5]), "even")
    with pytest.raises(ValueError, match="odd"):
        apply_inverse_state(enc, PhaseVector(np.zeros(2)), even,
                            StateVector(np.array([1.0, 0.0])))
    with pytest.raises(ValueError, match="match"):
        apply_inverse_state(enc, PhaseVector(np.zeros(3)), series,
                            StateVector(np.array([1.0, 0.0])))


def test_ordering_regression_odd_and_even():
    # pins the left-to-right expansion of the alternating product: any
    # off-by-one in the factor order breaks agreement with the oracle
    rng = np.random.default_rng(5)
    a = random_with_condition(4, 2.5, 31)
    enc = dilation_encoding(a)
    fac = svd(a)
    for d in (3, 4):
        phases = PhaseVector(rng.uniform(-0.8, 0.8, d))
        op = build_u_phi(enc, phases)
        from qsvt_refine.qsp_phases import realized_values

        vals = realized_values(phases, fac.singular_values)
        if d % 2:
            want = (fac.u * vals) @ fac.v.conj().T
        else:
            want = (fac.v * vals) @ fac.v.conj().T
        np.testing.assert_allclose(extract_block(op).real, want, atol=1e-10)
