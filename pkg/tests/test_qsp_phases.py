import numpy as np
import pytest

from qsvt_refine.invpoly import (
    ChebyshevSeries,
    enforce_qsvt_bounds,
    inverse_cheb_series,
    make_inverse_spec,
    max_abs_on_interval,
)
from qsvt_refine.qsp_phases import (
    CONVENTION_TAG,
    PhaseFindingError,
    PhaseVector,
    find_phases,
    signal_unitary,
    verify_phases,
)

T1 = ChebyshevSeries(np.array([0.0, 1.0]), "odd")


def random_odd_series(rng, degree, peak):
    coefs = np.zeros(degree + 1)
    coefs[1::2] = rng.standard_normal((degree + 1) // 2)
    series = ChebyshevSeries(coefs, "odd")
    return ChebyshevSeries(coefs * (peak / max_abs_on_interval(series)), "odd")


def test_signal_unitary_single_w():
    phases = PhaseVector(np.array([0.0]))
    for x in np.linspace(-1.0, 1.0, 7):
        m = signal_unitary(x, phases)
        assert m[0, 0].real == pytest.approx(x)


def test_signal_unitary_empty_is_identity():
    m = signal_unitary(0.37, PhaseVector(np.zeros(0)))
    np.testing.assert_allclose(m, np.eye(2))


def test_signal_unitary_is_unitary():
    rng = np.random.default_rng(0)
    for _ in range(10):
        phases = PhaseVector(rng.uniform(-np.pi, np.pi, rng.integers(1, 9)))
        m = signal_unitary(rng.uniform(-1, 1), phases)
        assert np.linalg.norm(m.conj().T @ m - np.eye(2), 2) <= 1e-13


def test_signal_unitary_domain_check():
    with pytest.raises(ValueError):
        signal_unitary(1.01, PhaseVector(np.array([0.0])))


def test_find_phases_t1():
    phases = find_phases(ChebyshevSeries(np.array([0.0, 0.999]), "odd"), tol=1e-12)
    xs = np.random.default_rng(1).uniform(-1, 1, 100)
    for x in xs:
        assert signal_unitary(x, phases)[0, 0].real == pytest.approx(0.999 * x, abs=1e-10)


def test_find_phases_scaled_t3():
    target = ChebyshevSeries(np.array([0.0, 0.0, 0.0, 0.9]), "odd")
    phases = find_phases(target, tol=1e-10)
    assert verify_phases(phases, target) <= 1e-9


def test_find_phases_inverse_polynomial():
    series = inverse_cheb_series(make_inverse_spec(2.0, 0.1))
    bounded, _ = enforce_qsvt_bounds(series)
    phases = find_phases(bounded, tol=1e-10)
    assert phases.degree == bounded.degree
    assert verify_phases(phases, bounded) <= 1e-8


def test_find_phases_random_odd_targets():
    # completeness sweep: bounded odd targets up to degree 31
    rng = np.random.default_rng(42)
    for trial in range(50):
        degree = int(rng.choice([3, 7, 11, 15, 23, 31]))
        target = random_odd_series(rng, degree, 0.8)
        phases = find_phases(target, tol=1e-9)
        assert verify_phases(phases, target) <= 1e-8, f"trial {trial}"


def test_odd_phases_respect_parity_at_zero():
    rng = np.random.default_rng(3)
    target = random_odd_series(rng, 7, 0.7)
    phases = find_phases(target, tol=1e-10)
    assert abs(signal_unitary(0.0, phases)[0, 0].real) <= 1e-10


def test_find_phases_even_target():
    # 0.8 T_2: even targets use the unreduced parametrization
    target = ChebyshevSeries(np.array([0.0, 0.0, 0.8]), "even")
    phases = find_phases(target, tol=1e-10)
    assert verify_phases(phases, target) <= 1e-9


def test_find_phases_preconditions():
    with pytest.raises(ValueError, match="parity"):
        find_phases(ChebyshevSeries(np.array([0.5, 0.5]), "none"))
    with pytest.raises(ValueError, match="degree"):
        find_phases(ChebyshevSeries(np.array([0.9]), "even"))
    with pytest.raises(ValueError, match="rescale"):
        find_phases(ChebyshevSeries(np.array([0.0, 1.0 - 1e-9]), "odd"))
    big = ChebyshevSeries(np.concatenate([np.zeros(503), [0.5]]), "odd")
    with pytest.raises(ValueError, match="cap"):
        find_phases(big)


def test_find_phases_iteration_cap_error():
    rng = np.random.default_rng(9)
    target = random_odd_series(rng, 15, 0.8)
    with pytest.raises(PhaseFindingError) as excinfo:
        find_phases(target, tol=1e-12, max_evals=2)
    assert excinfo.value.residual > 0.0


def test_verify_phases_exact_and_perturbed():
    phases = PhaseVector(np.array([0.0]))
    assert verify_phases(phases, T1) <= 1e-12
    bumped = PhaseVector(phases.phases + np.array([0.1]))
    assert verify_phases(bumped, T1) > 1e-3


def test_verify_phases_grid_monotonicity():
    rng = np.random.default_rng(12)
    target = random_odd_series(rng, 5, 0.6)
    phases = PhaseVector(rng.uniform(-1, 1, 5))
    assert verify_phases(phases, target, grid=10_000) >= verify_phases(
        phases, target, grid=1
    )


def test_phase_vector_json_roundtrip():
    phases = PhaseVector(np.array([0.1, -0.2, 0.3]))
    back = PhaseVector.from_json(phases.to_json())
    np.testing.assert_array_equal(back.phases, phases.phases)
    assert back.convention_tag == CONVENTION_TAG
