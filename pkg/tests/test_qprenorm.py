"""Forced renormalization operator, its mode blocks, and section machinery.

Oracles: trig/algebraic identities for rotation numbers, block-matrix
assembly from l1/l2 factors, central finite differences for the derivative,
and spectrum symmetry under omega -> -omega.
"""

import math

import numpy as np
import pytest

from qprenorm_lab import (
    PairFn,
    QPFn,
    RotationNumber,
    apply_DT,
    apply_L_prime,
    apply_T,
    build_L_omega,
    eval_qpfn,
    gamma_normalize,
    l1_matrix,
    l2_matrix,
    project_p0,
    project_pik,
    renormalize_1d,
    rotation_matrix,
    shift_tgamma,
    spectrum_L_omega,
    sup_norm,
    require_diophantine,
)
from qprenorm_lab.errors import (
    DiophantineError,
    NoSectionError,
    PrecisionExhaustedError,
    UnsupportedBaseError,
)

TWO_PI = 2.0 * np.pi


# --------------------------------------------------------- rotation numbers

def test_golden_double_algebraic_identity(golden):
    assert abs(float(golden.double()) - (math.sqrt(5.0) - 2.0)) <= 1e-15


def test_rational_third_cycles_with_period_two():
    w = RotationNumber.from_fraction(1, 3)
    w2 = w.double()
    w4 = w2.double()
    assert float(w2) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert float(w4) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_ten_doublings_match_exact_algebra(golden):
    w = golden
    for _ in range(10):
        w = w.double()
    # 2^10 omega mod 1 = frac(512 sqrt(5)); the float oracle itself
    # carries ~2e-13 rounding from the 512 sqrt(5) product
    assert abs(float(w) - (512.0 * math.sqrt(5.0)) % 1.0) <= 1e-12
    assert abs(float(w) - float(golden.times_mod1(1024))) <= 1e-15


def test_doubling_depth_is_bounded(golden):
    w = golden
    with pytest.raises(PrecisionExhaustedError):
        for _ in range(150):
            w = w.double()


def test_diophantine_certificates():
    require_diophantine(RotationNumber.golden())
    with pytest.raises(DiophantineError):
        require_diophantine(RotationNumber.from_fraction(1, 3))
    with pytest.raises(DiophantineError):
        # a rational can never satisfy the lower bound at its denominator
        RotationNumber.from_fraction(1, 3, dio_gamma=0.1, dio_tau=1.0,
                                     q_max=10)
    with pytest.raises(DiophantineError):
        require_diophantine(RotationNumber.from_float(0.1234567))


# ------------------------------------------------------------- the operator

def test_phi_is_fixed_under_forced_operator(fp, golden):
    phi_q = fp.phi.embed()
    assert sup_norm(apply_T(phi_q, golden) + phi_q * -1.0) <= 1e-10


def test_theta_independent_input_reduces_to_1d(stars, golden):
    f2 = stars[1]
    image = apply_T(f2.embed(), golden)
    target = renormalize_1d(f2).embed()
    assert sup_norm(image + target * -1.0) <= 1e-11


def test_first_order_taylor_consistency(fp, domain, golden):
    phi_q = fp.phi.embed()
    pert = QPFn.from_callable(domain, lambda th, x: np.cos(TWO_PI * th))
    h = 1e-6
    curved = apply_T(phi_q + pert * h, golden)
    linear = apply_DT(phi_q, golden, pert)
    resid = sup_norm(curved + phi_q * -1.0 + linear * (-h))
    assert resid <= 1e-11


# --------------------------------------------------------------- derivative

def test_derivative_mode_zero_is_1d_derivative(fp, domain, golden):
    from qprenorm_lab import dr_matrix
    v = QPFn.from_callable(domain, lambda th, x: 0.3 - 0.2 * x ** 2)
    image = apply_DT(fp.phi.embed(), golden, v)
    got = project_p0(image).coeffs
    want = dr_matrix(fp.phi) @ project_p0(v).coeffs
    assert np.max(np.abs(got - want)) <= 1e-10


def test_derivative_preserves_mode_spaces(fp, domain, golden):
    v = QPFn.from_callable(
        domain, lambda th, x: (1.0 + 0.5 * x) * np.cos(2 * TWO_PI * th))
    image = apply_DT(fp.phi.embed(), golden, v)
    assert project_pik(image, 2).sup_norm() > 1e-3
    for k in (1, 3, 4):
        assert project_pik(image, k).sup_norm() <= 1e-12
    xs = np.linspace(-1.0, 1.0, 9)
    p0 = project_p0(image)
    assert max(abs(float(np.real(p0(x)))) for x in xs) <= 1e-12


def test_derivative_matches_central_difference(fp, domain, golden):
    phi_q = fp.phi.embed()
    v = QPFn.from_callable(domain, lambda th, x: x * np.cos(TWO_PI * th))
    h = 1e-6
    plus = apply_T(phi_q + v * h, golden)
    minus = apply_T(phi_q + v * (-h), golden)
    fd = (plus + minus * -1.0) * (0.5 / h)
    assert sup_norm(fd + apply_DT(phi_q, golden, v) * -1.0) <= 1e-8


def test_derivative_requires_theta_independent_base(fp, domain, golden):
    base = fp.phi.embed() + QPFn.from_callable(
        domain, lambda th, x: 0.05 * np.cos(TWO_PI * th))
    v = QPFn.from_callable(domain, lambda th, x: np.cos(TWO_PI * th))
    with pytest.raises(UnsupportedBaseError):
        apply_DT(base, golden, v)


# ------------------------------------------------------------- mode blocks

def test_zero_rotation_block_diagonal(fp):
    n = fp.phi.domain.n_cheb
    M = build_L_omega(fp.phi, RotationNumber.zero(), 1).matrix
    S = l1_matrix(fp.phi) + l2_matrix(fp.phi)
    assert np.max(np.abs(M[:n, :n] - S)) <= 1e-12
    assert np.max(np.abs(M[n:, n:] - S)) <= 1e-12
    assert np.max(np.abs(M[:n, n:])) <= 1e-12
    assert np.max(np.abs(M[n:, :n])) <= 1e-12


def test_quarter_rotation_block_structure(fp):
    n = fp.phi.domain.n_cheb
    M = build_L_omega(fp.phi, RotationNumber.from_fraction(1, 4), 1).matrix
    L1 = l1_matrix(fp.phi)
    L2 = l2_matrix(fp.phi)
    assert np.max(np.abs(M[:n, :n] - L1)) <= 1e-12
    assert np.max(np.abs(M[n:, n:] - L1)) <= 1e-12
    assert np.max(np.abs(M[:n, n:] + L2)) <= 1e-12
    assert np.max(np.abs(M[n:, :n] - L2)) <= 1e-12


def test_block_matrix_commutes_with_rotations(fp, golden):
    n = fp.phi.domain.n_cheb
    M = build_L_omega(fp.phi, golden, 1).matrix
    rng = np.random.default_rng(3)
    for gamma in rng.uniform(0.0, 1.0, size=5):
        R = rotation_matrix(n, float(gamma))
        assert np.max(np.abs(M @ R - R @ M)) <= 1e-12


def test_rotation_matrices_are_orthogonal(fp):
    n = fp.phi.domain.n_cheb
    rng = np.random.default_rng(4)
    for gamma in rng.uniform(0.0, 1.0, size=5):
        R = rotation_matrix(n, float(gamma))
        assert np.max(np.abs(R.T @ R - np.eye(2 * n))) <= 1e-13


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8, 13, 16])
def test_mode_block_diagonalizes_derivative(fp, golden, k):
    dom = fp.phi.domain
    phi_q = fp.phi.embed()
    op = build_L_omega(fp.phi, golden, k)
    rng = np.random.default_rng(100 + k)
    for _ in range(3):
        pair = PairFn.from_coeff_vector(
            dom, rng.standard_normal(2 * dom.n_cheb))
        via_dt = apply_DT(phi_q, golden, pair.embed(k))
        via_block = op.apply(pair).embed(k)
        assert sup_norm(via_dt + via_block * -1.0) <= 1e-10


def test_equivariance_under_phase_shift(fp, domain, golden):
    phi_q = fp.phi.embed()
    rng = np.random.default_rng(8)
    for _ in range(3):
        c = rng.standard_normal(5) * 0.5
        gamma = float(rng.uniform(0.0, 1.0))

        def v_fn(th, x, c=c):
            return (c[0] * x ** 2 + c[1] * np.cos(TWO_PI * th)
                    + c[2] * x * np.sin(TWO_PI * th)
                    + c[3] * np.cos(2 * TWO_PI * th)
                    + c[4] * x)

        v = QPFn.from_callable(domain, v_fn)
        a = shift_tgamma(apply_DT(phi_q, golden, v), gamma)
        b = apply_DT(phi_q, golden, shift_tgamma(v, gamma))
        assert sup_norm(a + b * -1.0) <= 1e-10


# ------------------------------------------------------------------ spectra

def test_zero_rotation_spectrum_is_doubled(fp):
    op = build_L_omega(fp.phi, RotationNumber.zero(), 1)
    rep = spectrum_L_omega(op)
    n = fp.phi.domain.n_cheb
    single = np.linalg.eigvals(l1_matrix(fp.phi) + l2_matrix(fp.phi))
    doubled = np.sort_complex(np.concatenate([single, single]))
    got = np.sort_complex(np.asarray(rep.eigenvalues))
    assert got.size == 2 * n
    assert np.max(np.abs(got - doubled)) <= 1e-8


def test_spectrum_pairing_and_continuity_over_grid(fp):
    radii = []
    for i in range(64):
        rep = spectrum_L_omega(build_L_omega(fp.phi, i / 64.0, 1))
        assert rep.pairing_ok, f"pairing violated at omega={i / 64.0}"
        radii.append(rep.spectral_radius)
    jumps = np.abs(np.diff(radii + radii[:1]))
    assert np.max(jumps) <= 0.5


def test_opposite_rotation_conjugates_spectrum(fp, golden):
    w = float(golden)
    eig_pos = np.sort_complex(np.asarray(
        spectrum_L_omega(build_L_omega(fp.phi, w, 1)).eigenvalues))
    eig_neg = np.sort_complex(np.asarray(
        spectrum_L_omega(build_L_omega(fp.phi, 1.0 - w, 1)).eigenvalues))
    assert np.max(np.abs(eig_pos - np.sort_complex(np.conj(eig_neg)))) <= 1e-8


# ------------------------------------------------------- section machinery

def test_normalize_sine_already_in_section(domain):
    v = QPFn.from_callable(
        domain, lambda th, x: (1.0 + 0.2 * x) * np.sin(TWO_PI * th))
    gamma0, vn = gamma_normalize(v)
    assert abs(gamma0) <= 1e-12
    assert sup_norm(vn + v * -1.0) <= 1e-12


def test_normalize_cosine_needs_three_quarters(domain):
    v = QPFn.from_callable(
        domain, lambda th, x: (1.0 + 0.2 * x) * np.cos(TWO_PI * th))
    gamma0, vn = gamma_normalize(v)
    assert gamma0 == pytest.approx(0.75, abs=1e-12)
    # normalized function vanishes at the section with positive slope
    assert abs(eval_qpfn(vn, 0.0, 0.0)) <= 1e-12
    h = 1e-6
    slope = (eval_qpfn(vn, h, 0.0) - eval_qpfn(vn, -h, 0.0)) / (2 * h)
    assert slope > 0.0


def test_normalize_is_idempotent(domain):
    v = QPFn.from_callable(
        domain, lambda th, x: (0.7 + 0.1 * x) * np.cos(TWO_PI * th)
        + 0.4 * np.sin(TWO_PI * th))
    gamma0, vn = gamma_normalize(v)
    gamma_again, _ = gamma_normalize(vn)
    assert min(abs(gamma_again), abs(1.0 - gamma_again)) <= 1e-9


def test_normalize_needs_first_mode(domain):
    v = QPFn.from_callable(domain, lambda th, x: 1.0 - x ** 2)
    with pytest.raises(NoSectionError):
        gamma_normalize(v)


def test_normalize_falls_back_on_degenerate_section_point(domain):
    # u(x) = x vanishes at x0 = 0; the scan moves to a nonzero sample
    v = QPFn.from_callable(domain, lambda th, x: x * np.sin(TWO_PI * th))
    gamma0, _ = gamma_normalize(v)
    assert min(abs(gamma0), abs(1.0 - gamma0)) <= 1e-9


def test_l_prime_output_satisfies_section_conditions(fp, domain, golden):
    pair = project_pik(QPFn.from_callable(
        domain, lambda th, x: (0.8 + 0.3 * x) * np.cos(TWO_PI * th)
        + 0.2 * np.sin(TWO_PI * th)), 1)
    out = apply_L_prime(fp.phi, golden, pair)
    f = out.embed(1)
    assert abs(eval_qpfn(f, 0.0, 0.0)) <= 1e-10
    h = 1e-6
    slope = (eval_qpfn(f, h, 0.0) - eval_qpfn(f, -h, 0.0)) / (2 * h)
    assert slope > 0.0
