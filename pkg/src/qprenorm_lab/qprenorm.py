"""Quasi-periodic doubling renormalization over an irrational rotation.

T_omega(g)(theta, x) = g(theta + omega, g(theta, a x)) / a with
a = mean of g(theta, 1). At a theta-independent base the derivative is
block-diagonal over Fourier modes: mode 0 sees the one-dimensional
derivative DR, and mode k sees L1 + e^(2 pi i k omega) L2, which on the
real (cos, sin) pair coefficients is the 2n x 2n matrix

    [[L1 + cos(phi) L2, -sin(phi) L2],
     [ sin(phi) L2,      L1 + cos(phi) L2]],   phi = 2 pi k omega,

acting on the pair (p, q) = (u, -v) of the (u, v) convention used by
project_pik (u = 2 Re c_k, v = -2 Im c_k); the operator object converts at
its boundary. Rotation numbers are kept as 128-bit fixed-point fractions so
that the doubling omega -> 2 omega mod 1 stays exact; floats appear only
inside trig evaluations.

The section machinery (gamma_normalize, apply_L_prime) quotients the
rotational symmetry t_gamma by shifting a mode-1 vector onto the section
{f(theta0, x0) = 0, positive theta-derivative}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import (DegeneratePointError, DegenerateScalingError,
                     DiophantineError, DomainError, NoSectionError,
                     PrecisionExhaustedError, UnsupportedBaseError)
from .funcspace import (AnalyticFn, PairFn, QPFn, project_p0, project_pik,
                        shift_tgamma)
from .renorm1d import (TOL_A, UnimodalMap, dr_matrix, l1_matrix, l2_matrix)

SCALE_BITS = 128
SCALE = 1 << SCALE_BITS

TOL_PI1 = 1e-12
TOL_SPEC = 1e-8


# --------------------------------------------------------- rotation numbers

@dataclass(frozen=True)
class RotationNumber:
    """frac(omega) as num / 2^128 with optional Diophantine certificate.

    The certificate |q omega - p| >= dio_gamma / q^dio_tau is verified for
    0 < q <= q_max at construction (q_max = 0 skips it, which is how the
    rational test values 0, 1/4, 1/3 are represented). Doubling divides
    dio_gamma by 2^dio_tau and halves q_max, both exact consequences of the
    bound.
    """

    num: int
    dio_gamma: float = 0.0
    dio_tau: float = 1.0
    q_max: int = 0
    depth: int = 0

    def __post_init__(self):
        object.__setattr__(self, "num", self.num % SCALE)
        if self.q_max > 0 and self.dio_gamma > 0:
            self._verify()

    def _verify(self):
        for q in range(1, self.q_max + 1):
            r = (q * self.num) % SCALE
            dist = min(r, SCALE - r)
            if float(dist) < self.dio_gamma * SCALE / q ** self.dio_tau:
                raise DiophantineError(
                    f"|q omega - p| = {dist / SCALE:.3e} at q={q} breaks "
                    f"gamma/q^tau = {self.dio_gamma / q ** self.dio_tau:.3e}")

    @property
    def value(self):
        return self.num / SCALE

    def __float__(self):
        return self.value

    def double(self):
        """2 omega mod 1, exact on the fixed-point fraction."""
        if self.depth + 1 > 100:
            raise PrecisionExhaustedError("more than 100 doublings requested")
        return RotationNumber(
            (self.num << 1) % SCALE,
            dio_gamma=self.dio_gamma / 2 ** self.dio_tau,
            dio_tau=self.dio_tau,
            q_max=self.q_max // 2,
            depth=self.depth + 1)

    def times_mod1(self, k):
        """k omega mod 1 for a positive integer k, exact."""
        k = int(k)
        if k < 1:
            raise ValueError("k must be a positive integer")
        if k == 1:
            return self
        return RotationNumber(
            (self.num * k) % SCALE,
            dio_gamma=self.dio_gamma / k ** self.dio_tau,
            dio_tau=self.dio_tau,
            q_max=self.q_max // k,
            depth=self.depth)

    @classmethod
    def zero(cls):
        return cls(0)

    @classmethod
    def from_fraction(cls, p, q, dio_gamma=0.0, dio_tau=1.0, q_max=0):
        if q <= 0:
            raise ValueError("denominator must be positive")
        return cls((p % q) * SCALE // q, dio_gamma, dio_tau, q_max)

    @classmethod
    def from_float(cls, x, dio_gamma=0.0, dio_tau=1.0, q_max=0):
        return cls(round((x % 1.0) * SCALE), dio_gamma, dio_tau, q_max)

    @classmethod
    def golden(cls, q_max=10000):
        """(sqrt(5) - 1) / 2; Diophantine with tau = 1, gamma = 0.38."""
        num = (math.isqrt(5 << 2 * SCALE_BITS) - SCALE) // 2
        return cls(num, dio_gamma=0.38, dio_tau=1.0, q_max=q_max)

    @classmethod
    def from_continued_fraction(cls, quotients, dio_gamma=0.0, dio_tau=1.0,
                                q_max=0):
        """omega = 1/(c1 + 1/(c2 + ...)) from positive partial quotients."""
        x = Fraction(0)
        for c in reversed(list(quotients)):
            if c < 1:
                raise ValueError("partial quotients must be >= 1")
            x = Fraction(1, c + x)
        return cls.from_fraction(x.numerator, x.denominator,
                                 dio_gamma, dio_tau, q_max)


def double_mod1(omega):
    return omega.double()


def require_diophantine(omega, dio_gamma=None, dio_tau=None, q_max=1000):
    """Driver-level gate: verify (or re-verify) the Diophantine bound.

    Uses the certificate stored on omega unless overridden; raises when the
    bound fails or when omega carries no usable constants.
    """
    gamma = omega.dio_gamma if dio_gamma is None else dio_gamma
    tau = omega.dio_tau if dio_tau is None else dio_tau
    if gamma <= 0:
        raise DiophantineError("rotation number carries no Diophantine bound")
    probe = RotationNumber(omega.num, dio_gamma=gamma, dio_tau=tau,
                           q_max=q_max)
    return probe


# ------------------------------------------------------------------ sections

@dataclass(frozen=True)
class SectionConfig:
    theta0: float = 0.0
    x0: float = 0.0
    degenerate_scan: tuple = (0.0, 0.25, -0.25, 0.5, -0.5)


# ------------------------------------------------------------- the operator

def apply_T(g, omega):
    """T_omega(g) = g(theta + omega, g(theta, a x)) / a, a = mean g(theta, 1)."""
    from .funcspace import compose_fiber
    a_hat = float(np.real(project_p0(g)(1.0)))
    if abs(a_hat) < TOL_A:
        raise DegenerateScalingError(f"mean scaling a = {a_hat:.3e} too small")
    h = compose_fiber(g, float(omega), g, a_hat)
    return h * (1.0 / a_hat)


def apply_DT(base, omega, v):
    """Derivative of T_omega at a theta-independent base, mode by mode.

    Mode 0 gets the one-dimensional derivative DR(psi); mode k gets
    L1 c_k + e^(2 pi i k omega) L2 c_k.
    """
    if not base.is_theta_independent():
        raise UnsupportedBaseError(
            "DT is only assembled at theta-independent bases")
    psi = UnimodalMap(project_p0(base))
    if abs(psi.a) < TOL_A:
        raise DegenerateScalingError("degenerate scaling at the base map")
    L1 = l1_matrix(psi)
    L2 = l2_matrix(psi)
    DR = dr_matrix(psi)
    w = float(omega)
    K = v.K
    out = QPFn.zero(v.domain)
    out.modes[K] = DR @ v.modes[K]
    for k in range(1, K + 1):
        ck = v.modes[K + k]
        row = L1 @ ck + np.exp(2j * np.pi * k * w) * (L2 @ ck)
        out.modes[K + k] = row
        out.modes[K - k] = np.conj(row)
    return out


@dataclass
class LOmegaOperator:
    """Restriction of DT to a single Fourier pair, as a real matrix.

    The matrix is written in the rotated pair coordinates (p, q) = (u, -v),
    where it takes the printed block form
    [[L1 + cos L2, -sin L2], [sin L2, L1 + cos L2]]; apply() converts from
    and to the (u, v) convention of project_pik at the boundary.
    """

    base_psi: UnimodalMap
    omega: RotationNumber
    matrix: np.ndarray

    def apply(self, v: PairFn) -> PairFn:
        n = self.base_psi.domain.n_cheb
        vec = np.concatenate([np.real(v.u.coeffs), -np.real(v.v.coeffs)])
        w = self.matrix @ vec
        dom = self.base_psi.domain
        return PairFn(AnalyticFn(w[:n].copy(), dom),
                      AnalyticFn(-w[n:].copy(), dom))


def build_L_omega(psi, omega, k=1):
    """Assemble L_{k omega} acting on pair coefficients."""
    if abs(psi.a) < TOL_A:
        raise DegenerateScalingError("degenerate scaling at the base map")
    if isinstance(omega, RotationNumber):
        om_eff = omega.times_mod1(k) if k != 1 else omega
    else:
        om_eff = RotationNumber.from_float(k * float(omega))
    phi = 2.0 * np.pi * float(om_eff)
    L1 = l1_matrix(psi)
    L2 = l2_matrix(psi)
    c, s = np.cos(phi), np.sin(phi)
    M = np.block([[L1 + c * L2, -s * L2],
                  [s * L2, L1 + c * L2]])
    return LOmegaOperator(base_psi=psi, omega=om_eff, matrix=M)


def rotation_matrix(n_cheb, gamma):
    """R_gamma = rot(2 pi gamma) x Identity in the rotated pair layout."""
    beta = 2.0 * np.pi * float(gamma)
    eye = np.eye(n_cheb)
    c, s = np.cos(beta), np.sin(beta)
    return np.block([[c * eye, -s * eye], [s * eye, c * eye]])


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    pairing_ok: bool
    violations: list
    tol: float = TOL_SPEC


def spectrum_L_omega(op):
    """Eigenvalues with the conjugate/even-multiplicity pairing check.

    The circle action forces every eigenvalue above the floor to come
    either as a complex-conjugate pair or as a real value of even
    multiplicity; violations are reported, not raised.
    """
    lam = np.linalg.eigvals(op.matrix)
    order = np.argsort(-np.abs(lam))
    lam = lam[order]
    big = [i for i in range(lam.size) if abs(lam[i]) > TOL_SPEC]
    unused = set(big)
    violations = []
    for i in big:
        if i not in unused:
            continue
        unused.remove(i)
        best_j, best_d = None, np.inf
        for j in unused:
            d = abs(lam[i] - np.conj(lam[j]))
            if d < best_d:
                best_j, best_d = j, d
        if best_j is not None and best_d <= 1e-8 * max(1.0, abs(lam[i])):
            unused.remove(best_j)
        else:
            violations.append(lam[i])
    radius = float(np.abs(lam[0])) if lam.size else 0.0
    return SpectrumReport(eigenvalues=lam, spectral_radius=radius,
                          pairing_ok=not violations, violations=violations)


# -------------------------------------------------- rotation-symmetry section

def _pair_at_section(pair, theta0, x0):
    """(value, theta-slope) of u cos + v sin at (theta0, x0)."""
    A = float(np.real(pair.u(x0)))
    B = float(np.real(pair.v(x0)))
    c, s = np.cos(2 * np.pi * theta0), np.sin(2 * np.pi * theta0)
    value = A * c + B * s
    slope = 2 * np.pi * (-A * s + B * c)
    return value, slope, A, B


def gamma_normalize(v, section=SectionConfig()):
    """Unique shift gamma0 putting the mode-1 part on the section.

    The section is f(theta0, x0) = 0 with positive theta-derivative. Both
    roots of the tangency equation are evaluated directly and the one with
    positive slope wins. Returns (gamma0, t_gamma0 v).
    """
    pair = project_pik(v, 1)
    scale = pair.coeff_norm()
    if scale <= TOL_PI1:
        raise NoSectionError("mode-1 component vanishes")
    L = v.domain.half_width
    theta0 = section.theta0

    x0 = None
    for cand in (section.x0,) + tuple(section.degenerate_scan):
        if abs(cand) > L:
            raise DomainError(f"section point x0 = {cand} outside the interval")
        A = float(np.real(pair.u(cand)))
        B = float(np.real(pair.v(cand)))
        if np.hypot(A, B) > 1e-9 * scale:
            x0 = cand
            break
    if x0 is None:
        raise DegeneratePointError(
            "mode-1 pair vanishes at every section candidate x0")

    A = float(np.real(pair.u(x0)))
    B = float(np.real(pair.v(x0)))
    chi = np.arctan2(B, A)
    g_a = (chi / (2 * np.pi) - 0.25 - theta0) % 1.0
    g_b = (g_a + 0.5) % 1.0

    best = None
    for g in (g_a, g_b):
        shifted = pair.rotate(2 * np.pi * g)
        val, slope, _, _ = _pair_at_section(shifted, theta0, x0)
        if slope > 0:
            best = (g, val, slope)
            break
    if best is None:
        raise DegeneratePointError("no root satisfies the slope condition")
    gamma0 = best[0]
    if gamma0 > 1.0 - 1e-12 or gamma0 < 1e-12:
        gamma0 = 0.0
    return gamma0, shift_tgamma(v, gamma0)


def apply_L_prime(psi, omega, v, section=SectionConfig()):
    """L'_omega(v) = t_gamma(L_omega v): apply, then land on the section."""
    op = build_L_omega(psi, omega, 1)
    w = op.apply(v)
    if w.coeff_norm() <= 1e-14 * max(1.0, v.coeff_norm()):
        raise DegenerateScalingError("L_omega image is numerically zero")
    emb = QPFn.from_pair(v.u.domain, 1, w.u, w.v)
    _, normalized = gamma_normalize(emb, section)
    return project_pik(normalized, 1)
