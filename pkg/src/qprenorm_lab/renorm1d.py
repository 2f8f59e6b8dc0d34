"""One-dimensional doubling renormalization.

The operator is R(psi)(x) = psi(psi(a x)) / a with a = psi(1), acting on even
analytic maps normalized by psi(0) = 1. This module solves for the fixed
point Phi, extracts the unstable eigenvalue (the universal parameter-scaling
constant) and eigenvector, checks the complex-disc containment used by the
hyperbolicity hypothesis, and walks the invariant manifolds: superstable
parameter cascades s_n, their accumulation alpha*, and the unstable-manifold
intersections f*_j with the 2^j-superstable sets.

All derivative matrices are assembled analytically; finite differences stay
in the tests as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy.optimize import brentq

from .errors import (DegenerateScalingError, DomainError, InconsistencyError,
                     MeshError, NoConvergenceError, SearchError)
from .funcspace import (AnalyticFn, DomainConfig, QPFn, cheb_nodes,
                        _cheb_machinery, sup_norm)

TOL_A = 1e-8


@dataclass
class UnimodalMap:
    """Even analytic map with psi(0) = 1; a = psi(1) is cached."""

    psi: AnalyticFn
    a: float = None

    def __post_init__(self):
        if self.a is None:
            self.a = float(np.real(self.psi(1.0)))

    @property
    def domain(self):
        return self.psi.domain

    def __call__(self, x):
        return self.psi(x)

    @classmethod
    def from_callable(cls, domain, fn, validate=True):
        m = cls(AnalyticFn.from_callable(domain, fn))
        if validate:
            m.validate()
        return m

    def validate(self, tol_norm=1e-9):
        """Membership checks for the normalized unimodal class.

        psi(0) = 1 and x psi'(x) < 0 are hard errors; whether psi maps the
        interval into itself is recorded (in_domain_R reports it).
        """
        v0 = float(np.real(self.psi(0.0)))
        if abs(v0 - 1.0) > tol_norm:
            raise DomainError(f"psi(0) = {v0}, not 1")
        L = self.domain.half_width
        x = np.linspace(0.05 * L, L, 64)
        dp = np.real(self.psi.deriv()(x))
        if np.any(dp >= 0):
            raise DomainError("psi is not decreasing on the positive half")
        return self

    def maps_interval_into_itself(self):
        L = self.domain.half_width
        x = np.linspace(-L, L, 257)
        vals = np.real(self.psi(x))
        return bool(np.all(np.abs(vals) <= L * (1 + 1e-13)))

    def embed(self):
        return QPFn.from_analytic(self.psi)


@dataclass
class FixedPointData:
    phi: UnimodalMap
    a_star: float
    delta_feig: float
    e_unstable: AnalyticFn
    newton_residual: float
    eig_moduli: np.ndarray = None
    spectral_gap: float = None


@dataclass
class FamilySpec:
    """Two-parameter family c(alpha, eps) in normalized coordinates.

    evaluator returns the cylinder map; d_alpha / d_eps are the parameter
    derivatives at eps = 0 (finite differences fill in when absent). The raw
    fields describe an un-normalized one-dimensional representative used for
    the superstable-parameter search, where the normalizing conjugacy may
    degenerate.
    """

    name: str
    evaluator: Callable[[float, float], QPFn]
    param_box: tuple = ((2.9, 3.62), (0.0, 1e-2))
    analytic_params: bool = True
    d_alpha: Optional[Callable[[float], AnalyticFn]] = None
    d_eps: Optional[Callable[[float], QPFn]] = None
    raw_map: Optional[Callable[[float, float], float]] = None
    raw_dmap_dx: Optional[Callable[[float, float], float]] = None
    raw_dmap_dalpha: Optional[Callable[[float, float], float]] = None
    x_crit: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def psi0(self, alpha):
        """The uncoupled slice c(alpha, 0) as a 1-D map."""
        from .funcspace import project_p0
        g = self.evaluator(alpha, 0.0)
        return UnimodalMap(project_p0(g))

    def du_dalpha(self, alpha):
        if self.d_alpha is not None:
            return self.d_alpha(alpha)
        h = 1e-6
        from .funcspace import project_p0
        up = project_p0(self.evaluator(alpha + h, 0.0))
        dn = project_p0(self.evaluator(alpha - h, 0.0))
        return (up - dn) * (0.5 / h)

    def dv_deps(self, alpha):
        if self.d_eps is not None:
            return self.d_eps(alpha)
        h = 1e-6
        up = self.evaluator(alpha, h)
        dn = self.evaluator(alpha, -h)
        return (up - dn) * (0.5 / h)


# ----------------------------------------------------- operator and matrices

def in_domain_R(psi):
    """Domain check for the doubling operator, with per-clause margins.

    Clauses: a < 0; 1 > b' > -a'; psi(b') < -a', where a' = (1+delta) a and
    b' = psi(a'). Returns a report object that is truthy iff all hold.
    """
    dom = psi.domain
    L = dom.half_width
    a = psi.a
    a_prime = L * a
    report = {"a": a, "a_prime": a_prime, "b_prime": None, "psi_b_prime": None}
    clauses = {}
    clauses["a_negative"] = a < 0
    range_ok = abs(a_prime) <= L * (1 + 1e-13)
    b_prime = float(np.real(psi.psi(a_prime)))
    report["b_prime"] = b_prime
    clauses["b_prime_bracket"] = bool(1.0 > b_prime > -a_prime)
    range_ok = range_ok and abs(b_prime) <= L * (1 + 1e-13)
    psi_b = float(np.real(psi.psi(b_prime)))
    report["psi_b_prime"] = psi_b
    clauses["image_below"] = bool(psi_b < -a_prime)
    clauses["range_ok"] = bool(range_ok)
    clauses["maps_into_interval"] = psi.maps_interval_into_itself()
    ok = all(clauses.values())
    failing = [k for k, v in clauses.items() if not v]
    return DomainCheck(ok=ok, clauses=clauses, failing=failing, **report)


@dataclass
class DomainCheck:
    ok: bool
    a: float
    a_prime: float
    b_prime: float
    psi_b_prime: float
    clauses: dict
    failing: list

    def __bool__(self):
        return self.ok


def renormalize_1d(psi, check_domain=True):
    """R(psi) = psi o psi(a x) / a, re-expanded on the Chebyshev grid."""
    a = psi.a
    if abs(a) < TOL_A:
        raise DegenerateScalingError(f"a = psi(1) = {a:.3e} too small")
    if check_domain:
        chk = in_domain_R(psi)
        if not chk:
            raise DomainError(f"psi outside the operator domain: {chk.failing}")
    x = cheb_nodes(psi.domain)
    vals = np.real(psi.psi(np.real(psi.psi(a * x)))) / a
    return UnimodalMap(AnalyticFn.from_values(psi.domain, vals))


def l1_matrix(psi):
    """Matrix of g -> psi'(psi(a x)) g(a x) / a on Chebyshev coefficients."""
    dom = psi.domain
    a = psi.a
    n = dom.n_cheb
    x = cheb_nodes(dom)
    L = dom.half_width
    _, _, A = _cheb_machinery(n)
    E = _cheb.chebvander(a * x / L, n - 1)           # T_j(a x_i)
    w = np.real(psi.psi.deriv()(np.real(psi.psi(a * x)))) / a
    return A @ (w[:, None] * E)


def l2_matrix(psi):
    """Matrix of g -> g(psi(a x)) / a on Chebyshev coefficients."""
    dom = psi.domain
    a = psi.a
    n = dom.n_cheb
    x = cheb_nodes(dom)
    L = dom.half_width
    _, _, A = _cheb_machinery(n)
    inner = np.real(psi.psi(a * x))
    E = _cheb.chebvander(inner / L, n - 1)
    return A @ (E / a)


def dr_matrix(psi):
    """Full derivative of the doubling operator at psi.

    DR(psi) u = L1 u + L2 u + u(1) w with
    w(x) = (x (R psi)'(x) - (R psi)(x)) / a; the last term tracks the
    variation of the rescaling constant a = psi(1).
    """
    dom = psi.domain
    a = psi.a
    if abs(a) < TOL_A:
        raise DegenerateScalingError("derivative assembly at degenerate a")
    n = dom.n_cheb
    x = cheb_nodes(dom)
    L = dom.half_width
    _, _, A = _cheb_machinery(n)

    rpsi = renormalize_1d(psi, check_domain=False)
    w_vals = (x * np.real(rpsi.psi.deriv()(x)) - np.real(rpsi.psi(x))) / a
    w_coeffs = A @ w_vals
    eval_at_1 = _cheb.chebvander(np.array([1.0 / L]), n - 1)[0]
    return l1_matrix(psi) + l2_matrix(psi) + np.outer(w_coeffs, eval_at_1)


# ------------------------------------------------------------- fixed point

def _even_tangent_basis(n):
    """Columns span {u even, u(0) = 0} in coefficient space.

    phi_m = T_{2m} - T_{2m}(0) T_0 for m = 1..M-1, M = number of even
    degrees below n.
    """
    m_count = (n + 1) // 2
    B = np.zeros((n, m_count - 1))
    for m in range(1, m_count):
        B[2 * m, m - 1] = 1.0
        B[0, m - 1] = -((-1.0) ** m)
    return B


def solve_fixed_point(initial, n_cheb=None):
    """Newton solve of R(psi) = psi on the even, psi(0)=1 slice.

    Returns the fixed point together with the spectrum data of its
    derivative restricted to the invariant tangent space {even, u(0)=0}.
    """
    dom = initial.domain
    if n_cheb is not None and n_cheb != dom.n_cheb:
        dom = dom.replace(n_cheb=n_cheb)
    n = dom.n_cheb
    psi_fn = AnalyticFn.from_callable(dom, lambda x: np.real(initial.psi(x)))
    c = np.real(psi_fn.coeffs).copy()
    c[1::2] = 0.0
    # pin psi(0) = 1 exactly
    val0 = float(_cheb.chebval(0.0, c))
    c[0] += 1.0 - val0

    B = _even_tangent_basis(n)
    residual = np.inf
    for _ in range(50):
        psi = UnimodalMap(AnalyticFn(c.copy(), dom))
        rpsi = renormalize_1d(psi, check_domain=False)
        R = np.real(rpsi.psi.coeffs) - c
        residual = sup_norm(AnalyticFn(R, dom))
        if residual <= 1e-12:
            break
        J = dr_matrix(psi) - np.eye(n)
        db, *_ = np.linalg.lstsq(J @ B, -R, rcond=None)
        if not np.all(np.isfinite(db)):
            raise NoConvergenceError("Newton step not finite", residual)
        c = c + B @ db
        c[1::2] = 0.0
    if residual > 1e-10:
        raise NoConvergenceError("fixed-point Newton stalled", residual)

    phi = UnimodalMap(AnalyticFn(c, dom))
    DR = dr_matrix(phi)
    M_red, *_ = np.linalg.lstsq(B, DR @ B, rcond=None)
    lam, vec = np.linalg.eig(M_red)
    moduli = np.sort(np.abs(lam))[::-1]
    i_top = int(np.argmax(np.abs(lam)))
    delta = lam[i_top]
    if abs(delta.imag) > 1e-8 or delta.real <= 1.0:
        raise NoConvergenceError(f"unstable eigenvalue looks wrong: {delta}")
    e_coeffs = np.real(B @ vec[:, i_top])
    e_coeffs /= np.linalg.norm(e_coeffs)
    e = AnalyticFn(e_coeffs, dom)
    if float(np.real(e(1.0))) < 0:
        e = -e
    return FixedPointData(
        phi=phi, a_star=phi.a, delta_feig=float(delta.real), e_unstable=e,
        newton_residual=float(residual), eig_moduli=moduli,
        spectral_gap=float(moduli[0] - moduli[1]))


@lru_cache(maxsize=8)
def feigenbaum_fixed_point(domain=DomainConfig()):
    """Cached fixed point for a domain, seeded from the quadratic family."""
    seed = UnimodalMap.from_callable(domain, lambda x: 1.0 - 1.4 * x * x)
    return solve_fixed_point(seed)


# ---------------------------------------------------------------- H0 check

@dataclass
class H0Report:
    margin_a_disc: float
    margin_image_disc: float
    contained: bool
    n_boundary: int


def check_H0(fp, n_boundary=512):
    """Sampled containment of a*W and Phi(a*W) in the disc W.

    Positive margins mean the sampled image stays strictly inside; this is
    a numerical check, not a rigorous bound.
    """
    dom = fp.phi.domain
    c, r = dom.w_center, dom.w_radius
    z = c + r * np.exp(2j * np.pi * np.arange(n_boundary) / n_boundary)
    a = fp.a_star
    m1 = r - float(np.max(np.abs(a * z - c)))
    img = fp.phi.psi(a * z)
    m2 = r - float(np.max(np.abs(img - c)))
    return H0Report(margin_a_disc=m1, margin_image_disc=m2,
                    contained=bool(m1 > 0 and m2 > 0), n_boundary=n_boundary)


# --------------------------------------------------- superstable parameters

def _orbit_with_deriv(family, alpha, steps):
    """(f^steps(x_c) - x_c, d/dalpha of it) for the raw or normalized map."""
    if family.raw_map is not None:
        x = family.x_crit
        P = 0.0
        for _ in range(steps):
            P = family.raw_dmap_dalpha(alpha, x) + family.raw_dmap_dx(alpha, x) * P
            x = family.raw_map(alpha, x)
            if not np.isfinite(x) or abs(x) > 1e6:
                return np.nan, np.nan
        return x - family.x_crit, P
    psi = family.psi0(alpha)
    dpsi = psi.psi.deriv()
    da = family.du_dalpha(alpha)
    L = psi.domain.half_width
    x, P = 0.0, 0.0
    for _ in range(steps):
        P = float(np.real(da(x))) + float(np.real(dpsi(x))) * P
        x = float(np.real(psi.psi(x)))
        if abs(x) > L:
            return np.nan, np.nan
    return x, P


def _orbit_value(family, alpha, steps):
    return _orbit_with_deriv(family, alpha, steps)[0]


def superstable_params(family, n_max):
    """Parameters s_0 < s_1 < ... where the critical orbit has period 2^n.

    Root search on f^{2^n}(x_c) = x_c: bracket scan for the first two
    levels, then ratio-guided Newton with a bracket fallback. The raw family
    parametrization is used when available.
    """
    if n_max > 14:
        raise ValueError("n_max above 14 is outside the supported range")
    cached = family._cache.get("superstable")
    if cached is not None and len(cached) > n_max:
        return np.array(cached[:n_max + 1])
    (a_lo, a_hi), _ = family.param_box
    s = []

    # n = 0: first superstable fixed point in the box
    grid = np.linspace(a_lo, a_hi, 256)
    vals = np.array([_orbit_value(family, g, 1) for g in grid])
    idx = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if idx.size == 0:
        raise SearchError("no superstable fixed point in the parameter box (n=0)")
    s.append(brentq(lambda t: _orbit_value(family, t, 1),
                    grid[idx[0]], grid[idx[0] + 1], xtol=1e-14))
    if n_max == 0:
        return np.array(s)

    # n = 1: scan upward from s_0, skipping its neighborhood
    lo = s[0] + 0.02 * (a_hi - s[0])
    grid = np.linspace(lo, a_hi, 256)
    vals = np.array([_orbit_value(family, g, 2) for g in grid])
    idx = np.where(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if idx.size == 0:
        raise SearchError("no period-2 superstable parameter found (n=1)")
    s.append(brentq(lambda t: _orbit_value(family, t, 2),
                    grid[idx[0]], grid[idx[0] + 1], xtol=1e-14))

    delta_est = 4.67
    for n in range(2, n_max + 1):
        gap_prev = s[-1] - s[-2]
        pred = gap_prev / delta_est
        guess = s[-1] + pred
        steps = 2 ** n
        half = 2 ** (n - 1)
        lo_b, hi_b = s[-1] + 0.05 * pred, s[-1] + 3.0 * pred

        alpha = guess
        ok = False
        for _ in range(40):
            h, P = _orbit_with_deriv(family, alpha, steps)
            if not np.isfinite(h) or P == 0:
                break
            step = h / P
            alpha_new = alpha - step
            if not (lo_b < alpha_new < hi_b):
                break
            if abs(step) < 1e-14 * max(1.0, abs(alpha_new)):
                alpha = alpha_new
                ok = True
                break
            alpha = alpha_new
        if ok:
            # minimal-period guard: the half orbit must miss the critical point
            half_res = abs(_orbit_value(family, alpha, half))
            if half_res < max(1e-8, 0.3 ** n):
                ok = False
        if not ok:
            scan = np.linspace(s[-1] + 0.2 * pred, s[-1] + 2.2 * pred, 64)
            vals = np.array([_orbit_value(family, g, steps) for g in scan])
            found = None
            for i in range(len(scan) - 1):
                if not (np.isfinite(vals[i]) and np.isfinite(vals[i + 1])):
                    continue
                if np.sign(vals[i]) * np.sign(vals[i + 1]) < 0:
                    hr = abs(_orbit_value(family, 0.5 * (scan[i] + scan[i + 1]), half))
                    if hr > max(1e-8, 0.3 ** n):
                        found = (scan[i], scan[i + 1])
                        break
            if found is None:
                raise SearchError(f"superstable bracket not found at n={n}")
            alpha = brentq(lambda t: _orbit_value(family, t, steps),
                           *found, xtol=1e-14)
        s.append(alpha)
        if n >= 2:
            delta_est = (s[-2] - s[-3]) / (s[-1] - s[-2])
    family._cache["superstable"] = list(s)
    return np.array(s)


# ---------------------------------------------------------- stable manifold

def _classify_side(family, alpha, k_max=60):
    """Which side of the accumulation: 'below' or 'above', by escape type."""
    psi = family.psi0(alpha)
    for _ in range(k_max):
        chk = in_domain_R(psi)
        if not chk:
            return "below" if chk.a > 0 else "above"
        try:
            psi = renormalize_1d(psi, check_domain=False)
        except DegenerateScalingError:
            return "above"
        if not np.all(np.isfinite(np.real(psi.psi.coeffs))):
            return "above"
    raise NoConvergenceError("no escape within the iteration budget")


def stable_manifold_param(family, n_fit=12):
    """Accumulation parameter alpha* = lim s_n.

    Geometric extrapolation of the cascade, cross-checked by a bisection
    that classifies renormalization escape; the two must agree to 1e-8.
    """
    cached = family._cache.get("alpha_star")
    if cached is not None:
        return cached
    s = superstable_params(family, n_fit)
    d1 = s[-2] - s[-3]
    d2 = s[-1] - s[-2]
    rho = d2 / d1
    alpha_extrap = s[-1] + d2 * rho / (1.0 - rho)

    lo, hi = s[-1], family.param_box[0][1]
    if _classify_side(family, lo) != "below":
        raise InconsistencyError("classifier disagrees with the cascade at s_n")
    if _classify_side(family, hi) != "above":
        hi = lo + 2 * (lo - s[-2]) * 10
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _classify_side(family, mid) == "below":
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    alpha_bisect = 0.5 * (lo + hi)
    if abs(alpha_bisect - alpha_extrap) > 1e-8:
        raise InconsistencyError(
            f"extrapolation {alpha_extrap!r} vs bisection {alpha_bisect!r}")
    family._cache["alpha_star"] = alpha_extrap
    return alpha_extrap


# -------------------------------------------------------- unstable manifold

def _crit_orbit_residual(psi, j):
    """psi^(2^j)(0); NaN when the orbit leaves the interval."""
    L = psi.domain.half_width
    x = 0.0
    for _ in range(2 ** j):
        x = float(np.real(psi.psi(x)))
        if abs(x) > L:
            return np.nan
    return x


def unstable_manifold_points(fp, j_max):
    """f*_j: unstable-manifold maps whose critical orbit is 2^j-superstable.

    The manifold is seeded to first order as Phi + t e and grown by
    renormalizing; for each j the crossing of psi^(2^j)(0) = 0 is located
    in the (iteration count, mesh parameter) ladder and refined by brentq.
    f*_1 satisfies psi(1) = 0.

    The seed size shrinks with j: f*_j sits at manifold distance about
    3.6 delta^(1-j) from Phi, and keeping the growth to a few doubling
    steps bounds both the linearization error of the seed and the rounding
    amplification along the unstable direction.
    """
    phi = fp.phi
    e = fp.e_unstable
    dom = phi.domain
    delta = fp.delta_feig
    taus = np.geomspace(1.0, delta, 17)

    def map_at(tau, k, t0):
        m = UnimodalMap(AnalyticFn(
            np.real(phi.psi.coeffs) + tau * t0 * np.real(e.coeffs), dom))
        for _ in range(k):
            m = renormalize_1d(m, check_domain=False)
        return m

    out = []
    for j in range(1, j_max + 1):
        s_est = 3.6 * delta ** (1 - j)
        t0 = float(np.clip(s_est / delta ** 4, 1e-12, 1e-5))
        located = None
        for k in range(0, 14):
            vals = np.array(
                [_crit_orbit_residual(map_at(t, k, t0), j) for t in taus])
            for i in range(len(taus) - 1):
                if not (np.isfinite(vals[i]) and np.isfinite(vals[i + 1])):
                    continue
                if np.sign(vals[i]) * np.sign(vals[i + 1]) < 0:
                    located = (k, taus[i], taus[i + 1])
                    break
            if located:
                break
        if not located:
            raise MeshError(f"no Sigma_{j} crossing within the growth budget")
        k, t_lo, t_hi = located
        tau_star = brentq(lambda t: _crit_orbit_residual(map_at(t, k, t0), j),
                          t_lo, t_hi, xtol=1e-15, rtol=8.9e-16)
        out.append(map_at(tau_star, k, t0))
    return out


@lru_cache(maxsize=8)
def unstable_points_cached(domain, j_max):
    fp = feigenbaum_fixed_point(domain)
    return tuple(unstable_manifold_points(fp, j_max))
