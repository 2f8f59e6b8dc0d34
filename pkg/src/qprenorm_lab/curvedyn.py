"""Direct dynamics of quasi-periodically forced unimodal maps.

A forced map f(theta, x) is iterated over the skew rotation theta -> theta
+ omega. The objects here are the 2^n-periodic invariant curves solved on a
uniform theta-grid, the two-step fiber-derivative products G1 (and their
uncoupled scalar version), the first derivative DG1 at a superstable
uncoupled map obtained by linearizing the invariance equation, grid extrema
with trigonometric refinement, and two independent routes to the
reducibility-loss slope:

  * slope_formula: the renormalization chain
    alpha'_n = -m(DG1(omega_{n-1}, f_{n-1}) v_{n-1}) / DG1_hat(f_{n-1}) u_{n-1}
    propagated either along the exact orbit R^k(c(s_n, 0)) or along the
    fixed point with an f*_j tail;
  * locate_reducibility_loss: direct bisection in alpha of the criterion
    "extremum over theta of the period derivative product hits zero".

The two must agree within a few percent at small n; the tests enforce it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import brentq

from .errors import (BasinError, ConsistencyError, DegeneratePointError,
                     DegenerateScalingError, DomainError, EscapeError,
                     ExistenceError, FormulaMismatchError, NoConvergenceError,
                     SearchError)
from .funcspace import AnalyticFn, DomainConfig, PairFn, QPFn, project_p0, project_pik
from .qprenorm import (RotationNumber, SectionConfig, apply_DT, gamma_normalize)
from .renorm1d import (FamilySpec, UnimodalMap, dr_matrix,
                       feigenbaum_fixed_point, renormalize_1d,
                       stable_manifold_param, superstable_params,
                       unstable_manifold_points)

TOL_CURVE = 1e-11
M_GRID = 512
LOG_FLOOR = -1e3


# ------------------------------------------------------------ fiber orbits

def iterate_fiber(f, omega, n, theta, x):
    """f^n(theta, x) along the skew rotation; raises on interval escape."""
    L = f.domain.half_width
    w = float(omega)
    x = float(x)
    for j in range(n):
        x = float(f.eval(theta + j * w, x))
        if not np.isfinite(x) or abs(x) > L * (1 + 1e-13):
            raise EscapeError(f"orbit left the interval at step {j + 1}", j + 1)
    return x


def _orbit_grid(f, omega, steps, thetas, X):
    """Vectorized f^steps over the grid; returns final X and the derivative
    product and per-step log-derivative sum (with the superstable floor)."""
    L = f.domain.half_width
    w = float(omega)
    fx = f.dx()
    X = np.array(X, dtype=float)
    logs = np.zeros_like(X)
    prod = np.ones_like(X)
    for j in range(steps):
        th = thetas + j * w
        d = fx.eval(th, X)
        prod = prod * d
        with np.errstate(divide="ignore"):
            logs = logs + np.maximum(np.log(np.abs(d)), LOG_FLOOR)
        X = f.eval(th, X)
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > L * (1 + 1e-13):
            raise EscapeError(f"grid orbit left the interval at step {j + 1}",
                              j + 1)
    return X, prod, logs


# --------------------------------------------------------- invariant curves

@dataclass
class InvariantCurve:
    period_log2: int
    samples: np.ndarray
    omega: RotationNumber
    lyapunov: float
    residual: float

    @property
    def M(self):
        return self.samples.size

    @property
    def thetas(self):
        return np.arange(self.M) / self.M


@dataclass
class DerivativeProduct:
    values: np.ndarray
    period_log2: int = 1

    def geometric_mean(self):
        with np.errstate(divide="ignore"):
            return float(np.exp(np.mean(
                np.maximum(np.log(np.abs(self.values)), LOG_FLOOR))))


def _shift_phases(M, s):
    k = np.arange(M // 2 + 1)
    ph = np.exp(2j * np.pi * k * s)
    ph[-1] = np.cos(np.pi * M * s)   # Nyquist stays real on the grid
    return ph


def _shift_samples(vals, s):
    """Band-limited evaluation of the grid function at theta + s."""
    M = vals.shape[0]
    spec = np.fft.rfft(vals, axis=0)
    ph = _shift_phases(M, s)
    if vals.ndim > 1:
        ph = ph[:, None]
    return np.fft.irfft(spec * ph, M, axis=0)


def _shift_matrix(M, s):
    return _shift_samples(np.eye(M), s)


def solve_invariant_curve(f, omega, n, guess=None, M=M_GRID):
    """Solve x(theta + 2^n omega) = f^(2^n)(theta, x(theta)) on the grid.

    Damped fixed-point iteration pulls the guess into the attracting curve,
    then Newton (dense, with the spectral shift matrix) sharpens it to
    tol_curve. The Lyapunov exponent is the per-step average of log |D_x f|
    along the solved curve, floored in log-space at the superstable samples.
    """
    steps = 2 ** n
    thetas = np.arange(M) / M
    s_exact = RotationNumber((omega.num << n) % (1 << 128)) if isinstance(
        omega, RotationNumber) else None
    s = float(s_exact) if s_exact is not None else (2 ** n * float(omega)) % 1.0

    if guess is None:
        psi = project_p0(f)
        x = 0.0
        L = f.domain.half_width
        for _ in range(400):
            x = float(psi(x))
            if abs(x) > L:
                raise BasinError("default guess escaped; supply one")
        guess = np.full(M, x)
    X = np.array(guess, dtype=float)

    def forward(X):
        return _orbit_grid(f, omega, steps, thetas, X)

    residual = np.inf
    try:
        for it in range(300):
            FX, prod, _ = forward(X)
            target = _shift_samples(FX, -s)
            residual = float(np.max(np.abs(target - X)))
            if residual < 1e-8:
                break
            lam = 0.6 if it < 50 else 1.0
            X = X + lam * (target - X)
    except EscapeError as e:
        raise BasinError(f"fixed-point stage escaped: {e}")

    S = _shift_matrix(M, s)
    try:
        for _ in range(20):
            FX, prod, logs = forward(X)
            G = FX - S @ X
            residual = float(np.max(np.abs(G)))
            if residual <= 1e-13:
                break
            J = np.diag(prod) - S
            X = X + lu_solve(lu_factor(J), -G)
    except EscapeError as e:
        raise BasinError(f"Newton stage escaped: {e}")

    if residual > TOL_CURVE:
        raise BasinError(f"curve residual {residual:.3e} above tolerance")
    FX, prod, logs = forward(X)
    lyap = float(np.mean(logs)) / steps
    return InvariantCurve(period_log2=n, samples=X, omega=omega,
                          lyapunov=lyap, residual=residual)


def fiber_product(f, omega, curve):
    """Product of the 2^n fiber derivatives along the curve, per theta."""
    _, prod, _ = _orbit_grid(f, omega, 2 ** curve.period_log2,
                             curve.thetas, curve.samples)
    return prod


def G1(f, omega, curve):
    """Two-step derivative product D_x f(theta+omega, f(theta, x)) D_x f."""
    if curve.period_log2 != 1:
        raise ConsistencyError("G1 takes a period-2 curve")
    if isinstance(omega, RotationNumber) and isinstance(curve.omega,
                                                        RotationNumber):
        if omega.num != curve.omega.num:
            raise ConsistencyError("curve was solved at a different omega")
    vals = fiber_product(f, omega, curve)
    return DerivativeProduct(values=vals, period_log2=1)


# ----------------------------------------------------- uncoupled 2-cycles

def G1_hat(psi, tol=1e-12):
    """Multiplier psi'(x1) psi'(x2) of the attracting real 2-cycle."""
    L = psi.domain.half_width
    x = 0.0
    for _ in range(2000):
        x = float(np.real(psi.psi(x)))
        if abs(x) > L:
            raise ExistenceError("critical orbit escapes; no attracting 2-cycle")
    # Newton polish on psi(psi(x)) - x
    dpsi = psi.psi.deriv()
    for _ in range(60):
        fx = float(np.real(psi.psi(x)))
        ffx = float(np.real(psi.psi(fx)))
        h = ffx - x
        dh = float(np.real(dpsi(fx))) * float(np.real(dpsi(x))) - 1.0
        if abs(dh) < 1e-14:
            break
        x_new = x - h / dh
        if abs(x_new) > L:
            break
        if abs(x_new - x) < 1e-15:
            x = x_new
            break
        x = x_new
    fx = float(np.real(psi.psi(x)))
    if abs(float(np.real(psi.psi(fx))) - x) > tol * 100 or abs(fx - x) < 1e-8:
        raise ExistenceError("no real 2-periodic orbit found")
    return float(np.real(dpsi(x))) * float(np.real(dpsi(fx)))


def DG1_hat(psi, u):
    """Derivative of the 2-cycle multiplier at psi in Sigma_1, direction u."""
    _require_sigma1(psi)
    c1 = float(np.real(psi.psi.deriv()(1.0)))
    c2 = _second_deriv_at_zero(psi)
    u0 = float(np.real(u(0.0)))
    u1 = float(np.real(u(1.0)))
    du0 = float(np.real(u.deriv()(0.0)))
    return c1 * (du0 + c2 * (c1 * u0 + u1))


def _require_sigma1(psi, tol=1e-9):
    r = abs(float(np.real(psi.psi(1.0))))
    if r > tol:
        raise DomainError(f"psi(1) = {r:.3e}: not on Sigma_1")
    c2 = _second_deriv_at_zero(psi)
    if abs(c2) < 1e-8:
        raise DegeneratePointError("psi''(0) vanishes; formula degenerate")


def _second_deriv_at_zero(psi):
    return float(np.real(psi.psi.deriv().deriv()(0.0)))


def DG1(psi, omega, v, M=M_GRID, cross_check=True):
    """First derivative of G1 at the uncoupled superstable map, direction v.

    Linearizing the invariance equation around the critical 2-cycle
    0 -> 1 -> 0 gives the curve response
        dx(theta) = psi'(1) v(theta - 2 omega, 0) + v(theta - omega, 1)
    and the product response
        DG1 v(theta) = psi'(1) [d_x v(theta, 0) + psi''(0) dx(theta)].
    A central finite difference of G1 at psi + h v guards the derivation.
    """
    _require_sigma1(psi)
    w = float(omega)
    thetas = np.arange(M) / M
    c1 = float(np.real(psi.psi.deriv()(1.0)))
    c2 = _second_deriv_at_zero(psi)
    zeros = np.zeros(M)
    dx = c1 * v.eval(thetas - 2 * w, zeros) + v.eval(thetas - w, zeros + 1.0)
    out = c1 * (v.dx().eval(thetas, zeros) + c2 * dx)

    if cross_check:
        h = 1e-5
        base = psi.embed()
        g = []
        for sgn in (1.0, -1.0):
            fpm = base + v * (sgn * h)
            curve = solve_invariant_curve(fpm, omega, 1, guess=np.zeros(M), M=M)
            g.append(G1(fpm, omega, curve).values)
        fd = (g[0] - g[1]) / (2 * h)
        rel = float(np.max(np.abs(fd - out))) / max(1.0, float(np.max(np.abs(out))))
        if rel > 1e-6:
            raise FormulaMismatchError(
                f"analytic DG1 vs finite difference disagree: rel {rel:.3e}")
    return out


def functional_K(omega, psi, v, M=M_GRID):
    """K(omega, f, v) = m(DG1(omega, f) v)."""
    return extremum_m(DG1(psi, omega, v, M=M, cross_check=False)).value


def functional_L(psi, u):
    """L(f, u) = DG1_hat(f) u."""
    return DG1_hat(psi, u)


# ------------------------------------------------------------------ extrema

@dataclass
class ExtremumResult:
    value: float
    theta: float
    degenerate: bool

    def __float__(self):
        return self.value


def _trig_eval(spec_half, M, theta, deriv=0):
    k = np.arange(spec_half.size)
    ph = np.exp(2j * np.pi * k * theta)
    fac = (2j * np.pi * k) ** deriv
    weights = np.full(spec_half.size, 2.0)
    weights[0] = 1.0
    if M % 2 == 0:
        weights[-1] = 1.0
    return float(np.real(np.sum(weights * fac * spec_half * ph))) / M


def extremum_m(vals):
    """min over the circle: grid argmin, three-point quadratic step, then
    Newton on the trigonometric interpolant. Degenerate (flat) minima are
    flagged and returned at grid accuracy."""
    vals = np.asarray(vals, dtype=float)
    M = vals.size
    i = int(np.argmin(vals))
    gm = vals[i]
    gl, gr = vals[(i - 1) % M], vals[(i + 1) % M]
    scale = max(1.0, float(np.max(np.abs(vals))))
    d1 = 0.5 * (gr - gl)
    d2 = gr - 2 * gm + gl
    if abs(d2) <= 1e-10 * scale:
        return ExtremumResult(value=float(gm), theta=i / M, degenerate=True)
    off = float(np.clip(-d1 / d2, -1.0, 1.0))
    theta = (i + off) / M
    value = float(gm - d1 * d1 / (2 * d2))

    # The quadratic step can overshoot below the true minimum; Newton on the
    # trigonometric interpolant is the authoritative refinement and the
    # quadratic value is only a fallback when that iteration goes bad.
    spec_half = np.fft.rfft(vals)
    th = theta
    ok = True
    for _ in range(10):
        g1 = _trig_eval(spec_half, M, th, deriv=1)
        g2 = _trig_eval(spec_half, M, th, deriv=2)
        if g2 <= 0 or not np.isfinite(g2):
            ok = False
            break
        step = -g1 / g2
        step = float(np.clip(step, -1.0 / M, 1.0 / M))
        th += step
        if abs(step) < 1e-16:
            break
    if ok and abs(th - theta) <= 2.0 / M:
        refined = _trig_eval(spec_half, M, th)
        return ExtremumResult(value=refined, theta=th % 1.0, degenerate=False)
    return ExtremumResult(value=value, theta=theta % 1.0, degenerate=False)


def extremum_M(vals):
    r = extremum_m(-np.asarray(vals, dtype=float))
    return ExtremumResult(value=-r.value, theta=r.theta,
                          degenerate=r.degenerate)


# ------------------------------------------------------------- slope chains

@dataclass
class ChainResult:
    alpha: float
    fs: list
    us: list
    vs: list
    omegas: list
    psi_end: UnimodalMap
    omega_end: RotationNumber
    mode: str


def _polish_sigma1(family, alpha0, n):
    """Sharpen alpha so that R^(n-1)(c(alpha, 0)) lands on Sigma_1.

    The superstable parameter satisfies this in exact arithmetic, but the
    n-1 renormalizations amplify its rounding by delta^(n-1); a secant
    polish on the renormalized criterion removes that.  The criterion
    itself carries the same delta^(n-1) amplification of double rounding,
    so the achievable residual scales with it; the acceptance threshold
    below corresponds to a fixed ~1e-13 accuracy in alpha."""
    def g(alpha):
        m = family.psi0(alpha)
        for _ in range(n - 1):
            m = renormalize_1d(m, check_domain=False)
        return float(np.real(m.psi(1.0)))

    delta = feigenbaum_fixed_point(
        family.psi0(alpha0).domain).delta_feig
    tol = max(1e-12, 1e-13 * delta ** (n - 1))

    a0, a1 = alpha0, alpha0 + 1e-9 * max(1.0, abs(alpha0))
    g0, g1 = g(a0), g(a1)
    best_a, best_g = (a0, abs(g0)) if abs(g0) < abs(g1) else (a1, abs(g1))
    stale = 0
    for _ in range(24):
        if abs(g1) <= 1e-13 or g1 == g0:
            break
        a0, a1, g0 = a1, a1 - g1 * (a1 - a0) / (g1 - g0), g1
        g1 = g(a1)
        if abs(g1) < best_g:
            best_a, best_g = a1, abs(g1)
            stale = 0
        else:
            stale += 1
            if stale >= 3:
                break
    if best_g > tol:
        raise NoConvergenceError("Sigma_1 polish stalled", best_g)
    return best_a


def _project_sigma1(m):
    """Snap a map onto Sigma_1 by removing the psi(1) defect with an x^2 term.

    The correction r*x^2 (r = psi(1)) keeps psi(0) = 1 and evenness while
    zeroing psi(1) exactly; it is only meant to absorb the rounding-level
    residual left by parameter polishing, so the map changes by O(r)."""
    r = float(np.real(m.psi(1.0)))
    L = m.domain.half_width
    c = np.array(m.psi.coeffs, dtype=complex).copy()
    c[0] -= r * L * L / 2.0
    c[2] -= r * L * L / 2.0
    return UnimodalMap(AnalyticFn(c, m.domain))


def _tgamma_or_skip(v, section):
    pair = project_pik(v, 1)
    if pair.coeff_norm() <= 1e-12 * max(1.0, v.coeff_norm()):
        return v
    _, out = gamma_normalize(v, section)
    return out


def slope_chain(family, omega0, n, mode="exact-orbit",
                section=SectionConfig(), paper_literal_tail=False):
    """Propagate (f_k, u_k, v_k, omega_k) for k = 0..n-1.

    exact-orbit: f_k = R^k(c(s_n, 0)) with u, v pushed by the derivative of
    the renormalization at each exact iterate. fixed-point: the bases are
    Phi for the first floor(n/2)-1 steps and the unstable-manifold points
    f*_{n-k+1} for the tail, ending the propagation at f*_2 so that the
    final evaluation happens at f*_1 (paper_literal_tail shifts the tail to
    f*_{n-k}, which runs into the degenerate scaling of f*_1 and raises).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    probe = family.evaluator(sum(family.param_box[0]) / 2, 0.0)
    dom = probe.domain

    if mode == "exact-orbit":
        s = superstable_params(family, n)
        alpha = _polish_sigma1(family, float(s[n]), n)
        f0 = family.psi0(alpha)
        psi_end_override = None
    elif mode == "fixed-point":
        alpha = stable_manifold_param(family)
        fpd = feigenbaum_fixed_point(dom)
        j_need = max(2, n - max(n // 2, 1) + 1, 2 if not paper_literal_tail
                     else max(2, n - 1))
        stars = unstable_manifold_points(fpd, max(2, j_need))
        f0 = fpd.phi
        psi_end_override = stars[0]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    u = family.du_dalpha(alpha)
    v = family.dv_deps(alpha)
    v = _tgamma_or_skip(v, section)

    fs, us, vs, omegas = [f0], [u], [v], [omega0]
    om = omega0
    f_cur = f0
    for k in range(1, n):
        if mode == "exact-orbit":
            base = f_cur
        else:
            if k <= n // 2 - 1:
                base = fpd.phi
            else:
                j = (n - k) if paper_literal_tail else (n - k + 1)
                base = stars[j - 1]
        try:
            u = AnalyticFn(dr_matrix(base) @ np.real(u.coeffs), dom)
            v = apply_DT(base.embed(), om, v)
        except (DegenerateScalingError, DomainError) as e:
            raise type(e)(f"chain stage k={k}: {e}")
        v = _tgamma_or_skip(v, section)
        if mode == "exact-orbit":
            f_cur = renormalize_1d(f_cur, check_domain=False)
        else:
            f_cur = base
        om = om.double()
        fs.append(f_cur)
        us.append(u)
        vs.append(v)
        omegas.append(om)

    psi_end = psi_end_override if psi_end_override is not None else fs[-1]
    psi_end = _project_sigma1(psi_end)
    return ChainResult(alpha=alpha, fs=fs, us=us, vs=vs, omegas=omegas,
                       psi_end=psi_end, omega_end=omegas[-1], mode=mode)


def slope_formula(family, omega0, n, mode="exact-orbit",
                  section=SectionConfig(), paper_literal_tail=False):
    """(alpha'_n, beta'_n) from the renormalization chain."""
    ch = slope_chain(family, omega0, n, mode=mode, section=section,
                     paper_literal_tail=paper_literal_tail)
    den = DG1_hat(ch.psi_end, ch.us[-1])
    if abs(den) < 1e-300:
        raise DegenerateScalingError("DG1_hat denominator vanished")
    vals = DG1(ch.psi_end, ch.omega_end, ch.vs[-1], cross_check=False)
    alpha_p = -extremum_m(vals).value / den
    beta_p = -extremum_M(vals).value / den
    return alpha_p, beta_p


# ----------------------------------------------- direct bifurcation search

def _criterion(family, omega0, n, eps, alpha, branch, guess):
    f = family.evaluator(alpha, eps)
    curve = solve_invariant_curve(f, omega0, n, guess=guess)
    prod = fiber_product(f, omega0, curve)
    ext = extremum_m(prod) if branch == "min" else extremum_M(prod)
    return ext.value, curve.samples


def locate_reducibility_loss(family, omega0, n, eps, branch="min"):
    """alpha at which the extremum of the period derivative product hits 0.

    branch="min" tracks the minimum-touching curve (the alpha+ branch);
    branch="max" the maximum-touching one. At eps = 0 both collapse to the
    superstable parameter.
    """
    s = superstable_params(family, n)
    s_n = float(s[n])
    if eps == 0.0:
        return s_n

    guess = None
    d = max(4.0 * abs(eps), 1e-9)
    gap = s_n - float(s[n - 1]) if n >= 1 else 0.3
    val_s, guess = _criterion(family, omega0, n, eps, s_n, branch, guess)
    lo = hi = None
    for _ in range(40):
        g_lo, guess = _criterion(family, omega0, n, eps, s_n - d, branch, guess)
        g_hi, _ = _criterion(family, omega0, n, eps, s_n + d, branch, guess)
        if np.sign(g_lo) != np.sign(g_hi):
            lo, hi = s_n - d, s_n + d
            break
        d *= 3.0
        if d > 0.45 * gap:
            break
    if lo is None:
        raise SearchError("no sign change of the criterion near s_n")

    state = {"guess": guess}

    def g(alpha):
        val, samples = _criterion(family, omega0, n, eps, alpha, branch,
                                  state["guess"])
        state["guess"] = samples
        return val

    return float(brentq(g, lo, hi, xtol=1e-12))


def direct_slope(family, omega0, n, eps=1e-4, branch="min"):
    """Richardson-extrapolated slope (alpha_loss(eps) - s_n) / eps."""
    s_n = float(superstable_params(family, n)[n])
    a1 = locate_reducibility_loss(family, omega0, n, eps, branch=branch)
    a2 = locate_reducibility_loss(family, omega0, n, eps / 2, branch=branch)
    sl1 = (a1 - s_n) / eps
    sl2 = (a2 - s_n) / (eps / 2)
    return 2.0 * sl2 - sl1


# ------------------------------------------------------------ the FLM family

def flm_family(g=None, domain=DomainConfig(), param_box=((1.8, 3.6299),
                                                         (0.0, 1e-2)),
               name="flm"):
    """Forced logistic map in normalized coordinates.

    Raw family alpha x (1 - x) + eps g(theta, x); the conjugacy
    x = 1/2 + lambda y with lambda = (alpha - 2)/4 brings the unforced map
    to 1 - mu y^2 with mu = alpha (alpha - 2)/4, normalized to value 1 at
    the critical point. Default forcing g = cos(2 pi theta).
    """
    if g is None:
        def g(theta, x):
            return np.cos(2 * np.pi * np.asarray(theta)) * np.ones_like(x)

    def evaluator(alpha, eps):
        mu = alpha * (alpha - 2.0) / 4.0
        lam = (alpha - 2.0) / 4.0
        if eps == 0.0:
            return QPFn.from_callable(
                domain, lambda th, y: (1.0 - mu * y * y) * np.ones_like(
                    np.broadcast_arrays(th, y)[0]))
        if abs(lam) < 1e-6:
            raise DegenerateScalingError(
                "normalizing conjugacy degenerates at alpha = 2")
        return QPFn.from_callable(
            domain, lambda th, y: 1.0 - mu * y * y
            + eps * g(th, 0.5 + lam * y) / lam)

    def d_alpha(alpha):
        return AnalyticFn.from_callable(
            domain, lambda y: -0.5 * (alpha - 1.0) * y * y)

    def d_eps(alpha):
        lam = (alpha - 2.0) / 4.0
        if abs(lam) < 1e-6:
            raise DegenerateScalingError(
                "normalizing conjugacy degenerates at alpha = 2")
        return QPFn.from_callable(domain,
                                  lambda th, y: g(th, 0.5 + lam * y) / lam)

    return FamilySpec(
        name=name,
        evaluator=evaluator,
        param_box=param_box,
        analytic_params=True,
        d_alpha=d_alpha,
        d_eps=d_eps,
        raw_map=lambda a, x: a * x * (1.0 - x),
        raw_dmap_dx=lambda a, x: a * (1.0 - 2.0 * x),
        raw_dmap_dalpha=lambda a, x: x * (1.0 - x),
        x_crit=0.5)
