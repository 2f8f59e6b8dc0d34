"""Spectral representation of analytic functions on an interval and on the
cylinder T x I.

Functions of x live as Chebyshev-T coefficient vectors on the inflated
interval I = [-(1+delta), 1+delta]; functions of (theta, x) as a stack of
Fourier modes (k = -K..K, conjugate symmetric) whose coefficients are
Chebyshev vectors. Everything downstream (operators, curve solvers, slope
formulas) works through these two containers.

Conventions
-----------
* theta is measured in full turns, so the k-th mode carries exp(2 pi i k theta).
* mode pairs: the B_k component of a real f is u(x) cos(2 pi k theta)
  + v(x) sin(2 pi k theta) with u = 2 Re c_k and v = -2 Im c_k.
* the sup norm is a fixed real-grid proxy: 4(2K+1) uniform theta points
  times 4 n_cheb Chebyshev-clustered x points (endpoints included).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .errors import (CompositionDomainError, ConsistencyError, DomainError,
                     TruncationError)

TOL_INTERP = 1e-12


@dataclass(frozen=True)
class DomainConfig:
    """Geometry and truncation orders shared by all spectral objects.

    delta_dom inflates [-1, 1]; (w_center, w_radius) is the complex disc used
    only by the containment check; rho_strip is the analyticity strip
    half-width kept for reporting; n_cheb and n_fourier are the truncation
    orders (n_fourier is the K in modes -K..K).
    """

    delta_dom: float = 0.1
    w_center: float = 0.2
    w_radius: float = 1.5
    rho_strip: float = 0.1
    n_cheb: int = 40
    n_fourier: int = 16

    def __post_init__(self):
        if not self.delta_dom > 0:
            raise ValueError("delta_dom must be positive")
        if not self.w_radius > 1 + self.delta_dom - self.w_center:
            raise ValueError("disc must contain the inflated interval")
        if self.n_cheb < 8:
            raise ValueError("n_cheb must be at least 8")
        if self.n_fourier < 1:
            raise ValueError("n_fourier must be at least 1")

    @property
    def half_width(self):
        return 1.0 + self.delta_dom

    def replace(self, **kw):
        fields = dict(
            delta_dom=self.delta_dom, w_center=self.w_center,
            w_radius=self.w_radius, rho_strip=self.rho_strip,
            n_cheb=self.n_cheb, n_fourier=self.n_fourier)
        fields.update(kw)
        return DomainConfig(**fields)


# ---------------------------------------------------------------- Chebyshev

@lru_cache(maxsize=64)
def _cheb_machinery(n):
    """Gauss nodes on [-1,1], value matrix V and transform matrix A.

    V[i, j] = T_j(t_i), A is its inverse in the discrete-orthogonality
    sense: coeffs = A @ values, values = V @ coeffs.
    """
    i = np.arange(n)
    ang = np.pi * (i + 0.5) / n
    t = np.cos(ang)
    V = np.cos(np.outer(ang, np.arange(n)))
    A = (2.0 / n) * V.T.copy()
    A[0, :] *= 0.5
    return t, V, A


def cheb_nodes(domain):
    """Physical collocation nodes on the inflated interval."""
    t, _, _ = _cheb_machinery(domain.n_cheb)
    return domain.half_width * t


@dataclass
class AnalyticFn:
    """One real-analytic function of x as a Chebyshev-T coefficient vector.

    Coefficients may be complex when the object represents a single Fourier
    mode of a cylinder function; standalone instances are real.
    """

    coeffs: np.ndarray
    domain: DomainConfig

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        n = self.domain.n_cheb
        if c.shape != (n,):
            raise ValueError("coefficient vector has wrong length")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, domain, values):
        _, _, A = _cheb_machinery(domain.n_cheb)
        return cls(A @ np.asarray(values), domain)

    @classmethod
    def from_callable(cls, domain, fn):
        return cls.from_values(domain, fn(cheb_nodes(domain)))

    @classmethod
    def zero(cls, domain):
        return cls(np.zeros(domain.n_cheb), domain)

    def __call__(self, x):
        t = np.asarray(x) / self.domain.half_width
        return _cheb.chebval(t, self.coeffs)

    def deriv(self):
        d = _cheb.chebder(self.coeffs) / self.domain.half_width
        out = np.zeros(self.domain.n_cheb, dtype=d.dtype)
        out[: d.size] = d
        return AnalyticFn(out, self.domain)

    def tail_ratio(self):
        """Truncation diagnostic: |last coefficient| / max |coefficient|."""
        m = np.max(np.abs(self.coeffs))
        if m == 0:
            return 0.0
        return float(np.abs(self.coeffs[-1]) / m)

    def values_at_nodes(self):
        _, V, _ = _cheb_machinery(self.domain.n_cheb)
        return V @ self.coeffs

    def __add__(self, other):
        self._check(other)
        return AnalyticFn(self.coeffs + other.coeffs, self.domain)

    def __sub__(self, other):
        self._check(other)
        return AnalyticFn(self.coeffs - other.coeffs, self.domain)

    def __mul__(self, scalar):
        return AnalyticFn(self.coeffs * scalar, self.domain)

    __rmul__ = __mul__

    def __neg__(self):
        return AnalyticFn(-self.coeffs, self.domain)

    def _check(self, other):
        if other.domain != self.domain:
            raise ConsistencyError("domain mismatch")


@dataclass
class QPFn:
    """Real function on the cylinder: stacked Fourier modes of Chebyshev rows.

    modes[k + K] holds the complex Chebyshev coefficients of c_k(x); rows
    satisfy c_{-k} = conj(c_k) so evaluation is real.
    """

    modes: np.ndarray
    domain: DomainConfig

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=complex)
        K = self.domain.n_fourier
        if m.shape != (2 * K + 1, self.domain.n_cheb):
            raise ValueError("mode array has wrong shape")
        object.__setattr__(self, "modes", m)

    @property
    def K(self):
        return self.domain.n_fourier

    # ------------------------------------------------------------ builders

    @classmethod
    def zero(cls, domain):
        K = domain.n_fourier
        return cls(np.zeros((2 * K + 1, domain.n_cheb), dtype=complex), domain)

    @classmethod
    def from_analytic(cls, fn):
        out = cls.zero(fn.domain)
        out.modes[fn.domain.n_fourier] = fn.coeffs
        return out

    @classmethod
    def from_mode_rows(cls, domain, rows):
        """rows: dict k -> complex coefficient vector, k >= 0 only.

        Negative rows are filled in by conjugation.
        """
        out = cls.zero(domain)
        K = domain.n_fourier
        for k, c in rows.items():
            if abs(k) > K:
                raise TruncationError(f"mode {k} exceeds K={K}")
            out.modes[K + k] = c
            if k > 0:
                out.modes[K - k] = np.conj(c)
        return out

    @classmethod
    def from_pair(cls, domain, k, u, v):
        """Embed u(x) cos(2 pi k theta) + v(x) sin(2 pi k theta)."""
        if k < 1 or k > domain.n_fourier:
            raise TruncationError(f"mode {k} out of range")
        ck = 0.5 * (u.coeffs - 1j * v.coeffs)
        return cls.from_mode_rows(domain, {k: ck})

    @classmethod
    def from_callable(cls, domain, fn):
        """Sample fn(theta, x) on (2K+1) uniform theta x Chebyshev nodes."""
        K = domain.n_fourier
        M = 2 * K + 1
        thetas = np.arange(M) / M
        x = cheb_nodes(domain)
        vals = np.empty((M, x.size))
        for j, th in enumerate(thetas):
            vals[j] = fn(th, x)
        return cls._from_grid_values(domain, vals)

    @classmethod
    def _from_grid_values(cls, domain, vals):
        """vals[j, i] = f(j/M, x_i) with M = 2K+1 rows."""
        K = domain.n_fourier
        M = 2 * K + 1
        _, _, A = _cheb_machinery(domain.n_cheb)
        ft = np.fft.fft(vals, axis=0) / M      # index j -> frequency k mod M
        modes = np.empty((M, domain.n_cheb), dtype=complex)
        for k in range(-K, K + 1):
            modes[K + k] = A @ ft[k % M]
        # exact conjugate symmetry (kills FFT rounding asymmetry)
        for k in range(1, K + 1):
            avg = 0.5 * (modes[K + k] + np.conj(modes[K - k]))
            modes[K + k] = avg
            modes[K - k] = np.conj(avg)
        modes[K] = modes[K].real + 0j
        return cls(modes, domain)

    # ---------------------------------------------------------- evaluation

    def mode(self, k):
        if abs(k) > self.K:
            raise TruncationError(f"mode {k} exceeds K={self.K}")
        return AnalyticFn(self.modes[self.K + k].copy(), self.domain)

    def eval(self, theta, x):
        """Pointwise value, broadcasting theta and x together."""
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        t = x / self.domain.half_width
        mv = _cheb.chebval(t, self.modes.T)        # (2K+1,) + shape
        k = np.arange(-self.K, self.K + 1)
        ph = np.exp(2j * np.pi * np.multiply.outer(k, theta))
        out = np.real(np.einsum("k...,k...->...", mv, ph))
        if out.ndim == 0:
            return float(out)
        return out

    def dx(self):
        K = self.K
        n = self.domain.n_cheb
        out = np.zeros((2 * K + 1, n), dtype=complex)
        for r in range(2 * K + 1):
            d = _cheb.chebder(self.modes[r]) / self.domain.half_width
            out[r, : d.size] = d
        return QPFn(out, self.domain)

    def dtheta(self):
        k = np.arange(-self.K, self.K + 1)
        return QPFn(self.modes * (2j * np.pi * k)[:, None], self.domain)

    def coeff_norm(self):
        """l2 norm of the full coefficient stack."""
        return float(np.sqrt(np.sum(np.abs(self.modes) ** 2)))

    def is_theta_independent(self, tol=1e-12):
        K = self.K
        off = np.sqrt(np.sum(np.abs(self.modes) ** 2)
                      - np.sum(np.abs(self.modes[K]) ** 2))
        scale = max(1.0, np.max(np.abs(self.modes)))
        return off <= tol * scale

    # ------------------------------------------------------------- algebra

    def __add__(self, other):
        if isinstance(other, QPFn):
            return QPFn(self.modes + other.modes, self.domain)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, QPFn):
            return QPFn(self.modes - other.modes, self.domain)
        return NotImplemented

    def __mul__(self, scalar):
        return QPFn(self.modes * scalar, self.domain)

    __rmul__ = __mul__

    def __neg__(self):
        return QPFn(-self.modes, self.domain)


@dataclass
class PairFn:
    """(u, v) pair representing u(x) cos(2 pi k theta) + v(x) sin(2 pi k theta).

    The mode index k is context, not state; operators that need it take it
    as an argument.
    """

    u: AnalyticFn
    v: AnalyticFn

    def __post_init__(self):
        if self.u.domain != self.v.domain:
            raise ConsistencyError("pair components on different domains")

    @property
    def domain(self):
        return self.u.domain

    def embed(self, k=1):
        return QPFn.from_pair(self.domain, k, self.u, self.v)

    def coeff_vector(self):
        """Stacked real coefficients (u then v), the operator state vector."""
        return np.concatenate([np.real(self.u.coeffs), np.real(self.v.coeffs)])

    @classmethod
    def from_coeff_vector(cls, domain, vec):
        n = domain.n_cheb
        return cls(AnalyticFn(np.array(vec[:n], dtype=float), domain),
                   AnalyticFn(np.array(vec[n:], dtype=float), domain))

    @classmethod
    def zero(cls, domain):
        return cls(AnalyticFn.zero(domain), AnalyticFn.zero(domain))

    def sup_norm(self):
        """max over (theta, x) of the represented function, exact in theta."""
        x = _sup_x_grid(self.domain)
        return float(np.max(np.hypot(np.real(self.u(x)), np.real(self.v(x)))))

    def coeff_norm(self):
        return float(np.linalg.norm(self.coeff_vector()))

    def rotate(self, beta):
        """Shift theta by gamma with beta = 2 pi k gamma: acts as rot(-beta)."""
        c, s = np.cos(beta), np.sin(beta)
        return PairFn(AnalyticFn(c * self.u.coeffs + s * self.v.coeffs, self.domain),
                      AnalyticFn(-s * self.u.coeffs + c * self.v.coeffs, self.domain))

    def __add__(self, other):
        return PairFn(self.u + other.u, self.v + other.v)

    def __sub__(self, other):
        return PairFn(self.u - other.u, self.v - other.v)

    def __mul__(self, scalar):
        return PairFn(self.u * scalar, self.v * scalar)

    __rmul__ = __mul__


# -------------------------------------------------------------- operations

def compose_fiber(g, shift, inner, scale):
    """h(theta, x) = g(theta + shift, inner(theta, scale * x)).

    Re-expanded on the spectral grid: (2K+1) theta samples times Chebyshev
    nodes. The inner range is checked on that grid and a violation raises
    with the offending sample attached.
    """
    dom = g.domain
    if inner.domain != dom:
        raise ConsistencyError("composition operands on different domains")
    shift = float(shift)
    K = dom.n_fourier
    M = 2 * K + 1
    thetas = np.arange(M) / M
    x = cheb_nodes(dom)
    L = dom.half_width

    inner_vals = np.empty((M, x.size))
    for j, th in enumerate(thetas):
        inner_vals[j] = inner.eval(th, scale * x)
    bad = np.abs(inner_vals) > L * (1 + 1e-13)
    if np.any(bad):
        j, i = np.argwhere(bad)[0]
        raise CompositionDomainError(
            f"inner value {inner_vals[j, i]:.6g} leaves [-{L}, {L}]",
            where=(thetas[j], x[i]))

    out_vals = np.empty((M, x.size))
    t = inner_vals / L
    k = np.arange(-K, K + 1)
    for j, th in enumerate(thetas):
        mv = _cheb.chebval(t[j], g.modes.T)            # (2K+1, n_cheb)
        ph = np.exp(2j * np.pi * k * (th + shift))
        out_vals[j] = np.real(ph @ mv)
    return QPFn._from_grid_values(dom, out_vals)


def project_p0(f):
    """Theta-average: the k = 0 Fourier coefficient as a real function."""
    return AnalyticFn(np.real(f.modes[f.K]).copy(), f.domain)


def project_pik(f, k):
    """Mode-k component as the (u, v) pair with u = 2 Re c_k, v = -2 Im c_k."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > f.K:
        raise TruncationError(f"mode {k} exceeds K={f.K}")
    ck = f.modes[f.K + k]
    return PairFn(AnalyticFn(2 * np.real(ck), f.domain),
                  AnalyticFn(-2 * np.imag(ck), f.domain))


def shift_tgamma(f, gamma):
    """Rotation in theta: mode k is multiplied by exp(2 pi i k gamma)."""
    gamma = float(gamma)
    k = np.arange(-f.K, f.K + 1)
    ph = np.exp(2j * np.pi * k * gamma)
    return QPFn(f.modes * ph[:, None], f.domain)


@lru_cache(maxsize=64)
def _sup_grid(domain):
    K = domain.n_fourier
    n_t = 4 * (2 * K + 1)
    thetas = np.arange(n_t) / n_t
    return thetas, _sup_x_grid(domain)


@lru_cache(maxsize=64)
def _sup_x_grid(domain):
    n_x = 4 * domain.n_cheb
    # clustered like Chebyshev extrema so the interval endpoints are on grid
    return domain.half_width * np.cos(np.pi * np.arange(n_x) / (n_x - 1))


def sup_norm(f):
    """Grid proxy for the supremum norm (deterministic fixed grid)."""
    if isinstance(f, AnalyticFn):
        return float(np.max(np.abs(np.real(f(_sup_x_grid(f.domain))))))
    thetas, x = _sup_grid(f.domain)
    t = x / f.domain.half_width
    mv = _cheb.chebval(t, f.modes.T)                   # (2K+1, n_x)
    k = np.arange(-f.K, f.K + 1)
    ph = np.exp(2j * np.pi * np.outer(thetas, k))      # (n_t, 2K+1)
    vals = np.real(ph @ mv)
    return float(np.max(np.abs(vals)))


def eval_qpfn(f, theta, x):
    """Functional form of QPFn.eval with the domain guard of the contract."""
    L = f.domain.half_width
    if np.any(np.abs(np.asarray(x, dtype=float)) > L * (1 + 1e-13)):
        raise DomainError(f"x outside [-{L}, {L}]", where=x)
    return f.eval(theta, x)


# ----------------------------------------------------------- serialization

def qpfn_to_json(f):
    """Schema: {"delta_dom":., "n_cheb":., "modes":[{"k":., "re":[], "im":[]}]}.

    Modes k = 0..K are emitted; negatives are conjugates by construction.
    json round-trips doubles exactly (shortest-repr formatting).
    """
    modes = []
    for k in range(0, f.K + 1):
        row = f.modes[f.K + k]
        modes.append({"k": k,
                      "re": [float(z) for z in np.real(row)],
                      "im": [float(z) for z in np.imag(row)]})
    return json.dumps({"delta_dom": f.domain.delta_dom,
                       "n_cheb": f.domain.n_cheb,
                       "modes": modes}, sort_keys=True)


def qpfn_from_json(s, domain=None):
    d = json.loads(s)
    K = max(m["k"] for m in d["modes"])
    if domain is None:
        domain = DomainConfig(delta_dom=d["delta_dom"], n_cheb=d["n_cheb"],
                              n_fourier=max(1, K))
    rows = {}
    for m in d["modes"]:
        rows[m["k"]] = np.array(m["re"]) + 1j * np.array(m["im"])
    return QPFn.from_mode_rows(domain, rows)


def analytic_to_json(fn):
    return json.dumps({"delta_dom": fn.domain.delta_dom,
                       "n_cheb": fn.domain.n_cheb,
                       "modes": [{"k": 0,
                                  "re": [float(z) for z in np.real(fn.coeffs)],
                                  "im": [float(z) for z in np.imag(fn.coeffs)]}]},
                      sort_keys=True)


def analytic_from_json(s, domain=None):
    d = json.loads(s)
    if domain is None:
        domain = DomainConfig(delta_dom=d["delta_dom"], n_cheb=d["n_cheb"])
    (m,) = d["modes"]
    return AnalyticFn(np.array(m["re"], dtype=float), domain)
