"""Distribution families used by the message passing engine.

Covers the Inverse G-Wishart family (full and diagonal graphs) in both its
common (shape, scale) and natural parameterizations, the Inverse Chi-Squared
building block, multivariate normal natural-parameter maps in vech form, and
the Moon Rock family with its quadrature-based normalizer.

Density evaluations return log values throughout; probability-scale numbers
are only ever formed at the final reporting stage.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import digamma, gammaln, multigammaln

from . import matops
from .errors import (
    DivergentIntegral,
    DomainError,
    ImproperMessage,
    InvalidHyperparameter,
    InvalidShape,
    NonSPDPrecision,
    NonSPDScale,
)

__all__ = [
    "Graph",
    "CommonIGW",
    "NaturalIGW",
    "igw_to_natural",
    "igw_from_natural",
    "igw_mean_inverse",
    "igw_log_density",
    "igw_sample",
    "inv_chisq_log_density",
    "inv_chisq_sample",
    "inv_chisq_mean_inverse",
    "inv_chisq_mean_log",
    "NaturalMVN",
    "mvn_to_natural",
    "mvn_from_natural",
    "gaussian_vec_to_vech",
    "gaussian_vech_to_vec",
    "MoonRockParams",
    "moonrock_log_normalizer",
    "moonrock_normalizer",
    "moonrock_mean",
    "moonrock_log_density",
    "moonrock_sample",
]


class Graph(str, enum.Enum):
    """Graph of an Inverse G-Wishart distribution; only these two exist."""

    FULL = "full"
    DIAG = "diag"


def omega(graph: Graph, d: int) -> float:
    """The moment-formula constant: (d+1)/2 for the full graph, 1 for diag."""
    return (d + 1) / 2 if graph is Graph.FULL else 1.0


# ---------------------------------------------------------------------------
# Inverse G-Wishart
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommonIGW:
    """Inverse G-Wishart in (graph, shape, scale) form.

    p(X) is proportional to |X|^{-(xi+2)/2} exp(-tr(Lambda X^{-1})/2) on the
    support determined by the graph. The full graph requires xi > 2d - 2 and
    an SPD scale; the diagonal graph requires xi > 0 and a positive diagonal
    (off-diagonal scale entries carry no information and are zeroed).
    """

    graph: Graph
    xi: float
    Lambda: np.ndarray

    def __post_init__(self):
        Lam = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        d = Lam.shape[0]
        if Lam.shape != (d, d):
            raise InvalidHyperparameter(f"scale must be square, got {Lam.shape}")
        if self.graph is Graph.FULL:
            if not (self.xi > 2 * d - 2):
                raise InvalidShape(
                    f"full graph requires xi > 2d-2 = {2 * d - 2}, got {self.xi}"
                )
            Lam = 0.5 * (Lam + Lam.T)
            if not matops.is_spd(Lam):
                raise NonSPDScale("scale matrix is not SPD")
        else:
            if not (self.xi > 0):
                raise InvalidShape(f"diag graph requires xi > 0, got {self.xi}")
            diag = np.diag(Lam).copy()
            if np.any(diag <= 0):
                raise NonSPDScale("diag-graph scale needs a positive diagonal")
            Lam = np.diag(diag)
        Lam.flags.writeable = False
        object.__setattr__(self, "Lambda", Lam)
        object.__setattr__(self, "xi", float(self.xi))

    @property
    def dim(self) -> int:
        return self.Lambda.shape[0]


@dataclass(frozen=True)
class NaturalIGW:
    """Inverse G-Wishart in natural form for sufficient statistic
    (log|X|, vech(X^{-1})): eta1 = -(xi+2)/2, eta2 = -D_d^T vec(Lambda)/2.

    Instances always describe proper densities: eta1 < -1 and the implied
    scale -2 vec^{-1}(D^{+T} eta2) positive (SPD for the full graph, positive
    diagonal for diag). Raw message vectors that may transiently violate this
    are handled as plain arrays elsewhere.
    """

    graph: Graph
    eta1: float
    eta2: np.ndarray
    dim: int

    def __post_init__(self):
        eta2 = np.asarray(self.eta2, dtype=float).copy()
        if eta2.size != matops.vech_len(self.dim):
            raise InvalidShape(
                f"eta2 must have length {matops.vech_len(self.dim)}, got {eta2.size}"
            )
        if not (self.eta1 < -1.0):
            raise ImproperMessage(f"eta1 must be < -1, got {self.eta1}")
        if self.graph is Graph.DIAG:
            eta2 = _zero_offdiag_vech(eta2)
        Lam = implied_scale(eta2, self.dim)
        if self.graph is Graph.FULL:
            if not matops.is_spd(Lam):
                raise NonSPDScale("implied scale is not SPD")
        else:
            if np.any(np.diag(Lam) <= 0):
                raise NonSPDScale("implied diag-graph scale has a non-positive entry")
        eta2.flags.writeable = False
        object.__setattr__(self, "eta2", eta2)
        object.__setattr__(self, "eta1", float(self.eta1))

    @classmethod
    def from_vector(cls, graph: Graph, eta: np.ndarray) -> "NaturalIGW":
        """Split a stacked (eta1, eta2) wire vector into a validated instance."""
        eta = np.asarray(eta, dtype=float)
        d = matops.dim_from_vech_len(eta.size - 1)
        return cls(graph, float(eta[0]), eta[1:], d)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(([self.eta1], self.eta2))


def _zero_offdiag_vech(eta2: np.ndarray) -> np.ndarray:
    M = matops.unvech(eta2)
    return matops.vech(np.diag(np.diag(M)))


def implied_scale(eta2: np.ndarray, d: int) -> np.ndarray:
    """The scale matrix Lambda = -2 vec^{-1}(D^{+T} eta2) encoded by eta2."""
    Dp = matops.duplication_pinv(d)
    M = matops.vec_inverse(Dp.T @ np.asarray(eta2, dtype=float), d)
    return -2.0 * 0.5 * (M + M.T)


def igw_to_natural(p: CommonIGW) -> NaturalIGW:
    """Map (graph, xi, Lambda) to natural parameters."""
    d = p.dim
    D = matops.duplication(d)
    eta1 = -(p.xi + 2.0) / 2.0
    eta2 = -0.5 * (D.T @ matops.vec(p.Lambda))
    return NaturalIGW(p.graph, eta1, eta2, d)


def igw_from_natural(n: NaturalIGW) -> CommonIGW:
    """Inverse of the natural parameter mapping."""
    xi = -2.0 * n.eta1 - 2.0
    Lam = implied_scale(n.eta2, n.dim)
    return CommonIGW(n.graph, xi, Lam)


def igw_mean_inverse(n: NaturalIGW) -> np.ndarray:
    """E(X^{-1}) from natural parameters.

    Equals {eta1 + omega} {vec^{-1}(D^{+T} eta2)}^{-1} with omega = (d+1)/2
    for the full graph and 1 for diag; the closed forms are
    (xi - d + 1) Lambda^{-1} (full) and xi diag(1/Lambda_jj) (diag).
    """
    d = n.dim
    w = omega(n.graph, d)
    if not (n.eta1 + w < 0):
        raise ImproperMessage(
            f"E(X^-1) undefined: eta1 + omega = {n.eta1 + w} is not negative"
        )
    Dp = matops.duplication_pinv(d)
    M = matops.vec_inverse(Dp.T @ n.eta2, d)
    M = 0.5 * (M + M.T)
    out = (n.eta1 + w) * np.linalg.inv(M)
    return 0.5 * (out + out.T)


def igw_log_density(p: CommonIGW, X: np.ndarray) -> float:
    """Exact log density, normalizing constant included."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = p.dim
    if X.shape != (d, d):
        raise DomainError(f"X must be {d} x {d}, got {X.shape}")
    if p.graph is Graph.FULL:
        X = 0.5 * (X + X.T)
        if not matops.is_spd(X):
            raise DomainError("full-graph density needs SPD X")
        kappa = p.xi - d + 1.0
        sign, logdet_L = np.linalg.slogdet(p.Lambda)
        _, logdet_X = np.linalg.slogdet(X)
        return float(
            0.5 * kappa * logdet_L
            - 0.5 * kappa * d * np.log(2.0)
            - multigammaln(kappa / 2.0, d)
            - 0.5 * (p.xi + 2.0) * logdet_X
            - 0.5 * np.trace(p.Lambda @ np.linalg.inv(X))
        )
    off = X - np.diag(np.diag(X))
    if np.max(np.abs(off)) > 1e-12 * max(np.max(np.abs(X)), 1e-300):
        raise DomainError("diag-graph density needs diagonal X")
    x = np.diag(X)
    if np.any(x <= 0):
        raise DomainError("diag-graph density needs positive diagonal entries")
    lam = np.diag(p.Lambda)
    return float(sum(inv_chisq_log_density(p.xi, lj, xj) for lj, xj in zip(lam, x)))


def _wishart_bartlett(nu: float, scale: np.ndarray, rng, size: int) -> np.ndarray:
    """Wishart(nu, scale) draws via the Bartlett decomposition; nu > d - 1."""
    d = scale.shape[0]
    L = np.linalg.cholesky(scale)
    A = np.zeros((size, d, d))
    if d > 1:
        ir, ic = np.tril_indices(d, -1)
        A[:, ir, ic] = rng.standard_normal((size, ir.size))
    for j in range(d):
        A[:, j, j] = np.sqrt(rng.chisquare(nu - j, size))
    M = L @ A
    return M @ np.swapaxes(M, -1, -2)


def igw_sample(p: CommonIGW, rng, size: int | None = None) -> np.ndarray:
    """Draw from the Inverse G-Wishart distribution.

    Full graph: invert a Bartlett-decomposition Wishart draw with conventional
    shape nu = xi - d + 1 and scale Lambda^{-1} (the xi > 2d - 2 bound makes
    nu > d - 1 a valid Wishart shape). Diag graph: independent
    Inverse-chi^2(xi, Lambda_jj) diagonal entries.
    """
    n = 1 if size is None else int(size)
    d = p.dim
    if p.graph is Graph.FULL:
        nu = p.xi - d + 1.0
        scale = np.linalg.inv(p.Lambda)
        scale = 0.5 * (scale + scale.T)
        W = _wishart_bartlett(nu, scale, rng, n)
        out = np.linalg.inv(W)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
    else:
        lam = np.diag(p.Lambda)
        draws = lam[None, :] / rng.chisquare(p.xi, (n, d))
        out = np.zeros((n, d, d))
        idx = np.arange(d)
        out[:, idx, idx] = draws
    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# Inverse Chi-Squared (shape delta, rate lambda)
# ---------------------------------------------------------------------------


def inv_chisq_log_density(delta, lam, x):
    """log of (lam/2)^{delta/2}/Gamma(delta/2) x^{-(delta+2)/2} e^{-(lam/2)/x}.

    All three arguments broadcast.
    """
    delta = np.asarray(delta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(delta <= 0) or np.any(lam <= 0):
        raise DomainError("inverse-chi^2 needs delta > 0 and lambda > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("inverse-chi^2 support is x > 0")
    out = (
        0.5 * delta * np.log(lam / 2.0)
        - gammaln(delta / 2.0)
        - 0.5 * (delta + 2.0) * np.log(x)
        - 0.5 * lam / x
    )
    return float(out) if out.ndim == 0 else out


def inv_chisq_sample(delta: float, lam: float, rng, size=None):
    """Draws via x = lam / chi2(delta)."""
    return lam / rng.chisquare(delta, size)


def inv_chisq_mean_inverse(delta: float, lam: float) -> float:
    """E(1/x) = delta/lambda (1/x is Gamma(delta/2, rate lambda/2))."""
    return delta / lam


def inv_chisq_mean_log(delta: float, lam: float) -> float:
    """E(log x) = log(lambda/2) - digamma(delta/2)."""
    return float(np.log(lam / 2.0) - digamma(delta / 2.0))


# ---------------------------------------------------------------------------
# Multivariate normal, natural form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NaturalMVN:
    """Gaussian natural parameters in vech form: for x ~ N(mu, Sigma),
    eta1 = Sigma^{-1} mu and eta2 = -D_k^T vec(Sigma^{-1})/2."""

    eta1: np.ndarray
    eta2: np.ndarray

    def __post_init__(self):
        eta1 = np.asarray(self.eta1, dtype=float).copy()
        eta2 = np.asarray(self.eta2, dtype=float).copy()
        k = eta1.size
        if eta2.size != matops.vech_len(k):
            raise NonSPDPrecision(
                f"eta2 must have length {matops.vech_len(k)}, got {eta2.size}"
            )
        eta1.flags.writeable = False
        eta2.flags.writeable = False
        object.__setattr__(self, "eta1", eta1)
        object.__setattr__(self, "eta2", eta2)

    @property
    def dim(self) -> int:
        return self.eta1.size

    @classmethod
    def from_vector(cls, eta: np.ndarray, k: int) -> "NaturalMVN":
        eta = np.asarray(eta, dtype=float)
        return cls(eta[:k], eta[k:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate((self.eta1, self.eta2))


def mvn_to_natural(mu: np.ndarray, Sigma: np.ndarray) -> NaturalMVN:
    mu = np.asarray(mu, dtype=float)
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if not matops.is_spd(Sigma):
        raise NonSPDPrecision("covariance must be SPD")
    k = mu.size
    P = np.linalg.inv(Sigma)
    P = 0.5 * (P + P.T)
    D = matops.duplication(k)
    return NaturalMVN(P @ mu, -0.5 * (D.T @ matops.vec(P)))


def mvn_from_natural(n: NaturalMVN):
    """Recover (mu, Sigma): Sigma = -{vec^{-1}(D^{+T} eta2)}^{-1}/2, mu = Sigma eta1."""
    k = n.dim
    Dp = matops.duplication_pinv(k)
    M = matops.vec_inverse(Dp.T @ n.eta2, k)
    P = -2.0 * 0.5 * (M + M.T)
    if not matops.is_spd(P):
        raise NonSPDPrecision("natural vector implies a non-SPD precision")
    Sigma = np.linalg.inv(P)
    Sigma = 0.5 * (Sigma + Sigma.T)
    return Sigma @ n.eta1, Sigma


def gaussian_vech_to_vec(eta: np.ndarray, k: int) -> np.ndarray:
    """Map a vech-form Gaussian natural vector to vec form via
    blockdiag(I_k, D_k^{+T})."""
    eta = np.asarray(eta, dtype=float)
    Dp = matops.duplication_pinv(k)
    return np.concatenate((eta[:k], Dp.T @ eta[k:]))


def gaussian_vec_to_vech(eta: np.ndarray, k: int) -> np.ndarray:
    """Map a vec-form Gaussian natural vector to vech form via
    blockdiag(I_k, D_k^T)."""
    eta = np.asarray(eta, dtype=float)
    D = matops.duplication(k)
    return np.concatenate((eta[:k], D.T @ eta[k:]))


# ---------------------------------------------------------------------------
# Moon Rock
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_TAIL_REL = 1e-12
_MAX_PANELS = 600
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _xlogx_minus_lgamma(t: np.ndarray) -> np.ndarray:
    """t log t - lgamma(t), switching to a Stirling form for large t.

    The direct difference cancels catastrophically once both terms are large;
    the series t + log(t)/2 - log(2 pi)/2 - 1/(12t) + 1/(360 t^3) - 1/(1260 t^5)
    has truncation error below 1e-13 for t > 30.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t <= 30.0
    ts = t[small]
    out[small] = ts * np.log(ts) - gammaln(ts)
    tl = t[~small]
    r = 1.0 / tl
    out[~small] = (
        tl
        + 0.5 * np.log(tl)
        - _HALF_LOG_2PI
        - r * (1.0 / 12.0 - r * r * (1.0 / 360.0 - r * r / 1260.0))
    )
    return out


def _moonrock_log_integrand(s: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    # log of {t^t / Gamma(t)}^alpha e^{-beta t} * t after t = e^s
    # (the trailing +s is the Jacobian of the substitution)
    t = np.exp(s)
    out = -beta * t + s
    if alpha != 0.0:
        out = out + alpha * _xlogx_minus_lgamma(t)
    return out


def _moonrock_center(alpha: float, beta: float) -> float:
    """Location (in s = log t) around which panel expansion starts."""
    if alpha == 0.0:
        return float(np.log(1.0 / beta))

    def h(t):
        return alpha * (np.log(t) + 1.0 - digamma(t)) - beta

    lo, hi = 1e-12, 1.0
    while h(hi) > 0 and hi < 1e12:
        hi *= 10.0
    if h(hi) > 0:
        # density mode runs away to infinity; the integral cannot converge
        raise DivergentIntegral(
            f"Moon Rock({alpha}, {beta}) has no interior mode; integral diverges"
        )
    return float(np.log(brentq(h, lo, hi, xtol=1e-12, rtol=1e-12)))


def _panel_width(alpha: float, beta: float, center: float) -> float:
    """Panel width matched to the curvature of the log integrand at its peak,
    so 32 nodes always resolve the central bump."""
    h = 1e-3
    g = _moonrock_log_integrand(np.array([center - h, center, center + h]), alpha, beta)
    curv = -(g[0] - 2.0 * g[1] + g[2]) / h**2
    if not np.isfinite(curv) or curv < 1e-6:
        return 1.0
    return float(min(1.0, 8.0 / np.sqrt(curv)))


class _MoonRockGrid:
    """Composite Gauss-Legendre grid for one (alpha, beta) pair.

    Panels are added on both sides of the mode in s = log t until the newly
    added mass falls below 1e-12 of the running total.
    """

    __slots__ = ("s", "w", "logf", "log_norm", "mean", "second_moment")

    def __init__(self, alpha: float, beta: float):
        center = _moonrock_center(alpha, beta)
        width = _panel_width(alpha, beta, center)
        half = 0.5 * width

        def panel(a: float):
            s = a + half + half * _GL_NODES
            return s, half * _GL_WEIGHTS, _moonrock_log_integrand(s, alpha, beta)

        left_edge = center - half
        s0, w0, f0 = panel(left_edge)
        chunks = [(s0, w0, f0)]
        ref = float(np.max(f0))

        def mass(f, w):
            return float(np.sum(w * np.exp(f - ref)))

        total = mass(f0, w0)
        # expand right, then left; the integrand is unimodal in s
        for direction in (+1, -1):
            for k in range(_MAX_PANELS):
                a = left_edge + direction * (k + 1) * width
                s, w, f = panel(a)
                fmax = float(np.max(f))
                if fmax > ref:
                    total *= np.exp(ref - fmax)
                    ref = fmax
                m = mass(f, w)
                chunks.append((s, w, f))
                still_growing = m > total * 0.5
                total += m
                if m < _TAIL_REL * total and not still_growing:
                    break
            else:
                raise DivergentIntegral(
                    f"Moon Rock({alpha}, {beta}) mass does not decay; "
                    "integral treated as divergent"
                )
        order = np.argsort(np.concatenate([c[0] for c in chunks]))
        self.s = np.concatenate([c[0] for c in chunks])[order]
        self.w = np.concatenate([c[1] for c in chunks])[order]
        self.logf = np.concatenate([c[2] for c in chunks])[order]
        rel = np.exp(self.logf - ref)
        norm = float(np.sum(self.w * rel))
        if not np.isfinite(norm) or norm <= 0:
            raise DivergentIntegral(f"Moon Rock({alpha}, {beta}) normalizer invalid")
        self.log_norm = ref + float(np.log(norm))
        self.mean = float(np.sum(self.w * rel * np.exp(self.s))) / norm
        self.second_moment = float(np.sum(self.w * rel * np.exp(2.0 * self.s))) / norm


@dataclass(frozen=True)
class MoonRockParams:
    """Parameters of p(x) proportional to {x^x/Gamma(x)}^alpha e^{-beta x}.

    Requires alpha >= 0 and beta > 0; the normalizing integral is checked
    numerically at construction and DivergentIntegral is raised when the mass
    fails to decay (asymptotically the kernel behaves like e^{(alpha-beta)t}
    t^{alpha/2}, so finiteness demands beta > alpha).
    """

    alpha: float
    beta: float
    _grid: _MoonRockGrid = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidHyperparameter(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise InvalidHyperparameter(f"beta must be > 0, got {self.beta}")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "_grid", _MoonRockGrid(self.alpha, self.beta))

    @classmethod
    def from_vector(cls, eta: np.ndarray) -> "MoonRockParams":
        """Natural vector (alpha, -beta) to parameters."""
        eta = np.asarray(eta, dtype=float)
        return cls(float(eta[0]), -float(eta[1]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.alpha, -self.beta])


def moonrock_log_normalizer(p: MoonRockParams) -> float:
    return p._grid.log_norm


def moonrock_normalizer(p: MoonRockParams) -> float:
    """The normalizing integral itself (use the log form internally)."""
    return float(np.exp(p._grid.log_norm))


def moonrock_mean(p: MoonRockParams) -> float:
    return p._grid.mean


def moonrock_variance(p: MoonRockParams) -> float:
    return p._grid.second_moment - p._grid.mean**2


def moonrock_log_density(p: MoonRockParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Moon Rock support is x > 0")
    out = -p.beta * x - p._grid.log_norm
    if p.alpha != 0.0:
        out = out + p.alpha * _xlogx_minus_lgamma(x)
    return float(out) if out.ndim == 0 else out


def _moonrock_cdf_grid(p: MoonRockParams, grid_size: int):
    """Uniform grid in s = log t over the range the normalizer expansion found,
    with the trapezoid-rule CDF along it."""
    g = p._grid
    s = np.linspace(float(g.s[0]), float(g.s[-1]), grid_size)
    logf = _moonrock_log_integrand(s, p.alpha, p.beta)
    f = np.exp(logf - float(np.max(logf)))
    cdf = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(s))))
    cdf /= cdf[-1]
    return s, cdf


def _moonrock_invert_cdf(s: np.ndarray, cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(cdf, u), 1, len(s) - 1)
    c_lo = cdf[idx - 1]
    c_hi = cdf[idx]
    frac = np.where(c_hi > c_lo, (u - c_lo) / (c_hi - c_lo), 0.5)
    return np.exp(s[idx - 1] + frac * (s[idx] - s[idx - 1]))


def moonrock_sample(p: MoonRockParams, rng, size=None, grid_size: int = 2048):
    """Inverse-CDF draws from a ``grid_size``-node grid over the same s-range
    the normalizer expansion found; the CDF is accumulated by the trapezoid
    rule and inverted with linear interpolation."""
    s, cdf = _moonrock_cdf_grid(p, grid_size)
    u = rng.uniform(size=1 if size is None else int(size))
    out = _moonrock_invert_cdf(s, cdf, u)
    return float(out[0]) if size is None else out


def moonrock_quantile(p: MoonRockParams, prob, grid_size: int = 2048):
    """Approximate quantile(s) from the same interpolated CDF the sampler uses."""
    prob = np.asarray(prob, dtype=float)
    if np.any(prob < 0) or np.any(prob > 1):
        raise DomainError("quantile probabilities must lie in [0, 1]")
    s, cdf = _moonrock_cdf_grid(p, grid_size)
    out = _moonrock_invert_cdf(s, cdf, np.atleast_1d(prob))
    return float(out[0]) if prob.ndim == 0 else out
