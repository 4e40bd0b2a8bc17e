"""Gibbs sampler for the t-response linear mixed model.

The augmented model (scale-mixture variables b, auxiliary scale matrices A
and a) has standard full conditionals for every block except the half
degrees of freedom, which is drawn by inverse-CDF over the quadrature grid
of its two-parameter conjugate density. The sampler serves as a simulation
ground truth for the variational fit.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.stats import gaussian_kde, norm

from scipy.optimize import brentq

from . import matops
from .distributions import (
    CommonIGW,
    Graph,
    MoonRockParams,
    igw_sample,
    inv_chisq_sample,
    moonrock_mean,
    moonrock_sample,
    moonrock_variance,
)
from .errors import (
    DimensionMismatch,
    DivergentIntegral,
    DomainError,
    InvalidHyperparameter,
    NumericalFailure,
)
from .tlmm import TLMMData, TLMMHyper, assemble_design, coefficient_names

__all__ = [
    "GibbsConfig",
    "ChainOutput",
    "ChainSummary",
    "ParameterSummary",
    "draw_coefficients",
    "draw_scale_mixture",
    "draw_noise_variance",
    "draw_noise_auxiliary",
    "draw_random_cov",
    "draw_cov_auxiliary",
    "draw_df_half",
    "gibbs_fit",
    "summarize",
    "match_inv_chisq",
    "match_igw_full",
    "match_moonrock",
]

# the covariance prior level fixed by the model (uniform correlations)
HW_SHAPE = 2.0


@dataclass(frozen=True)
class GibbsConfig:
    """Chain settings: warmup discarded, kept retained, and the grid size
    for the degrees-of-freedom inverse-CDF draw."""

    warmup: int = 1000
    kept: int = 5000
    seed: int = 0
    nu_grid_size: int = 2048

    def __post_init__(self):
        if self.warmup < 0 or self.kept < 1:
            raise InvalidHyperparameter("need warmup >= 0 and kept >= 1")
        if self.nu_grid_size < 64:
            raise InvalidHyperparameter("nu_grid_size must be at least 64")


class ChainOutput(NamedTuple):
    """Retained draws. ``coefficients`` has one column per entry of (beta, u)
    named in ``names``; ``Sigma`` stacks q x q matrices; ``A`` holds the
    diagonal of the covariance auxiliary matrix."""

    names: tuple
    coefficients: np.ndarray
    sigma2: np.ndarray
    Sigma: np.ndarray
    nu: np.ndarray
    a: np.ndarray
    A: np.ndarray


class ParameterSummary(NamedTuple):
    mean: float
    sd: float
    grid: np.ndarray
    density: np.ndarray
    split_z: float


@dataclass(frozen=True)
class ChainSummary:
    """Per-parameter moments and kernel density grids, with a split-half
    mean-agreement diagnostic (z per parameter; the overall flag compares
    the worst z against a threshold sized for the number of parameters)."""

    parameters: dict
    converged: bool
    z_threshold: float


# ---------------------------------------------------------------------------
# full conditionals
# ---------------------------------------------------------------------------


def draw_coefficients(rng, y, C, b, sigma2, Sigma, fixed_scale, n_fixed, n_groups):
    """(beta, u) | rest is Gaussian with precision C'WC/sigma2 plus the
    prior block diagonal, W = diag(1/b)."""
    q = Sigma.shape[0]
    w = 1.0 / b
    M = (C.T * w) @ C / sigma2
    M[:n_fixed, :n_fixed] += np.eye(n_fixed) / fixed_scale**2
    try:
        Sig_inv = np.linalg.inv(Sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("random-effects covariance draw is singular") from exc
    Sig_inv = 0.5 * (Sig_inv + Sig_inv.T)
    for i in range(n_groups):
        s = n_fixed + i * q
        M[s : s + q, s : s + q] += Sig_inv
    rhs = C.T @ (w * y) / sigma2
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("coefficient conditional precision is not SPD") from exc
    mean = cho_solve((L, True), rhs)
    z = rng.standard_normal(M.shape[0])
    return mean + solve_triangular(L, z, lower=True, trans="T")


def draw_scale_mixture(rng, resid, sigma2, upsilon):
    """b_l | rest, one inverse-chi^2 per observation."""
    lam = 2.0 * upsilon + resid**2 / sigma2
    return inv_chisq_sample(2.0 * upsilon + 1.0, lam, rng, size=resid.size)


def draw_noise_variance(rng, resid, b, a_aux):
    lam = 1.0 / a_aux + np.sum(resid**2 / b)
    return inv_chisq_sample(resid.size + 1.0, lam, rng)


def draw_noise_auxiliary(rng, sigma2, noise_scale):
    return inv_chisq_sample(2.0, 1.0 / sigma2 + 1.0 / noise_scale**2, rng)


def draw_random_cov(rng, u, A_diag):
    """Sigma | rest is inverse Wishart with shape 2q + m in the xi
    convention; u is the m x q matrix of current random effects."""
    q = A_diag.size
    Lam = np.diag(1.0 / A_diag) + u.T @ u
    Lam = 0.5 * (Lam + Lam.T)
    draw = igw_sample(CommonIGW(Graph.FULL, 2.0 * q + u.shape[0], Lam), rng)
    if not matops.is_spd(draw):
        raise NumericalFailure("covariance draw is not SPD")
    return draw


def draw_cov_auxiliary(rng, Sigma, scales):
    """A_jj | rest are independent inverse-chi^2; the shape q + 2 combines
    the prior's 1 with the conditional covariance level."""
    q = scales.size
    try:
        Sig_inv = np.linalg.inv(Sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("covariance draw is singular") from exc
    lam = np.diag(Sig_inv) + 1.0 / (HW_SHAPE * scales**2)
    return inv_chisq_sample(q + 2.0, lam, rng, size=q)


def draw_df_half(rng, b, df_rate, grid_size=2048):
    """upsilon | rest follows the conjugate two-parameter density with
    alpha = N and beta = lambda_nu + sum(log b + 1/b)."""
    beta = df_rate + float(np.sum(np.log(b) + 1.0 / b))
    return moonrock_sample(MoonRockParams(float(b.size), beta), rng, grid_size=grid_size)


# ---------------------------------------------------------------------------
# the sampler
# ---------------------------------------------------------------------------


def _prior_only_chain(hyper, cfg, rng):
    """Two-block Gibbs on the covariance construction alone, plus exact
    prior draws for the remaining scalars."""
    q = len(hyper.random_scales)
    scales = np.asarray(hyper.random_scales, dtype=float)
    Sigma = np.eye(q)
    A_diag = np.ones(q)
    sigma2 = 1.0
    a_aux = 1.0
    u_empty = np.zeros((0, q))

    out_Sigma = np.empty((cfg.kept, q, q))
    out_sigma2 = np.empty(cfg.kept)
    out_a = np.empty(cfg.kept)
    out_A = np.empty((cfg.kept, q))
    for it in range(cfg.warmup + cfg.kept):
        Sigma = draw_random_cov(rng, u_empty, A_diag)
        A_diag = draw_cov_auxiliary(rng, Sigma, scales)
        sigma2 = inv_chisq_sample(1.0, 1.0 / a_aux, rng)
        a_aux = draw_noise_auxiliary(rng, sigma2, hyper.noise_scale)
        if it >= cfg.warmup:
            j = it - cfg.warmup
            out_Sigma[j] = Sigma
            out_A[j] = A_diag
            out_sigma2[j] = sigma2
            out_a[j] = a_aux
    # the degrees of freedom are independent of everything under the prior
    out_nu = 2.0 * moonrock_sample(
        MoonRockParams(0.0, hyper.df_rate), rng, size=cfg.kept, grid_size=cfg.nu_grid_size
    )
    return ChainOutput(
        (), np.empty((cfg.kept, 0)), out_sigma2, out_Sigma, out_nu, out_a, out_A
    )


def gibbs_fit(
    data: Optional[TLMMData],
    hyper: Optional[TLMMHyper] = None,
    cfg: Optional[GibbsConfig] = None,
    design: str = "slope",
    init: Optional[dict] = None,
) -> ChainOutput:
    """Run the Gibbs sampler and return the retained draws.

    ``data=None`` runs the prior alone (no likelihood, no coefficients),
    which is how the covariance prior's marginals can be checked. ``init``
    may override starting values by key: coefficients, sigma2, Sigma, a, A,
    b, nu.
    """
    cfg = cfg if cfg is not None else GibbsConfig()
    rng = np.random.default_rng(cfg.seed)
    if data is None:
        hyper = hyper if hyper is not None else TLMMHyper()
        return _prior_only_chain(hyper, cfg, rng)

    des = assemble_design(data, design)
    p, q, m = des.n_fixed, des.n_random, des.n_groups
    if hyper is None:
        hyper = TLMMHyper.diffuse(q)
    if len(hyper.random_scales) != q:
        raise DimensionMismatch(
            f"{q} random-effect components need {q} scales, got "
            f"{len(hyper.random_scales)}"
        )
    scales = np.asarray(hyper.random_scales, dtype=float)
    y, C = data.y, des.C
    k = p + m * q

    theta = np.zeros(k)
    sigma2 = 1.0
    Sigma = np.eye(q)
    A_diag = np.ones(q)
    a_aux = 1.0
    b = np.ones(data.n_obs)
    upsilon = 1.0
    if init:
        theta = np.asarray(init.get("coefficients", theta), dtype=float).copy()
        sigma2 = float(init.get("sigma2", sigma2))
        Sigma = np.asarray(init.get("Sigma", Sigma), dtype=float).copy()
        A_diag = np.asarray(init.get("A", A_diag), dtype=float).copy()
        a_aux = float(init.get("a", a_aux))
        b = np.asarray(init.get("b", b), dtype=float).copy()
        upsilon = float(init.get("nu", 2.0 * upsilon)) / 2.0
    if theta.shape != (k,) or Sigma.shape != (q, q) or sigma2 <= 0:
        raise DimensionMismatch("initial state does not match the model layout")

    out_coeff = np.empty((cfg.kept, k))
    out_sigma2 = np.empty(cfg.kept)
    out_Sigma = np.empty((cfg.kept, q, q))
    out_nu = np.empty(cfg.kept)
    out_a = np.empty(cfg.kept)
    out_A = np.empty((cfg.kept, q))

    for it in range(cfg.warmup + cfg.kept):
        resid = y - C @ theta
        b = draw_scale_mixture(rng, resid, sigma2, upsilon)
        upsilon = draw_df_half(rng, b, hyper.df_rate, cfg.nu_grid_size)
        sigma2 = draw_noise_variance(rng, resid, b, a_aux)
        a_aux = draw_noise_auxiliary(rng, sigma2, hyper.noise_scale)
        u = theta[p:].reshape(m, q)
        Sigma = draw_random_cov(rng, u, A_diag)
        A_diag = draw_cov_auxiliary(rng, Sigma, scales)
        theta = draw_coefficients(
            rng, y, C, b, sigma2, Sigma, hyper.fixed_scale, p, m
        )
        if it >= cfg.warmup:
            j = it - cfg.warmup
            out_coeff[j] = theta
            out_sigma2[j] = sigma2
            out_Sigma[j] = Sigma
            out_nu[j] = 2.0 * upsilon
            out_a[j] = a_aux
            out_A[j] = A_diag

    if np.any(out_sigma2 <= 0) or not np.all(np.isfinite(out_coeff)):
        raise NumericalFailure("chain produced non-finite or non-positive draws")
    return ChainOutput(
        coefficient_names(p, q, m),
        out_coeff,
        out_sigma2,
        out_Sigma,
        out_nu,
        out_a,
        out_A,
    )


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def _density_grid(draws, grid_size):
    sd = float(np.std(draws))
    if sd == 0.0:
        center = float(draws[0])
        width = max(abs(center), 1.0) * 1e-8
        grid = np.linspace(center - 6 * width, center + 6 * width, grid_size)
        dens = np.exp(-0.5 * ((grid - center) / width) ** 2) / (
            width * np.sqrt(2 * np.pi)
        )
        return grid, dens
    kde = gaussian_kde(draws, bw_method="silverman")
    h = float(np.sqrt(kde.covariance[0, 0]))
    grid = np.linspace(float(np.min(draws)) - 3 * h, float(np.max(draws)) + 3 * h, grid_size)
    return grid, kde(grid)


def _split_half_z(draws, n_batches=10):
    """Half-mean disagreement in batch-means standard errors."""
    half = draws.size // 2
    zs = []
    ses = []
    means = []
    for part in (draws[:half], draws[half : 2 * half]):
        batches = np.array_split(part, n_batches)
        bm = np.array([np.mean(chunk) for chunk in batches])
        means.append(float(np.mean(part)))
        ses.append(float(np.std(bm, ddof=1) / np.sqrt(len(batches))))
    denom = float(np.hypot(*ses))
    diff = abs(means[0] - means[1])
    if denom == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return diff / denom


# ---------------------------------------------------------------------------
# moment matching, for serializing chains in the parametric posterior schema
# ---------------------------------------------------------------------------


def match_inv_chisq(draws):
    """(delta, lambda) of the inverse-chi^2 with the draws' mean and variance.

    From mean = lambda/(delta-2) and var = 2 mean^2/(delta-4)."""
    m = float(np.mean(draws))
    v = float(np.var(draws, ddof=1))
    if m <= 0 or v <= 0:
        raise DomainError("moment matching needs positive mean and variance")
    delta = 4.0 + 2.0 * m * m / v
    return delta, m * (delta - 2.0)


def match_igw_full(Sigma_draws) -> CommonIGW:
    """Full-graph (xi, Lambda) matching the draws' E(Sigma) and E(Sigma^-1).

    tr(E(Sigma^-1) E(Sigma)) = q(xi - q + 1)/(xi - 2q) pins xi; Lambda then
    follows from the mean. Jensen makes the trace ratio exceed 1 for any
    non-degenerate sample, which keeps the matched xi above 2q.
    """
    mean = Sigma_draws.mean(axis=0)
    mean_inv = np.linalg.inv(Sigma_draws).mean(axis=0)
    q = mean.shape[-1]
    c = float(np.trace(mean_inv @ mean)) / q
    if c <= 1.0:
        raise NumericalFailure("degenerate covariance draws cannot be matched")
    xi = (2.0 * q * c - q + 1.0) / (c - 1.0)
    Lam = (xi - 2.0 * q) * mean
    return CommonIGW(Graph.FULL, xi, 0.5 * (Lam + Lam.T))


def _beta_matching_mean(alpha: float, target: float) -> float:
    """The rate at which the two-parameter density has the target mean; the
    mean decreases from infinity to zero as beta rises above alpha."""

    def mean_at(g):
        return moonrock_mean(MoonRockParams(alpha, alpha + g))

    g = max(1.0 / target, 1e-2)
    if mean_at(g) >= target:
        lo = g
        while mean_at(lo * 4.0) >= target:
            lo *= 4.0
            if lo > 1e12:
                raise NumericalFailure("mean matching failed to bracket")
        hi = lo * 4.0
    else:
        hi = g
        while True:
            candidate = hi / 4.0
            try:
                if mean_at(candidate) >= target:
                    break
            except DivergentIntegral:
                # so close to the propriety boundary that the quadrature
                # gave up; the mean there is certainly above target
                break
            hi = candidate
            if hi < 1e-12:
                break
        lo = hi / 4.0
    root = brentq(lambda s: mean_at(np.exp(s)) - target, np.log(lo), np.log(hi), xtol=1e-12)
    return alpha + float(np.exp(root))


def match_moonrock(draws) -> MoonRockParams:
    """Parameters matching the draws' mean and variance.

    A sample at least as dispersed as an exponential gets the alpha = 0
    member (variance cannot exceed mean^2 beyond it); otherwise alpha is
    solved so the variance matches, with beta re-solved for the mean at
    each candidate.
    """
    m = float(np.mean(draws))
    v = float(np.var(draws, ddof=1))
    if m <= 0 or v <= 0:
        raise DomainError("moment matching needs positive mean and variance")
    if v >= m * m:
        return MoonRockParams(0.0, 1.0 / m)

    def excess(log_alpha):
        alpha = float(np.exp(log_alpha))
        beta = _beta_matching_mean(alpha, m)
        return moonrock_variance(MoonRockParams(alpha, beta)) - v

    lo = np.log(1e-4)
    hi = np.log(1.0)
    while excess(hi) > 0:
        hi += np.log(8.0)
        if hi > np.log(1e9):
            raise NumericalFailure("variance matching failed to bracket")
    while excess(lo) < 0:
        lo -= np.log(8.0)
        if lo < np.log(1e-12):
            raise NumericalFailure("variance matching failed to bracket")
    root = brentq(excess, lo, hi, xtol=1e-10)
    alpha = float(np.exp(root))
    return MoonRockParams(alpha, _beta_matching_mean(alpha, m))


def summarize(chain: ChainOutput, grid_size: int = 401) -> ChainSummary:
    """Means, standard deviations, and Gaussian-kernel density grids per
    scalar parameter, with derived noise and covariance scales.

    The noise scale is summarized as sigma = sqrt(sigma2); the covariance
    contributes sigma_j = sqrt(Sigma_jj) and each pairwise correlation.
    """
    kept = chain.sigma2.size
    if kept < 100:
        raise DomainError(f"summaries need at least 100 retained draws, got {kept}")
    series = {}
    for i, name in enumerate(chain.names):
        series[name] = chain.coefficients[:, i]
    series["sigma"] = np.sqrt(chain.sigma2)
    q = chain.Sigma.shape[-1]
    sds = np.sqrt(chain.Sigma[:, np.arange(q), np.arange(q)])
    for j in range(q):
        series[f"sigma{j + 1}"] = sds[:, j]
    for i in range(q):
        for j in range(i + 1, q):
            name = "rho" if q == 2 else f"rho[{i + 1},{j + 1}]"
            series[name] = chain.Sigma[:, i, j] / (sds[:, i] * sds[:, j])
    series["nu"] = chain.nu

    parameters = {}
    worst = 0.0
    for name, draws in series.items():
        grid, dens = _density_grid(draws, grid_size)
        z = _split_half_z(draws)
        worst = max(worst, z)
        parameters[name] = ParameterSummary(
            float(np.mean(draws)), float(np.std(draws, ddof=1)), grid, dens, z
        )
    # family-wise version of the two-standard-error rule
    threshold = float(norm.ppf(1.0 - 0.025 / len(series)))
    return ChainSummary(parameters, bool(worst < threshold), threshold)
