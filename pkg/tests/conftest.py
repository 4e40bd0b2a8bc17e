"""Shared numerical oracles for marginalization checks.

These integrate two-level prior constructions by brute force so that tests
can compare against closed-form target densities through an independent
route.
"""

import numpy as np

from igwvmp.distributions import Graph, igw_sample, inv_chisq_log_density
from igwvmp.prior_specs import PriorPlan


def marginal_variance_density(plan: PriorPlan, xs, u_span=50.0, n_grid=20001):
    """Marginal density of a scalar variance under a two-level plan.

    Integrates p(x | a) p(a) over the auxiliary variable on a logarithmic
    trapezoid grid. Only d = 1 plans are supported.
    """
    assert plan.conditional is not None and plan.dim == 1
    delta_aux = plan.prior_factor.xi
    lam_aux = float(plan.prior_factor.Lambda[0, 0])
    xi = plan.conditional.xi
    # center the grid where the auxiliary prior puts its mass
    u0 = np.log(lam_aux)
    u = np.linspace(u0 - u_span, u0 + u_span, n_grid)
    a = np.exp(u)
    log_prior = inv_chisq_log_density(delta_aux, lam_aux, a) + u  # + u: da = a du
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty_like(xs)
    for i, x in enumerate(xs):
        log_cond = inv_chisq_log_density(xi, 1.0 / a, x)
        ly = log_cond + log_prior
        m = ly.max()
        out[i] = np.exp(m) * np.trapezoid(np.exp(ly - m), u)
    return out if out.size > 1 else float(out[0])


def half_t_variance_density(xs, scale, df):
    """Closed-form density of sigma^2 when sigma ~ Half-t(scale, df)."""
    from scipy import stats

    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    sig = np.sqrt(xs)
    out = stats.t.pdf(sig / scale, df) / (scale * sig)
    return out if out.size > 1 else float(out[0])


def _bartlett_batch(nu, d, rng, n):
    A = np.zeros((n, d, d))
    if d > 1:
        ir, ic = np.tril_indices(d, -1)
        A[:, ir, ic] = rng.standard_normal((n, ir.size))
    for j in range(d):
        A[:, j, j] = np.sqrt(rng.chisquare(nu - j, n))
    return A


def sample_from_plan(plan: PriorPlan, rng, size):
    """Draws of the variance matrix under a plan, via its construction.

    The conditional factor is IGW(graph, xi, A^{-1}) given the auxiliary
    draw A, so for the full graph Sigma^{-1} | A ~ Wishart(xi - d + 1, A).
    """
    if plan.conditional is None:
        return igw_sample(plan.prior_factor, rng, size=size)
    aux = igw_sample(plan.prior_factor, rng, size=size)
    cond = plan.conditional
    d = plan.dim
    if cond.graph is Graph.FULL:
        A = _bartlett_batch(cond.xi - d + 1.0, d, rng, size)
        M = np.linalg.cholesky(aux) @ A
        W = M @ np.swapaxes(M, 1, 2)
        out = np.linalg.inv(W)
        return 0.5 * (out + np.swapaxes(out, 1, 2))
    diag_aux = np.diagonal(aux, axis1=1, axis2=2)
    assert np.allclose(aux, aux * np.eye(d)), "diag conditional needs diagonal aux"
    draws = (1.0 / diag_aux) / rng.chisquare(cond.xi, (size, d))
    out = np.zeros((size, d, d))
    idx = np.arange(d)
    out[:, idx, idx] = draws
    return out
