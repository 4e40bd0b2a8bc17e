"""Factor-to-node update rules for the message passing fragments.

Each update is a pure function from message inputs to message outputs.
Messages on variance-type nodes are natural vectors for the sufficient
statistic (log|X|, vech(X^{-1})) carrying an Inverse G-Wishart graph tag;
diag-tagged vectors keep their off-diagonal vech entries at zero (those
entries carry no information under the diagonal graph, and zeroing them makes
message equality checks exact). Messages on Gaussian nodes use the vech-form
natural vector, and messages on Moon Rock nodes the pair (alpha, -beta).
"""

from typing import NamedTuple

import numpy as np
from scipy.special import digamma

from . import matops
from .distributions import (
    CommonIGW,
    Graph,
    NaturalIGW,
    igw_mean_inverse,
    igw_to_natural,
    omega,
)
from .errors import ImproperMessage, InvalidShape, NonSPDScale

__all__ = [
    "IGWMessage",
    "IteratedIGWResult",
    "GaussianPenalizationResult",
    "TLikelihoodResult",
    "combined_mean_inverse",
    "canonical_eta",
    "igw_prior_update",
    "iterated_igw_update",
    "moonrock_prior_update",
    "gaussian_penalization_update",
    "t_likelihood_update",
]


class IGWMessage(NamedTuple):
    """A natural vector on a variance node together with its graph tag."""

    eta: np.ndarray
    graph: Graph


class IteratedIGWResult(NamedTuple):
    to_variance: IGWMessage
    to_auxiliary: IGWMessage


class GaussianPenalizationResult(NamedTuple):
    to_coefficients: np.ndarray
    to_variance: IGWMessage


class TLikelihoodResult(NamedTuple):
    to_coefficients: np.ndarray
    to_noise: IGWMessage
    to_df_half: np.ndarray
    b_shape: float
    b_rates: np.ndarray


def canonical_eta(eta: np.ndarray, graph: Graph) -> np.ndarray:
    """Zero the off-diagonal vech entries of a diag-tagged natural vector."""
    eta = np.asarray(eta, dtype=float)
    if graph is Graph.FULL:
        return eta
    out = eta.copy()
    M = matops.unvech(out[1:])
    out[1:] = matops.vech(np.diag(np.diag(M)))
    return out


def combined_mean_inverse(eta: np.ndarray, graph: Graph) -> np.ndarray:
    """E(X^{-1}) under the density a combined node message represents.

    Raises ImproperMessage when the combined vector does not describe a
    distribution with a finite mean inverse.
    """
    eta = np.asarray(eta, dtype=float)
    try:
        n = NaturalIGW.from_vector(graph, eta)
    except NonSPDScale as e:
        raise ImproperMessage(f"combined message is improper: {e}") from e
    return igw_mean_inverse(n)


def igw_prior_update(prior: CommonIGW) -> IGWMessage:
    """Message from an Inverse G-Wishart prior factor to its variance node.

    Constant across iterations: the natural vector of the prior itself.
    """
    n = igw_to_natural(prior)
    return IGWMessage(canonical_eta(n.to_vector(), prior.graph), prior.graph)


def _mean_inverse_raw(eta: np.ndarray, graph: Graph, d: int) -> np.ndarray:
    # the moment formula applied to a combined message that need not itself be
    # a proper density (its eta1 can sit between -d and -1 for the full graph)
    w = omega(graph, d)
    if not (eta[0] < -1.0):
        raise ImproperMessage(f"combined eta1 must be < -1, got {eta[0]}")
    if not (eta[0] + w < 0.0):
        raise ImproperMessage(
            f"mean inverse undefined: eta1 + omega = {eta[0] + w} is not negative"
        )
    Dp = matops.duplication_pinv(d)
    M = matops.vec_inverse(Dp.T @ eta[1:], d)
    M = 0.5 * (M + M.T)
    E = (eta[0] + w) * np.linalg.inv(M)
    E = 0.5 * (E + E.T)
    if graph is Graph.FULL:
        if not matops.is_spd(E):
            raise ImproperMessage("combined message implies a non-SPD mean inverse")
    elif np.any(np.diag(E) <= 0.0):
        raise ImproperMessage("combined message implies a non-positive mean inverse")
    return E


def iterated_igw_update(
    graph: Graph,
    xi: float,
    to_variance: np.ndarray,
    from_variance: np.ndarray,
    to_auxiliary: np.ndarray,
    from_auxiliary: IGWMessage,
    crossed: bool = True,
) -> IteratedIGWResult:
    """Update for a factor of the form p(Sigma | A) = IGW(graph, xi, A^{-1}).

    ``to_*`` are the factor's messages from the previous iteration and
    ``from_*`` the current node-to-factor messages. The returned message to
    the variance node carries ``graph``; the one to the auxiliary node carries
    the auxiliary's own graph, taken from ``from_auxiliary``.

    The two halves run in sequence: the variance-side expectation uses the
    freshly updated variance message, not the previous one. Started from the
    documented initial messages this keeps every combined vector proper from
    the first sweep, which a simultaneous update does not.

    ``crossed`` selects which edge's graph controls the conditional
    diagonal projection of each expectation (True: the opposite edge's).
    Because diag-tagged vectors are kept canonical, both settings produce
    identical messages; the flag exists so that tests can document this.
    """
    aux_graph = from_auxiliary.graph
    to_variance = np.asarray(to_variance, dtype=float)
    from_variance = np.asarray(from_variance, dtype=float)
    to_auxiliary = np.asarray(to_auxiliary, dtype=float)
    d = matops.dim_from_vech_len(to_variance.size - 1)
    if graph is Graph.FULL and not (xi > 2 * d - 2):
        raise InvalidShape(f"full graph requires xi > {2 * d - 2}, got {xi}")
    if xi <= 0:
        raise InvalidShape(f"xi must be positive, got {xi}")

    both_auxiliary = canonical_eta(to_auxiliary + from_auxiliary.eta, aux_graph)

    mean_inv_aux = _mean_inverse_raw(both_auxiliary, aux_graph, d)
    if (graph if crossed else aux_graph) is Graph.DIAG:
        mean_inv_aux = np.diag(np.diag(mean_inv_aux))
    D = matops.duplication(d)
    eta_to_variance = np.concatenate(
        ([-(xi + 2.0) / 2.0], -0.5 * (D.T @ matops.vec(mean_inv_aux)))
    )

    both_variance = canonical_eta(eta_to_variance + from_variance, graph)
    w2 = omega(graph, d)
    mean_inv_var = _mean_inverse_raw(both_variance, graph, d)
    if (aux_graph if crossed else graph) is Graph.DIAG:
        mean_inv_var = np.diag(np.diag(mean_inv_var))
    eta_to_auxiliary = np.concatenate(
        ([-(xi + 2.0 - 2.0 * w2) / 2.0], -0.5 * (D.T @ matops.vec(mean_inv_var)))
    )

    return IteratedIGWResult(
        IGWMessage(canonical_eta(eta_to_variance, graph), graph),
        IGWMessage(canonical_eta(eta_to_auxiliary, aux_graph), aux_graph),
    )


def moonrock_prior_update(alpha: float, beta: float) -> np.ndarray:
    """Constant message from a Moon Rock prior factor: (alpha, -beta)."""
    return np.array([float(alpha), -float(beta)])


def gaussian_penalization_update(
    mean_coeffs: np.ndarray,
    cov_coeffs: np.ndarray,
    n_fixed: int,
    n_groups: int,
    sigma_beta: float,
    mean_inv_variance: np.ndarray,
) -> GaussianPenalizationResult:
    """Update for the factor N((beta, u); 0, blockdiag(sigma_beta^2 I, I (x) Sigma)).

    ``mean_coeffs`` and ``cov_coeffs`` are the current moments of
    q(beta, u); ``mean_inv_variance`` is E_q(Sigma^{-1}).
    """
    q = mean_inv_variance.shape[0]
    k = n_fixed + n_groups * q
    if mean_coeffs.size != k or cov_coeffs.shape != (k, k):
        raise InvalidShape(
            f"coefficient moments must have dimension {k}, got "
            f"{mean_coeffs.size} and {cov_coeffs.shape}"
        )
    precision = matops.blockdiag(
        [np.eye(n_fixed) / sigma_beta**2]
        + [mean_inv_variance for _ in range(n_groups)]
    )
    Dk = matops.duplication(k)
    to_coefficients = np.concatenate(
        (np.zeros(k), -0.5 * (Dk.T @ matops.vec(precision)))
    )

    S = np.zeros((q, q))
    for i in range(n_groups):
        sl = slice(n_fixed + i * q, n_fixed + (i + 1) * q)
        mu_i = mean_coeffs[sl]
        S += np.outer(mu_i, mu_i) + cov_coeffs[sl, sl]
    Dq = matops.duplication(q)
    eta_var = np.concatenate(([-n_groups / 2.0], -0.5 * (Dq.T @ matops.vec(S))))
    return GaussianPenalizationResult(
        to_coefficients, IGWMessage(eta_var, Graph.FULL)
    )


def t_likelihood_update(
    y: np.ndarray,
    C: np.ndarray,
    mean_coeffs: np.ndarray,
    cov_coeffs: np.ndarray,
    mean_inv_noise: float,
    mean_df_half: float,
) -> TLikelihoodResult:
    """Joint update for the pair of factors attaching t-distributed responses.

    The responses enter through y_l | coeffs, sigma^2, b_l ~ N((C coeffs)_l,
    sigma^2 b_l) with b_l | upsilon ~ Inverse-chi^2(2 upsilon, 2 upsilon); the
    b_l are marginalized in closed form every update, so no messages are
    stored on them.
    """
    y = np.asarray(y, dtype=float)
    C = np.asarray(C, dtype=float)
    n = y.size
    resid = y - C @ mean_coeffs
    r = resid**2 + np.einsum("ij,jk,ik->i", C, cov_coeffs, C)

    b_shape = 2.0 * mean_df_half + 1.0
    b_rates = 2.0 * mean_df_half + mean_inv_noise * r
    mean_inv_b = b_shape / b_rates
    mean_log_b = np.log(b_rates / 2.0) - digamma(b_shape / 2.0)

    W = mean_inv_b
    k = mean_coeffs.size
    Dk = matops.duplication(k)
    CtW = C.T * W
    to_coefficients = np.concatenate(
        (mean_inv_noise * (CtW @ y), -0.5 * mean_inv_noise * (Dk.T @ matops.vec(CtW @ C)))
    )
    to_noise = IGWMessage(
        np.array([-n / 2.0, -0.5 * float(np.sum(mean_inv_b * r))]), Graph.FULL
    )
    to_df_half = np.array([float(n), -float(np.sum(mean_log_b + mean_inv_b))])
    return TLikelihoodResult(to_coefficients, to_noise, to_df_half, b_shape, b_rates)
