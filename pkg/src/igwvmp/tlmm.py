"""Variational inference for the t-response linear mixed model.

The model has grouped responses with fixed effects beta, per-group random
effects u_i, t-distributed noise with scale sigma and degrees of freedom
nu = 2 upsilon, a Huang-Wand prior on the random-effects covariance and a
Half-Cauchy prior on sigma. Inference runs by message passing on a factor
graph with eight factors and six stochastic nodes; the per-observation
scale-mixture variables are marginalized inside the likelihood updates.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import gammaln

from . import fragments as fr
from . import matops
from .distributions import (
    CommonIGW,
    Graph,
    MoonRockParams,
    NaturalIGW,
    NaturalMVN,
    igw_from_natural,
    implied_scale,
    moonrock_log_density,
    moonrock_mean,
    moonrock_quantile,
    moonrock_variance,
    mvn_from_natural,
)
from .errors import (
    DimensionMismatch,
    DomainError,
    ImproperMessage,
    InvalidHyperparameter,
    NotConverged,
)
from .graph_engine import ConvergenceReport, Factor, FactorGraph, Message, Node
from .prior_specs import HalfCauchySpec, HuangWandSpec, plan_prior

__all__ = [
    "TRUE_BETA",
    "TRUE_NOISE_VARIANCE",
    "TRUE_RANDOM_COV",
    "TRUE_DF",
    "TLMMData",
    "TLMMHyper",
    "TLMMTruth",
    "DesignInfo",
    "PosteriorSummary",
    "TLMMFit",
    "assemble_design",
    "coefficient_names",
    "simulate",
    "initial_messages",
    "build_graph",
    "df_density_grid",
    "fit",
]

TRUE_BETA = (-0.58, 1.89)
TRUE_NOISE_VARIANCE = 0.2
TRUE_RANDOM_COV = ((2.58, 0.22), (0.22, 1.73))
TRUE_DF = 1.5

NODE_NAMES = ("cov_aux", "noise_aux", "cov", "noise", "coefficients", "df_half")
FACTOR_NAMES = (
    "cov_aux_prior",
    "noise_aux_prior",
    "cov_conditional",
    "noise_conditional",
    "coefficient_prior",
    "likelihood",
    "scale_mix",
    "df_prior",
)


@dataclass(frozen=True)
class TLMMData:
    """Grouped regression data: responses, a scalar predictor, and
    zero-based group labels covering 0..m-1."""

    y: np.ndarray
    x: np.ndarray
    group: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).copy()
        x = np.asarray(self.x, dtype=float).copy()
        group = np.asarray(self.group).copy()
        if y.ndim != 1 or x.shape != y.shape or group.shape != y.shape:
            raise DimensionMismatch(
                f"y, x, group must be equal-length vectors, got "
                f"{y.shape}, {x.shape}, {group.shape}"
            )
        if not np.issubdtype(group.dtype, np.integer):
            if not np.all(group == np.floor(group)):
                raise DimensionMismatch("group labels must be integers")
            group = group.astype(int)
        if y.size == 0:
            raise DimensionMismatch("data must contain at least one observation")
        m = int(group.max()) + 1
        present = np.unique(group)
        if group.min() < 0 or present.size != m:
            raise DimensionMismatch(
                "group labels must cover 0..m-1 with every label present"
            )
        for a in (y, x, group):
            a.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "group", group)

    @property
    def n_obs(self) -> int:
        return self.y.size

    @property
    def n_groups(self) -> int:
        return int(self.group.max()) + 1


@dataclass(frozen=True)
class TLMMHyper:
    """Prior hyperparameters: the fixed-effects scale sigma_beta, the noise
    Half-Cauchy scale, the per-component Huang-Wand scales for the random
    effects, and the rate of the exponential prior on the half degrees of
    freedom."""

    fixed_scale: float = 1e5
    noise_scale: float = 1e5
    random_scales: tuple = (1e5, 1e5)
    df_rate: float = 0.01

    def __post_init__(self):
        scales = tuple(float(s) for s in self.random_scales)
        if (
            self.fixed_scale <= 0
            or self.noise_scale <= 0
            or self.df_rate <= 0
            or any(s <= 0 for s in scales)
        ):
            raise InvalidHyperparameter("all hyperparameters must be positive")
        object.__setattr__(self, "fixed_scale", float(self.fixed_scale))
        object.__setattr__(self, "noise_scale", float(self.noise_scale))
        object.__setattr__(self, "random_scales", scales)
        object.__setattr__(self, "df_rate", float(self.df_rate))

    @classmethod
    def diffuse(cls, n_random: int) -> "TLMMHyper":
        """The example's weakly informative setting, sized to q components."""
        return cls(random_scales=(1e5,) * n_random)


class DesignInfo(NamedTuple):
    """Assembled design: C = [X Z] with X the fixed-effects columns and Z
    the group-block random-effects columns."""

    C: np.ndarray
    n_fixed: int
    n_random: int
    n_groups: int


class TLMMTruth(NamedTuple):
    beta: np.ndarray
    u: np.ndarray
    noise_variance: float
    random_cov: np.ndarray
    df: float


def assemble_design(data: TLMMData, design: str = "slope") -> DesignInfo:
    """Build C = [X Z].

    ``slope`` and ``intercept`` pair fixed intercept-plus-predictor columns
    with a random intercept and slope (q=2) or a random intercept alone
    (q=1). ``micro`` is the minimal intercept-only layout (p=q=1) used by
    degenerate smoke tests.
    """
    ones = np.ones(data.n_obs)
    if design == "slope":
        X = np.column_stack((ones, data.x))
        z = np.column_stack((ones, data.x))
    elif design == "intercept":
        X = np.column_stack((ones, data.x))
        z = ones[:, None]
    elif design == "micro":
        X = ones[:, None]
        z = ones[:, None]
    else:
        raise InvalidHyperparameter(f"unknown design {design!r}")
    q = z.shape[1]
    m = data.n_groups
    Z = np.zeros((data.n_obs, m * q))
    rows = np.arange(data.n_obs)
    for j in range(q):
        Z[rows, data.group * q + j] = z[:, j]
    return DesignInfo(np.hstack((X, Z)), X.shape[1], q, m)


def coefficient_names(n_fixed: int, n_random: int, n_groups: int):
    """Labels matching C's columns: beta0..; then u[i,j] for group i
    (1-based) and component j."""
    names = [f"beta{j}" for j in range(n_fixed)]
    for i in range(n_groups):
        names.extend(f"u[{i + 1},{j}]" for j in range(n_random))
    return tuple(names)


def simulate(
    seed=None,
    n_groups: int = 20,
    group_size: int = 15,
    beta=TRUE_BETA,
    noise_variance: float = TRUE_NOISE_VARIANCE,
    random_cov=TRUE_RANDOM_COV,
    df: float = TRUE_DF,
    design: str = "slope",
):
    """Draw one data set from the model with the given truth.

    Predictors are Uniform(0,1), random effects are Gaussian with covariance
    ``random_cov``, and noise is sigma times a standard t with ``df`` degrees
    of freedom. Returns (data, truth).
    """
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    Sigma = np.atleast_2d(np.asarray(random_cov, dtype=float))
    if n_groups < 1 or group_size < 1:
        raise InvalidHyperparameter("n_groups and group_size must be positive")
    if noise_variance < 0 or df <= 0:
        raise InvalidHyperparameter("noise_variance must be >= 0 and df > 0")
    if not matops.is_spd(Sigma):
        raise InvalidHyperparameter("random_cov must be SPD")
    q_design = 2 if design == "slope" else 1
    p_design = 1 if design == "micro" else 2
    if Sigma.shape[0] != q_design:
        raise DimensionMismatch(
            f"random_cov is {Sigma.shape[0]}x{Sigma.shape[0]} but the "
            f"{design} design has {q_design} random effects per group"
        )
    if beta.shape != (p_design,):
        raise DimensionMismatch(
            f"beta must have {p_design} entries for the {design} design"
        )

    n = n_groups * group_size
    x = rng.uniform(size=n)
    group = np.repeat(np.arange(n_groups), group_size)
    L = np.linalg.cholesky(Sigma)
    u = rng.standard_normal((n_groups, Sigma.shape[0])) @ L.T

    data0 = TLMMData(np.zeros(n), x, group)
    des = assemble_design(data0, design)
    coeffs = np.concatenate((beta, u.ravel()))
    y = des.C @ coeffs + np.sqrt(noise_variance) * rng.standard_t(df, size=n)
    return (
        TLMMData(y, x, group),
        TLMMTruth(beta, u, float(noise_variance), Sigma, float(df)),
    )


# ---------------------------------------------------------------------------
# q* extraction
# ---------------------------------------------------------------------------


def extract_gaussian(eta: np.ndarray, k: int):
    """Mean and covariance of the Gaussian with vech-form natural vector."""
    return mvn_from_natural(NaturalMVN.from_vector(np.asarray(eta, dtype=float), k))


def extract_igw_full(eta: np.ndarray) -> CommonIGW:
    """Common (xi, Lambda) form of a full-graph combined natural vector."""
    return igw_from_natural(NaturalIGW.from_vector(Graph.FULL, np.asarray(eta, dtype=float)))


def extract_inv_chisq(eta) -> tuple:
    """(delta, lambda) of the scalar-variance density the combined vector
    represents."""
    eta = np.asarray(eta, dtype=float)
    delta = -2.0 * eta[0] - 2.0
    lam = -2.0 * eta[1]
    if delta <= 0 or lam <= 0:
        raise ImproperMessage(
            f"combined vector implies delta={delta}, lambda={lam}; both must be positive"
        )
    return float(delta), float(lam)


def df_density_grid(
    df_half: MoonRockParams,
    n_points: int = 401,
    lower: float = 1e-3,
    tail: float = 1e-10,
):
    """Evaluate the degrees-of-freedom posterior density q(nu) = q(2 upsilon)
    on an equally spaced grid whose upper end leaves less than ``tail`` mass
    beyond it."""
    hi = 2.0 * moonrock_quantile(df_half, 1.0 - tail)
    nu = np.linspace(lower, hi, n_points)
    density = 0.5 * np.exp(moonrock_log_density(df_half, nu / 2.0))
    return nu, density


@dataclass(frozen=True)
class PosteriorSummary:
    """Converged posterior in common parameters.

    Coefficients are Gaussian, the random-effects covariance is inverse
    Wishart (stored in (xi, Lambda) form), the noise variance is scaled
    inverse chi-squared, and the half degrees of freedom follow the two
    parameter density with naturals (alpha, -beta).
    """

    names: tuple
    coefficient_mean: np.ndarray
    coefficient_cov: np.ndarray
    variance: CommonIGW
    noise_delta: float
    noise_lambda: float
    df_half: MoonRockParams
    nu_grid: np.ndarray
    nu_density: np.ndarray
    report: ConvergenceReport

    def __post_init__(self):
        if self.noise_delta <= 0 or self.noise_lambda <= 0:
            raise ImproperMessage("noise posterior parameters must be positive")
        if not matops.is_spd(np.asarray(self.coefficient_cov)):
            raise ImproperMessage("coefficient covariance must be SPD")

    @property
    def coefficient_sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.coefficient_cov))

    @property
    def variance_kappa(self) -> float:
        """Inverse-Wishart shape of the covariance posterior."""
        return self.variance.xi - self.variance.dim + 1.0

    def variance_mean(self) -> np.ndarray:
        d = self.variance.dim
        if self.variance.xi <= 2 * d:
            raise DomainError("covariance posterior mean needs xi > 2d")
        return self.variance.Lambda / (self.variance.xi - 2 * d)

    def noise_variance_mean(self) -> float:
        if self.noise_delta <= 2:
            raise DomainError("noise variance mean needs delta > 2")
        return self.noise_lambda / (self.noise_delta - 2.0)

    def noise_variance_sd(self) -> float:
        d, lam = self.noise_delta, self.noise_lambda
        if d <= 4:
            raise DomainError("noise variance sd needs delta > 4")
        mean = lam / (d - 2.0)
        return mean * np.sqrt(2.0 / (d - 4.0))

    def noise_sd_mean(self) -> float:
        """E(sigma) for sigma^2 scaled inverse chi-squared."""
        d, lam = self.noise_delta, self.noise_lambda
        if d <= 1:
            raise DomainError("E(sigma) needs delta > 1")
        return float(
            np.exp(0.5 * np.log(lam / 2.0) + gammaln((d - 1.0) / 2.0) - gammaln(d / 2.0))
        )

    def noise_sd_sd(self) -> float:
        if self.noise_delta <= 2:
            raise DomainError("sd(sigma) needs delta > 2")
        second = self.noise_lambda / (self.noise_delta - 2.0)
        return float(np.sqrt(max(second - self.noise_sd_mean() ** 2, 0.0)))

    def df_mean(self) -> float:
        return 2.0 * moonrock_mean(self.df_half)

    def df_sd(self) -> float:
        return 2.0 * float(np.sqrt(moonrock_variance(self.df_half)))

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coefficient_mean": self.coefficient_mean.tolist(),
            "coefficient_cov": self.coefficient_cov.tolist(),
            "variance": {
                "xi": self.variance.xi,
                "Lambda": self.variance.Lambda.tolist(),
                "kappa": self.variance_kappa,
            },
            "noise": {"delta": self.noise_delta, "lambda": self.noise_lambda},
            "df_half": {"alpha": self.df_half.alpha, "beta": self.df_half.beta},
            "nu_grid": self.nu_grid.tolist(),
            "nu_density": self.nu_density.tolist(),
            "iterations": self.report.iterations,
            "final_change": self.report.final_change,
        }


class TLMMFit(NamedTuple):
    graph: FactorGraph
    design: DesignInfo
    summary: PosteriorSummary


# ---------------------------------------------------------------------------
# graph assembly
# ---------------------------------------------------------------------------


def initial_messages(hyper: TLMMHyper, n_fixed: int, n_random: int, n_groups: int):
    """The documented start state, as {(factor, node): Message}.

    Prior-factor messages are their permanent values; the rest are simple
    legal vectors (implied scales are identity matrices) chosen so every
    combined vector the first sweep reads is proper.
    """
    q, m, p = n_random, n_groups, n_fixed
    k = p + m * q
    plan_cov = plan_prior(HuangWandSpec(scales=hyper.random_scales))
    plan_noise = plan_prior(HalfCauchySpec(scale=hyper.noise_scale))
    Dq = matops.duplication(q)
    Dk = matops.duplication(k)
    igw_init = np.concatenate(([-0.5], -0.5 * (Dq.T @ matops.vec(np.eye(q)))))
    gauss_init = np.concatenate((np.zeros(k), -0.5 * (Dk.T @ matops.vec(np.eye(k)))))
    cov_msg = fr.igw_prior_update(plan_cov.prior_factor)
    noise_msg = fr.igw_prior_update(plan_noise.prior_factor)
    scalar_init = np.array([-2.0, -1.0])
    return {
        ("cov_aux_prior", "cov_aux"): Message(cov_msg.eta, cov_msg.graph),
        ("noise_aux_prior", "noise_aux"): Message(noise_msg.eta, noise_msg.graph),
        ("cov_conditional", "cov_aux"): Message(igw_init, Graph.DIAG),
        ("cov_conditional", "cov"): Message(igw_init, Graph.FULL),
        ("noise_conditional", "noise_aux"): Message(scalar_init, Graph.DIAG),
        ("noise_conditional", "noise"): Message(scalar_init, Graph.FULL),
        ("coefficient_prior", "cov"): Message(igw_init, Graph.FULL),
        ("coefficient_prior", "coefficients"): Message(gauss_init),
        ("likelihood", "coefficients"): Message(gauss_init),
        ("likelihood", "noise"): Message(scalar_init, Graph.FULL),
        ("scale_mix", "df_half"): Message(np.array([1.0, -1.1])),
        ("df_prior", "df_half"): Message(fr.moonrock_prior_update(0.0, hyper.df_rate)),
    }


def _assert_initial_proper(messages: dict, n_random: int, n_coeff: int):
    """Reject a start state whose messages are not simple legal vectors:
    implied scales and precisions SPD, shape entries negative, degrees-of
    freedom naturals with beta > alpha >= 0."""
    dims = {"cov_aux": n_random, "cov": n_random, "noise_aux": 1, "noise": 1}
    for (factor, node), msg in messages.items():
        eta = np.asarray(msg.eta, dtype=float)
        if node in dims:
            if eta[0] >= 0 or not matops.is_spd(implied_scale(eta[1:], dims[node])):
                raise ImproperMessage(
                    f"initial message {factor} -> {node} is not a legal start vector"
                )
        elif node == "coefficients":
            mvn_from_natural(NaturalMVN.from_vector(eta, n_coeff))
        elif node == "df_half":
            alpha, beta = eta[0], -eta[1]
            if not beta > alpha >= 0:
                raise ImproperMessage(
                    f"initial message {factor} -> {node} needs beta > alpha >= 0"
                )


def build_graph(data: TLMMData, hyper: TLMMHyper, design: str = "slope") -> FactorGraph:
    """Assemble the eight-factor graph with its initial messages stored.

    The default schedule follows construction order; the covariance
    conditional must run before the coefficient prior on the first sweep,
    because the initial combined vector on the covariance node only becomes
    proper once the conditional has refreshed its half.
    """
    des = assemble_design(data, design)
    p, q, m = des.n_fixed, des.n_random, des.n_groups
    k = p + m * q
    if len(hyper.random_scales) != q:
        raise DimensionMismatch(
            f"{q} random-effect components need {q} scales, got "
            f"{len(hyper.random_scales)}"
        )
    plan_cov = plan_prior(HuangWandSpec(scales=hyper.random_scales))
    plan_noise = plan_prior(HalfCauchySpec(scale=hyper.noise_scale))
    y, C = data.y, des.C

    nodes = [
        Node("cov_aux", 1 + matops.vech_len(q), tag=plan_cov.prior_factor.graph),
        Node("noise_aux", 2, tag=plan_noise.prior_factor.graph),
        Node("cov", 1 + matops.vech_len(q), tag=plan_cov.conditional.graph),
        Node("noise", 2, tag=plan_noise.conditional.graph),
        Node("coefficients", k + matops.vech_len(k)),
        Node("df_half", 2),
    ]

    cov_prior_msg = fr.igw_prior_update(plan_cov.prior_factor)
    noise_prior_msg = fr.igw_prior_update(plan_noise.prior_factor)
    df_prior_eta = fr.moonrock_prior_update(0.0, hyper.df_rate)

    def cov_aux_prior_update(g):
        return {"cov_aux": Message(cov_prior_msg.eta, cov_prior_msg.graph)}

    def noise_aux_prior_update(g):
        return {"noise_aux": Message(noise_prior_msg.eta, noise_prior_msg.graph)}

    def df_prior_update(g):
        return {"df_half": Message(df_prior_eta)}

    def iterated_update(g, name, variance_node, aux_node, plan):
        res = fr.iterated_igw_update(
            plan.conditional.graph,
            plan.conditional.xi,
            to_variance=g.factor_to_node(name, variance_node).eta,
            from_variance=g.node_to_factor(variance_node, name).eta,
            to_auxiliary=g.factor_to_node(name, aux_node).eta,
            from_auxiliary=fr.IGWMessage(
                g.node_to_factor(aux_node, name).eta, plan.conditional.aux_graph
            ),
        )
        return {
            variance_node: Message(res.to_variance.eta, res.to_variance.graph),
            aux_node: Message(res.to_auxiliary.eta, res.to_auxiliary.graph),
        }

    def cov_conditional_update(g):
        return iterated_update(g, "cov_conditional", "cov", "cov_aux", plan_cov)

    def noise_conditional_update(g):
        return iterated_update(g, "noise_conditional", "noise", "noise_aux", plan_noise)

    def gaussian_moments(g):
        return extract_gaussian(g.q_star("coefficients").eta, k)

    def coefficient_prior_update(g):
        mu, Sig = gaussian_moments(g)
        inv_cov = fr.combined_mean_inverse(g.q_star("cov").eta, Graph.FULL)
        res = fr.gaussian_penalization_update(mu, Sig, p, m, hyper.fixed_scale, inv_cov)
        return {
            "coefficients": Message(res.to_coefficients),
            "cov": Message(res.to_variance.eta, res.to_variance.graph),
        }

    def composite(g):
        mu, Sig = gaussian_moments(g)
        inv_noise = float(fr.combined_mean_inverse(g.q_star("noise").eta, Graph.FULL)[0, 0])
        mean_df_half = moonrock_mean(MoonRockParams.from_vector(g.q_star("df_half").eta))
        return fr.t_likelihood_update(y, C, mu, Sig, inv_noise, mean_df_half)

    def likelihood_update(g):
        res = composite(g)
        return {
            "coefficients": Message(res.to_coefficients),
            "noise": Message(res.to_noise.eta, res.to_noise.graph),
        }

    def scale_mix_update(g):
        return {"df_half": Message(composite(g).to_df_half)}

    factors = [
        Factor("cov_aux_prior", ("cov_aux",), cov_aux_prior_update),
        Factor("noise_aux_prior", ("noise_aux",), noise_aux_prior_update),
        Factor("cov_conditional", ("cov", "cov_aux"), cov_conditional_update),
        Factor("noise_conditional", ("noise", "noise_aux"), noise_conditional_update),
        Factor("coefficient_prior", ("coefficients", "cov"), coefficient_prior_update),
        Factor(
            "likelihood",
            ("coefficients", "noise"),
            likelihood_update,
            reads=(("scale_mix", "df_half"), ("df_prior", "df_half")),
        ),
        Factor(
            "scale_mix",
            ("df_half",),
            scale_mix_update,
            reads=(
                ("coefficient_prior", "coefficients"),
                ("likelihood", "coefficients"),
                ("noise_conditional", "noise"),
                ("likelihood", "noise"),
            ),
        ),
        Factor("df_prior", ("df_half",), df_prior_update),
    ]
    graph = FactorGraph(nodes, factors)
    inits = initial_messages(hyper, p, q, m)
    _assert_initial_proper(inits, q, k)
    for (fac, node), msg in inits.items():
        graph.store(fac, node, msg)
    return graph


def summarize_graph(
    graph: FactorGraph, design: DesignInfo, report: ConvergenceReport
) -> PosteriorSummary:
    """Extract the converged q densities in common parameters."""
    p, q, m = design.n_fixed, design.n_random, design.n_groups
    k = p + m * q
    mu, Sig = extract_gaussian(graph.q_star("coefficients").eta, k)
    variance = extract_igw_full(graph.q_star("cov").eta)
    delta, lam = extract_inv_chisq(graph.q_star("noise").eta)
    df_half = MoonRockParams.from_vector(graph.q_star("df_half").eta)
    nu_grid, nu_density = df_density_grid(df_half)
    return PosteriorSummary(
        names=coefficient_names(p, q, m),
        coefficient_mean=mu,
        coefficient_cov=Sig,
        variance=variance,
        noise_delta=delta,
        noise_lambda=lam,
        df_half=df_half,
        nu_grid=nu_grid,
        nu_density=nu_density,
        report=report,
    )


def fit(
    data: TLMMData,
    hyper: Optional[TLMMHyper] = None,
    design: str = "slope",
    tol: float = 1e-10,
    max_iters: int = 500,
    schedule=None,
) -> TLMMFit:
    """Run message passing to convergence and extract the posterior.

    Raises NotConverged (with the report attached) if the maximum relative
    message change has not fallen below ``tol`` within ``max_iters`` sweeps.
    """
    des = assemble_design(data, design)
    if hyper is None:
        hyper = TLMMHyper.diffuse(des.n_random)
    graph = build_graph(data, hyper, design)
    report = graph.run(tol=tol, max_iters=max_iters, schedule=schedule)
    if not report.converged:
        err = NotConverged(
            f"final relative change {report.final_change:.3e} after "
            f"{report.iterations} sweeps (tol {tol:g})"
        )
        err.report = report
        raise err
    return TLMMFit(graph, des, summarize_graph(graph, des, report))
