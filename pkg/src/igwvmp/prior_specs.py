"""Planning variance priors as Inverse G-Wishart fragment configurations.

Seven prior families are supported. Three are single-level (the prior factor
sits directly on the variance node): inverse chi-squared, inverse gamma and
inverse Wishart. Four are two-level (the prior factor sits on an auxiliary
node A and a conditional factor p(Sigma | A) = IGW(graph, xi, A^{-1}) links
the two): half-t, half-Cauchy, Huang-Wand and matrix-F.

``plan_prior`` maps a specification to the corresponding configuration;
``equivalent_specs`` lists other specifications known to induce exactly the
same prior, which planning must (and tests verify does) treat identically.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import CommonIGW, Graph
from .errors import InvalidHyperparameter

__all__ = [
    "InverseChiSquaredSpec",
    "InverseGammaSpec",
    "InverseWishartSpec",
    "HalfTSpec",
    "HalfCauchySpec",
    "HuangWandSpec",
    "MatrixFSpec",
    "ConditionalConfig",
    "PriorPlan",
    "plan_prior",
    "equivalent_specs",
]


@dataclass(frozen=True)
class InverseChiSquaredSpec:
    """sigma^2 ~ Inverse-chi^2(delta, lam)."""

    delta: float
    lam: float

    def __post_init__(self):
        if self.delta <= 0 or self.lam <= 0:
            raise InvalidHyperparameter("inverse chi-squared needs delta, lam > 0")


@dataclass(frozen=True)
class InverseGammaSpec:
    """sigma^2 ~ Inverse-Gamma(shape, rate)."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise InvalidHyperparameter("inverse gamma needs shape, rate > 0")


@dataclass(frozen=True)
class InverseWishartSpec:
    """Sigma ~ Inverse-Wishart with conventional shape kappa and scale Lambda,
    so that E(Sigma^{-1}) = kappa Lambda^{-1}."""

    kappa: float
    Lambda: np.ndarray

    def __post_init__(self):
        Lam = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        object.__setattr__(self, "Lambda", Lam)
        if self.kappa <= Lam.shape[0] - 1:
            raise InvalidHyperparameter(
                f"inverse Wishart needs kappa > d - 1 = {Lam.shape[0] - 1}"
            )


@dataclass(frozen=True)
class HalfTSpec:
    """sigma ~ Half-t(scale, df), i.e. density proportional to
    (1 + (sigma/scale)^2/df)^{-(df+1)/2} on sigma > 0."""

    scale: float
    df: float

    def __post_init__(self):
        if self.scale <= 0 or self.df <= 0:
            raise InvalidHyperparameter("half-t needs scale, df > 0")


@dataclass(frozen=True)
class HalfCauchySpec:
    """sigma ~ Half-Cauchy(scale); the df = 1 half-t."""

    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise InvalidHyperparameter("half-Cauchy needs scale > 0")


@dataclass(frozen=True)
class HuangWandSpec:
    """Sigma ~ Huang-Wand(scales; nu): marginally each sqrt(Sigma_jj) is
    Half-t(scales_j, nu) and at nu = 2 every correlation is uniform on
    (-1, 1). nu defaults to the uniform-correlation value.
    """

    scales: tuple
    nu: float = 2.0

    def __post_init__(self):
        s = tuple(float(v) for v in np.atleast_1d(np.asarray(self.scales, dtype=float)))
        object.__setattr__(self, "scales", s)
        if any(v <= 0 for v in s) or not s:
            raise InvalidHyperparameter("Huang-Wand needs positive scales")
        if self.nu <= 0:
            raise InvalidHyperparameter("Huang-Wand needs nu > 0")


@dataclass(frozen=True)
class MatrixFSpec:
    """Sigma ~ Matrix-F(nu, delta, B): Sigma | A ~ IGW(full, delta + 2d - 2,
    A^{-1}) with A^{-1} ~ Wishart(nu, B) conventional."""

    nu: float
    delta: float
    B: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        object.__setattr__(self, "B", B)
        d = B.shape[0]
        if self.nu <= d - 1:
            raise InvalidHyperparameter(f"matrix-F needs nu > d - 1 = {d - 1}")
        if self.delta <= 0:
            raise InvalidHyperparameter("matrix-F needs delta > 0")


@dataclass(frozen=True)
class ConditionalConfig:
    """Configuration of the conditional factor p(Sigma | A) in a two-level
    plan: its shape, its graph, and the graph of the auxiliary node."""

    xi: float
    graph: Graph
    aux_graph: Graph


@dataclass(frozen=True)
class PriorPlan:
    """How to realize a prior with the two fragment types.

    ``prior_factor`` is the Inverse G-Wishart prior whose constant message the
    prior fragment emits. With ``conditional`` unset it attaches directly to
    the variance node; otherwise it attaches to the auxiliary node and the
    conditional factor links auxiliary and variance nodes.
    """

    prior_factor: CommonIGW
    conditional: Optional[ConditionalConfig] = None

    @property
    def dim(self) -> int:
        return self.prior_factor.dim


def plan_prior(spec) -> PriorPlan:
    """Translate a prior specification into its fragment configuration."""
    if isinstance(spec, InverseChiSquaredSpec):
        return PriorPlan(
            CommonIGW(Graph.FULL, spec.delta, np.array([[spec.lam]]))
        )
    if isinstance(spec, InverseGammaSpec):
        return PriorPlan(
            CommonIGW(Graph.FULL, 2.0 * spec.shape, np.array([[2.0 * spec.rate]]))
        )
    if isinstance(spec, InverseWishartSpec):
        d = spec.Lambda.shape[0]
        return PriorPlan(CommonIGW(Graph.FULL, spec.kappa + d - 1.0, spec.Lambda))
    if isinstance(spec, HalfTSpec):
        lam_aux = 1.0 / (spec.df * spec.scale**2)
        return PriorPlan(
            CommonIGW(Graph.DIAG, 1.0, np.array([[lam_aux]])),
            ConditionalConfig(spec.df, Graph.FULL, Graph.DIAG),
        )
    if isinstance(spec, HalfCauchySpec):
        return plan_prior(HalfTSpec(spec.scale, 1.0))
    if isinstance(spec, HuangWandSpec):
        d = len(spec.scales)
        lam_aux = np.diag(1.0 / (spec.nu * np.asarray(spec.scales) ** 2))
        return PriorPlan(
            CommonIGW(Graph.DIAG, 1.0, lam_aux),
            ConditionalConfig(spec.nu + 2.0 * d - 2.0, Graph.FULL, Graph.DIAG),
        )
    if isinstance(spec, MatrixFSpec):
        d = spec.B.shape[0]
        return PriorPlan(
            CommonIGW(Graph.FULL, spec.nu + d - 1.0, np.linalg.inv(spec.B)),
            ConditionalConfig(spec.delta + 2.0 * d - 2.0, Graph.FULL, Graph.FULL),
        )
    raise InvalidHyperparameter(f"unknown prior specification {type(spec).__name__}")


def equivalent_specs(spec) -> list:
    """Other specifications inducing the same prior distribution."""
    if isinstance(spec, InverseChiSquaredSpec):
        return [
            InverseGammaSpec(spec.delta / 2.0, spec.lam / 2.0),
            InverseWishartSpec(spec.delta, np.array([[spec.lam]])),
        ]
    if isinstance(spec, InverseGammaSpec):
        return [
            InverseChiSquaredSpec(2.0 * spec.shape, 2.0 * spec.rate),
            InverseWishartSpec(2.0 * spec.shape, np.array([[2.0 * spec.rate]])),
        ]
    if isinstance(spec, InverseWishartSpec):
        if spec.Lambda.shape[0] == 1:
            lam = float(spec.Lambda[0, 0])
            return [
                InverseChiSquaredSpec(spec.kappa, lam),
                InverseGammaSpec(spec.kappa / 2.0, lam / 2.0),
            ]
        return []
    if isinstance(spec, HalfTSpec):
        out = [HuangWandSpec((spec.scale,), spec.df)]
        if spec.df == 1.0:
            out.append(HalfCauchySpec(spec.scale))
        return out
    if isinstance(spec, HalfCauchySpec):
        return [HalfTSpec(spec.scale, 1.0), HuangWandSpec((spec.scale,), 1.0)]
    if isinstance(spec, HuangWandSpec):
        if len(spec.scales) == 1:
            out = [HalfTSpec(spec.scales[0], spec.nu)]
            if spec.nu == 1.0:
                out.append(HalfCauchySpec(spec.scales[0]))
            return out
        return []
    if isinstance(spec, MatrixFSpec):
        return []
    raise InvalidHyperparameter(f"unknown prior specification {type(spec).__name__}")
