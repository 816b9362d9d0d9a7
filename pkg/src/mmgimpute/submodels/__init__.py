"""Submodel families: joint Gaussian, Ising, and mixture of products."""

from .gaussian import (
    GaussianParams,
    conditional_linear,
    fit_gaussian,
    fit_gaussian_marginal,
    gaussian_conditional,
    gaussian_mle,
    gaussian_nll,
)
from .ising import (
    IsingParams,
    fit_ising,
    ising_conditional_pmf,
    ising_loglik,
    ising_loglik_grad,
    ising_mle,
    log_partition,
)
from .mixture import (
    MPParams,
    fit_mp_em,
    mp_component_weights,
    mp_em,
    mp_impute,
    mp_log_weights,
)
from .risk import empirical_risk, negative_log_likelihood

FAMILIES = ("gaussian", "ising", "mp")


def params_from_dict(obj: dict):
    family = obj["family"]
    if family == "gaussian":
        return GaussianParams.from_dict(obj)
    if family == "ising":
        return IsingParams.from_dict(obj)
    if family == "mp":
        return MPParams.from_dict(obj)
    raise ValueError(f"unknown submodel family {family!r}")


__all__ = [
    "FAMILIES",
    "GaussianParams",
    "IsingParams",
    "MPParams",
    "conditional_linear",
    "empirical_risk",
    "fit_gaussian",
    "fit_gaussian_marginal",
    "fit_ising",
    "fit_mp_em",
    "gaussian_conditional",
    "gaussian_mle",
    "gaussian_nll",
    "ising_conditional_pmf",
    "ising_loglik",
    "ising_loglik_grad",
    "ising_mle",
    "log_partition",
    "mp_component_weights",
    "mp_em",
    "mp_impute",
    "mp_log_weights",
    "negative_log_likelihood",
    "params_from_dict",
]
