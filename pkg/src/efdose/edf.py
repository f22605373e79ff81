"""Exponential-dispersion-family primitives.

Densities have the form exp{(y*theta - kappa(theta))/phi + xi(y; phi)}.
This module provides the cumulant kappa and its derivatives, the canonical
link h (logit / log / identity), the negative log-likelihood, and samplers
for the Bernoulli, Poisson and Gaussian members.

The normalizer xi(y; phi) is constant in theta and is dropped from every
NLL here, so reported losses are comparable only within one family.
Mean clamping is the caller's job: EPS_MEAN is the documented constant the
model layer uses to keep fitted means away from the boundary before link
evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DataError, DomainError

BERNOULLI = "bernoulli"
POISSON = "poisson"
GAUSSIAN = "gaussian"
FAMILIES = (BERNOULLI, POISSON, GAUSSIAN)

# Fitted means are clamped into [EPS_MEAN, 1-EPS_MEAN] (Bernoulli) or
# [EPS_MEAN, inf) (Poisson) before any h / h' evaluation.
EPS_MEAN = 1e-6


@dataclass(frozen=True)
class FamilySpec:
    """Descriptor bundling a family kind with its dispersion.

    Dispersion is fixed to 1 for Bernoulli/Poisson (their EDF form);
    Gaussian dispersion is configurable and scales the NLL.
    """

    kind: str
    dispersion: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise DomainError(f"unknown family kind: {self.kind!r}")
        if not np.isfinite(self.dispersion) or self.dispersion <= 0:
            raise DomainError("dispersion must be a positive real")
        if self.kind in (BERNOULLI, POISSON) and self.dispersion != 1.0:
            raise DomainError(f"{self.kind} requires dispersion 1")


def bernoulli() -> FamilySpec:
    return FamilySpec(BERNOULLI)


def poisson() -> FamilySpec:
    return FamilySpec(POISSON)


def gaussian(dispersion: float = 1.0) -> FamilySpec:
    return FamilySpec(GAUSSIAN, dispersion)


def family_from_name(name: str) -> FamilySpec:
    return FamilySpec(str(name).lower())


def _check_finite_theta(theta):
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")


def cumulant(family: FamilySpec, theta):
    """kappa(theta); overflow-safe log1p-exp form for Bernoulli."""
    theta = np.asarray(theta, dtype=float)
    _check_finite_theta(theta)
    if family.kind == BERNOULLI:
        return np.logaddexp(0.0, theta)
    if family.kind == POISSON:
        return np.exp(theta)
    return 0.5 * theta**2


def cumulant_prime(family: FamilySpec, theta):
    """kappa'(theta), the mean function."""
    theta = np.asarray(theta, dtype=float)
    _check_finite_theta(theta)
    if family.kind == BERNOULLI:
        return expit(theta)
    if family.kind == POISSON:
        return np.exp(theta)
    return theta + 0.0


def cumulant_second(family: FamilySpec, theta):
    """kappa''(theta), the variance function on the canonical scale."""
    theta = np.asarray(theta, dtype=float)
    _check_finite_theta(theta)
    if family.kind == BERNOULLI:
        p = expit(theta)
        return p * (1.0 - p)
    if family.kind == POISSON:
        return np.exp(theta)
    return np.ones_like(theta)


def mean_from_theta(family: FamilySpec, theta):
    """kappa'(theta): sigmoid / exp / identity."""
    return cumulant_prime(family, theta)


def mean_domain(family: FamilySpec) -> tuple[float, float]:
    """Open interval of admissible means."""
    if family.kind == BERNOULLI:
        return (0.0, 1.0)
    if family.kind == POISSON:
        return (0.0, np.inf)
    return (-np.inf, np.inf)


def _check_mean(family: FamilySpec, mu):
    lo, hi = mean_domain(family)
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)):
        raise DomainError("mu must be finite")
    if np.any(mu <= lo) or np.any(mu >= hi):
        raise DomainError(
            f"mu outside the open mean domain ({lo}, {hi}) of {family.kind}; "
            "clamp with clamp_mean first"
        )
    return mu


def link(family: FamilySpec, mu):
    """Canonical link h(mu): logit / log / identity."""
    mu = _check_mean(family, mu)
    if family.kind == BERNOULLI:
        return np.log(mu) - np.log1p(-mu)
    if family.kind == POISSON:
        return np.log(mu)
    return mu + 0.0


def link_prime(family: FamilySpec, mu):
    """h'(mu) = 1 / kappa''(h(mu))."""
    mu = _check_mean(family, mu)
    if family.kind == BERNOULLI:
        return 1.0 / (mu * (1.0 - mu))
    if family.kind == POISSON:
        return 1.0 / mu
    return np.ones_like(mu)


def link_second(family: FamilySpec, mu):
    """h''(mu)."""
    mu = _check_mean(family, mu)
    if family.kind == BERNOULLI:
        return (2.0 * mu - 1.0) / (mu * (1.0 - mu)) ** 2
    if family.kind == POISSON:
        return -1.0 / mu**2
    return np.zeros_like(mu)


def clamp_mean(family: FamilySpec, mu):
    """Clamp raw means into the family's safe domain (documented contract)."""
    mu = np.asarray(mu, dtype=float)
    if family.kind == BERNOULLI:
        return np.clip(mu, EPS_MEAN, 1.0 - EPS_MEAN)
    if family.kind == POISSON:
        return np.maximum(mu, EPS_MEAN)
    return mu + 0.0


def check_support(family: FamilySpec, y) -> None:
    """Raise DataError if any outcome lies outside the family support."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DataError("outcomes must be finite")
    if family.kind == BERNOULLI:
        bad = (y != 0.0) & (y != 1.0)
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise DataError(f"Bernoulli outcome not in {{0,1}} at index {idx}")
    elif family.kind == POISSON:
        bad = (y < 0.0) | (y != np.floor(y))
        if np.any(bad):
            idx = int(np.argmax(bad))
            raise DataError(f"Poisson outcome not a nonnegative integer at index {idx}")


def nll_terms(family: FamilySpec, y, mu):
    """Per-observation (-y*h(mu) + kappa(h(mu))) / dispersion, xi dropped."""
    check_support(family, y)
    y = np.asarray(y, dtype=float)
    theta = link(family, mu)
    return (-y * theta + cumulant(family, theta)) / family.dispersion


def nll(family: FamilySpec, y, mu):
    """Mean negative log-likelihood over the batch (scalar for scalars)."""
    terms = nll_terms(family, y, mu)
    if terms.ndim == 0:
        return float(terms)
    return float(np.mean(terms))


def sample(family: FamilySpec, mu, rng: np.random.Generator):
    """Draw outcomes with E[y] = mu; deterministic given the rng state."""
    mu = _check_mean(family, mu) if family.kind != POISSON else np.asarray(mu, dtype=float)
    if family.kind == BERNOULLI:
        return (rng.random(np.shape(mu)) < mu).astype(float)
    if family.kind == POISSON:
        if np.any(mu < 0):
            raise DomainError("Poisson rate must be nonnegative")
        return rng.poisson(mu).astype(float)
    return rng.normal(mu, np.sqrt(family.dispersion))
