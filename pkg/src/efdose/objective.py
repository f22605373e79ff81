"""Loss closures and the targeted-regularization machinery.

base_loss:  (1/n) sum_i [ nll(y_i, mu_i) - log pi_i ]
treg:       (1/n) sum_i [ -y_i * theta~_i + kappa(theta~_i) ] / dispersion
            with theta~_i = h(mu_i) + eps(a_i)/pi_i * h'(mu_i)
total:      base + beta * treg

The treg derivative wrt each eps coefficient weights the fluctuated
residual by h'(mu_hat) (the derivative of the stated regularizer); at a
stationary point the empirical correction term of the one-step estimator
vanishes along every basis direction. The 1/dispersion factor keeps the
zero-perturbation reduction (treg == mean outcome NLL) exact for any
configured Gaussian dispersion; it never moves the minimizer.

By default gradients of the treg term flow only into the eps coefficients
(nuisance values are detached); joint flow is available for ablation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import edf, model as model_mod
from .basis import eval_basis_batch
from .errors import ConfigError, NumericError
from .netcore import tape
from .netcore.tape import Tensor

OVERLAP_CLAMP = 1e-3


@dataclass(frozen=True)
class LossConfig:
    beta: float = 1.0
    treg_enabled: bool = True
    detach_nuisances_in_treg: bool = True
    overlap_clamp: float = OVERLAP_CLAMP

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if not 0 < self.overlap_clamp < 1:
            raise ConfigError("overlap clamp must lie in (0, 1)")

    @property
    def treg_active(self) -> bool:
        return self.treg_enabled and self.beta > 0.0


@dataclass(frozen=True)
class Batch:
    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray

    @property
    def n(self) -> int:
        return self.Y.shape[0]


# ---------------------------------------------------------------------------
# numpy-path operations (estimation, polish, diagnostics)
# ---------------------------------------------------------------------------

def base_loss(y, mu_values, pi_values, family: edf.FamilySpec) -> float:
    """Mean outcome NLL minus mean log-density of the observed treatment."""
    pi_values = np.asarray(pi_values, dtype=float)
    if np.any(pi_values <= 0):
        raise NumericError("pi values must be positive (clamp upstream)")
    terms = edf.nll_terms(family, y, mu_values) - np.log(pi_values)
    if not np.all(np.isfinite(terms)):
        idx = int(np.argmax(~np.isfinite(terms)))
        raise NumericError(f"non-finite loss term at sample {idx}")
    return float(np.mean(terms))


def fluctuated_theta(theta, eps_a, pi, h_prime_mu):
    """theta~ = theta + (eps(a)/pi) * h'(mu)."""
    return np.asarray(theta, dtype=float) + np.asarray(eps_a) / np.asarray(pi) \
        * np.asarray(h_prime_mu)


def _fluct_parts(mdl: model_mod.TrainedModel, batch: Batch, cfg: LossConfig,
                 eps_coef: np.ndarray | None = None):
    fam = mdl.config.family
    mu = model_mod.predict_mu_obs(mdl, batch.X, batch.A)
    pi = np.maximum(model_mod.predict_pi_obs(mdl, batch.X, batch.A), cfg.overlap_clamp)
    theta = edf.link(fam, mu)
    hp = edf.link_prime(fam, mu)
    bvals = eval_basis_batch(mdl.config.eps_basis, batch.A)
    coef = mdl.store.view("eps") if eps_coef is None else np.asarray(eps_coef, dtype=float)
    theta_f = fluctuated_theta(theta, bvals @ coef, pi, hp)
    return fam, mu, pi, theta, hp, bvals, theta_f


def treg_loss(batch: Batch, mdl: model_mod.TrainedModel,
              cfg: LossConfig = LossConfig(), eps_coef=None) -> float:
    """(1/n) sum [-y theta~ + kappa(theta~)] / dispersion at current parameters."""
    fam, _, _, _, _, _, theta_f = _fluct_parts(mdl, batch, cfg, eps_coef)
    kap = edf.cumulant(fam, theta_f)
    terms = (-batch.Y * theta_f + kap) / fam.dispersion
    if not np.all(np.isfinite(terms)):
        idx = int(np.argmax(~np.isfinite(terms)))
        raise NumericError(f"non-finite treg term at sample {idx}")
    return float(np.mean(terms))


def treg_eps_gradient(batch: Batch, mdl: model_mod.TrainedModel,
                      cfg: LossConfig = LossConfig(), eps_coef=None) -> np.ndarray:
    """Analytic d(treg)/d(eps_k): (1/n) sum B_k(a) (kappa'(theta~) - y) h'(mu)/pi."""
    fam, _, pi, _, hp, bvals, theta_f = _fluct_parts(mdl, batch, cfg, eps_coef)
    resid = edf.cumulant_prime(fam, theta_f) - batch.Y
    w = resid * hp / pi / fam.dispersion
    return bvals.T @ w / batch.n


def treg_eps_hessian(batch: Batch, mdl: model_mod.TrainedModel,
                     cfg: LossConfig = LossConfig(), eps_coef=None) -> np.ndarray:
    """d2(treg)/d(eps)^2: PSD Gram of basis rows weighted by kappa''(theta~)(h'/pi)^2."""
    fam, _, pi, _, hp, bvals, theta_f = _fluct_parts(mdl, batch, cfg, eps_coef)
    w = edf.cumulant_second(fam, theta_f) * (hp / pi) ** 2 / fam.dispersion
    return (bvals * w[:, None]).T @ bvals / batch.n


def total_loss(batch: Batch, mdl: model_mod.TrainedModel, cfg: LossConfig) -> float:
    """base_loss + beta * treg_loss (treg omitted entirely when inactive)."""
    fam = mdl.config.family
    mu = model_mod.predict_mu_obs(mdl, batch.X, batch.A)
    pi = model_mod.predict_pi_obs(mdl, batch.X, batch.A)
    base = base_loss(batch.Y, mu, pi, fam)
    if not cfg.treg_active:
        return base
    return base + cfg.beta * treg_loss(batch, mdl, cfg)


def stationarity_residual(batch: Batch, mdl: model_mod.TrainedModel,
                          cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Per-coefficient residual (1/n) sum B_k(a)(y - kappa'(theta~)) h'(mu)/pi.

    This is the empirical correction term along each basis direction; it is
    the negative of the treg gradient (times dispersion).
    """
    return -treg_eps_gradient(batch, mdl, cfg) * mdl.config.family.dispersion


def polish_eps(batch: Batch, mdl: model_mod.TrainedModel,
               cfg: LossConfig = LossConfig(), tol: float = 1e-8,
               max_iter: int = 100) -> dict:
    """Newton polish of the eps coefficients to stationarity (convex problem).

    Nuisance heads stay frozen (their values are computed once up front).
    Returns diagnostics; updates the eps slice in place. Converges from any
    start: damped Newton with backtracking and a tiny ridge fallback for
    singular Gram matrices.
    """
    fam, _, pi, theta, hp, bvals, _ = _fluct_parts(mdl, batch, cfg)
    y = np.asarray(batch.Y, dtype=float)
    n = batch.n
    disp = fam.dispersion
    w = hp / pi

    def value_at(coef):
        theta_f = theta + (bvals @ coef) * w
        with np.errstate(over="ignore"):
            terms = (-y * theta_f + edf.cumulant(fam, theta_f)) / disp
        return float(np.mean(terms)) if np.all(np.isfinite(terms)) else np.inf

    def grad_at(coef):
        theta_f = theta + (bvals @ coef) * w
        resid = edf.cumulant_prime(fam, theta_f) - y
        return bvals.T @ (resid * w) / (n * disp)

    def hess_at(coef):
        theta_f = theta + (bvals @ coef) * w
        ww = edf.cumulant_second(fam, theta_f) * w**2 / disp
        return (bvals * ww[:, None]).T @ bvals / n

    coef = mdl.store.view("eps").copy()
    value = value_at(coef)
    iterations = 0
    for _ in range(max_iter):
        g = grad_at(coef)
        if np.max(np.abs(g)) <= tol:
            break
        H = hess_at(coef)
        ridge = 1e-12 * max(1.0, float(np.trace(H)) / H.shape[0])
        try:
            direction = np.linalg.solve(H + ridge * np.eye(H.shape[0]), -g)
        except np.linalg.LinAlgError:
            direction = -g
        step_size = 1.0
        for _ in range(40):
            trial = coef + step_size * direction
            trial_value = value_at(trial)
            if np.isfinite(trial_value) and trial_value <= value + 1e-18:
                coef, value = trial, trial_value
                break
            step_size *= 0.5
        else:
            break
        iterations += 1
    mdl.store.set_param("eps", coef)
    return {
        "stationarity_norm": float(np.max(np.abs(grad_at(coef)))),
        "iterations": iterations,
        "value": float(value),
    }


# ---------------------------------------------------------------------------
# taped closures (training)
# ---------------------------------------------------------------------------

def _tape_link(fam: edf.FamilySpec, mu: Tensor) -> Tensor:
    if fam.kind == edf.BERNOULLI:
        return tape.log(mu) - tape.log1p(-mu)
    if fam.kind == edf.POISSON:
        return tape.log(mu)
    return mu


def _tape_link_prime(fam: edf.FamilySpec, mu: Tensor) -> Tensor:
    if fam.kind == edf.BERNOULLI:
        return 1.0 / (mu * (1.0 - mu))
    if fam.kind == edf.POISSON:
        return 1.0 / mu
    return mu * 0.0 + 1.0


def _tape_cumulant(fam: edf.FamilySpec, theta: Tensor) -> Tensor:
    if fam.kind == edf.BERNOULLI:
        return tape.softplus(theta)
    if fam.kind == edf.POISSON:
        return tape.exp(theta)
    return 0.5 * theta * theta


def build_loss_closure(mdl: model_mod.TrainedModel, batch: Batch, cfg: LossConfig):
    """Taped Eq-style objective: closure(leaves) -> scalar loss tensor.

    Basis matrices are precomputed once per batch (they depend on doses only).
    """
    fam = mdl.config.family
    X = np.asarray(batch.X, dtype=float)
    A = np.asarray(batch.A, dtype=float)
    Y = np.asarray(batch.Y, dtype=float)
    bvals_out = None
    if mdl.config.treatment_kind == model_mod.CONTINUOUS:
        bvals_out = eval_basis_batch(mdl.config.outcome_basis, A)
    bvals_eps = eval_basis_batch(mdl.config.eps_basis, A) if cfg.treg_active else None

    def closure(leaves):
        Zt = model_mod.tape_rep(mdl, leaves, X)
        mu = model_mod.tape_mu_obs(mdl, leaves, Zt, A, bvals_out)
        pi = model_mod.tape_pi_obs(mdl, leaves, Zt, A)
        theta = _tape_link(fam, mu)
        nll = (-Y * theta + _tape_cumulant(fam, theta)) * (1.0 / fam.dispersion)
        loss = tape.tmean(nll - tape.log(pi))
        tape.check_finite(loss, "base loss")
        if cfg.treg_active:
            if cfg.detach_nuisances_in_treg:
                mu_r, pi_r = tape.stop_gradient(mu), tape.stop_gradient(pi)
            else:
                mu_r, pi_r = mu, pi
            pi_c = tape.clip(pi_r, cfg.overlap_clamp, None)
            eps_a = model_mod.tape_eps_obs(mdl, leaves, bvals_eps)
            theta_f = _tape_link(fam, mu_r) + eps_a / pi_c * _tape_link_prime(fam, mu_r)
            treg = tape.tmean((-Y * theta_f + _tape_cumulant(fam, theta_f))
                              * (1.0 / fam.dispersion))
            tape.check_finite(treg, "treg loss")
            loss = loss + cfg.beta * treg
        return loss

    return closure
