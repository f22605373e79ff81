"""Two-head estimator architecture.

A shared feature trunk z(x) feeds an outcome head and a treatment head:

  continuous dose: outcome head is a varying-coefficient stack whose weights
    depend on the dose through a spline/poly basis; the treatment head scores
    B+1 equally spaced grid points, a softmax is renormalized by the exact
    trapezoid constant so the piecewise-linear interpolant is a true density.
  binary arm: two outcome sub-heads mu(x,0), mu(x,1) and one propensity
    logit (Dragonnet-style); the perturbation basis degenerates to the
    indicator pair {1-a, a}.

A separate perturbation head eps(a) = sum_k c_k B_k(a) lives in its own
parameter slice. Fitted means are clamped via edf.clamp_mean before any
link evaluation; density/probability outputs are never clamped here (the
overlap clamp belongs to estimator call sites).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from . import edf, netcore
from .basis import (Basis, SplineBasis, basis_from_dict, basis_to_dict,
                    binary_eps_basis, eval_basis_batch)
from .errors import ConfigError, DomainError
from .netcore import tape
from .netcore.layers import forward_np, forward_tape
from .seeding import substream

BINARY = "binary"
CONTINUOUS = "continuous"

_FINAL_ACT = {edf.BERNOULLI: "sigmoid", edf.POISSON: "exp", edf.GAUSSIAN: "identity"}


@dataclass(frozen=True)
class ModelConfig:
    treatment_kind: str
    family: edf.FamilySpec
    input_dim: int
    rep_dims: tuple = (50, 50)
    outcome_dims: tuple = (50,)
    density_grid_b: int = 10
    outcome_basis: Basis = field(default_factory=lambda: SplineBasis(2, 2))
    eps_basis: SplineBasis | None = None
    hidden_activation: str = "relu"
    outcome_final_activation: str | None = None
    density_head_detach_trunk: bool = False

    def __post_init__(self):
        if self.treatment_kind not in (BINARY, CONTINUOUS):
            raise ConfigError(f"unknown treatment kind {self.treatment_kind!r}")
        if self.input_dim < 1:
            raise ConfigError("input_dim must be positive")
        if self.density_grid_b < 2:
            raise ConfigError("density_grid_b must be >= 2")
        if self.eps_basis is None:
            default = binary_eps_basis() if self.treatment_kind == BINARY \
                else SplineBasis(2, 2)
            object.__setattr__(self, "eps_basis", default)
        act = self.outcome_final_activation or _FINAL_ACT[self.family.kind]
        allowed = {
            edf.BERNOULLI: {"sigmoid"},
            edf.POISSON: {"exp", "softplus"},
            edf.GAUSSIAN: {"identity"},
        }[self.family.kind]
        if act not in allowed:
            raise ConfigError(
                f"final activation {act!r} incompatible with {self.family.kind} mean domain"
            )
        object.__setattr__(self, "outcome_final_activation", act)

    @property
    def rep_out(self) -> int:
        return self.rep_dims[-1] if self.rep_dims else self.input_dim


def _graphs(cfg: ModelConfig) -> dict[str, netcore.GraphSpec]:
    act = cfg.hidden_activation
    rep_layers = []
    d = cfg.input_dim
    for width in cfg.rep_dims:
        rep_layers.append(netcore.LayerSpec(netcore.DENSE, d, width, act))
        d = width
    graphs = {"rep": netcore.GraphSpec("rep", tuple(rep_layers))}

    def outcome_stack(name, kind, basis):
        layers = []
        dd = cfg.rep_out
        for width in cfg.outcome_dims:
            layers.append(netcore.LayerSpec(kind, dd, width, act))
            dd = width
        layers.append(netcore.LayerSpec(kind, dd, 1, cfg.outcome_final_activation))
        return netcore.GraphSpec(name, tuple(layers), dose_basis=basis)

    if cfg.treatment_kind == CONTINUOUS:
        graphs["out"] = outcome_stack("out", netcore.VC_DENSE, cfg.outcome_basis)
        graphs["dens"] = netcore.GraphSpec(
            "dens",
            (netcore.LayerSpec(netcore.DENSE, cfg.rep_out, cfg.density_grid_b + 1,
                               "identity"),),
        )
    else:
        graphs["out0"] = outcome_stack("out0", netcore.DENSE, None)
        graphs["out1"] = outcome_stack("out1", netcore.DENSE, None)
        graphs["dens"] = netcore.GraphSpec(
            "dens", (netcore.LayerSpec(netcore.DENSE, cfg.rep_out, 1, "identity"),)
        )
    return graphs


_GRAPH_ORDER = ("rep", "out", "out0", "out1", "dens")


@dataclass
class TrainedModel:
    """Architecture config + parameter store + training metadata."""

    config: ModelConfig
    store: netcore.ParamStore
    graphs: dict[str, netcore.GraphSpec]
    metadata: dict = field(default_factory=dict)

    @property
    def eps_size(self) -> int:
        return self.config.eps_basis.size


def build_model(cfg: ModelConfig, seed: int) -> TrainedModel:
    """Fresh model with seeded fan-in initialization (dose-constant VC blocks)."""
    graphs = _graphs(cfg)
    specs = []
    for name in _GRAPH_ORDER:
        if name in graphs:
            specs.extend(netcore.param_specs(graphs[name]))
    specs.append(netcore.ParamSpec("eps", (cfg.eps_basis.size,)))
    store = netcore.ParamStore(specs, substream(seed, "init"))
    return TrainedModel(cfg, store, graphs, {"init_seed": int(seed)})


# ---------------------------------------------------------------------------
# numpy prediction paths
# ---------------------------------------------------------------------------

def _check_X(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.config.input_dim:
        raise ConfigError(f"covariate dim {X.shape[1]} != {model.config.input_dim}")
    return X


def _check_dose(model: TrainedModel, a) -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if model.config.treatment_kind == BINARY:
        if not np.all((a == 0.0) | (a == 1.0)):
            raise DomainError("binary treatment takes arms {0, 1}")
    elif np.any(a < 0.0) or np.any(a > 1.0):
        raise DomainError("dose must lie in [0, 1]")
    return a


def rep_values(model: TrainedModel, X) -> np.ndarray:
    return forward_np(model.graphs["rep"], model.store, _check_X(model, X))


def _mu_from_z(model: TrainedModel, Z: np.ndarray, avec: np.ndarray) -> np.ndarray:
    cfg = model.config
    if cfg.treatment_kind == CONTINUOUS:
        bvals = eval_basis_batch(cfg.outcome_basis, avec)
        raw = forward_np(model.graphs["out"], model.store, Z, bvals)[:, 0]
    else:
        m0 = forward_np(model.graphs["out0"], model.store, Z)[:, 0]
        m1 = forward_np(model.graphs["out1"], model.store, Z)[:, 0]
        raw = np.where(avec == 1.0, m1, m0)
    return edf.clamp_mean(cfg.family, raw)


def predict_mu_obs(model: TrainedModel, X, avec) -> np.ndarray:
    """Clamped fitted means at per-row doses/arms."""
    X = _check_X(model, X)
    avec = _check_dose(model, avec)
    if avec.size == 1:
        avec = np.full(X.shape[0], avec[0])
    return _mu_from_z(model, rep_values(model, X), avec)


def predict_mu(model: TrainedModel, X, a: float) -> np.ndarray:
    """Clamped fitted means at one dose for every covariate row."""
    X = _check_X(model, X)
    a = float(_check_dose(model, a)[0])
    return _mu_from_z(model, rep_values(model, X), np.full(X.shape[0], a))


def predict_theta(model: TrainedModel, X, a: float) -> np.ndarray:
    """h(mu_hat(x, a)) using the family link after clamping."""
    return edf.link(model.config.family, predict_mu(model, X, a))


def density_grid_values(model: TrainedModel, Z_or_X, from_rep: bool = False) -> np.ndarray:
    """Normalized density values v_b at the B+1 grid points (continuous only).

    Softmax scores are renormalized by the closed-form trapezoid constant
    Z(x) = (sum_b s_b - (s_0 + s_B)/2) / B so the piecewise-linear
    interpolant integrates to exactly 1.
    """
    cfg = model.config
    if cfg.treatment_kind != CONTINUOUS:
        raise ConfigError("density grid is defined for continuous treatment")
    Z = Z_or_X if from_rep else rep_values(model, Z_or_X)
    logits = forward_np(model.graphs["dens"], model.store, Z)
    shifted = logits - logits.max(axis=1, keepdims=True)
    s = np.exp(shifted)
    s /= s.sum(axis=1, keepdims=True)
    B = cfg.density_grid_b
    norm = (s.sum(axis=1) - 0.5 * (s[:, 0] + s[:, -1])) / B
    if np.any(norm <= 0):
        raise ConfigError("nonpositive density normalizer (softmax scores broken)")
    return s / norm[:, None]


def interp_density(v: np.ndarray, avec: np.ndarray, grid_b: int) -> np.ndarray:
    """Linear interpolation of grid density values at doses; u = B*a - floor(B*a)."""
    scaled = grid_b * np.asarray(avec, dtype=float)
    idx = np.minimum(np.floor(scaled).astype(int), grid_b - 1)
    u = scaled - idx
    rows = np.arange(v.shape[0])
    return v[rows, idx] * (1.0 - u) + v[rows, idx + 1] * u


def predict_pi_obs(model: TrainedModel, X, avec) -> np.ndarray:
    """Density value (continuous) or arm probability (binary) at per-row doses."""
    X = _check_X(model, X)
    avec = _check_dose(model, avec)
    if avec.size == 1:
        avec = np.full(X.shape[0], avec[0])
    Z = rep_values(model, X)
    cfg = model.config
    if cfg.treatment_kind == CONTINUOUS:
        v = density_grid_values(model, Z, from_rep=True)
        return interp_density(v, avec, cfg.density_grid_b)
    logit = forward_np(model.graphs["dens"], model.store, Z)[:, 0]
    p1 = expit(logit)
    return np.where(avec == 1.0, p1, 1.0 - p1)


def predict_pi(model: TrainedModel, X, a: float) -> np.ndarray:
    X = _check_X(model, X)
    a = float(_check_dose(model, a)[0])
    return predict_pi_obs(model, X, np.full(X.shape[0], a))


def eval_eps(model: TrainedModel, a) -> np.ndarray | float:
    """eps_hat(a) = sum_k c_k B_k(a) from the perturbation slice."""
    scalar = np.isscalar(a) or np.ndim(a) == 0
    avec = np.atleast_1d(np.asarray(a, dtype=float))
    bvals = eval_basis_batch(model.config.eps_basis, avec)
    out = bvals @ model.store.view("eps")
    return float(out[0]) if scalar else out


def predict_mu_dose_grid(model: TrainedModel, X, doses) -> np.ndarray:
    """Clamped means for every (dose, row) pair; returns (len(doses), n).

    Chunked all-pairs evaluation reusing the shared representation, for
    dose-curve estimators (continuous treatment).
    """
    cfg = model.config
    if cfg.treatment_kind != CONTINUOUS:
        raise ConfigError("dose grids apply to continuous treatment")
    X = _check_X(model, X)
    doses = _check_dose(model, doses)
    Z = rep_values(model, X)
    n = Z.shape[0]
    bgrid = eval_basis_batch(cfg.outcome_basis, doses)
    chunk = max(1, 2_000_000 // max(n, 1))
    out = np.empty((doses.size, n))
    for start in range(0, doses.size, chunk):
        idx = slice(start, min(start + chunk, doses.size))
        c = idx.stop - idx.start
        bpairs = np.repeat(bgrid[idx], n, axis=0)
        zpairs = np.tile(Z, (c, 1))
        raw = forward_np(model.graphs["out"], model.store, zpairs, bpairs)[:, 0]
        out[idx] = raw.reshape(c, n)
    return edf.clamp_mean(cfg.family, out)


# ---------------------------------------------------------------------------
# taped paths (training); mirror the numpy forward exactly
# ---------------------------------------------------------------------------

def tape_rep(model: TrainedModel, leaves, X) -> tape.Tensor:
    return forward_tape(model.graphs["rep"], leaves, np.asarray(X, dtype=float))


def tape_mu_obs(model: TrainedModel, leaves, Zt: tape.Tensor, avec: np.ndarray,
                bvals_out: np.ndarray | None = None) -> tape.Tensor:
    """Clamped mean at observed doses, as a tape tensor over shared features."""
    cfg = model.config
    if cfg.treatment_kind == CONTINUOUS:
        if bvals_out is None:
            bvals_out = eval_basis_batch(cfg.outcome_basis, avec)
        raw = forward_tape(model.graphs["out"], leaves, Zt, bvals_out)
        raw = tape.take_col(raw, 0)
    else:
        m0 = tape.take_col(forward_tape(model.graphs["out0"], leaves, Zt), 0)
        m1 = tape.take_col(forward_tape(model.graphs["out1"], leaves, Zt), 0)
        raw = tape.where_const(avec == 1.0, m1, m0)
    fam = cfg.family
    if fam.kind == edf.BERNOULLI:
        return tape.clip(raw, edf.EPS_MEAN, 1.0 - edf.EPS_MEAN)
    if fam.kind == edf.POISSON:
        return tape.clip(raw, edf.EPS_MEAN, None)
    return raw


def tape_pi_obs(model: TrainedModel, leaves, Zt: tape.Tensor, avec: np.ndarray
                ) -> tape.Tensor:
    """Density value / arm probability at observed doses, as a tape tensor."""
    cfg = model.config
    if cfg.density_head_detach_trunk:
        Zt = tape.stop_gradient(Zt)
    if cfg.treatment_kind == BINARY:
        logit = tape.take_col(forward_tape(model.graphs["dens"], leaves, Zt), 0)
        p1 = tape.sigmoid(logit)
        return tape.where_const(avec == 1.0, p1, 1.0 - p1)
    logits = forward_tape(model.graphs["dens"], leaves, Zt)
    s = tape.softmax_rows(logits)
    B = cfg.density_grid_b
    norm = (s.sum(axis=1) - (tape.take_col(s, 0) + tape.take_col(s, B)) * 0.5) * (1.0 / B)
    scaled = B * np.asarray(avec, dtype=float)
    idx = np.minimum(np.floor(scaled).astype(int), B - 1)
    u = scaled - idx
    v_lo = tape.gather_cols(s, idx)
    v_hi = tape.gather_cols(s, idx + 1)
    return tape.div(tape.add(tape.mul(v_lo, 1.0 - u), tape.mul(v_hi, u)), norm)


def tape_eps_obs(model: TrainedModel, leaves, bvals_eps: np.ndarray) -> tape.Tensor:
    """eps(a_i) over the batch from precomputed eps-basis values."""
    return tape.matmul(bvals_eps, leaves["eps"])


# ---------------------------------------------------------------------------
# checkpoint serialization (decimal-exact round trip on the parameter vector)
# ---------------------------------------------------------------------------

CHECKPOINT_SCHEMA = "efdose-checkpoint-v1"


def config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "treatment_kind": cfg.treatment_kind,
        "family": {"kind": cfg.family.kind, "dispersion": cfg.family.dispersion},
        "input_dim": cfg.input_dim,
        "rep_dims": list(cfg.rep_dims),
        "outcome_dims": list(cfg.outcome_dims),
        "density_grid_b": cfg.density_grid_b,
        "outcome_basis": basis_to_dict(cfg.outcome_basis),
        "eps_basis": basis_to_dict(cfg.eps_basis),
        "hidden_activation": cfg.hidden_activation,
        "outcome_final_activation": cfg.outcome_final_activation,
        "density_head_detach_trunk": cfg.density_head_detach_trunk,
    }


def config_from_dict(d: dict) -> ModelConfig:
    fam = edf.FamilySpec(d["family"]["kind"], float(d["family"]["dispersion"]))
    return ModelConfig(
        treatment_kind=d["treatment_kind"],
        family=fam,
        input_dim=int(d["input_dim"]),
        rep_dims=tuple(int(v) for v in d["rep_dims"]),
        outcome_dims=tuple(int(v) for v in d["outcome_dims"]),
        density_grid_b=int(d["density_grid_b"]),
        outcome_basis=basis_from_dict(d["outcome_basis"]),
        eps_basis=basis_from_dict(d["eps_basis"]),
        hidden_activation=d["hidden_activation"],
        outcome_final_activation=d["outcome_final_activation"],
        density_head_detach_trunk=bool(d["density_head_detach_trunk"]),
    )


def save_checkpoint(model: TrainedModel, path: str) -> None:
    doc = {
        "schema": CHECKPOINT_SCHEMA,
        "config": config_to_dict(model.config),
        "params": [float(v) for v in model.store.vec],
        "metadata": model.metadata,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise ConfigError(f"unexpected checkpoint schema {doc.get('schema')!r}")
    cfg = config_from_dict(doc["config"])
    model = build_model(cfg, seed=0)
    model.store.load_vector(np.asarray(doc["params"], dtype=float))
    model.metadata = dict(doc.get("metadata", {}))
    return model
