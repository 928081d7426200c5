"""Alternating estimation of the sparse linear term and the risk network.

One outer iteration runs a short Adam pass on the network with the linear
coefficients held fixed, then penalized coordinate descent on the
coefficients with the network held fixed.  The loop stops when the L2
change of the coefficients plus the empirical L2 change of the network
outputs drops below the outer tolerance.  Tuning utilities pick the
penalty strength by BIC over a grid (warm-started along the path) and the
architecture by held-out partial likelihood or BIC.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .coordinate_descent import cd_fit
from .network import (AdamState, Network, NetworkArch, adam_fit, center,
                      forward, init_network, network_from_dict,
                      network_to_dict, zero_network)
from .scad import ScadConfig, scad_value
from .survival import (Predictor, SurvivalDataset, build_risk_index,
                       neg_log_partial_likelihood, stratified_split, subset)


@dataclass(frozen=True)
class FitConfig:
    """Everything one fit needs besides the data.

    fit_g=False disables the network entirely (g identically zero), which
    is the plain SCAD-penalized Cox baseline.
    """

    scad: ScadConfig
    arch: NetworkArch
    adam: AdamState = field(default_factory=AdamState)
    inner_steps: int = 20
    adam_tol: float = 1e-7
    cd_tol: float = 1e-5
    max_sweeps: int = 100
    outer_tol: float = 1e-4
    max_outer: int = 50
    fit_g: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("adam_tol", "cd_tol", "outer_tol"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be > 0" % name)
        if self.inner_steps < 1 or self.max_sweeps < 1 or self.max_outer < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class FittedModel:
    """Sparse coefficients, the centered network, and fit diagnostics."""

    beta_hat: np.ndarray
    net: Network
    support: np.ndarray
    diagnostics: dict

    @property
    def n_selected(self) -> int:
        return int(self.support.size)


def _penalty_total(beta, scad_cfg):
    return float(np.sum(scad_value(np.abs(beta), scad_cfg)))


def fit(dataset: SurvivalDataset, cfg: FitConfig, *,
        beta_init=None, net_init: Optional[Network] = None) -> FittedModel:
    """Alternate network and coefficient updates until both stabilize."""
    if dataset.p < 1 or dataset.r < 1:
        raise ValueError("dataset needs at least one x and one z column")
    if cfg.fit_g and cfg.arch.input_dim != dataset.r:
        raise ValueError("arch.input_dim=%d but dataset has r=%d"
                         % (cfg.arch.input_dim, dataset.r))
    index = build_risk_index(dataset)
    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    if net_init is not None:
        net = net_init.copy()
    elif cfg.fit_g:
        net = init_network(cfg.arch, seeds[0])
    else:
        net = zero_network(dataset.r)
    adam_rng = np.random.default_rng(seeds[1])

    beta = np.zeros(dataset.p) if beta_init is None \
        else np.asarray(beta_init, dtype=float).copy()
    center(net, dataset.z)
    g_vals = forward(net, dataset.z, mode="eval")

    def penalized_loss(b, g):
        pred = Predictor.from_parts(dataset.x @ b, g)
        return neg_log_partial_likelihood(pred, dataset, index) \
            + _penalty_total(b, cfg.scad)

    loss_path = [penalized_loss(beta, g_vals)]
    cd_sweeps = []
    converged = False
    for _ in range(cfg.max_outer):
        if cfg.fit_g:
            adam_fit(net, dataset, index, beta, cfg.adam,
                     inner_steps=cfg.inner_steps, tol=cfg.adam_tol,
                     rng=adam_rng)
        g_new = forward(net, dataset.z, mode="eval")
        cd_info = {}
        beta_new = cd_fit(dataset, g_new, beta, cfg.scad,
                          tol=cfg.cd_tol, max_sweeps=cfg.max_sweeps,
                          index=index, info=cd_info)
        cd_sweeps.append(cd_info["sweeps"])
        loss_path.append(penalized_loss(beta_new, g_new))
        delta = float(np.linalg.norm(beta_new - beta)) \
            + float(np.sqrt(np.mean((g_new - g_vals) ** 2)))
        beta, g_vals = beta_new, g_new
        if delta <= cfg.outer_tol:
            converged = True
            break

    support = np.flatnonzero(beta != 0.0)
    model = FittedModel(beta_hat=beta, net=net, support=support,
                        diagnostics={
                            "loss_path": loss_path,
                            "outer_iters": len(cd_sweeps),
                            "cd_sweeps": cd_sweeps,
                            "converged": converged,
                        })
    model.diagnostics["bic"] = bic(model, dataset)
    return model


def predict_eta(model: FittedModel, x_new, z_new) -> np.ndarray:
    """Linear predictor beta'x + g(z); larger values mean higher hazard."""
    x = np.atleast_2d(np.asarray(x_new, dtype=float))
    z = np.atleast_2d(np.asarray(z_new, dtype=float))
    if x.shape[1] != model.beta_hat.size:
        raise ValueError("x has %d columns, model expects %d"
                         % (x.shape[1], model.beta_hat.size))
    if x.shape[0] != z.shape[0]:
        raise ValueError("x and z row counts differ")
    return x @ model.beta_hat + forward(model.net, z, mode="eval")


def bic(model: FittedModel, dataset: SurvivalDataset) -> float:
    """-2n * (average log partial likelihood) + log(n) * (selected count)."""
    index = build_risk_index(dataset)
    eta = predict_eta(model, dataset.x, dataset.z)
    pred = Predictor.from_parts(eta, np.zeros_like(eta))
    q = neg_log_partial_likelihood(pred, dataset, index)
    return float(2.0 * dataset.n * q + np.log(dataset.n) * model.n_selected)


@dataclass
class LambdaPathEntry:
    lam: float
    beta: np.ndarray
    bic: float
    n_selected: int
    model: FittedModel


def tune_lambda(dataset: SurvivalDataset, lambda_grid: Sequence[float],
                cfg: FitConfig):
    """Fit along an ascending penalty grid and pick the BIC minimizer.

    Each fit is warm-started from the previous grid point's coefficients
    and network.  BIC ties go to the larger penalty (the sparser model).
    Returns (best_lambda, path).
    """
    grid = [float(l) for l in lambda_grid]
    if not grid:
        raise ValueError("lambda_grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda_grid must be ascending")
    path = []
    beta_warm, net_warm = None, None
    best = None
    for lam in grid:
        cfg_lam = replace(cfg, scad=replace(cfg.scad, lam=lam))
        model = fit(dataset, cfg_lam, beta_init=beta_warm, net_init=net_warm)
        entry = LambdaPathEntry(lam=lam, beta=model.beta_hat.copy(),
                                bic=model.diagnostics["bic"],
                                n_selected=model.n_selected, model=model)
        path.append(entry)
        beta_warm, net_warm = model.beta_hat, model.net
        if best is None or entry.bic <= best.bic:
            best = entry
    return best.lam, path


@dataclass
class ArchSelection:
    arch: NetworkArch
    learning_rate: float
    criterion: str
    table: list


def tune_architecture(dataset: SurvivalDataset, depth_grid, width_grid,
                      dropout_grid, lr_grid, cfg: FitConfig, *,
                      criterion: str = "validation",
                      val_fraction: float = 0.2) -> ArchSelection:
    """Exhaustive grid search over depth, width, dropout, learning rate.

    criterion "validation" scores each cell by partial likelihood on a
    held-out stratified split; "bic" refits on all data and scores by BIC.
    Ties keep the smaller cell (depth, then width, then dropout, then
    learning rate; grids are sorted ascending before the scan).
    """
    if criterion not in ("validation", "bic"):
        raise ValueError("criterion must be 'validation' or 'bic'")
    depths = sorted(int(d) for d in depth_grid)
    widths = sorted(int(w) for w in width_grid)
    dropouts = sorted(float(d) for d in dropout_grid)
    lrs = sorted(float(g) for g in lr_grid)
    if not depths or not widths or not dropouts or not lrs:
        raise ValueError("all grids must be non-empty")

    if criterion == "validation":
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 17]))
        train_idx, val_idx = stratified_split(dataset.status, val_fraction, rng)
        train_ds, val_ds = subset(dataset, train_idx), subset(dataset, val_idx)
        val_index = build_risk_index(val_ds)
    else:
        train_ds, val_ds, val_index = dataset, None, None

    table = []
    best = None
    cell = 0
    for depth in depths:
        for width in widths:
            for rate in dropouts:
                for lr in lrs:
                    arch = NetworkArch(input_dim=dataset.r,
                                       hidden_widths=(width,) * depth,
                                       dropout_rate=rate)
                    cfg_cell = replace(
                        cfg, arch=arch,
                        adam=AdamState(r1=cfg.adam.r1, r2=cfg.adam.r2,
                                       gamma=lr, eps0=cfg.adam.eps0),
                        seed=cfg.seed + cell)
                    model = fit(train_ds, cfg_cell)
                    if criterion == "validation":
                        eta = predict_eta(model, val_ds.x, val_ds.z)
                        pred = Predictor.from_parts(eta, np.zeros_like(eta))
                        score = neg_log_partial_likelihood(pred, val_ds, val_index)
                    else:
                        score = bic(model, train_ds)
                    table.append({"depth": depth, "width": width,
                                  "dropout": rate, "lr": lr, "score": score})
                    if best is None or score < best[0]:
                        best = (score, arch, lr)
                    cell += 1
    return ArchSelection(arch=best[1], learning_rate=best[2],
                         criterion=criterion, table=table)


MODEL_FORMAT = "dplc-model"
MODEL_VERSION = 1


def config_to_dict(cfg: FitConfig) -> dict:
    return {
        "scad": {"lam": cfg.scad.lam, "a": cfg.scad.a},
        "arch": {"input_dim": cfg.arch.input_dim,
                 "hidden_widths": list(cfg.arch.hidden_widths),
                 "dropout_rate": cfg.arch.dropout_rate},
        "adam": {"r1": cfg.adam.r1, "r2": cfg.adam.r2,
                 "gamma": cfg.adam.gamma, "eps0": cfg.adam.eps0},
        "inner_steps": cfg.inner_steps,
        "adam_tol": cfg.adam_tol,
        "cd_tol": cfg.cd_tol,
        "max_sweeps": cfg.max_sweeps,
        "outer_tol": cfg.outer_tol,
        "max_outer": cfg.max_outer,
        "fit_g": cfg.fit_g,
        "seed": cfg.seed,
    }


def config_from_dict(data: dict) -> FitConfig:
    return FitConfig(
        scad=ScadConfig(lam=float(data["scad"]["lam"]), a=float(data["scad"]["a"])),
        arch=NetworkArch(input_dim=int(data["arch"]["input_dim"]),
                         hidden_widths=tuple(data["arch"]["hidden_widths"]),
                         dropout_rate=float(data["arch"]["dropout_rate"])),
        adam=AdamState(r1=float(data["adam"]["r1"]), r2=float(data["adam"]["r2"]),
                       gamma=float(data["adam"]["gamma"]),
                       eps0=float(data["adam"]["eps0"])),
        inner_steps=int(data["inner_steps"]),
        adam_tol=float(data["adam_tol"]),
        cd_tol=float(data["cd_tol"]),
        max_sweeps=int(data["max_sweeps"]),
        outer_tol=float(data["outer_tol"]),
        max_outer=int(data["max_outer"]),
        fit_g=bool(data["fit_g"]),
        seed=int(data["seed"]),
    )


def model_to_dict(model: FittedModel, cfg: FitConfig,
                  x_names=None, z_names=None) -> dict:
    """JSON bundle: sparse coefficients, network, config echo, diagnostics."""
    out = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "p": int(model.beta_hat.size),
        "beta": [[int(j), float(model.beta_hat[j])] for j in model.support],
        "network": network_to_dict(model.net),
        "config": config_to_dict(cfg),
        "diagnostics": {
            "loss_path": [float(v) for v in model.diagnostics.get("loss_path", [])],
            "outer_iters": model.diagnostics.get("outer_iters"),
            "cd_sweeps": model.diagnostics.get("cd_sweeps"),
            "converged": model.diagnostics.get("converged"),
            "bic": model.diagnostics.get("bic"),
            "c_index_train": model.diagnostics.get("c_index_train"),
            "lambda_selected": model.diagnostics.get("lambda_selected"),
        },
    }
    if x_names is not None:
        out["columns"] = {"x": list(x_names), "z": list(z_names or [])}
    return out


def model_from_dict(data: dict) -> FittedModel:
    if data.get("format") != MODEL_FORMAT:
        raise ValueError("not a model record")
    if data.get("version") != MODEL_VERSION:
        raise ValueError("unsupported model version: %r" % (data.get("version"),))
    beta = np.zeros(int(data["p"]))
    for j, value in data["beta"]:
        beta[int(j)] = float(value)
    net = network_from_dict(data["network"])
    return FittedModel(beta_hat=beta, net=net,
                       support=np.flatnonzero(beta != 0.0),
                       diagnostics=dict(data.get("diagnostics", {})))
