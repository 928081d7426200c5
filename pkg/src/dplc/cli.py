"""Command-line interface: fit, predict, simulate, and benchmark.

Datasets are CSV files with a header row: required outcome columns `time`
(positive real) and `status` (0/1), penalized covariates prefixed `x_`,
and network covariates prefixed `z_`.  Missing or malformed cells are hard
errors with line/column diagnostics; nothing is imputed or coerced.

Run configuration is a JSON file mirroring the fit and simulation settings
(every field optional, unknown keys rejected).  All randomness flows from
one seed, so repeated invocations produce byte-identical outputs.

Exit codes: 0 success, 2 input/schema error, 3 numerical failure.
The DPLC_LOG environment variable (DEBUG/INFO/WARNING) controls logging.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from .errors import NumericalDivergence
from .estimator import (FitConfig, model_from_dict, model_to_dict,
                        predict_eta, tune_architecture, tune_lambda)
from .network import AdamState, NetworkArch
from .scad import ScadConfig
from .simulation import (MethodConfig, ReplicateCsvWriter, SimConfig,
                         c_index, fmt_value, run_experiment, simulate_dataset)
from .survival import SurvivalDataset

logger = logging.getLogger(__name__)


class CliInputError(Exception):
    """Bad input file, schema violation, or inconsistent configuration."""


DEFAULT_LAMBDA_GRID = [round(v, 6) for v in np.geomspace(0.05, 5.0, 12)]

CONFIG_DEFAULTS = {
    "seed": 0,
    "sim": {
        "n": 300, "p": 50, "r": 8, "s_beta": 10, "rho": 0.2,
        "g0_kind": "linear", "target_censoring": 0.3, "mu": 1.0,
        "replicates": 10,
    },
    "scad": {"lam": 0.5, "a": 3.7},
    "lambda_grid": DEFAULT_LAMBDA_GRID,
    "network": {
        "hidden_widths": [8, 8], "dropout_rate": 0.3, "learning_rate": 0.01,
        "r1": 0.9, "r2": 0.999, "eps0": 1e-8, "inner_steps": 20,
        "adam_tol": 1e-7,
    },
    "solver": {"outer_tol": 1e-4, "max_outer": 25, "cd_tol": 1e-5,
               "max_sweeps": 100},
    "tune_arch": {
        "enabled": False, "depth_grid": [1, 2], "width_grid": [2, 4, 8],
        "dropout_grid": [0.3, 0.5], "lr_grid": [0.005, 0.02],
        "criterion": "validation",
    },
    "benchmark": {"baseline": True, "threads": 1},
}


def _merge_config(defaults, user, path=""):
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        where = path + key
        if key not in defaults:
            raise CliInputError("unknown config key: %s" % where)
        base = defaults[key]
        if isinstance(base, dict):
            if not isinstance(value, dict):
                raise CliInputError("config key %s must be an object" % where)
            merged[key] = _merge_config(base, value, where + ".")
        elif isinstance(base, bool):
            if not isinstance(value, bool):
                raise CliInputError("config key %s must be a boolean" % where)
            merged[key] = value
        elif isinstance(base, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise CliInputError("config key %s must be a number" % where)
            merged[key] = value
        elif isinstance(base, str):
            if not isinstance(value, str):
                raise CliInputError("config key %s must be a string" % where)
            merged[key] = value
        elif isinstance(base, list):
            if not isinstance(value, list):
                raise CliInputError("config key %s must be a list" % where)
            merged[key] = value
        else:
            merged[key] = value
    return merged


def load_run_config(path) -> dict:
    """Read and validate a run-config JSON file; defaults fill the gaps."""
    if path is None:
        return copy.deepcopy(CONFIG_DEFAULTS)
    try:
        with open(path) as fh:
            user = json.load(fh)
    except OSError as exc:
        raise CliInputError("cannot read config: %s" % exc)
    except json.JSONDecodeError as exc:
        raise CliInputError("config %s line %d column %d: %s"
                            % (path, exc.lineno, exc.colno, exc.msg))
    if not isinstance(user, dict):
        raise CliInputError("config root must be a JSON object")
    return _merge_config(CONFIG_DEFAULTS, user)


def load_dataset_csv(path, require_outcome: bool = True):
    """Parse a dataset CSV into arrays plus the covariate column names.

    Returns (times, status, x, z, x_names, z_names); times/status are None
    when absent and not required.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CliInputError("cannot read data: %s" % exc)
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CliInputError("%s: empty file" % path)
        names = [h.strip() for h in header]
        if len(set(names)) != len(names):
            raise CliInputError("%s: duplicate column names" % path)
        col_of = {name: k for k, name in enumerate(names)}
        x_names = [n for n in names if n.startswith("x_")]
        z_names = [n for n in names if n.startswith("z_")]
        extras = [n for n in names
                  if n not in ("time", "status") and not n.startswith(("x_", "z_"))]
        if extras:
            raise CliInputError("%s: unrecognized columns: %s"
                                % (path, ", ".join(extras)))
        for required in ("time", "status") if require_outcome else ():
            if required not in col_of:
                raise CliInputError("%s: missing required column '%s'"
                                    % (path, required))
        if not x_names or not z_names:
            raise CliInputError("%s: need at least one x_ and one z_ column"
                                % path)

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise CliInputError("%s line %d: expected %d cells, got %d"
                                    % (path, lineno, len(names), len(row)))
            parsed = []
            for k, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise CliInputError("%s line %d, column '%s': missing value"
                                        % (path, lineno, names[k]))
                try:
                    value = float(cell)
                except ValueError:
                    raise CliInputError("%s line %d, column '%s': not a number: %r"
                                        % (path, lineno, names[k], cell))
                if not math.isfinite(value):
                    raise CliInputError("%s line %d, column '%s': non-finite value"
                                        % (path, lineno, names[k]))
                parsed.append(value)
            rows.append(parsed)
        if not rows:
            raise CliInputError("%s: no data rows" % path)

    data = np.array(rows)
    times = status = None
    if "time" in col_of:
        times = data[:, col_of["time"]]
        if np.any(times <= 0):
            raise CliInputError("%s: column 'time' must be > 0" % path)
    if "status" in col_of:
        status = data[:, col_of["status"]]
        if not np.all(np.isin(status, (0.0, 1.0))):
            raise CliInputError("%s: column 'status' must be 0 or 1" % path)
    if require_outcome and (times is None or status is None):
        raise CliInputError("%s: time and status are required" % path)
    x = data[:, [col_of[n] for n in x_names]]
    z = data[:, [col_of[n] for n in z_names]]
    return times, status, x, z, x_names, z_names


def _sim_config(config: dict, seed) -> SimConfig:
    sim = config["sim"]
    try:
        return SimConfig(n=int(sim["n"]), p=int(sim["p"]), r=int(sim["r"]),
                         s_beta=int(sim["s_beta"]), rho=float(sim["rho"]),
                         g0_kind=str(sim["g0_kind"]),
                         target_censoring=float(sim["target_censoring"]),
                         mu=float(sim["mu"]),
                         replicates=int(sim["replicates"]),
                         seed=int(seed))
    except ValueError as exc:
        raise CliInputError("invalid sim config: %s" % exc)


def _fit_config(config: dict, input_dim: int, seed) -> FitConfig:
    net = config["network"]
    solver = config["solver"]
    try:
        return FitConfig(
            scad=ScadConfig(lam=float(config["scad"]["lam"]),
                            a=float(config["scad"]["a"])),
            arch=NetworkArch(input_dim=input_dim,
                             hidden_widths=tuple(int(w) for w in net["hidden_widths"]),
                             dropout_rate=float(net["dropout_rate"])),
            adam=AdamState(r1=float(net["r1"]), r2=float(net["r2"]),
                           gamma=float(net["learning_rate"]),
                           eps0=float(net["eps0"])),
            inner_steps=int(net["inner_steps"]),
            adam_tol=float(net["adam_tol"]),
            cd_tol=float(solver["cd_tol"]),
            max_sweeps=int(solver["max_sweeps"]),
            outer_tol=float(solver["outer_tol"]),
            max_outer=int(solver["max_outer"]),
            seed=int(seed),
        )
    except ValueError as exc:
        raise CliInputError("invalid fit config: %s" % exc)


def _parse_lambda_grid(text: str):
    try:
        grid = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise CliInputError("--lambda-grid must be comma-separated numbers")
    if not grid or any(b < a for a, b in zip(grid, grid[1:])):
        raise CliInputError("--lambda-grid must be non-empty and ascending")
    return grid


def _parse_arch_grid(text: str, tune_defaults: dict) -> dict:
    """Parse 'depths=1,2;widths=4,8;dropout=0.3;lr=0.01' into grid settings."""
    grids = dict(tune_defaults)
    grids["enabled"] = True
    keymap = {"depths": ("depth_grid", int), "widths": ("width_grid", int),
              "dropout": ("dropout_grid", float), "lr": ("lr_grid", float)}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise CliInputError("--arch-grid parts must look like name=v1,v2")
        name, _, values = part.partition("=")
        name = name.strip()
        if name not in keymap:
            raise CliInputError("--arch-grid: unknown grid '%s'" % name)
        key, cast = keymap[name]
        try:
            grids[key] = [cast(tok) for tok in values.split(",") if tok.strip()]
        except ValueError:
            raise CliInputError("--arch-grid: bad values for '%s'" % name)
        if not grids[key]:
            raise CliInputError("--arch-grid: empty grid for '%s'" % name)
    return grids


def _json_dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_selection_table(path, beta, support, x_names):
    """Selected features with coefficients and hazard ratios exp(beta)."""
    order = sorted(support, key=lambda j: (-abs(beta[j]), j))
    with open(path, "w") as fh:
        fh.write("feature\tbeta\thazard_ratio\n")
        for j in order:
            fh.write("%s\t%.6g\t%.4f\n" % (x_names[j], beta[j],
                                           math.exp(beta[j])))


def _number_list(values, cast, where):
    try:
        out = [cast(v) for v in values]
    except (TypeError, ValueError):
        raise CliInputError("config %s must hold numbers" % where)
    if not out:
        raise CliInputError("config %s must be non-empty" % where)
    return out


def _lambda_grid_from(config, args):
    if getattr(args, "lambda_grid", None):
        return _parse_lambda_grid(args.lambda_grid)
    grid = _number_list(config["lambda_grid"], float, "lambda_grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise CliInputError("config lambda_grid must be ascending")
    return grid


def cmd_fit(args) -> int:
    config = load_run_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    times, status, x, z, x_names, z_names = load_dataset_csv(args.data)
    try:
        dataset = SurvivalDataset(times=times, status=status, x=x, z=z)
    except ValueError as exc:
        raise CliInputError("%s: %s" % (args.data, exc))
    lambda_grid = _lambda_grid_from(config, args)
    cfg = _fit_config(config, dataset.r, seed)

    tune = dict(config["tune_arch"])
    if args.arch_grid:
        tune = _parse_arch_grid(args.arch_grid, tune)
    os.makedirs(args.out, exist_ok=True)
    if tune["enabled"]:
        for key, cast in (("depth_grid", int), ("width_grid", int),
                          ("dropout_grid", float), ("lr_grid", float)):
            tune[key] = _number_list(tune[key], cast, "tune_arch." + key)
        if tune["criterion"] not in ("validation", "bic"):
            raise CliInputError("tune_arch.criterion must be "
                                "'validation' or 'bic'")
    try:
        if tune["enabled"]:
            choice = tune_architecture(dataset, tune["depth_grid"],
                                       tune["width_grid"], tune["dropout_grid"],
                                       tune["lr_grid"], cfg,
                                       criterion=tune["criterion"])
            cfg = FitConfig(scad=cfg.scad, arch=choice.arch,
                            adam=AdamState(r1=cfg.adam.r1, r2=cfg.adam.r2,
                                           gamma=choice.learning_rate,
                                           eps0=cfg.adam.eps0),
                            inner_steps=cfg.inner_steps, adam_tol=cfg.adam_tol,
                            cd_tol=cfg.cd_tol, max_sweeps=cfg.max_sweeps,
                            outer_tol=cfg.outer_tol, max_outer=cfg.max_outer,
                            fit_g=cfg.fit_g, seed=cfg.seed)
        best_lam, path = tune_lambda(dataset, lambda_grid, cfg)
        best = next(e for e in path if e.lam == best_lam)
        model = best.model
        eta_train = predict_eta(model, dataset.x, dataset.z)
        model.diagnostics["c_index_train"] = c_index(eta_train, dataset.times,
                                                     dataset.status)
        model.diagnostics["lambda_selected"] = best_lam
    except NumericalDivergence as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3

    _json_dump(model_to_dict(model, cfg, x_names=x_names, z_names=z_names),
               os.path.join(args.out, "model.json"))

    with open(os.path.join(args.out, "bic_path.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "bic", "n_selected"])
        for entry in path:
            writer.writerow([fmt_value(entry.lam), fmt_value(entry.bic),
                             entry.n_selected])

    write_selection_table(os.path.join(args.out, "selection.txt"),
                          model.beta_hat, model.support, x_names)

    print("selected %d of %d features at lambda=%s (bic=%s)"
          % (model.n_selected, dataset.p, fmt_value(best_lam),
             fmt_value(model.diagnostics["bic"])))
    print("train c_index=%s" % fmt_value(model.diagnostics["c_index_train"]))
    return 0


def cmd_predict(args) -> int:
    try:
        with open(args.model) as fh:
            bundle = json.load(fh)
    except OSError as exc:
        raise CliInputError("cannot read model: %s" % exc)
    except json.JSONDecodeError as exc:
        raise CliInputError("model %s line %d column %d: %s"
                            % (args.model, exc.lineno, exc.colno, exc.msg))
    try:
        model = model_from_dict(bundle)
    except (ValueError, KeyError, TypeError) as exc:
        raise CliInputError("invalid model file: %s" % exc)
    columns = bundle.get("columns")
    if not columns:
        raise CliInputError("model file lacks column names; cannot match data")

    times, status, x, z, x_names, z_names = load_dataset_csv(
        args.data, require_outcome=False)
    if set(x_names) != set(columns["x"]) or set(z_names) != set(columns["z"]):
        raise CliInputError(
            "data columns do not match training schema "
            "(expected x: %s; z: %s)" % (",".join(columns["x"]),
                                         ",".join(columns["z"])))
    x = x[:, [x_names.index(n) for n in columns["x"]]]
    z = z[:, [z_names.index(n) for n in columns["z"]]]

    try:
        eta = predict_eta(model, x, z)
    except NumericalDivergence as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "eta"])
        for i, value in enumerate(eta):
            writer.writerow([i, fmt_value(float(value))])
    if times is not None and status is not None:
        print("c_index=%s" % fmt_value(c_index(eta, times, status)))
    print("wrote %d predictions to %s" % (eta.size, args.out))
    return 0


def cmd_simulate(args) -> int:
    config = load_run_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    sim_cfg = _sim_config(config, seed)
    data = simulate_dataset(sim_cfg, replicate=0)
    os.makedirs(args.out, exist_ok=True)
    ds = data.dataset
    csv_path = os.path.join(args.out, "dataset.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "status"]
                        + ["x_%d" % (j + 1) for j in range(ds.p)]
                        + ["z_%d" % (k + 1) for k in range(ds.r)])
        for i in range(ds.n):
            writer.writerow([fmt_value(float(ds.times[i])),
                             int(ds.status[i])]
                            + [fmt_value(float(v)) for v in ds.x[i]]
                            + [fmt_value(float(v)) for v in ds.z[i]])
    truth = {
        "beta0": [[int(j), float(data.beta0[j])] for j in data.support0],
        "support": [int(j) for j in data.support0],
        "alpha0": None if data.alpha0 is None
        else [float(v) for v in data.alpha0],
        "g0_kind": sim_cfg.g0_kind,
        "censoring_bound": data.censoring_bound,
        "censoring_rate": data.censoring_rate,
        "sim": asdict(sim_cfg),
    }
    _json_dump(truth, os.path.join(args.out, "truth.json"))
    print("wrote %s (n=%d, p=%d, r=%d, censoring=%.1f%%)"
          % (csv_path, ds.n, ds.p, ds.r, 100.0 * data.censoring_rate))
    return 0


def cmd_benchmark(args) -> int:
    config = load_run_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    threads = args.threads if args.threads is not None \
        else int(config["benchmark"]["threads"])
    if threads < 1:
        raise CliInputError("--threads must be >= 1")
    sim_cfg = _sim_config(config, seed)
    lambda_grid = _lambda_grid_from(config, args)
    fit_cfg = _fit_config(config, sim_cfg.r, seed)
    methods = [MethodConfig(name="dplc", fit=fit_cfg,
                            lambda_grid=tuple(lambda_grid))]
    if config["benchmark"]["baseline"]:
        methods.append(MethodConfig(name="cox_scad",
                                    fit=replace(fit_cfg, fit_g=False),
                                    lambda_grid=tuple(lambda_grid)))

    os.makedirs(args.out, exist_ok=True)
    with ReplicateCsvWriter(os.path.join(args.out, "replicates.csv")) as sink:
        report = run_experiment(sim_cfg, methods, n_workers=threads,
                                row_callback=sink.write_row)

    _json_dump({"sim": asdict(sim_cfg), "methods": [m.name for m in methods],
                "summary": report.summary},
               os.path.join(args.out, "summary.json"))

    with open(os.path.join(args.out, "cindex_long.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", "method", "c_index"])
        for row in report.rows:
            if row.error is None:
                writer.writerow([row.replicate, row.method,
                                 fmt_value(row.c_index_test)])

    sel_fields = ["selected_count", "fpn", "fpr_pct", "fnn", "fnr_pct"]
    header = ["method", "selected_features", "selected_features_se",
              "fpn", "fpn_se", "fpr_pct", "fpr_pct_se",
              "fnn", "fnn_se", "fnr_pct", "fnr_pct_se"]
    with open(os.path.join(args.out, "selection_summary.csv"), "w",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for m in methods:
            entry = report.summary[m.name]
            cells = [m.name]
            for name in sel_fields:
                stats = entry.get(name)
                cells += ["" if stats is None else fmt_value(stats["mean"]),
                          "" if stats is None else fmt_value(stats["se"])]
            writer.writerow(cells)

    for m in methods:
        entry = report.summary[m.name]
        cstats = entry.get("c_index")
        print("%s: ok=%d failed=%d%s"
              % (m.name, entry["replicates_ok"], entry["replicates_failed"],
                 "" if cstats is None else
                 " median c_index=%s (iqr=%s)" % (fmt_value(cstats["median"]),
                                                  fmt_value(cstats["iqr"]))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dplc",
        description="Sparse partially linear Cox regression with a neural "
                    "risk term, plus a simulation benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="tune and fit a model on a dataset CSV")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--config")
    p_fit.add_argument("--out", required=True,
                       help="output directory for model.json, selection.txt, "
                            "bic_path.csv")
    p_fit.add_argument("--seed", type=int)
    p_fit.add_argument("--lambda-grid", dest="lambda_grid")
    p_fit.add_argument("--arch-grid", dest="arch_grid")
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", help="linear predictors for new data")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--out", required=True, help="predictions CSV path")
    p_pred.set_defaults(func=cmd_predict)

    p_sim = sub.add_parser("simulate", help="write one synthetic dataset")
    p_sim.add_argument("--config")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int)
    p_sim.set_defaults(func=cmd_simulate)

    p_bench = sub.add_parser("benchmark",
                             help="replicated simulation experiment")
    p_bench.add_argument("--config")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--threads", type=int)
    p_bench.add_argument("--lambda-grid", dest="lambda_grid")
    p_bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("DPLC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print("input error: %s" % exc, file=sys.stderr)
        return 2
    except NumericalDivergence as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
