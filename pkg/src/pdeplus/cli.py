"""Command-line front end: simulate, fit, predict and benchmark subcommands.

Exit codes: 1 for I/O and data-file problems, 2 for configuration
problems, 3 for numerical failures during fitting or prediction.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .benchmark import default_config, run_benchmark
from .data import load_long_csv, save_long_csv
from .exceptions import InvalidInputError, PdePlusError
from .metrics import matched_direction_accuracy
from .model import (
    PdePlusConfig,
    load_model,
    model_to_dict,
    pdeplus_fit,
    pdeplus_predict_points,
)
from .pde import PdeConfig
from .simulate import generate

EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _add_common_flags(parser):
    parser.add_argument("--config", type=Path, help="JSON file with defaults; flags win")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _add_model_flags(parser):
    parser.add_argument("--kappa", type=int, help="number of mean components")
    parser.add_argument("--h-y", dest="h_y", type=float, help="curve-index bandwidth")
    parser.add_argument("--h-x", dest="h_x", type=float, help="covariate-index bandwidth")
    parser.add_argument("--delta", type=float, help="basis convergence tolerance")
    parser.add_argument("--slices", type=int, help="slice count for the initializer")
    parser.add_argument("--knn", type=int, help="neighbor count for coefficient transfer")


def build_parser():
    parser = argparse.ArgumentParser(prog="pdeplus", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a synthetic dataset and its truth file")
    p_sim.add_argument("--example", type=int, choices=(1, 2), required=True)
    p_sim.add_argument("--n", type=int, required=True, help="number of locations")
    p_sim.add_argument("--seed", type=int, default=0)
    _add_common_flags(p_sim)

    p_fit = sub.add_parser("fit", help="fit the predictor on a long-format CSV")
    p_fit.add_argument("--data", type=Path, required=True, help="long CSV id,s1,s2,t,y")
    p_fit.add_argument("--covariates", type=Path, help="optional CSV id,x1..xp")
    p_fit.add_argument("--truth", type=Path, help="truth JSON for direction diagnostics")
    _add_model_flags(p_fit)
    _add_common_flags(p_fit)

    p_pred = sub.add_parser("predict", help="predict at query rows with a fitted model")
    p_pred.add_argument("--model", type=Path, required=True, help="model JSON from fit")
    p_pred.add_argument("--queries", type=Path, required=True, help="CSV id,s1,s2,t")
    _add_common_flags(p_pred)

    p_bench = sub.add_parser("benchmark", help="replicated comparison with the baselines")
    p_bench.add_argument("--example", type=int, choices=(1, 2), required=True)
    p_bench.add_argument("--replicates", type=int, default=20)
    p_bench.add_argument("--n", type=int, help="locations per replicate (default per example)")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--test-fraction", dest="test_fraction", type=float)
    _add_model_flags(p_bench)
    _add_common_flags(p_bench)
    return parser


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}", EXIT_IO) from exc
    if not isinstance(payload, dict):
        raise CliError("config file must hold a JSON object", EXIT_CONFIG)
    return payload


def _merged(args, file_config, keys):
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in file_config:
            merged[key] = file_config[key]
    return merged


def _build_model_config(args, file_config):
    values = _merged(
        args, file_config, ("kappa", "h_y", "h_x", "delta", "knn")
    )
    slices = getattr(args, "slices", None)
    if slices is not None:
        values["n_slices"] = slices
    elif "slices" in file_config:
        values["n_slices"] = file_config["slices"]
    for key in (
        "n_slices",
        "init_method",
        "max_iter",
        "n_space_bins",
        "max_time_lag",
        "variogram_starts",
        "nugget_override",
        "second_pass",
        "suppress_mean",
    ):
        if key in file_config and key not in values:
            values[key] = file_config[key]
    try:
        pde_keys = ("kappa", "h_y", "h_x", "delta", "max_iter", "n_slices", "init_method")
        pde = PdeConfig(**{k: values[k] for k in pde_keys if k in values})
        rest = {k: v for k, v in values.items() if k not in pde_keys}
        return PdePlusConfig(pde=pde, **rest)
    except (InvalidInputError, TypeError) as exc:
        raise CliError(f"bad configuration: {exc}", EXIT_CONFIG) from exc


def _ensure_out(args):
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory: {exc}", EXIT_IO) from exc
    return out


def cmd_simulate(args):
    file_config = _load_config_file(args.config)
    out = _ensure_out(args)
    n = args.n if args.n is not None else file_config.get("n")
    if n is None or n < 10:
        raise CliError("--n must be given and at least 10", EXIT_CONFIG)
    try:
        dataset, truth = generate(args.example, n, args.seed)
    except PdePlusError as exc:
        raise CliError(str(exc), EXIT_NUMERICAL) from exc
    data_path = out / f"example{args.example}_n{n}_seed{args.seed}.csv"
    truth_path = out / f"example{args.example}_n{n}_seed{args.seed}_truth.json"
    try:
        save_long_csv(dataset, data_path)
        with open(truth_path, "w") as fh:
            json.dump(
                {
                    "example": truth.example,
                    "n": int(n),
                    "T": int(dataset.n_times),
                    "seed": args.seed,
                    "thetas": truth.thetas.tolist(),
                    "mean": truth.mean.tolist(),
                    "u": truth.u.tolist(),
                    "noise": truth.noise.tolist(),
                },
                fh,
            )
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}", EXIT_IO) from exc
    print(f"wrote {data_path} and {truth_path}")
    return 0


def _write_plot_data(out, model):
    if model.pass2 is None:
        return []
    written = []
    times = model.learn.times
    for j in range(model.kappa):
        basis = pd.DataFrame({"t": times, "w_hat": model.pass2.w_hats[:, j]})
        path = out / f"basis_function_{j + 1}.csv"
        basis.to_csv(path, index=False)
        written.append(path)
        coeff = pd.DataFrame(
            {
                "index_value": model.scaled.index_values[:, j],
                "f_tilde": model.scaled.f_tilde[:, j],
            }
        ).sort_values("index_value")
        path = out / f"scaled_coefficients_{j + 1}.csv"
        coeff.to_csv(path, index=False)
        written.append(path)
    return written


def cmd_fit(args):
    file_config = _load_config_file(args.config)
    out = _ensure_out(args)
    try:
        dataset = load_long_csv(args.data, covariates_path=args.covariates)
    except (OSError, pd.errors.ParserError, KeyError) as exc:
        raise CliError(f"cannot read data: {exc}", EXIT_IO) from exc
    except InvalidInputError as exc:
        raise CliError(f"bad data file: {exc}", EXIT_IO) from exc
    config = _build_model_config(args, file_config)
    try:
        model = pdeplus_fit(dataset, config)
    except (PdePlusError, np.linalg.LinAlgError) as exc:
        raise CliError(f"fit failed: {exc}", EXIT_NUMERICAL) from exc

    diagnostics = {
        "n": dataset.n,
        "T": dataset.n_times,
        "kappa": model.kappa,
        "covariance": model.covariance.to_dict(),
    }
    for tag, fit in (("pass1", model.pass1), ("pass2", model.pass2)):
        if fit is None:
            continue
        diagnostics[tag] = {
            "iterations": fit.iterations,
            "converged": bool(fit.converged),
            "step2_rss": list(fit.step2_rss),
            **{k: np.asarray(v).tolist() for k, v in fit.diagnostics.items() if k != "kappa"},
        }
    if args.truth is not None:
        try:
            with open(args.truth) as fh:
                truth = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read truth file: {exc}", EXIT_IO) from exc
        if model.thetas is not None and "thetas" in truth:
            cos = matched_direction_accuracy(
                model.thetas, np.asarray(truth["thetas"], dtype=float)
            )
            diagnostics["cos_abs"] = cos.tolist()

    model_path = out / "model.json"
    diag_path = out / "diagnostics.json"
    try:
        with open(model_path, "w") as fh:
            json.dump(model_to_dict(model), fh)
        with open(diag_path, "w") as fh:
            json.dump(diagnostics, fh, indent=2)
        plots = _write_plot_data(out, model)
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}", EXIT_IO) from exc
    print(f"wrote {model_path}, {diag_path} and {len(plots)} plot-data files")
    return 0


def cmd_predict(args):
    _load_config_file(args.config)
    out = _ensure_out(args)
    try:
        model = load_model(args.model)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise CliError(f"cannot read model: {exc}", EXIT_IO) from exc
    try:
        queries = pd.read_csv(args.queries)
    except (OSError, pd.errors.ParserError) as exc:
        raise CliError(f"cannot read queries: {exc}", EXIT_IO) from exc
    missing = {"id", "s1", "s2", "t"} - set(queries.columns)
    if missing:
        raise CliError(f"query CSV is missing columns {sorted(missing)}", EXIT_IO)
    locations = queries[["s1", "s2"]].to_numpy(dtype=float)
    times = queries["t"].to_numpy(dtype=float)
    try:
        z_hat = pdeplus_predict_points(model, locations, times)
    except (PdePlusError, np.linalg.LinAlgError) as exc:
        raise CliError(f"prediction failed: {exc}", EXIT_NUMERICAL) from exc
    result = queries[["id", "s1", "s2", "t"]].copy()
    result["z_hat"] = z_hat
    path = out / "predictions.csv"
    try:
        result.to_csv(path, index=False)
    except OSError as exc:
        raise CliError(f"cannot write predictions: {exc}", EXIT_IO) from exc
    print(f"wrote {path}")
    return 0


def cmd_benchmark(args):
    file_config = _load_config_file(args.config)
    default_n = {1: 100, 2: 150}[args.example]
    n = args.n if args.n is not None else file_config.get("n", default_n)
    test_fraction = (
        args.test_fraction
        if args.test_fraction is not None
        else file_config.get("test_fraction", 0.2)
    )
    out = _ensure_out(args)
    overrides = _merged(args, file_config, ("h_y", "h_x", "delta", "knn"))
    kappa = args.kappa if args.kappa is not None else file_config.get("kappa", 2)
    try:
        config = default_config(args.example, kappa=kappa)
        if overrides.get("h_y") or overrides.get("h_x") or overrides.get("delta"):
            pde = PdeConfig(
                kappa=kappa,
                h_y=overrides.get("h_y", config.pde.h_y),
                h_x=overrides.get("h_x", config.pde.h_x),
                delta=overrides.get("delta", config.pde.delta),
            )
            config = PdePlusConfig(pde=pde, knn=overrides.get("knn", config.knn))
        elif "knn" in overrides:
            config = PdePlusConfig(pde=config.pde, knn=overrides["knn"])
    except InvalidInputError as exc:
        raise CliError(f"bad configuration: {exc}", EXIT_CONFIG) from exc
    try:
        result = run_benchmark(
            args.example,
            args.replicates,
            n,
            seed=args.seed,
            config=config,
            test_fraction=test_fraction,
        )
    except (PdePlusError, np.linalg.LinAlgError) as exc:
        raise CliError(f"benchmark failed: {exc}", EXIT_NUMERICAL) from exc
    table = result.format_table()
    print(table)
    try:
        result.replicates.to_csv(out / "benchmark_replicates.csv", index=False)
        result.summary.to_csv(out / "benchmark_summary.csv", index=False)
        (out / "benchmark_table.txt").write_text(table + "\n")
    except OSError as exc:
        raise CliError(f"cannot write outputs: {exc}", EXIT_IO) from exc
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "predict": cmd_predict,
        "benchmark": cmd_benchmark,
    }
    try:
        return handlers[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
