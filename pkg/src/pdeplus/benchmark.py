"""Replicated benchmark harness comparing the predictor against the baselines.

Each replicate generates a dataset, splits the sites 80/20, fits every
method on the learning sites and scores held-out curves with the two
error criteria.  Published reference values are carried alongside for
report annotation only; they are transcribed numbers, never test
targets for methods this package does not implement.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .baselines import OrdinaryKrigingModel, naive_predict
from .data import split_learn_test
from .exceptions import PdePlusError
from .metrics import matched_direction_accuracy, rimse_rpmse
from .model import PdePlusConfig, pdeplus_fit, pdeplus_predict
from .pde import PdeConfig
from .simulate import generate

# Transcribed published results (mean, sd over 100 replicates); None = not transcribed.
REFERENCE_RESULTS = {
    1: {
        "pdeplus": {"rimse": (4.517, 1.119), "rpmse": (1.188, 0.460)},
        "kriging": {"rimse": (5.912, 1.197), "rpmse": (1.618, None)},
        "naive": {"rimse": (37.103, 3.412), "rpmse": (None, None)},
    },
    2: {
        "pdeplus": {"rimse": (5.759, 1.313), "rpmse": (1.654, None)},
        "kriging": {"rimse": (7.375, 2.171), "rpmse": (2.612, None)},
        "naive": {"rimse": (65.722, 8.934), "rpmse": (None, None)},
    },
}

DEFAULT_BANDWIDTHS = {1: (3.0, 0.5), 2: (10.0, 0.5)}


@dataclass(frozen=True)
class BenchmarkResult:
    """Per-replicate metric table plus its mean/sd summary."""

    example: int
    replicates: pd.DataFrame
    summary: pd.DataFrame
    failures: list

    def format_table(self):
        lines = [f"Example {self.example} — mean (sd) over {self.replicates['replicate'].nunique()} replicates"]
        for method, group in self.summary.groupby("method", sort=False):
            cells = []
            for _, row in group.iterrows():
                sd = "n/a" if np.isnan(row["sd"]) else f"{row['sd']:.3f}"
                cells.append(f"{row['metric'].upper()} {row['mean']:.3f} ({sd})")
            ref = REFERENCE_RESULTS.get(self.example, {}).get(method)
            note = ""
            if ref:
                bits = [
                    f"{m.upper()} {v[0]}" for m, v in ref.items() if v[0] is not None
                ]
                note = f"   [published: {', '.join(bits)} — transcribed]"
            lines.append(f"  {method:<8} " + "  ".join(cells) + note)
        return "\n".join(lines)


def run_replicate(example, n, seed, config, test_fraction=0.2):
    """One generate/split/fit/score cycle; returns rows of metric records."""
    dataset, truth = generate(example, n, seed)
    split = split_learn_test(dataset, test_fraction, seed=seed + 10_000)
    learn = dataset.subset(split.learn)
    test = dataset.subset(split.test)

    records = []
    model = pdeplus_fit(learn, config)
    z_hat = pdeplus_predict(model, test.locations)
    rimse, rpmse = rimse_rpmse(test.Y, z_hat)
    cos = (
        matched_direction_accuracy(model.thetas, truth.thetas)
        if model.thetas is not None
        else np.asarray([])
    )
    records.append(
        {"method": "pdeplus", "rimse": rimse, "rpmse": rpmse, "cos_abs": cos.tolist()}
    )

    mean_curve = naive_predict(learn.Y)
    z_naive = np.tile(mean_curve, (test.n, 1))
    rimse, rpmse = rimse_rpmse(test.Y, z_naive)
    records.append({"method": "naive", "rimse": rimse, "rpmse": rpmse, "cos_abs": None})

    ok = OrdinaryKrigingModel(learn)
    z_ok = ok.predict_grid(test.locations)
    rimse, rpmse = rimse_rpmse(test.Y, z_ok)
    records.append({"method": "kriging", "rimse": rimse, "rpmse": rpmse, "cos_abs": None})
    return records


def default_config(example, kappa=2, **overrides):
    """Benchmark configuration with the published bandwidths for an example."""
    h_y, h_x = DEFAULT_BANDWIDTHS[example]
    pde_kwargs = {"kappa": kappa, "h_y": h_y, "h_x": h_x}
    for key in ("delta", "max_iter", "n_slices", "init_method"):
        if key in overrides:
            pde_kwargs[key] = overrides.pop(key)
    return PdePlusConfig(pde=PdeConfig(**pde_kwargs), **overrides)


def run_benchmark(example, n_replicates, n, seed=0, config=None, test_fraction=0.2):
    """Replicated comparison of the predictor with the naive and kriging baselines.

    Replicate ``r`` uses seed ``seed + r``.  Failed replicates are
    recorded and excluded; more than 10% failures aborts the run.
    """
    config = config or default_config(example)
    rows = []
    failures = []
    for r in range(n_replicates):
        rep_seed = seed + r
        try:
            for record in run_replicate(example, n, rep_seed, config, test_fraction):
                rows.append({"replicate": r, "seed": rep_seed, **record})
        except (PdePlusError, np.linalg.LinAlgError) as exc:
            failures.append({"replicate": r, "seed": rep_seed, "error": str(exc)})
            warnings.warn(f"replicate {r} failed: {exc}", stacklevel=2)
    if len(failures) > 0.1 * n_replicates:
        raise PdePlusError(
            f"{len(failures)} of {n_replicates} replicates failed; aborting benchmark"
        )
    replicates = pd.DataFrame(rows)
    summary_rows = []
    for method in replicates["method"].unique():
        sub = replicates[replicates["method"] == method]
        for metric in ("rimse", "rpmse"):
            values = sub[metric].to_numpy()
            summary_rows.append(
                {
                    "method": method,
                    "metric": metric,
                    "mean": float(values.mean()),
                    "sd": float(values.std(ddof=1)) if values.size > 1 else float("nan"),
                }
            )
    summary = pd.DataFrame(summary_rows)
    return BenchmarkResult(example=example, replicates=replicates, summary=summary, failures=failures)
