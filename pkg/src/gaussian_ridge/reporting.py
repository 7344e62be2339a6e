"""File formats for fitted models, reports, traces and plot tables."""

import csv
import json
from pathlib import Path

import numpy as np

from .gp import GpHyperparameters, train_gp
from .ridge import GaussianRidgeModel
from .stiefel import check_stiefel

SCHEMA_VERSION = 1


def _fmt(x):
    return format(float(x), ".17g")


def write_matrix_csv(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"m{j + 1}" for j in range(M.shape[1])])
        for row in M:
            w.writerow([_fmt(v) for v in row])
    return Path(path)


def read_matrix_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no matrix rows")
    return np.array([[float(v) for v in r] for r in rows[1:] if r])


def write_table(path, header, columns):
    """Write equally long 1-D columns as a CSV table."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])
    return Path(path)


def read_table(path):
    """Read a table written by :func:`write_table` into a header and a float array."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r]).reshape(-1, len(header))
    return header, data


def write_summary(summary, directory, prefix=""):
    """Write scatter coordinates and, when present, the long-form mean / 2-sigma grid."""
    directory = Path(directory)
    m = summary.u.shape[1]
    ucols = [f"u{j + 1}" for j in range(m)]
    paths = [write_table(directory / f"{prefix}summary.csv", ucols + ["f"],
                         [*summary.u.T, summary.f])]
    if summary.has_grid:
        paths.append(write_table(directory / f"{prefix}grid.csv", ucols + ["mean", "two_sigma"],
                                 [*summary.grid.T, summary.mean, summary.two_sigma]))
    return paths


def model_to_dict(model):
    gp = model.gp
    return {
        "schema_version": SCHEMA_VERSION,
        "subspace": model.subspace.tolist(),
        "hyperparameters": gp.hyperparameters.to_dict(),
        "train_inputs": model.train_inputs.tolist(),
        "train_outputs": gp.outputs.tolist(),
        "output_offset": model.output_offset,
        "jitter": gp.jitter,
    }


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))
    return Path(path)


def load_model(path):
    """Rebuild a :class:`GaussianRidgeModel` saved by :func:`save_model`."""
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {data.get('schema_version')}")
    M = check_stiefel(np.array(data["subspace"]))
    h = data["hyperparameters"]
    theta = GpHyperparameters(h["log_signal_variance"], h["log_noise_variance"], h["log_correlation_lengths"])
    X = np.array(data["train_inputs"])
    gp = train_gp(X @ M, np.array(data["train_outputs"]), theta)
    return GaussianRidgeModel(M, gp, X, float(data["output_offset"]))


def report_to_dict(report, threshold):
    return {
        "trial_seed": report.trial_seed,
        "final_objective": report.final_objective,
        "success": bool(report.final_objective <= threshold),
        "converged": report.converged,
        "outer_iterations": report.outer_iterations_used,
        "initial_objective": report.initial_objective,
        "objective_trace": list(report.objective_trace),
        "gradient_norm_trace": list(report.gradient_norm_trace),
        "hyperparameters": report.final_model.hyperparameters.to_dict(),
    }


def write_traces(reports, path):
    """Inner-iteration objective and gradient-norm history of every trial."""
    cols = [[], [], [], [], []]
    for rep in reports:
        for outer, trace in enumerate(rep.inner_traces):
            for inner, (f, g) in enumerate(trace):
                for c, v in zip(cols, (rep.trial_seed, outer, inner, f, g)):
                    c.append(v)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_seed", "outer_iteration", "inner_iteration", "objective", "gradient_norm"])
        for s, o, i, f, g in zip(*cols):
            w.writerow([s, o, i, _fmt(f), _fmt(g)])
    return Path(path)


def write_json(data, path):
    Path(path).write_text(json.dumps(data, indent=2, default=_json_default) + "\n")
    return Path(path)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
