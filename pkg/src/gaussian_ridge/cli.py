"""Command-line interface: ``gaussian-ridge {synth,fit,compare,distance}``.

Exit status is 0 on success, 1 when a computation fails and 2 for usage or
input errors.
"""

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import reporting
from .comparison import compare_methods
from .datasets import GENERATORS, load_dataset, save_dataset
from .diagnostics import (expected_posterior_variance, subspace_distance, success_probability,
                          summary_plot_export)
from .errors import DataParseError, DimensionError, GaussianRidgeError, SizeError
from .ridge import FitOptions, multi_trial_fit
from .sdr import SliceSpec
from .stiefel import CgOptions

log = logging.getLogger("gaussian_ridge")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Validated command parameters."""

    command: str
    params: dict = field(default_factory=dict)

    POSITIVE_INTS = ("d", "n", "m", "trials", "n_train", "n_test", "jobs", "max_outer",
                     "max_inner", "n_slices", "variance_samples", "n_subset")
    POSITIVE_FLOATS = ("epsilon", "threshold", "gradient_tolerance")

    @classmethod
    def from_namespace(cls, ns):
        params = {k: v for k, v in vars(ns).items() if k not in ("func", "command", "verbose")}
        cfg = cls(ns.command, params)
        cfg.validate()
        return cfg

    def validate(self):
        for key in self.POSITIVE_INTS:
            v = self.params.get(key)
            if v is not None and v < 1:
                raise UsageError(f"--{key.replace('_', '-')} must be a positive integer")
        for key in self.POSITIVE_FLOATS:
            v = self.params.get(key)
            if v is not None and not v > 0:
                raise UsageError(f"--{key.replace('_', '-')} must be positive")
        if self.params.get("n_slices") is not None and self.params["n_slices"] < 2:
            raise UsageError("--n-slices must be at least 2")

    def __getattr__(self, name):
        try:
            return self.params[name]
        except KeyError:
            raise AttributeError(name) from None


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _load(path):
    path = Path(path)
    if not path.exists():
        raise UsageError(f"dataset not found: {path}")
    try:
        return load_dataset(path)
    except (DataParseError, SizeError, DimensionError, ValueError) as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from None


def cmd_synth(cfg):
    if cfg.problem == "linear-ridge" and cfg.d < 2:
        raise UsageError("the linear-ridge problem needs --d >= 2")
    ds = GENERATORS[cfg.problem](cfg.d, cfg.n, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, meta = save_dataset(ds, out / f"{cfg.name or cfg.problem}.csv")
    print(f"wrote {csv_path} and {meta}")
    return EXIT_OK


def _fit_options(cfg, n):
    n_train = cfg.n_train or n // 2
    n_test = cfg.n_test or n - n_train
    if n_train + n_test > n:
        raise UsageError(f"--n-train + --n-test = {n_train + n_test} exceeds the {n} samples available")
    cg = CgOptions(max_iterations=cfg.max_inner, gradient_norm_tolerance=cfg.gradient_tolerance)
    return FitOptions(m=cfg.m, n_train=n_train, n_test=n_test, epsilon=cfg.epsilon,
                      max_outer_iterations=cfg.max_outer, cg=cg, seed=cfg.seed)


def _variance_samples(ds, n, seed):
    samples = ds.sample_density(n, seed)
    return ds.inputs if samples is None else samples


def cmd_fit(cfg):
    ds = _load(cfg.data)
    if cfg.m > ds.d:
        raise UsageError(f"--m {cfg.m} exceeds the input dimension {ds.d}")
    opts = _fit_options(cfg, ds.n)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    best, reports = multi_trial_fit(ds, opts, cfg.trials, cfg.jobs)
    model = best.final_model
    epv = expected_posterior_variance(model, _variance_samples(ds, cfg.variance_samples, cfg.seed))
    dist = None
    if ds.true_subspace is not None and ds.true_subspace.shape == model.subspace.shape:
        dist = subspace_distance(ds.true_subspace, model.subspace)
    prob = success_probability(reports, cfg.threshold)

    report = {
        "schema_version": reporting.SCHEMA_VERSION,
        "command": "fit",
        "dataset": str(cfg.data),
        "options": {"m": opts.m, "n_train": opts.n_train, "n_test": opts.n_test,
                    "epsilon": opts.epsilon, "max_outer_iterations": opts.max_outer_iterations,
                    "max_inner_iterations": opts.cg.max_iterations, "seed": opts.seed,
                    "trials": cfg.trials},
        "best_trial_seed": best.trial_seed,
        "diagnostics": {
            "final_objective": best.final_objective,
            "expected_posterior_variance": epv,
            "subspace_distance_to_truth": dist,
            "success_threshold": cfg.threshold,
            "success_probability": prob,
            "failed_trials": cfg.trials - len(reports),
        },
        "subspace": model.subspace,
        "trials": [reporting.report_to_dict(r, cfg.threshold) for r in reports],
    }
    reporting.write_json(report, out / "report.json")
    reporting.save_model(model, out / "model.json")
    reporting.write_matrix_csv(model.subspace, out / "subspace.csv")
    reporting.write_traces(reports, out / "traces.csv")
    reporting.write_summary(summary_plot_export(model, ds), out)

    lines = [
        f"Gaussian ridge fit of {cfg.data}",
        f"  m = {opts.m}, split {opts.n_train}/{opts.n_test}, {cfg.trials} trials, seed {opts.seed}",
        f"  best trial seed        {best.trial_seed}",
        f"  final objective r      {best.final_objective:.6g}",
        f"  expected post. var.    {epv:.6g}",
        f"  success probability    {prob:.3f} (r <= {cfg.threshold:g})",
    ]
    if dist is not None:
        lines.append(f"  distance to truth      {dist:.6g}")
    lines.append("")
    lines.append("  seed  outer  converged  final r")
    for r in reports:
        lines.append(f"  {r.trial_seed:4d}  {r.outer_iterations_used:5d}  {str(r.converged):9s}  {r.final_objective:.6g}")
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_compare(cfg):
    ds = _load(cfg.data)
    if cfg.m > ds.d:
        raise UsageError(f"--m {cfg.m} exceeds the input dimension {ds.d}")
    n_subset = min(cfg.n_subset or ds.n, ds.n)
    n_train = n_subset // 2
    cg = CgOptions(max_iterations=cfg.max_inner, gradient_norm_tolerance=cfg.gradient_tolerance)
    opts = FitOptions(m=cfg.m, n_train=n_train, n_test=n_subset - n_train, epsilon=cfg.epsilon,
                      max_outer_iterations=cfg.max_outer, cg=cg, seed=cfg.seed)
    results = compare_methods(ds, cfg.m, n_subset, cfg.trials, cfg.seed, SliceSpec(cfg.n_slices),
                              cfg.variance_samples, opts, cfg.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in results:
        rows.append({
            "method": r.method,
            "expected_posterior_variance": _finite_or_none(r.expected_posterior_variance),
            "subspace_distance_to_truth": r.distance_to_truth,
            "subspace": r.subspace,
            "spectrum": r.spectrum,
            "error": r.error,
        })
        if r.summary is not None:
            reporting.write_summary(r.summary, out, prefix=f"{r.method}_")
        if r.subspace is not None:
            reporting.write_matrix_csv(r.subspace, out / f"{r.method}_subspace.csv")
    reporting.write_json({
        "schema_version": reporting.SCHEMA_VERSION,
        "command": "compare",
        "dataset": str(cfg.data),
        "m": cfg.m,
        "n_subset": n_subset,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "rows": rows,
    }, out / "comparison.json")
    lines = [f"Subspace comparison on {cfg.data} (m = {cfg.m}, {n_subset} samples)",
             f"  {'method':16s} {'E[post. var.]':>14s} {'dist. to truth':>15s}"]
    for row in rows:
        v = row["expected_posterior_variance"]
        dt = row["subspace_distance_to_truth"]
        lines.append(f"  {row['method']:16s} {('%.6g' % v) if v is not None else 'failed':>14s} "
                     f"{('%.4f' % dt) if dt is not None else '-':>15s}"
                     + (f"  {row['error']}" if row["error"] else ""))
    text = "\n".join(lines) + "\n"
    (out / "comparison.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_distance(cfg):
    mats = []
    for p in (cfg.first, cfg.second):
        if not Path(p).exists():
            raise UsageError(f"matrix file not found: {p}")
        mats.append(reporting.read_matrix_csv(p))
    try:
        value = subspace_distance(*mats)
    except DimensionError as exc:
        raise UsageError(str(exc)) from None
    print(format(value, ".17g"))
    return EXIT_OK


def _add_fit_flags(p, trials_default):
    p.add_argument("--data", required=True, help="dataset CSV (a .meta side file is read if present)")
    p.add_argument("--m", type=int, default=2, help="subspace dimension")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1e-6, help="outer-loop tolerance on |delta r|")
    p.add_argument("--max-outer", type=int, default=10)
    p.add_argument("--max-inner", type=int, default=500)
    p.add_argument("--gradient-tolerance", type=float, default=1e-6)
    p.add_argument("--variance-samples", type=int, default=2000)
    p.add_argument("--jobs", type=int, default=1, help="trials run in parallel")
    p.add_argument("--out", required=True, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="gaussian-ridge", description="Fit Gaussian ridge functions and compare ridge subspaces.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ridge dataset")
    p.add_argument("--problem", required=True, choices=sorted(GENERATORS))
    p.add_argument("--d", type=int, default=10, help="input dimension (linear-ridge only)")
    p.add_argument("--n", type=int, default=200, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None, help="file stem (default: problem name)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit a Gaussian ridge function")
    _add_fit_flags(p, 20)
    p.add_argument("--n-train", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.005, help="success threshold on final r")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="compare against SIR, SAVE and CR")
    _add_fit_flags(p, 20)
    p.add_argument("--n-subset", type=int, default=None, help="samples shared by all methods")
    p.add_argument("--n-slices", type=int, default=10)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("distance", help="distance between two stored subspaces")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_distance)
    return parser


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_namespace(ns)
        return ns.func(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GaussianRidgeError, np.linalg.LinAlgError) as exc:
        print(f"{parser.prog}: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
