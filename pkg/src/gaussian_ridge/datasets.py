"""Synthetic ridge test problems and CSV ingestion of external design-of-experiment data."""

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataParseError, DimensionError, SizeError
from .stiefel import _qr_positive, check_stiefel, random_orthonormal

UNIFORM = "uniform-hypercube"
NORMAL = "standard-normal"
EXTERNAL = "external"
DENSITIES = (UNIFORM, NORMAL, EXTERNAL)

# Ridge directions and covariance of the 5-D bivariate normal test problem.
BIVARIATE_NORMAL_M = np.array([
    [-0.5425, 0.0654],
    [-0.6784, -0.4931],
    [-0.2381, -0.2367],
    [-0.1655, 0.4643],
    [-0.4017, 0.6935],
])
BIVARIATE_NORMAL_SIGMA = np.array([[0.25, 0.30], [0.30, 1.0]])


@dataclass
class Dataset:
    """Paired inputs ``X`` (N, d) and scalar outputs ``f`` (N,)."""

    inputs: np.ndarray
    outputs: np.ndarray
    density: str = EXTERNAL
    true_subspace: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.outputs = np.asarray(self.outputs, dtype=float).ravel()
        if self.inputs.ndim != 2:
            raise DimensionError(f"inputs must be 2-D, got shape {self.inputs.shape}")
        n, d = self.inputs.shape
        if n < 1 or d < 1:
            raise SizeError("dataset is empty")
        if self.outputs.shape[0] != n:
            raise DimensionError(f"{n} input rows but {self.outputs.shape[0]} outputs")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.outputs))):
            raise ValueError("dataset contains non-finite values")
        if self.density not in DENSITIES:
            raise ValueError(f"unknown density tag {self.density!r}")
        if self.true_subspace is not None:
            self.true_subspace = check_stiefel(self.true_subspace)
            if self.true_subspace.shape[0] != d:
                raise DimensionError("true subspace does not match the input dimension")

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def d(self):
        return self.inputs.shape[1]

    def subset(self, index):
        index = np.asarray(index)
        return Dataset(self.inputs[index], self.outputs[index], self.density,
                       self.true_subspace, dict(self.metadata))

    def sample_density(self, n, seed=None):
        """Fresh inputs drawn from the sampling density, or ``None`` for external data."""
        rng = np.random.default_rng(seed)
        if self.density == UNIFORM:
            lo = self.metadata.get("low", -1.0)
            hi = self.metadata.get("high", 1.0)
            return rng.uniform(lo, hi, size=(n, self.d))
        if self.density == NORMAL:
            return rng.standard_normal((n, self.d))
        return None


def linear_ridge_function(X, M):
    U = np.asarray(X) @ M
    return U[:, 0] + U[:, 1]


def gen_linear_ridge(d, N, seed=None):
    """``f(x) = y1 + y2`` with ``y = M^T x`` for a random orthonormal ``(d, 2)`` ``M``, ``x ~ U[-1, 1]^d``."""
    if d < 2:
        raise DimensionError("the linear ridge problem needs d >= 2")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(N, d))
    M = random_orthonormal(d, 2, rng)
    return Dataset(X, linear_ridge_function(X, M), UNIFORM, M,
                   {"problem": "linear-ridge", "seed": seed, "low": -1.0, "high": 1.0})


def bivariate_normal_function(X, M=BIVARIATE_NORMAL_M, sigma=BIVARIATE_NORMAL_SIGMA):
    U = np.asarray(X) @ M
    quad = np.einsum("ij,jk,ik->i", U, np.linalg.inv(sigma), U)
    return np.exp(-0.5 * quad) / math.sqrt(np.linalg.det(sigma) * (2 * math.pi) ** 2)


def gen_bivariate_normal_ridge(N, seed=None):
    """Bivariate normal density of ``u = M^T x`` with ``x ~ N(0, I_5)``.

    The printed ridge matrix is only orthonormal to four decimals; outputs use it
    as printed and ``true_subspace`` stores its QR re-orthonormalization (same span).
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, 5))
    return Dataset(X, bivariate_normal_function(X), NORMAL, _qr_positive(BIVARIATE_NORMAL_M),
                   {"problem": "bivariate-normal", "seed": seed,
                    "raw_subspace": BIVARIATE_NORMAL_M.tolist()})


def gen_log_sum(N, seed=None):
    """``f(x) = log(x1 + x2 + x3)`` with ``x ~ U[0.1, 1]^3``."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.1, 1.0, size=(N, 3))
    return Dataset(X, np.log(X.sum(axis=1)), UNIFORM, np.ones((3, 1)) / np.sqrt(3),
                   {"problem": "log-sum", "seed": seed, "low": 0.1, "high": 1.0})


GENERATORS = {
    "linear-ridge": lambda d, n, seed: gen_linear_ridge(d, n, seed),
    "bivariate-normal": lambda d, n, seed: gen_bivariate_normal_ridge(n, seed),
    "log-sum": lambda d, n, seed: gen_log_sum(n, seed),
}


def _fmt(x):
    return format(float(x), ".17g")


def save_csv(dataset, path, header=None):
    """Write inputs then output, one row per sample, 17 significant digits."""
    path = Path(path)
    header = header or [f"x{i + 1}" for i in range(dataset.d)] + ["f"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, y in zip(dataset.inputs, dataset.outputs):
            w.writerow([_fmt(v) for v in x] + [_fmt(y)])
    return path


def meta_path(path):
    path = Path(path)
    return path.with_suffix(".meta")


def save_dataset(dataset, path):
    """Write the CSV plus a ``key = value`` side file with the density tag and true subspace."""
    path = Path(path)
    save_csv(dataset, path)
    lines = [f"density = {dataset.density}", f"n = {dataset.n}", f"d = {dataset.d}"]
    for key in ("problem", "seed", "low", "high"):
        if key in dataset.metadata and dataset.metadata[key] is not None:
            lines.append(f"{key} = {dataset.metadata[key]}")
    if dataset.true_subspace is not None:
        M = dataset.true_subspace
        lines.append(f"true_subspace_shape = {M.shape[0]},{M.shape[1]}")
        lines.append("true_subspace = " + ",".join(_fmt(v) for v in M.ravel()))
    mp = meta_path(path)
    mp.write_text("\n".join(lines) + "\n")
    return path, mp


def read_meta(path):
    meta = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataParseError(f"{path}:{lineno}: expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        meta[key] = value
    return meta


def load_doe_csv(path):
    """Load a CSV whose header names ``d`` input columns followed by one output column.

    Rows containing non-finite numbers are dropped with a warning naming their
    line numbers; the result is tagged as external data.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataParseError(f"{path}: empty file", line=1)
    header = [h.strip() for h in rows[0]]
    ncol = len(header)
    if ncol < 2:
        raise DataParseError(f"{path}:1: header needs at least one input and one output column", line=1)
    values, dropped = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise DataParseError(
                f"{path}:{lineno}: expected {ncol} fields, found {len(row)}", line=lineno)
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise DataParseError(f"{path}:{lineno}: non-numeric field", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            dropped.append(lineno)
            continue
        values.append(vals)
    if dropped:
        warnings.warn(f"{path}: dropped rows with non-finite values at lines {dropped}")
    if not values:
        raise SizeError(f"{path}: no data rows")
    arr = np.array(values)
    return Dataset(arr[:, :-1], arr[:, -1], EXTERNAL, None,
                   {"header": header, "source": str(path), "dropped_lines": dropped})


def load_dataset(path):
    """Load a CSV and, when present, its ``.meta`` side file."""
    ds = load_doe_csv(path)
    mp = meta_path(path)
    if not mp.exists():
        return ds
    meta = read_meta(mp)
    density = meta.get("density", EXTERNAL)
    M = None
    if "true_subspace" in meta:
        shape = tuple(int(s) for s in meta["true_subspace_shape"].split(","))
        M = np.array([float(v) for v in meta["true_subspace"].split(",")]).reshape(shape)
    md = dict(ds.metadata)
    for key in ("problem", "seed"):
        if key in meta:
            md[key] = meta[key]
    for key in ("low", "high"):
        if key in meta:
            md[key] = float(meta[key])
    return Dataset(ds.inputs, ds.outputs, density, M, md)
