"""Per-environment sample ingestion and second-moment reduction.

Everything downstream depends on the data only through the raw (uncentered)
second moments ``G = E[X^T X]``, ``Z = E[X Y]`` and ``y2 = E[Y^2]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CsvParseError, DataValidationError

# Row blocks above this size are reduced chunk-wise with exact (fsum) recombination.
_COMPENSATED_THRESHOLD = 10_000
_CHUNK = 4096


@dataclass(frozen=True)
class SampleMatrix:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataValidationError("X must be a 2-D array")
        if X.shape[0] != y.shape[0]:
            raise DataValidationError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataValidationError("need n >= 1 samples and p >= 1 covariates")
        bad = ~(np.isfinite(X).all(axis=1) & np.isfinite(y))
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DataValidationError(f"non-finite value in sample row {row}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class EnvironmentMoments:
    """Second-moment summary of one environment.

    ``n`` is the sample count, or ``None`` for exact population moments.
    """

    G: np.ndarray
    Z: np.ndarray
    y2: float
    n: Optional[int] = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        Z = np.asarray(self.Z, dtype=float).reshape(-1)
        y2 = float(self.y2)
        if G.shape != (Z.size, Z.size):
            raise DataValidationError(
                f"G has shape {G.shape}, expected ({Z.size}, {Z.size})")
        if not (np.isfinite(G).all() and np.isfinite(Z).all() and math.isfinite(y2)):
            raise DataValidationError("moments must be finite")
        if self.check:
            scale = 1.0 + np.abs(G).max()
            if np.abs(G - G.T).max() > 1e-12 * scale:
                raise DataValidationError("G is not symmetric")
            G = 0.5 * (G + G.T)
            block = np.block([[G, Z[:, None]], [Z[None, :], np.array([[y2]])]])
            tol = 1e-10 * (1.0 + np.abs(block).max())
            if y2 < -tol:
                raise DataValidationError("y2 must be nonnegative")
            if np.linalg.eigvalsh(block).min() < -tol:
                raise DataValidationError(
                    "[[G, Z], [Z^T, y2]] is not positive semi-definite")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "y2", y2)

    @property
    def p(self) -> int:
        return self.Z.size

    @property
    def is_population(self) -> bool:
        return self.n is None

    def block(self) -> np.ndarray:
        """The (p+1)x(p+1) joint second-moment matrix of (X, Y)."""
        return np.block([[self.G, self.Z[:, None]],
                         [self.Z[None, :], np.array([[self.y2]])]])

    def to_dict(self) -> dict:
        return {"G": self.G.tolist(), "Z": self.Z.tolist(), "y2": self.y2, "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentMoments":
        return cls(G=d["G"], Z=d["Z"], y2=d["y2"], n=d.get("n"))


def _column_sums_of_products(X: np.ndarray, y: np.ndarray):
    """Return (X^T X, X^T y, y^T y) as unnormalized sums."""
    n = X.shape[0]
    if n <= _COMPENSATED_THRESHOLD:
        return X.T @ X, X.T @ y, float(y @ y)
    # Chunked partial sums recombined with fsum: deterministic for a fixed row order
    parts_G, parts_Z, parts_y = [], [], []
    for start in range(0, n, _CHUNK):
        Xc = X[start:start + _CHUNK]
        yc = y[start:start + _CHUNK]
        parts_G.append(Xc.T @ Xc)
        parts_Z.append(Xc.T @ yc)
        parts_y.append(float(yc @ yc))
    PG = np.stack(parts_G)
    PZ = np.stack(parts_Z)
    p = X.shape[1]
    G = np.empty((p, p))
    for a in range(p):
        for b in range(p):
            G[a, b] = math.fsum(PG[:, a, b])
    Z = np.array([math.fsum(PZ[:, a]) for a in range(p)])
    return G, Z, math.fsum(parts_y)


def compute_moments(samples: SampleMatrix) -> EnvironmentMoments:
    """Empirical moments ``G = X^T X / n``, ``Z = X^T y / n``, ``y2 = y^T y / n``."""
    n = samples.n
    G, Z, yy = _column_sums_of_products(samples.X, samples.y)
    G = G / n
    G = 0.5 * (G + G.T)
    return EnvironmentMoments(G=G, Z=Z / n, y2=yy / n, n=n, check=False)


def merge_moments(parts: Sequence[EnvironmentMoments]) -> EnvironmentMoments:
    """Sample-size weighted average of moments computed on disjoint sample sets."""
    if not parts or any(m.n is None for m in parts):
        raise DataValidationError("merging requires empirical moments with sample counts")
    total = sum(m.n for m in parts)
    G = sum(m.n * m.G for m in parts) / total
    Z = sum(m.n * m.Z for m in parts) / total
    y2 = sum(m.n * m.y2 for m in parts) / total
    return EnvironmentMoments(G=0.5 * (G + G.T), Z=Z, y2=y2, n=total, check=False)


@dataclass(frozen=True)
class CsvSchema:
    target: str
    covariates: tuple

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.covariates:
            raise DataValidationError("at least one covariate column is required")


def load_environment_csv(path, schema: CsvSchema) -> SampleMatrix:
    """Parse a header-first, comma-separated file into a SampleMatrix.

    Covariate order follows ``schema.covariates``, not the file's column order.
    Line numbers in errors are 1-based and count the header as line 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file (no header)", line=1) from None
        header = [h.strip() for h in header]
        index = {name: pos for pos, name in enumerate(header)}
        wanted = (schema.target,) + schema.covariates
        for name in wanted:
            if name not in index:
                raise CsvParseError(f"missing column {name!r}", line=1)
        cols = [index[name] for name in wanted]
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} fields, found {len(record)}", line=lineno)
            values = []
            for c in cols:
                cell = record[c].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvParseError(
                        f"non-numeric cell {cell!r} in column {header[c]!r}",
                        line=lineno) from None
                if not math.isfinite(v):
                    raise CsvParseError(
                        f"non-finite cell {cell!r} in column {header[c]!r}", line=lineno)
                values.append(v)
            rows.append(values)
    if not rows:
        raise CsvParseError(f"no samples in {path}")
    data = np.array(rows, dtype=float)
    return SampleMatrix(X=data[:, 1:], y=data[:, 0])


def write_environment_csv(path, samples: SampleMatrix, target="y", covariates=None):
    """Write samples in the format read by ``load_environment_csv``."""
    covariates = covariates or [f"x{l + 1}" for l in range(samples.p)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([target, *covariates])
        for yv, xrow in zip(samples.y, samples.X):
            writer.writerow([repr(float(yv)), *(repr(float(v)) for v in xrow)])
