"""Plain-text matrix files and CSV outputs.

Matrix files start with a line ``m n`` followed by ``m`` lines of ``n``
whitespace-separated numbers. Vectors are stored as ``n x 1`` matrices.
Every float is written with 17 significant digits, which round-trips
binary64 exactly.
"""

import csv
import io

import numpy as np

from .linalg import as_matrix


class MatrixFormatError(ValueError):
    """A matrix or vector file could not be parsed."""


def fmt(value) -> str:
    return f"{float(value):.17g}"


def format_matrix(a) -> str:
    a = as_matrix(a)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(fmt(v) for v in row) for row in a]
    return "\n".join(lines) + "\n"


def parse_matrix(text) -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("matrix file is missing its 'm n' header")
    try:
        m, n = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise ValueError(f"bad matrix header {tokens[0]!r} {tokens[1]!r}") from None
    if m < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got {m} x {n}")
    body = tokens[2:]
    if len(body) != m * n:
        raise ValueError(f"expected {m * n} entries for a {m} x {n} matrix, found {len(body)}")
    return as_matrix(np.array([float(t) for t in body]).reshape(m, n))


def write_matrix(path, a):
    with open(path, "w") as fh:
        fh.write(format_matrix(a))


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    try:
        return parse_matrix(text)
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from None


def write_vector(path, x):
    write_matrix(path, np.asarray(x, dtype=np.float64).reshape(-1, 1))


def read_vector(path) -> np.ndarray:
    a = read_matrix(path)
    if a.shape[1] != 1:
        raise MatrixFormatError(f"{path}: a vector file must have one column, got {a.shape[1]}")
    return a[:, 0].copy()


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trace_csv(trace) -> str:
    """``iter,row,residual,error,rayleigh[,coef_1..coef_n]``."""
    header = ["iter", "row", "residual", "error", "rayleigh"]
    coef = trace.coefficients
    if coef is not None:
        header += [f"coef_{l + 1}" for l in range(coef.shape[1])]
    rows = []
    for j in range(len(trace)):
        row = [int(trace.iters[j]), int(trace.rows[j]), fmt(trace.residual[j]),
               fmt(trace.error[j]), fmt(trace.rayleigh[j])]
        if coef is not None:
            row += [fmt(c) for c in coef[j]]
        rows.append(row)
    return _csv(header, rows)


def rayleigh_csv(trace) -> str:
    """``iter,rayleigh,overlap``; overlap is NaN when no SVD was supplied."""
    overlap = trace.overlap if trace.overlap is not None else np.full(len(trace), np.nan)
    rows = [[int(k), fmt(r), fmt(o)] for k, r, o in zip(trace.iters, trace.rayleigh, overlap)]
    return _csv(["iter", "rayleigh", "overlap"], rows)


def ensemble_csv(stats) -> str:
    rows = []
    for j, k in enumerate(stats.iters):
        for q in stats.quantities:
            rows.append([int(k), q, fmt(stats.mean[q][j]), fmt(stats.stderr[q][j])])
    return _csv(["iter", "quantity", "mean", "stderr"], rows)


def report_csv(reports) -> str:
    header = ["theorem", "check", "index", "predicted", "observed", "deviation",
              "tolerance", "unit", "pass"]
    rows = []
    for r in reports:
        for j in range(r.predicted.size):
            ok = r.deviation[j] <= r.tolerance
            rows.append([r.theorem, r.check, j, fmt(r.predicted[j]), fmt(r.observed[j]),
                         fmt(r.deviation[j]), fmt(r.tolerance), r.unit, int(ok)])
    return _csv(header, rows)


def read_csv(text):
    """Parse CSV text into ``(header, rows)`` with rows as lists of strings."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, list(reader)
