"""CSV ingestion, standardization and structured report files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import Dataset, FittedModel, StructureError, coefficient_curve, predict


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class RawTable:
    header: tuple[str, ...]
    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.rows[:, self.header.index(name)]
        except ValueError:
            raise DataError(f"no column named {name!r}; have {list(self.header)}") from None


def load_csv(path) -> RawTable:
    """Read a comma-separated numeric table with one header row."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, found {len(row)}")
            vals = []
            for col, cell in zip(header, row):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}:{lineno}: missing value in column {col!r}")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric value {cell!r} in column {col!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: non-finite value in column {col!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return RawTable(header, np.array(rows, dtype=float))


def _zscore(x, name):
    sd = np.std(x, ddof=1)
    if not sd > 0:
        raise DataError(f"column {name!r} has zero variance")
    return (x - x.mean()) / sd


def standardize(table: RawTable, response: str, index: str, covariates=None,
                scale: bool = True) -> Dataset:
    """Build a :class:`Dataset` from named columns.

    Response and covariates are centered and scaled to unit sample standard
    deviation (when ``scale``); the index is min-max mapped to [0, 1]; an
    intercept column is prepended. ``covariates=None`` takes every other
    column.
    """
    if covariates is None:
        covariates = [c for c in table.header if c not in (response, index)]
    covariates = list(covariates)
    names = [response, index, *covariates]
    for c in names:
        table.column(c)
    if len(set(names)) != len(names):
        raise DataError("response, index and covariate columns must be distinct")
    y = table.column(response)
    u = table.column(index)
    span = u.max() - u.min()
    if not span > 0:
        raise DataError(f"index column {index!r} is constant")
    u = (u - u.min()) / span
    Z = [table.column(c) for c in covariates]
    if scale:
        y = _zscore(y, response)
        Z = [_zscore(z, c) for z, c in zip(Z, covariates)]
    X = np.column_stack([np.ones(table.n), *Z]) if Z else np.ones((table.n, 1))
    return Dataset(y, X, np.clip(u, 0.0, 1.0), names=("(intercept)", *covariates))


def mse(fit: FittedModel, data: Dataset) -> float:
    """Mean squared residual of the fitted model on ``data``."""
    if data.p != fit.p:
        raise StructureError(f"model has {fit.p} covariates, data has {data.p}")
    resid = data.y - predict(fit, data.X, data.u)
    return float(np.mean(resid**2))


CURVE_GRID = np.linspace(0.0, 1.0, 101)


def model_report(fit: FittedModel, data: Dataset, method: str) -> dict:
    """Structured summary: per-covariate labels, constants, curves and MSE."""
    names = data.names or tuple(f"X{j}" for j in range(data.p + 1))
    rows = []
    for j, (name, lab) in enumerate(zip(names, fit.labels)):
        rows.append({"variable": name, "label": lab,
                     "constant": fit.blocks[j, 0] if lab == "constant" else None,
                     "curve": [float(v) for v in coefficient_curve(fit, j, CURVE_GRID)]})
    return {"method": method, "n": data.n, "p": data.p, "mse": mse(fit, data),
            "bandwidth": fit.bandwidth, "knots": list(fit.basis.interior_knots),
            "degree": fit.basis.degree, "converged": bool(fit.converged),
            "curve_grid": [float(v) for v in CURVE_GRID], "variables": rows}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_records(path, records, meta=None) -> None:
    """Write line-delimited JSON: a meta record followed by one record per row."""
    path = Path(path)
    with path.open("w") as fh:
        if meta is not None:
            fh.write(json.dumps(_clean({"record": "meta", **meta}), sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(_clean({"record": "row", **rec}), sort_keys=True) + "\n")


def read_records(path):
    """Inverse of :func:`write_records`; returns ``(meta, rows)``."""
    meta, rows = None, []
    with Path(path).open() as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("record", "row")
            if kind == "meta":
                meta = rec
            else:
                rows.append(rec)
    return meta, rows
