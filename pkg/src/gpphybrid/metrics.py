"""Evaluation statistics: RMSE, R^2 and per-PFT reports."""

from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from gpphybrid.drivers import PFT_CODES
from gpphybrid.errors import InvalidInputError, UndefinedVarianceError


def _pair(pred, obs, min_len=1):
    pred = np.asarray(pred, dtype=float).ravel()
    obs = np.asarray(obs, dtype=float).ravel()
    if pred.shape != obs.shape:
        raise InvalidInputError(f"length mismatch: {pred.size} predictions, {obs.size} observations")
    if pred.size < min_len:
        raise InvalidInputError(f"need at least {min_len} value(s)")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(obs))):
        raise InvalidInputError("non-finite values")
    return pred, obs


def rmse(pred, obs) -> float:
    """Root-mean-square error."""
    pred, obs = _pair(pred, obs)
    return float(np.sqrt(np.mean((pred - obs) ** 2)))


def r2(pred, obs) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot`` (can be negative).

    This is not the squared Pearson correlation: a biased but perfectly
    correlated prediction scores below 1.
    """
    pred, obs = _pair(pred, obs, min_len=2)
    ss_tot = np.sum((obs - obs.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedVarianceError("r2: observations are constant")
    return float(1.0 - np.sum((obs - pred) ** 2) / ss_tot)


@dataclass(frozen=True)
class EvalRow:
    group: str
    n: int
    r2: float  # NaN when undefined (constant observations or a single value)
    rmse: float


@dataclass(frozen=True)
class EvalReport:
    rows: List[EvalRow]

    def row(self, group: str) -> EvalRow:
        for r in self.rows:
            if r.group == group:
                return r
        raise KeyError(group)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.rows], columns=["group", "n", "r2", "rmse"])

    def to_csv(self, path=None, model: str = None):
        df = self.to_frame()
        if model is not None:
            df.insert(0, "model", model)
        return df.to_csv(path, index=False, lineterminator="\n", na_rep="NA")


def _row(group, pred, obs) -> EvalRow:
    try:
        score = r2(pred, obs)
    except (UndefinedVarianceError, InvalidInputError):
        score = float("nan")
    return EvalRow(group, int(len(obs)), score, rmse(pred, obs))


def evaluate_by_pft(records: pd.DataFrame, pred, obs_column: str = "gpp_obs") -> EvalReport:
    """Per-PFT R^2 and RMSE of ``pred`` against ``records[obs_column]``.

    One row per PFT present (in canonical PFT order) followed by ``ALL``.
    Groups with constant observations report ``r2`` as NaN.
    """
    for col in ("pft", obs_column):
        if col not in records.columns:
            raise InvalidInputError(f"records have no {col} column")
    pft = records["pft"].astype(str).to_numpy()
    pred, obs = _pair(pred, records[obs_column].to_numpy(dtype=float))
    unknown = sorted(set(pft) - set(PFT_CODES))
    if unknown:
        raise InvalidInputError(f"unknown PFT codes {unknown}")
    rows = [_row(code, pred[pft == code], obs[pft == code]) for code in PFT_CODES if np.any(pft == code)]
    rows.append(_row("ALL", pred, obs))
    return EvalReport(rows)
