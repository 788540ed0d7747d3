"""Shared domain types, input validation helpers, and package errors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration, shapes, or user-supplied input (CLI exit code 2)."""


class NumericError(ArithmeticError):
    """Numerical failure: non-finite values or non-convergence (CLI exit code 3)."""


@dataclass(frozen=True)
class SurvivalBatch:
    """Right-censored survival outcomes for a batch of patients.

    Parameters
    ----------
    times : ndarray of shape (n,)
        Positive follow-up times (event time if the event was observed,
        censoring time otherwise).
    events : ndarray of shape (n,)
        1 if the event was observed at ``times``, 0 if censored.
    """

    times: np.ndarray
    events: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64).reshape(-1)
        e = np.asarray(self.events).reshape(-1)
        if t.shape[0] != e.shape[0]:
            raise ConfigError(
                f"times and events must have equal length, got {t.shape[0]} and {e.shape[0]}"
            )
        if t.shape[0] == 0:
            raise ConfigError("survival batch must be non-empty")
        if not np.isfinite(t).all():
            raise ConfigError("survival times must be finite")
        if (t <= 0).any():
            raise ConfigError("survival times must be positive")
        if not np.isin(e, (0, 1)).all():
            raise ConfigError("event flags must be 0 or 1")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e.astype(np.int64))

    @property
    def n(self) -> int:
        return int(self.times.shape[0])

    def subset(self, idx) -> "SurvivalBatch":
        idx = np.asarray(idx)
        return SurvivalBatch(self.times[idx], self.events[idx])


def as_survival(y) -> SurvivalBatch:
    """Coerce ``y`` into a SurvivalBatch.

    Accepts a SurvivalBatch, a (times, events) pair, or an (n, 2) array
    with time in column 0 and the event flag in column 1.
    """
    if isinstance(y, SurvivalBatch):
        return y
    if isinstance(y, (tuple, list)) and len(y) == 2:
        return SurvivalBatch(np.asarray(y[0]), np.asarray(y[1]))
    arr = np.asarray(y)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return SurvivalBatch(arr[:, 0], arr[:, 1])
    raise ConfigError(
        "expected survival outcomes as SurvivalBatch, (times, events), or an (n, 2) array"
    )


def check_matrix(x, name: str, *, n_rows: int | None = None, n_cols: int | None = None) -> np.ndarray:
    """Validate a finite 2-d float array, returning it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise ConfigError(f"{name} contains non-finite values")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ConfigError(f"{name} must have {n_rows} rows, got {arr.shape[0]}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ConfigError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    return arr


def check_vector(x, name: str, *, length: int | None = None) -> np.ndarray:
    """Validate a finite 1-d float array, returning it as float64."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.isfinite(arr).all():
        raise ConfigError(f"{name} contains non-finite values")
    if length is not None and arr.shape[0] != length:
        raise ConfigError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    v = int(value)
    if v != value or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return v
