"""Forward prediction windows: how far a model fitted on a prefix stays
within a mean-error bound.

A record is split at t_f, the prefix is classified on its own
normalized scale, and the fitted curve is compared against the future
observations mapped into that same prefix scale (the only scale known
at prediction time).  Two window sizes are computed from the running
mean of per-point errors |S - v|/(v + 1):

  soft window  largest horizon such that the running mean up to it is
               still within the bound (later points may re-admit a
               horizon after a transient excursion);
  hard window  up to the first crossing of the bound.

Both are capped by the scenario horizon (series end for the half-life
and fixed-days scenarios, a multiple of the observed window otherwise);
hitting the cap sets the ``bounded`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classify import FitResult, fit_all, select_model, UNCLASSIFIED
from .errors import (
    Diagnostic,
    DegenerateZeroAgeError,
    DegenerateZeroViewsError,
    EmptyFutureError,
    NoEligibleRecordsError,
)
from .models import evaluate
from .regress import LmConfig
from .series import SeriesRecord, normalize

FIXED_DAYS_DEFAULT = 50.0
MIN_FUTURE_POINTS = 10  # eligibility for half-life and fixed-window scenarios
MIN_PREFIX_POINTS = 6


@dataclass(frozen=True)
class PredictionSetup:
    """One of the evaluation scenarios.

    split is "half_life", "fixed_days" or "fixed_window"; window_days
    applies to fixed_* splits; the horizon for fixed_window scenarios is
    horizon_multiplier * window_days past the split.
    """

    split: str
    window_days: float = 0.0
    error_bound: float = 0.05
    horizon_multiplier: float = 3.0

    SCENARIOS = {
        "halflife": ("half_life", 0.0),
        "fixed50": ("fixed_days", FIXED_DAYS_DEFAULT),
        "window7": ("fixed_window", 7.0),
        "window15": ("fixed_window", 15.0),
        "window30": ("fixed_window", 30.0),
    }

    @classmethod
    def from_name(cls, name: str, error_bound: float = 0.05,
                  horizon_multiplier: float = 3.0) -> "PredictionSetup":
        if name not in cls.SCENARIOS:
            raise ValueError(f"unknown scenario {name!r}; choose from {sorted(cls.SCENARIOS)}")
        split, days = cls.SCENARIOS[name]
        return cls(split=split, window_days=days, error_bound=error_bound,
                   horizon_multiplier=horizon_multiplier)


@dataclass(frozen=True)
class PrefixFit:
    """Model selected on a training prefix, with the split bookkeeping."""

    kind: str  # ModelKind value, or UNCLASSIFIED (fit is then best-effort)
    fit: FitResult
    split_index: int  # index of the last prefix observation
    t_f: float  # days, time of the last prefix observation
    scale: tuple  # prefix (t, y) normalization scale


@dataclass(frozen=True)
class WindowResult:
    id: str
    kind: str
    t_f: float
    t_n: float
    soft_days: float
    soft_norm: float
    soft_bounded: bool
    hard_days: float
    hard_norm: float
    hard_bounded: bool
    horizon_days: float
    n_future: int

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "t_f": self.t_f, "t_n": self.t_n,
            "soft_days": self.soft_days, "soft_norm": self.soft_norm,
            "soft_bounded": self.soft_bounded, "hard_days": self.hard_days,
            "hard_norm": self.hard_norm, "hard_bounded": self.hard_bounded,
            "horizon_days": self.horizon_days, "n_future": self.n_future,
        }


def soft_window_from_errors(rel_times, errors, bound: float, horizon: float) -> tuple:
    """Largest horizon whose inclusive running mean error is <= bound.

    rel_times are future observation times minus t_f (ascending, > 0),
    already restricted to the horizon.  Returns (days, bounded); the
    window equals the horizon exactly when the mean at the last
    admissible point is still within the bound.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptyFutureError("no observations after the split")
    means = np.cumsum(errors) / np.arange(1, errors.size + 1)
    within = means <= bound
    if within[-1]:
        return float(horizon), True
    if not within.any():
        return 0.0, False
    last = int(np.nonzero(within)[0][-1])
    return float(rel_times[last]), False


def hard_window_from_errors(rel_times, errors, bound: float, horizon: float) -> tuple:
    """Window up to the first crossing of the running mean over the bound.

    Returns (days, bounded); equals the horizon when the mean never
    crosses before it.  Always <= the soft window on the same inputs.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptyFutureError("no observations after the split")
    means = np.cumsum(errors) / np.arange(1, errors.size + 1)
    over = means > bound
    if not over.any():
        return float(horizon), True
    first = int(np.nonzero(over)[0][0])
    if first == 0:
        return 0.0, False
    return float(rel_times[first - 1]), False


def fit_prefix(record: SeriesRecord, split_index: int,
               config: LmConfig | None = None, mer_threshold: float = 0.05) -> PrefixFit:
    """Classify the prefix ending at split_index on its own scale."""
    prefix = SeriesRecord(id=record.id, observations=record.observations[: split_index + 1])
    series = normalize(prefix)
    candidates = fit_all(series, config or LmConfig())
    selected, fit = select_model(candidates, mer_threshold)
    return PrefixFit(
        kind=selected,
        fit=fit,
        split_index=split_index,
        t_f=float(record.observations[split_index][0]),
        scale=series.scale,
    )


def prediction_errors(record: SeriesRecord, prefix: PrefixFit,
                      horizon_days: Optional[float] = None) -> tuple:
    """Per-point errors of the prefix model on the future observations.

    Future points are mapped into the prefix normalization before the
    error is taken, so the bound refers to prefix-normalized magnitudes.
    Returns (rel_times_days, errors) restricted to the horizon.
    """
    t_scale, y_scale = prefix.scale
    rel_times, errors = [], []
    for t, y in record.observations[prefix.split_index + 1:]:
        dt = t - prefix.t_f
        if horizon_days is not None and dt > horizon_days:
            break
        v = y / y_scale
        s = evaluate(prefix.fit.kind, prefix.fit.params, t / t_scale)
        errors.append(abs(s - v) / (v + 1.0))
        rel_times.append(dt)
    return np.asarray(rel_times), np.asarray(errors)


def soft_window(record: SeriesRecord, prefix: PrefixFit, bound: float = 0.05,
                horizon_days: Optional[float] = None) -> tuple:
    """(days, bounded) for the soft window of a fitted prefix."""
    if horizon_days is None:
        horizon_days = float(record.observations[-1][0]) - prefix.t_f
    rel_times, errors = prediction_errors(record, prefix, horizon_days)
    return soft_window_from_errors(rel_times, errors, bound, horizon_days)


def hard_window(record: SeriesRecord, prefix: PrefixFit, bound: float = 0.05,
                horizon_days: Optional[float] = None) -> tuple:
    """(days, bounded) for the hard window of a fitted prefix."""
    if horizon_days is None:
        horizon_days = float(record.observations[-1][0]) - prefix.t_f
    rel_times, errors = prediction_errors(record, prefix, horizon_days)
    return hard_window_from_errors(rel_times, errors, bound, horizon_days)


@dataclass
class ScenarioOutcome:
    setup: PredictionSetup
    results: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)


def _split_index(record: SeriesRecord, setup: PredictionSetup) -> Optional[int]:
    """Index of the last prefix observation, or None if no valid split."""
    times = [t for t, _ in record.observations]
    if setup.split == "half_life":
        cutoff = times[-1] / 2.0
    else:
        cutoff = setup.window_days
    idx = None
    for i, t in enumerate(times):
        if t <= cutoff:
            idx = i
        else:
            break
    return idx


def _eligibility(record: SeriesRecord, setup: PredictionSetup, split_index: Optional[int]) -> Optional[tuple]:
    """(code, message) when the record cannot enter the scenario."""
    n = record.n
    t_n = record.observations[-1][0]
    if setup.split == "fixed_days" and t_n < setup.window_days:
        return ("INELIGIBLE_AGE", f"observed age {t_n} < {setup.window_days} days")
    if split_index is None:
        return ("NO_PREFIX", "no observation at or before the split point")
    n_future = n - (split_index + 1)
    if n_future < 1:
        return ("EMPTY_FUTURE", "no observations after the split")
    if setup.split != "fixed_days" and n_future < MIN_FUTURE_POINTS:
        return ("TOO_FEW_FUTURE_POINTS", f"{n_future} post-split points < {MIN_FUTURE_POINTS}")
    if split_index + 1 < MIN_PREFIX_POINTS:
        return ("TOO_SHORT_PREFIX", f"prefix has {split_index + 1} points < {MIN_PREFIX_POINTS}")
    return None


def run_scenario(records: list, setup: PredictionSetup,
                 config: LmConfig | None = None, mer_threshold: float = 0.05) -> ScenarioOutcome:
    """Evaluate soft and hard windows for every eligible record.

    Ineligible records are skipped with a diagnostic, never silently.
    The aggregate reports, per selected kind and overall: count,
    distribution share, mean/variance of the normalized window sizes and
    the fraction that hit the horizon (the bound effect).
    """
    config = config or LmConfig()
    outcome = ScenarioOutcome(setup=setup)
    for record in records:
        split_index = _split_index(record, setup)
        problem = _eligibility(record, setup, split_index)
        if problem is not None:
            outcome.skipped.append(Diagnostic(record.id, problem[0], problem[1]))
            continue
        try:
            prefix = fit_prefix(record, split_index, config, mer_threshold)
        except (DegenerateZeroViewsError, DegenerateZeroAgeError) as exc:
            outcome.skipped.append(Diagnostic(record.id, exc.code, str(exc)))
            continue

        t_n = float(record.observations[-1][0])
        if setup.split == "fixed_window":
            horizon = setup.horizon_multiplier * setup.window_days
            denom = setup.window_days
        else:
            horizon = t_n - prefix.t_f
            denom = t_n - prefix.t_f

        rel_times, errors = prediction_errors(record, prefix, horizon)
        if errors.size == 0:
            outcome.skipped.append(
                Diagnostic(record.id, "EMPTY_FUTURE", "no observations inside the horizon"))
            continue
        soft_days, soft_bounded = soft_window_from_errors(
            rel_times, errors, setup.error_bound, horizon)
        hard_days, hard_bounded = hard_window_from_errors(
            rel_times, errors, setup.error_bound, horizon)

        outcome.results.append(WindowResult(
            id=record.id,
            kind=prefix.kind,
            t_f=prefix.t_f,
            t_n=t_n,
            soft_days=soft_days,
            soft_norm=soft_days / denom,
            soft_bounded=soft_bounded,
            hard_days=hard_days,
            hard_norm=hard_days / denom,
            hard_bounded=hard_bounded,
            horizon_days=horizon,
            n_future=int(errors.size),
        ))

    if not outcome.results:
        raise NoEligibleRecordsError(
            f"no eligible records for scenario {setup.split} "
            f"({len(outcome.skipped)} skipped)")
    outcome.aggregate = aggregate_windows(outcome.results)
    return outcome


def aggregate_windows(results: list) -> dict:
    """Per-kind and overall statistics of the normalized window sizes."""
    total = len(results)
    kinds = sorted({r.kind for r in results})
    table = {}
    for key in kinds + ["all"]:
        group = results if key == "all" else [r for r in results if r.kind == key]
        soft = np.array([r.soft_norm for r in group])
        hard = np.array([r.hard_norm for r in group])
        table[key] = {
            "count": len(group),
            "distribution_pct": 100.0 * len(group) / total,
            "soft_mean": float(soft.mean()),
            "soft_var": float(soft.var()),
            "soft_bounded_pct": 100.0 * sum(r.soft_bounded for r in group) / len(group),
            "hard_mean": float(hard.mean()),
            "hard_var": float(hard.var()),
            "hard_bounded_pct": 100.0 * sum(r.hard_bounded for r in group) / len(group),
        }
    return table
