"""Model scoring, best-model selection and corpus-level reporting.

Scoring follows the three-criterion scheme: MSC (sum of squared
residuals, the optimizer's objective), MER (mean per-point absolute
error scaled by observed value + 1, the reliability filter) and GoF
(MSC per degree of freedom, the cross-model comparison score).  A
series is assigned the lowest-GoF model among those whose MER clears
the threshold; if none clears it, the series is UNCLASSIFIED and the
lowest-MER candidate is kept as a best-effort report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import (
    InsufficientDfError,
    NoCandidatesError,
    ShapeError,
    TooShortError,
    TooShortForClassificationError,
    ZeroVarianceError,
)
from .models import KIND_ORDER, ModelKind, NONLINEAR_KINDS, ParamSet, evaluate, param_count
from .regress import LinearFit, LmConfig, default_init, linear_fit, lm_fit
from .series import NormalizedSeries, SeriesRecord, normalize, popularity_class

UNCLASSIFIED = "UNCLASSIFIED"

# MER histogram bin edges used throughout reporting: reliable (<= 0.05),
# acceptable (<= 0.1), unreliable.
MER_BINS = (0.05, 0.1)

# Two candidates whose GoF differ by less than this relative tolerance are
# treated as tied, and the tie goes to the model with fewer parameters.
# Exact-equality ties never fire in float arithmetic, and with unweighted
# MSC on multiplicative noise an extra parameter routinely buys a few
# percent of GoF by chasing the high-noise end of the series; 0.15 keeps
# such no-information wins from displacing a simpler model while staying
# far below the gap between genuinely different curve families.
GOF_TIE_RTOL = 0.15
_GOF_TIE_ATOL = 1e-12

_KIND_RANK = {kind: i for i, kind in enumerate(KIND_ORDER)}


@dataclass(frozen=True)
class FitResult:
    """Scores for one model kind fitted to one normalized series."""

    kind: ModelKind
    params: ParamSet
    msc: float
    mer: float
    gof: float
    df: int
    converged: bool
    r: Optional[float] = None  # linear kind only
    iterations: int = 0

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value,
            "params": self.params.to_dict(),
            "msc": self.msc,
            "mer": self.mer,
            "gof": self.gof,
            "df": self.df,
            "converged": self.converged,
            "iterations": self.iterations,
        }
        if self.r is not None:
            out["r"] = self.r
        return out


@dataclass(frozen=True)
class LinearTail:
    """Result of the two-phase (mixed linear/non-linear) fitting.

    k_index is the 1-based rank from which the series behaves linearly;
    k_index == 1 means the whole series is well described by a line.
    head_fit, when present, is the best nonlinear fit on the re-normalized
    head segment (observations 1..k_index), with head_scale giving that
    segment's (t, y) scale in the units of the full normalized series.
    """

    k_index: int
    tail: LinearFit
    head_fit: Optional[FitResult] = None
    head_scale: Optional[tuple] = None

    def to_dict(self) -> dict:
        out = {
            "k_index": self.k_index,
            "tail": {"slope": self.tail.slope, "intercept": self.tail.intercept, "r": self.tail.r},
        }
        if self.head_fit is not None:
            out["head_fit"] = self.head_fit.to_dict()
            out["head_scale"] = list(self.head_scale)
        return out


@dataclass
class ClassificationRecord:
    """The selected model for one series, with all candidates retained."""

    id: str
    selected: str  # a ModelKind value or UNCLASSIFIED
    selected_fit: FitResult
    candidates: list = field(default_factory=list)
    linear_tail: Optional[LinearTail] = None
    mer_threshold: float = 0.05
    category: Optional[str] = None
    total_views: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "selected": self.selected,
            "mer_threshold": self.mer_threshold,
            "selected_fit": self.selected_fit.to_dict(),
            "candidates": [c.to_dict() for c in self.candidates],
            "linear_tail": self.linear_tail.to_dict() if self.linear_tail else None,
            "category": self.category,
            "total_views": self.total_views,
        }


def msc(observed, model_values) -> float:
    """Sum of squared residuals."""
    observed = np.asarray(observed, dtype=float)
    model_values = np.asarray(model_values, dtype=float)
    if observed.shape != model_values.shape:
        raise ShapeError(f"shape mismatch {observed.shape} vs {model_values.shape}")
    return float(np.sum((model_values - observed) ** 2))


def mer(observed, model_values) -> float:
    """Mean error rate: (1/n) * sum |S - v| / (v + 1).

    Computed on normalized values, so the +1 shift both bounds the
    per-point ratio and avoids division by zero at v = 0.
    """
    observed = np.asarray(observed, dtype=float)
    model_values = np.asarray(model_values, dtype=float)
    if observed.shape != model_values.shape:
        raise ShapeError(f"shape mismatch {observed.shape} vs {model_values.shape}")
    return float(np.mean(np.abs(model_values - observed) / (observed + 1.0)))


def gof(msc_value: float, n: int, p: int) -> float:
    """MSC per degree of freedom, df = n - p."""
    if n <= p:
        raise InsufficientDfError(f"need n > p, got n={n}, p={p}")
    return msc_value / (n - p)


def _score(kind: ModelKind, params: ParamSet, series: NormalizedSeries,
           converged: bool, r: Optional[float] = None, iterations: int = 0) -> FitResult:
    values = evaluate(kind, params, series.u)
    msc_value = msc(series.v, values)
    p = param_count(kind)
    return FitResult(
        kind=kind,
        params=params,
        msc=msc_value,
        mer=mer(series.v, values),
        gof=gof(msc_value, series.n, p),
        df=series.n - p,
        converged=converged,
        r=r,
        iterations=iterations,
    )


def fit_all(series: NormalizedSeries, config: LmConfig | None = None) -> list:
    """Fit every model kind to the series; exactly 7 results, stable order.

    The linear kind goes through ordinary regression, all others through
    Levenberg-Marquardt from the default init with multistart.  Fits
    that did not converge are retained and flagged, not dropped.
    """
    if series.n < 6:
        raise TooShortForClassificationError(
            f"need n >= 6 for classification, got {series.n}"
        )
    config = config or LmConfig()
    results = []
    for kind in KIND_ORDER:
        if kind is ModelKind.LINEAR:
            try:
                line = linear_fit(series)
            except ZeroVarianceError:
                # Flat series: the constant line fits exactly, R := 1.
                line = LinearFit(slope=0.0, intercept=float(series.v[0]), r=1.0)
            params = ParamSet(s0=line.intercept, lam=line.slope)
            results.append(_score(kind, params, series, converged=True, r=line.r))
        else:
            fit = lm_fit(kind, series, init=default_init(kind, series), config=config)
            results.append(
                _score(kind, fit.params, series, converged=fit.converged,
                       iterations=fit.iterations)
            )
    return results


def select_model(candidates: list, mer_threshold: float = 0.05) -> tuple:
    """Pick the best model: lowest GoF among candidates with MER under
    the threshold.

    Near-equal GoF values (relative tolerance GOF_TIE_RTOL) are ties,
    broken by fewer parameters and then by the fixed kind order, so an
    extra immigration parameter that buys nothing does not win.  Returns
    (selected_name, selected_fit); with no survivor the name is
    UNCLASSIFIED and the fit is the lowest-MER candidate.
    """
    if not candidates:
        raise NoCandidatesError("no candidate fits supplied")
    survivors = [c for c in candidates if c.mer <= mer_threshold]
    if not survivors:
        best_effort = min(candidates, key=lambda c: (c.mer, _KIND_RANK[c.kind]))
        return UNCLASSIFIED, best_effort
    gof_min = min(c.gof for c in survivors)
    tie_margin = max(GOF_TIE_RTOL * gof_min, _GOF_TIE_ATOL)
    tied = [c for c in survivors if c.gof <= gof_min + tie_margin]
    winner = min(tied, key=lambda c: (param_count(c.kind), _KIND_RANK[c.kind]))
    return winner.kind.value, winner


def trim_linear_tail(
    series: NormalizedSeries,
    epsilon: float = 0.01,
    min_head: int = 5,
    min_tail: int = 5,
) -> Optional[tuple]:
    """Find the first rank k from which the series behaves linearly.

    Scans suffixes from the front: fit a regression line on observations
    k..n and stop at the first k whose coefficient of determination r
    satisfies |1 - r| <= epsilon.  k == 1 means the whole series is
    linear.  Returns (k, LinearFit) or None when no suffix of at least
    min_tail points qualifies.
    """
    n = series.n
    if n < min_head + min_tail:
        raise TooShortError(f"need n >= {min_head + min_tail}, got {n}")
    for start in range(0, n - min_tail + 1):
        u = series.u[start:]
        v = series.v[start:]
        line, r = _suffix_line(u, v)
        if abs(1.0 - r) <= epsilon:
            return start + 1, line
    return None


def _suffix_line(u: np.ndarray, v: np.ndarray) -> tuple:
    """Least-squares line on a suffix; a zero-variance suffix is an exact
    horizontal line (r := 1)."""
    v_mean = float(np.mean(v))
    ss_tot = float(np.sum((v - v_mean) ** 2))
    if ss_tot == 0.0:
        return LinearFit(slope=0.0, intercept=v_mean, r=1.0), 1.0
    u_mean = float(np.mean(u))
    slope = float(np.sum((u - u_mean) * (v - v_mean)) / np.sum((u - u_mean) ** 2))
    intercept = v_mean - slope * u_mean
    ss_res = float(np.sum((v - (intercept + slope * u)) ** 2))
    r = 1.0 - ss_res / ss_tot
    return LinearFit(slope=slope, intercept=intercept, r=r), r


def classify_series(
    record: SeriesRecord,
    config: LmConfig | None = None,
    mer_threshold: float = 0.05,
    tail_epsilon: float = 0.01,
) -> ClassificationRecord:
    """Normalize, fit all models, select, and attach the two-phase result.

    The linear-tail analysis is supplementary: when a tail is found past
    min_head observations, the nonlinear candidates are refitted on the
    re-normalized head segment, but the primary selection is unchanged.
    """
    config = config or LmConfig()
    series = normalize(record)
    candidates = fit_all(series, config)
    selected, selected_fit = select_model(candidates, mer_threshold)

    linear_tail = None
    min_head = 5
    try:
        trimmed = trim_linear_tail(series, epsilon=tail_epsilon, min_head=min_head)
    except TooShortError:
        trimmed = None
    if trimmed is not None:
        k_index, tail_line = trimmed
        head_fit = None
        head_scale = None
        if k_index > min_head:
            head_fit, head_scale = _fit_head(series, k_index, config, mer_threshold)
        linear_tail = LinearTail(
            k_index=k_index, tail=tail_line, head_fit=head_fit, head_scale=head_scale
        )

    return ClassificationRecord(
        id=record.id,
        selected=selected,
        selected_fit=selected_fit,
        candidates=candidates,
        linear_tail=linear_tail,
        mer_threshold=mer_threshold,
        category=record.category,
        total_views=record.total_views,
    )


def _fit_head(series: NormalizedSeries, k_index: int, config: LmConfig,
              mer_threshold: float) -> tuple:
    """Refit nonlinear kinds on the head segment 1..k_index, re-normalized
    to its own scale so boxes and init heuristics stay meaningful."""
    u_head = series.u[:k_index]
    v_head = series.v[:k_index]
    if len(u_head) < 6 or u_head[-1] <= 0 or v_head[-1] <= 0:
        return None, None
    scale = (float(u_head[-1]), float(v_head[-1]))
    head = NormalizedSeries(u=u_head / scale[0], v=v_head / scale[1], scale=scale)
    candidates = []
    for kind in NONLINEAR_KINDS:
        fit = lm_fit(kind, head, init=default_init(kind, head), config=config)
        candidates.append(
            _score(kind, fit.params, head, converged=fit.converged,
                   iterations=fit.iterations)
        )
    _, best = select_model(candidates, mer_threshold)
    return best, scale


def classify_corpus(
    records: list,
    config: LmConfig | None = None,
    mer_threshold: float = 0.05,
    threads: int = 1,
) -> tuple:
    """Classify every record; returns (classifications, diagnostics).

    Records are independent, so the work is embarrassingly parallel;
    output is ordered by record id regardless of thread count.  Records
    that cannot be classified are reported, not dropped.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .errors import Diagnostic, ViewfitError

    config = config or LmConfig()

    def one(record):
        try:
            return classify_series(record, config, mer_threshold), None
        except ViewfitError as exc:
            return None, Diagnostic(record.id, exc.code, str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, records))
    else:
        outcomes = [one(record) for record in records]

    classified = sorted((c for c, _ in outcomes if c is not None), key=lambda c: c.id)
    diagnostics = [d for _, d in outcomes if d is not None]
    return classified, diagnostics


def mer_histogram(records: list) -> dict:
    """Counts of selected-fit MER values in the reporting bins."""
    edges = MER_BINS
    bins = {f"[0,{edges[0]}]": 0, f"({edges[0]},{edges[1]}]": 0, f"({edges[1]},inf)": 0}
    keys = list(bins)
    for rec in records:
        value = rec.selected_fit.mer
        if value <= edges[0]:
            bins[keys[0]] += 1
        elif value <= edges[1]:
            bins[keys[1]] += 1
        else:
            bins[keys[2]] += 1
    return bins


def corpus_report(records: list, group_by: str = "none") -> dict:
    """Distribution of selected models, optionally grouped.

    group_by is one of none|category|popularity.  Returns a dict with
    per-group counts and percentages per kind plus the MER histogram.
    """
    if not records:
        raise NoCandidatesError("empty classification list")
    if group_by not in ("none", "category", "popularity"):
        raise ValueError(f"unknown group_by {group_by!r}")

    def group_key(rec: ClassificationRecord) -> str:
        if group_by == "category":
            return rec.category or "Other"
        if group_by == "popularity":
            return popularity_class(rec.total_views).value
        return "all"

    groups: dict = {}
    for rec in records:
        key = group_key(rec)
        groups.setdefault(key, {})
        groups[key][rec.selected] = groups[key].get(rec.selected, 0) + 1

    kinds_present = [k.value for k in KIND_ORDER if any(k.value in g for g in groups.values())]
    if any(UNCLASSIFIED in g for g in groups.values()):
        kinds_present.append(UNCLASSIFIED)

    table = {}
    for key in sorted(groups):
        counts = groups[key]
        total = sum(counts.values())
        table[key] = {
            "count": total,
            "by_kind": {k: counts.get(k, 0) for k in kinds_present},
            "percent": {k: 100.0 * counts.get(k, 0) / total for k in kinds_present},
        }
    return {
        "group_by": group_by,
        "kinds": kinds_present,
        "groups": table,
        "mer_histogram": mer_histogram(records),
        "total": len(records),
    }


def proportion_ci(successes: int, trials: int, level: float = 0.95) -> tuple:
    """Clopper-Pearson exact confidence interval for a proportion.

    Returns (low, point, high).
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError(f"need 0 <= successes <= trials, got {successes}/{trials}")
    alpha = 1.0 - level
    point = successes / trials
    if successes == 0:
        low = 0.0
    else:
        low = float(stats.beta.ppf(alpha / 2.0, successes, trials - successes + 1))
    if successes == trials:
        high = 1.0
    else:
        high = float(stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes))
    return low, point, high
