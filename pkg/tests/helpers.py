"""Shared test utilities: noiseless series construction and oracles."""

import numpy as np

from viewfit.models import ModelKind, ParamSet, evaluate
from viewfit.series import NormalizedSeries, SeriesRecord


def model_series(kind: ModelKind, params: ParamSet, n: int = 200):
    """Noiseless closed-form curve on the uniform grid, renormalized so the
    last point is (1, 1).  Returns (series, y_scale); ground-truth params
    map into the fit frame through y_scale (see denormalize_params)."""
    u = np.arange(1, n + 1) / n
    v = evaluate(kind, params, u)
    y_scale = float(v[-1])
    v = v / y_scale
    v[-1] = 1.0
    return NormalizedSeries(u=u, v=v, scale=(1.0, y_scale)), y_scale


def model_record(kind: ModelKind, params: ParamSet, n: int = 200,
                 record_id: str = "rec", t_scale: float = 1.0,
                 y_scale: float = 1.0) -> SeriesRecord:
    """Noiseless closed-form curve as a raw SeriesRecord."""
    u = np.arange(1, n + 1) / n
    v = evaluate(kind, params, u)
    obs = [(float(t * t_scale), float(y * y_scale)) for t, y in zip(u, v)]
    return SeriesRecord(id=record_id, observations=obs)


def fd_gradient(kind: ModelKind, params: ParamSet, t: float, h: float = 1e-6):
    """Central finite differences of evaluate, the gradient oracle."""
    from viewfit.models import param_names

    out = []
    for name in param_names(kind):
        value = getattr(params, name)
        hi = params.with_updates(**{name: value + h})
        lo = params.with_updates(**{name: value - h})
        out.append((evaluate(kind, hi, t) - evaluate(kind, lo, t)) / (2 * h))
    return np.array(out)
