"""Closed-form growth models for cumulative view-count curves.

Seven kinds are supported, all expressed in normalized coordinates
(time and views both scaled to [0, 1] over the observed window):

    linear        S(t) = S0 + lam*t
    negexp        S(t) = S0 + (M - S0)*(1 - exp(-lam*t))
    modnegexp     negexp  + k*t
    logistic      S(t) = M / (1 + ((M - S0)/S0) * exp(-lam*M*t))
    modlogistic   logistic + k*t
    gompertz      S(t) = M * exp(-log(M/S0) * exp(-lam*t))
    modgompertz   gompertz + k*t

The base kinds solve first-order growth ODEs (logistic: dS/dt =
lam*S*(M-S); gompertz: dS/dt = lam*S*log(M/S); negexp: dS/dt =
lam*(M-S)).  The ``mod*`` variants add a linear immigration term k*t;
the shifted trajectory S - k*t then satisfies the base equation.

Parameter ordering is fixed per kind so Jacobian columns are
unambiguous everywhere: (s0, m, lam) for the three-parameter kinds,
(s0, m, lam, k) for the four-parameter ones, and (s0, lam) for linear.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, SingularParamsError

# Exponent clamp (natural-log scale) so extreme trial parameters during
# optimization overflow to saturated values instead of inf.
_EXP_CLAMP = 700.0


class ModelKind(str, enum.Enum):
    LINEAR = "linear"
    NEGEXP = "negexp"
    MODNEGEXP = "modnegexp"
    LOGISTIC = "logistic"
    MODLOGISTIC = "modlogistic"
    GOMPERTZ = "gompertz"
    MODGOMPERTZ = "modgompertz"

    def __str__(self) -> str:  # plain identifier in CLI/report output
        return self.value


# Stable enumeration order used for candidate lists and tie-breaking.
KIND_ORDER = tuple(ModelKind)
NONLINEAR_KINDS = tuple(k for k in ModelKind if k is not ModelKind.LINEAR)

_FREE_PARAMS = {
    ModelKind.LINEAR: ("s0", "lam"),
    ModelKind.NEGEXP: ("s0", "m", "lam"),
    ModelKind.MODNEGEXP: ("s0", "m", "lam", "k"),
    ModelKind.LOGISTIC: ("s0", "m", "lam"),
    ModelKind.MODLOGISTIC: ("s0", "m", "lam", "k"),
    ModelKind.GOMPERTZ: ("s0", "m", "lam"),
    ModelKind.MODGOMPERTZ: ("s0", "m", "lam", "k"),
}

_SIGMOID_KINDS = frozenset(
    {ModelKind.LOGISTIC, ModelKind.MODLOGISTIC, ModelKind.GOMPERTZ, ModelKind.MODGOMPERTZ}
)
_IMMIGRATION_KINDS = frozenset(
    {ModelKind.MODNEGEXP, ModelKind.MODLOGISTIC, ModelKind.MODGOMPERTZ}
)


@dataclass(frozen=True)
class ParamSet:
    """Model parameters in normalized units.

    s0:  initial value; m: ceiling; lam: rate; k: immigration slope
    (used by the mod* kinds and, for linear, lam doubles as the slope).
    """

    s0: float
    m: float = 0.0
    lam: float = 0.0
    k: float = 0.0

    def free_values(self, kind: ModelKind) -> np.ndarray:
        return np.array([getattr(self, name) for name in _FREE_PARAMS[kind]], dtype=float)

    @staticmethod
    def from_free_values(kind: ModelKind, values) -> "ParamSet":
        fields = dict(zip(_FREE_PARAMS[kind], (float(v) for v in values)))
        return ParamSet(**fields)

    def with_updates(self, **kwargs) -> "ParamSet":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {"S0": self.s0, "M": self.m, "lambda": self.lam, "k": self.k}

    @staticmethod
    def from_dict(d: dict) -> "ParamSet":
        return ParamSet(
            s0=float(d.get("S0", 0.0)),
            m=float(d.get("M", 0.0)),
            lam=float(d.get("lambda", 0.0)),
            k=float(d.get("k", 0.0)),
        )


def param_count(kind: ModelKind) -> int:
    """Number of free parameters p for the kind (2, 3 or 4)."""
    return len(_FREE_PARAMS[kind])


def param_names(kind: ModelKind) -> tuple:
    """Fixed parameter ordering used for Jacobian columns."""
    return _FREE_PARAMS[kind]


def _check_params(kind: ModelKind, params: ParamSet) -> None:
    if kind in _SIGMOID_KINDS and params.s0 <= 0:
        raise SingularParamsError(
            f"{kind} closed form requires S0 > 0, got {params.s0}"
        )


def _exp(x):
    # Upper clamp only: huge negative exponents underflow harmlessly to 0.
    return np.exp(np.minimum(x, _EXP_CLAMP))


# --------------------------------------------------------------------------
# Raw-array kernels.  These are the single source of truth for values and
# partial derivatives; the optimizer calls them directly to avoid per-step
# object construction.  Callers guarantee s0 > 0 for the sigmoid kinds.
# --------------------------------------------------------------------------


def _eval_linear(s0, m, lam, k, t):
    return s0 + lam * t


def _eval_negexp(s0, m, lam, k, t):
    return s0 + (m - s0) * (1.0 - _exp(-lam * t))


def _eval_modnegexp(s0, m, lam, k, t):
    return _eval_negexp(s0, m, lam, k, t) + k * t


def _eval_logistic(s0, m, lam, k, t):
    a = (m - s0) / s0
    return m / (1.0 + a * _exp(-lam * m * t))


def _eval_modlogistic(s0, m, lam, k, t):
    return _eval_logistic(s0, m, lam, k, t) + k * t


def _eval_gompertz(s0, m, lam, k, t):
    return m * _exp(-math.log(m / s0) * _exp(-lam * t))


def _eval_modgompertz(s0, m, lam, k, t):
    return _eval_gompertz(s0, m, lam, k, t) + k * t


def _jac_linear(s0, m, lam, k, t):
    return np.column_stack([np.ones_like(t), t])


def _jac_negexp_cols(s0, m, lam, k, t):
    decay = _exp(-lam * t)
    return [decay, 1.0 - decay, (m - s0) * t * decay]


def _jac_negexp(s0, m, lam, k, t):
    return np.column_stack(_jac_negexp_cols(s0, m, lam, k, t))


def _jac_modnegexp(s0, m, lam, k, t):
    return np.column_stack(_jac_negexp_cols(s0, m, lam, k, t) + [t])


def _jac_logistic_cols(s0, m, lam, k, t):
    a = (m - s0) / s0
    e = _exp(-lam * m * t)
    denom = 1.0 + a * e
    denom2 = denom * denom
    d_s0 = (m * m) * e / (s0 * s0 * denom2)
    d_m = 1.0 / denom - (m / denom2) * e * (1.0 / s0 - a * lam * t)
    d_lam = (m * m) * t * a * e / denom2
    return [d_s0, d_m, d_lam]


def _jac_logistic(s0, m, lam, k, t):
    return np.column_stack(_jac_logistic_cols(s0, m, lam, k, t))


def _jac_modlogistic(s0, m, lam, k, t):
    return np.column_stack(_jac_logistic_cols(s0, m, lam, k, t) + [t])


def _jac_gompertz_cols(s0, m, lam, k, t):
    log_ratio = math.log(m / s0)
    e = _exp(-lam * t)
    base = m * _exp(-log_ratio * e)
    return [base * e / s0, (base / m) * (1.0 - e), base * log_ratio * t * e]


def _jac_gompertz(s0, m, lam, k, t):
    return np.column_stack(_jac_gompertz_cols(s0, m, lam, k, t))


def _jac_modgompertz(s0, m, lam, k, t):
    return np.column_stack(_jac_gompertz_cols(s0, m, lam, k, t) + [t])


_EVAL = {
    ModelKind.LINEAR: _eval_linear,
    ModelKind.NEGEXP: _eval_negexp,
    ModelKind.MODNEGEXP: _eval_modnegexp,
    ModelKind.LOGISTIC: _eval_logistic,
    ModelKind.MODLOGISTIC: _eval_modlogistic,
    ModelKind.GOMPERTZ: _eval_gompertz,
    ModelKind.MODGOMPERTZ: _eval_modgompertz,
}

_JAC = {
    ModelKind.LINEAR: _jac_linear,
    ModelKind.NEGEXP: _jac_negexp,
    ModelKind.MODNEGEXP: _jac_modnegexp,
    ModelKind.LOGISTIC: _jac_logistic,
    ModelKind.MODLOGISTIC: _jac_modlogistic,
    ModelKind.GOMPERTZ: _jac_gompertz,
    ModelKind.MODGOMPERTZ: _jac_modgompertz,
}

# Full-vector layout used by the kernels: (s0, m, lam, k).
_FULL_INDEX = {"s0": 0, "m": 1, "lam": 2, "k": 3}


def free_to_full(kind: ModelKind, values) -> tuple:
    """Expand a free-parameter vector to the (s0, m, lam, k) kernel args."""
    full = [0.0, 0.0, 0.0, 0.0]
    for name, value in zip(_FREE_PARAMS[kind], values):
        full[_FULL_INDEX[name]] = float(value)
    return tuple(full)


def evaluate(kind: ModelKind, params: ParamSet, t):
    """Closed-form model value S(t).

    ``t`` may be a scalar or array of normalized times; the return
    matches its shape (scalar in, float out).
    """
    _check_params(kind, params)
    t_arr = np.asarray(t, dtype=float)
    out = _EVAL[kind](params.s0, params.m, params.lam, params.k, t_arr)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def gradient(kind: ModelKind, params: ParamSet, t):
    """Analytic partial derivatives dS/dparam in the fixed ordering.

    For scalar ``t`` returns a length-p vector; for an array of n times
    returns the (n, p) Jacobian.
    """
    _check_params(kind, params)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    jac = _JAC[kind](params.s0, params.m, params.lam, params.k, t_arr)
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return jac[0]
    return jac


def ode_rhs(kind: ModelKind, params: ParamSet, s: float, t: float) -> float:
    """Growth-rate dS/dt at state ``s`` and time ``t``.

    The mod* kinds evaluate the base right-hand side at the shifted
    state (s - k*t) and add k, since the shifted trajectory obeys the
    base equation.
    """
    _check_params(kind, params)
    m, lam, k = params.m, params.lam, params.k

    if kind is ModelKind.LINEAR:
        return lam

    shift = k * t if kind in _IMMIGRATION_KINDS else 0.0
    base = s - shift
    if kind in (ModelKind.NEGEXP, ModelKind.MODNEGEXP):
        rate = lam * (m - base)
    elif kind in (ModelKind.LOGISTIC, ModelKind.MODLOGISTIC):
        rate = lam * base * (m - base)
    else:
        if base <= 0.0:
            raise DomainError(f"gompertz rate undefined at shifted state {base}")
        rate = lam * base * math.log(m / base)
    if kind in _IMMIGRATION_KINDS:
        rate += k
    return float(rate)


def denormalize_params(
    kind: ModelKind, params: ParamSet, t_scale: float, y_scale: float
) -> ParamSet:
    """Map fitted normalized parameters back to raw units.

    Raw curve is y(t) = y_scale * S(t / t_scale) with t in days, so
    s0 and m scale by y_scale, k scales by y_scale/t_scale, and lam by
    1/t_scale except for the logistic family where the exponent couples
    lam with m and the raw rate is lam / (t_scale * y_scale).
    """
    if kind in (ModelKind.LOGISTIC, ModelKind.MODLOGISTIC):
        lam_raw = params.lam / (t_scale * y_scale)
    elif kind is ModelKind.LINEAR:
        lam_raw = params.lam * y_scale / t_scale
    else:
        lam_raw = params.lam / t_scale
    return ParamSet(
        s0=params.s0 * y_scale,
        m=params.m * y_scale,
        lam=lam_raw,
        k=params.k * y_scale / t_scale,
    )
