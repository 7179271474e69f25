"""Parameter estimation: ordinary linear regression and Levenberg-Marquardt.

The LM solver minimizes the plain sum of squared residuals (the MSC)
using the models module's analytic Jacobians.  It follows the classical
Marquardt schedule: damped normal equations with multiplicative damping
updates, steps accepted only when the MSC strictly decreases, and box
constraints enforced by projection so trial parameters never leave the
domain of the closed forms.  Multistart restarts mitigate local minima;
the whole procedure is deterministic given a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadInitialPointError, ZeroVarianceError
from .models import _EVAL, _JAC, ModelKind, ParamSet, free_to_full, param_names
from .series import NormalizedSeries

# Parameter boxes in normalized coordinates.  Lower bounds of open
# intervals are enforced with a small positive floor.
_POS_FLOOR = 1e-9
_BOX = {
    "s0": (_POS_FLOOR, 1.5),
    "m": (_POS_FLOOR, 10.0),  # additionally m >= s0, applied after clipping
    "lam": (_POS_FLOOR, 1e3),
    "k": (0.0, 10.0),
}
# Per-kind bound vectors in the fixed parameter ordering.
_BOX_LO = {
    kind: np.array([_BOX[name][0] for name in param_names(kind)])
    for kind in ModelKind
}
_BOX_HI = {
    kind: np.array([_BOX[name][1] for name in param_names(kind)])
    for kind in ModelKind
}
_M_INDEX = {
    kind: (param_names(kind).index("m") if "m" in param_names(kind) else None)
    for kind in ModelKind
}

# Exact-fit floor: once a start reaches this MSC no later start can
# meaningfully improve, so remaining restarts are skipped.
_EXACT_FIT_MSC = 1e-25


@dataclass(frozen=True)
class LinearFit:
    """Least-squares line with the coefficient of determination R."""

    slope: float
    intercept: float
    r: float  # 1 - SSres/SStot; 1 for an exact fit, can go negative

    def values(self, u) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(u, dtype=float)


@dataclass(frozen=True)
class LmConfig:
    max_iterations: int = 200
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    msc_rtol: float = 1e-10  # relative MSC improvement below which we stop
    grad_tol: float = 1e-12  # gradient-norm floor
    multistart_count: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.max_iterations <= 0 or self.multistart_count <= 0:
            raise ValueError("iteration and multistart counts must be positive")
        if not (self.damping_up > 1.0 > self.damping_down > 0.0):
            raise ValueError("need damping_up > 1 > damping_down > 0")
        if min(self.initial_damping, self.msc_rtol, self.grad_tol) <= 0:
            raise ValueError("damping and tolerances must be strictly positive")


@dataclass(frozen=True)
class LmResult:
    params: ParamSet
    msc: float
    iterations: int
    converged: bool
    restarts_used: int  # starts executed beyond the first


def linear_fit(series: NormalizedSeries) -> LinearFit:
    """Ordinary least-squares line through the normalized observations.

    R = 1 - sum((v - fit)^2) / sum((v - mean)^2).  All-equal values make
    R undefined and raise ZeroVarianceError.
    """
    u, v = series.u, series.v
    v_mean = float(np.mean(v))
    ss_tot = float(np.sum((v - v_mean) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("all values equal; R is undefined")
    u_mean = float(np.mean(u))
    s_uu = float(np.sum((u - u_mean) ** 2))
    slope = float(np.sum((u - u_mean) * (v - v_mean)) / s_uu)
    intercept = v_mean - slope * u_mean
    ss_res = float(np.sum((v - (intercept + slope * u)) ** 2))
    return LinearFit(slope=slope, intercept=intercept, r=1.0 - ss_res / ss_tot)


def _project(kind: ModelKind, values: np.ndarray) -> np.ndarray:
    out = np.minimum(np.maximum(values, _BOX_LO[kind]), _BOX_HI[kind])
    i_m = _M_INDEX[kind]
    if i_m is not None and out[i_m] < out[0]:  # s0 is always column 0
        out[i_m] = out[0]
    return out


def _msc(kind: ModelKind, values: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    model = _EVAL[kind](*free_to_full(kind, values), u)
    return float(np.sum((model - v) ** 2))


def default_init(kind: ModelKind, series: NormalizedSeries) -> ParamSet:
    """Heuristic starting point for a normalized series.

    s0 from the first observation (floored at 1e-3), m slightly above
    the normalized ceiling, lam matched to the observed time to reach
    half the final value, and k from the terminal slope over the last
    20% of points.
    """
    u, v = series.u, series.v
    s0 = max(float(v[0]), 1e-3)
    m = 1.05

    lam = 5.0
    half_idx = int(np.argmax(v >= 0.5))
    u_half = float(u[half_idx])
    if v[half_idx] >= 0.5 and u_half > 0:
        lam = _rate_from_half_time(kind, s0, m, u_half)

    tail = max(2, int(np.ceil(0.2 * len(u))))
    du = float(u[-1] - u[-tail])
    slope = float((v[-1] - v[-tail]) / du) if du > 0 else 0.0
    k = max(0.0, slope) if kind.value.startswith("mod") else 0.0

    values = _project(kind, ParamSet(s0=s0, m=m, lam=lam, k=k).free_values(kind))
    return ParamSet.from_free_values(kind, values)


def _rate_from_half_time(kind: ModelKind, s0: float, m: float, u_half: float) -> float:
    """Solve the kind's closed form for lam given S(u_half) = 0.5."""
    fallback = 5.0
    if kind in (ModelKind.NEGEXP, ModelKind.MODNEGEXP, ModelKind.LINEAR):
        lam = np.log(2.0) / u_half
    elif kind in (ModelKind.LOGISTIC, ModelKind.MODLOGISTIC):
        a = (m - s0) / s0
        target = m / 0.5 - 1.0
        if a <= target:
            return fallback
        lam = np.log(a / target) / (m * u_half)
    else:  # gompertz family
        log_ratio = np.log(m / s0)
        inner = np.log(m / 0.5) / log_ratio
        if not 0.0 < inner < 1.0:
            return fallback
        lam = -np.log(inner) / u_half
    if not np.isfinite(lam) or lam <= 0:
        return fallback
    return float(lam)


def _multistart_inits(kind: ModelKind, init: ParamSet, config: LmConfig) -> list:
    """The given init plus seeded perturbations of lam (log-uniform within
    one decade) and k (uniform within one decade)."""
    starts = [_project(kind, init.free_values(kind))]
    if config.multistart_count > 1:
        rng = np.random.default_rng(config.seed)
        names = param_names(kind)
        i_lam = names.index("lam")
        for _ in range(config.multistart_count - 1):
            values = init.free_values(kind)
            values[i_lam] *= 10.0 ** rng.uniform(-1.0, 1.0)
            if "k" in names:
                i_k = names.index("k")
                base_k = values[i_k]
                if base_k > 1e-6:
                    values[i_k] = rng.uniform(base_k / 10.0, base_k * 10.0)
                else:
                    values[i_k] = rng.uniform(0.0, 0.2)
            starts.append(_project(kind, values))
    return starts


def lm_fit(
    kind: ModelKind,
    series: NormalizedSeries,
    init: ParamSet | None = None,
    config: LmConfig | None = None,
) -> LmResult:
    """Levenberg-Marquardt minimization of the MSC for a nonlinear kind.

    Runs ``config.multistart_count`` starts (the supplied init plus
    perturbed copies) and returns the best result; ties favor fewer
    iterations, then the earlier start.  The returned MSC never exceeds
    the MSC of the start that produced it.
    """
    if kind is ModelKind.LINEAR:
        raise ValueError("use linear_fit for the linear kind")
    config = config or LmConfig()
    config.validate()
    if init is None:
        init = default_init(kind, series)

    u, v = series.u, series.v
    starts = _multistart_inits(kind, init, config)

    full0 = free_to_full(kind, starts[0])
    r0 = _EVAL[kind](*full0, u) - v
    j0 = _JAC[kind](*full0, u)
    if not (np.all(np.isfinite(r0)) and np.all(np.isfinite(j0))):
        raise BadInitialPointError(f"non-finite residual or Jacobian at init for {kind}")

    best = None
    best_idx = 0
    ran = 0
    for idx, start in enumerate(starts):
        ran = idx + 1
        candidate = _lm_single(kind, start, u, v, config)
        if best is None or (candidate[1], candidate[2], idx) < (best[1], best[2], best_idx):
            best, best_idx = candidate, idx
        if best[1] < _EXACT_FIT_MSC:
            break

    values, msc, iterations, converged = best
    return LmResult(
        params=ParamSet.from_free_values(kind, values),
        msc=msc,
        iterations=iterations,
        converged=converged,
        restarts_used=ran - 1,
    )


def _lm_single(
    kind: ModelKind, start: np.ndarray, u: np.ndarray, v: np.ndarray, config: LmConfig
) -> tuple:
    """One LM run from one start; returns (values, msc, iterations, converged)."""
    eval_fn, jac_fn = _EVAL[kind], _JAC[kind]
    values = _project(kind, np.asarray(start, dtype=float))
    msc = _msc(kind, values, u, v)
    damping = config.initial_damping
    converged = False
    iterations = 0

    while iterations < config.max_iterations and not converged:
        full = free_to_full(kind, values)
        residual = eval_fn(*full, u) - v
        jac = jac_fn(*full, u)
        grad = jac.T @ residual
        if np.linalg.norm(grad) < config.grad_tol:
            converged = True
            break

        jtj = jac.T @ jac
        diag = np.maximum(np.diagonal(jtj), 1e-12)
        p = len(diag)
        accepted = False
        while iterations < config.max_iterations:
            iterations += 1
            damped = jtj.copy()
            damped.flat[:: p + 1] += damping * diag
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                trial = _project(kind, values + step)
                trial_msc = _msc(kind, trial, u, v)
                if np.isfinite(trial_msc) and trial_msc < msc:
                    improvement = msc - trial_msc
                    values, msc = trial, trial_msc
                    damping = max(damping * config.damping_down, 1e-15)
                    accepted = True
                    if improvement <= config.msc_rtol * max(msc, 1e-300):
                        converged = True
                    break
            damping *= config.damping_up
            if damping > 1e15:
                # No descent direction at any damping scale: a (possibly
                # box-constrained) local minimum to working precision.
                converged = True
                break
        if not accepted:
            break

    return values, msc, iterations, converged
