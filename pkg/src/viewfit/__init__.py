"""viewfit: growth-model fitting, classification and prediction for
cumulative view-count time series."""

from .classify import (
    ClassificationRecord,
    FitResult,
    LinearTail,
    UNCLASSIFIED,
    classify_corpus,
    classify_series,
    corpus_report,
    fit_all,
    gof,
    mer,
    msc,
    proportion_ci,
    select_model,
    trim_linear_tail,
)
from .models import (
    KIND_ORDER,
    ModelKind,
    NONLINEAR_KINDS,
    ParamSet,
    denormalize_params,
    evaluate,
    gradient,
    ode_rhs,
    param_count,
)
from .predict import (
    PredictionSetup,
    PrefixFit,
    WindowResult,
    fit_prefix,
    hard_window,
    run_scenario,
    soft_window,
)
from .regress import LinearFit, LmConfig, LmResult, default_init, linear_fit, lm_fit
from .series import (
    NormalizedSeries,
    PopularityClass,
    SeriesRecord,
    cumulate,
    ingest,
    normalize,
    popularity_class,
)
from .synth import SynthSpec, SplitMix64, generate, generate_corpus

__version__ = "0.1.0"
