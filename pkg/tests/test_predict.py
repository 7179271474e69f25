"""Prediction windows against an exhaustive scan oracle, plus scenarios."""

import numpy as np
import pytest

from helpers import model_record
from viewfit.errors import EmptyFutureError, NoEligibleRecordsError
from viewfit.models import ModelKind, ParamSet
from viewfit.predict import (
    PredictionSetup,
    fit_prefix,
    hard_window,
    hard_window_from_errors,
    run_scenario,
    soft_window,
    soft_window_from_errors,
)
from viewfit.regress import LmConfig
from viewfit.series import SeriesRecord
from viewfit.synth import SplitMix64, SynthSpec, generate, subseed


def oracle_windows(rel_times, errors, bound, horizon):
    """O(n^2) reference: recompute every running mean by direct summation.

    soft: the last horizon whose inclusive mean is within the bound;
    hard: up to the first crossing.  Both collapse to the horizon when
    the mean stays within the bound through the last admissible point.
    """
    m = len(errors)
    means = []
    for p in range(1, m + 1):
        total = 0.0
        for e in errors[:p]:
            total += e
        means.append(total / p)

    if means[-1] <= bound:
        soft = (float(horizon), True)
    else:
        soft = (0.0, False)
        for p in range(m, 0, -1):
            if means[p - 1] <= bound:
                soft = (float(rel_times[p - 1]), False)
                break

    crossing = None
    for p in range(1, m + 1):
        if means[p - 1] > bound:
            crossing = p
            break
    if crossing is None:
        hard = (float(horizon), True)
    elif crossing == 1:
        hard = (0.0, False)
    else:
        hard = (float(rel_times[crossing - 2]), False)
    return soft, hard


class TestWindowCore:
    def test_matches_oracle_on_random_profiles(self):
        rng = np.random.default_rng(64)
        for trial in range(200):
            m = int(rng.integers(1, 40))
            errors = rng.uniform(0, 0.12, size=m)
            rel_times = np.cumsum(rng.uniform(0.5, 2.0, size=m))
            horizon = float(rel_times[-1] + rng.uniform(0, 3.0))
            bound = 0.05
            soft = soft_window_from_errors(rel_times, errors, bound, horizon)
            hard = hard_window_from_errors(rel_times, errors, bound, horizon)
            soft_o, hard_o = oracle_windows(rel_times, errors, bound, horizon)
            assert soft == soft_o, (trial, errors)
            assert hard == hard_o, (trial, errors)
            assert hard[0] <= soft[0]  # hard never exceeds soft

    def test_transient_profile_covers_ten_points(self):
        # 10 points at 0.04 then 0.5 forever: mean exceeds the bound at
        # point 11 and never recovers, so both windows stop at point 10.
        errors = np.array([0.04] * 10 + [0.5] * 20)
        rel_times = np.arange(1, 31, dtype=float)
        soft, _ = soft_window_from_errors(rel_times, errors, 0.05, 30.0)
        hard, _ = hard_window_from_errors(rel_times, errors, 0.05, 30.0)
        assert soft == 10.0
        assert hard == 10.0

    def test_readmission_after_excursion(self):
        # A one-point spike lifts the mean over the bound; later small
        # errors pull it back under, and the soft window re-admits them
        # while the hard window stays at the first crossing.
        errors = np.array([0.01, 0.2, 0.01, 0.01, 0.01, 0.01])
        rel_times = np.arange(1, 7, dtype=float)
        soft, soft_bounded = soft_window_from_errors(rel_times, errors, 0.05, 10.0)
        hard, _ = hard_window_from_errors(rel_times, errors, 0.05, 10.0)
        assert hard == 1.0
        assert soft == 10.0 and soft_bounded  # final mean 0.0417 <= bound

    def test_boundary_is_inclusive(self):
        # constant error ratio exactly at the bound stays admitted
        errors = np.full(8, 0.05)
        rel_times = np.arange(1, 9, dtype=float)
        soft, bounded = soft_window_from_errors(rel_times, errors, 0.05, 8.0)
        assert soft == 8.0 and bounded

    def test_immediate_violation_gives_zero(self):
        errors = np.array([0.2, 0.01])
        rel_times = np.array([1.0, 2.0])
        soft, _ = soft_window_from_errors(rel_times, errors, 0.05, 5.0)
        hard, _ = hard_window_from_errors(rel_times, errors, 0.05, 5.0)
        assert hard == 0.0
        assert soft == 0.0  # mean never recovers below 0.05

    def test_never_violates_hits_horizon(self):
        errors = np.full(5, 0.01)
        rel_times = np.arange(1, 6, dtype=float)
        soft, soft_bounded = soft_window_from_errors(rel_times, errors, 0.05, 12.5)
        hard, hard_bounded = hard_window_from_errors(rel_times, errors, 0.05, 12.5)
        assert soft == 12.5 and soft_bounded
        assert hard == 12.5 and hard_bounded

    def test_monotone_in_bound(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            m = int(rng.integers(2, 25))
            errors = rng.uniform(0, 0.15, size=m)
            rel_times = np.cumsum(rng.uniform(0.5, 2.0, size=m))
            horizon = float(rel_times[-1])
            prev_soft, prev_hard = -1.0, -1.0
            for bound in (0.02, 0.05, 0.08, 0.2):
                soft, _ = soft_window_from_errors(rel_times, errors, bound, horizon)
                hard, _ = hard_window_from_errors(rel_times, errors, bound, horizon)
                assert soft >= prev_soft and hard >= prev_hard
                prev_soft, prev_hard = soft, hard

    def test_empty_future_raises(self):
        with pytest.raises(EmptyFutureError):
            soft_window_from_errors(np.array([]), np.array([]), 0.05, 1.0)
        with pytest.raises(EmptyFutureError):
            hard_window_from_errors(np.array([]), np.array([]), 0.05, 1.0)


class TestPrefixWindows:
    def test_perfect_model_spans_remaining_life(self):
        record = model_record(ModelKind.GOMPERTZ, ParamSet(s0=0.05, m=0.9, lam=6.0),
                              n=100, t_scale=100.0)
        prefix = fit_prefix(record, split_index=49, config=LmConfig())
        t_f = record.observations[49][0]
        t_n = record.observations[-1][0]
        soft, soft_bounded = soft_window(record, prefix)
        hard, hard_bounded = hard_window(record, prefix)
        assert soft == pytest.approx(t_n - t_f)
        assert hard == pytest.approx(t_n - t_f)
        assert soft_bounded and hard_bounded


def noiseless_corpus(n_records=8, n=120, t_scale=200.0):
    kinds = [ModelKind.GOMPERTZ, ModelKind.MODGOMPERTZ, ModelKind.NEGEXP,
             ModelKind.MODNEGEXP]
    records = []
    for i in range(n_records):
        kind = kinds[i % len(kinds)]
        rng = SplitMix64(subseed(5150, i))
        params = ParamSet(s0=rng.uniform(0.02, 0.1), m=rng.uniform(0.75, 0.95),
                          lam=rng.uniform(4.0, 10.0),
                          k=rng.uniform(0.05, 0.2) if kind.value.startswith("mod") else 0.0)
        records.append(model_record(kind, params, n=n, record_id=f"r{i:03d}",
                                    t_scale=t_scale))
    return records


class TestRunScenario:
    def test_noiseless_halflife_perfect_prediction(self):
        records = noiseless_corpus()
        setup = PredictionSetup.from_name("halflife")
        outcome = run_scenario(records, setup, LmConfig())
        assert not outcome.skipped
        for result in outcome.results:
            assert result.soft_norm == pytest.approx(1.0)
            assert result.hard_norm == pytest.approx(1.0)
            assert 0.0 <= result.soft_norm <= 1.0
        for key, stats in outcome.aggregate.items():
            assert stats["soft_mean"] == pytest.approx(1.0)
            assert stats["soft_var"] == pytest.approx(0.0, abs=1e-20)

    def test_eligibility_filter_for_fixed50(self):
        old = noiseless_corpus(n_records=4, t_scale=200.0)
        young = noiseless_corpus(n_records=4, t_scale=30.0)
        for i, record in enumerate(young):
            record.id = f"young{i}"
        outcome = run_scenario(old + young, PredictionSetup.from_name("fixed50"),
                               LmConfig())
        skipped_ids = {d.record_id for d in outcome.skipped}
        assert skipped_ids == {f"young{i}" for i in range(4)}
        assert all(d.code == "INELIGIBLE_AGE" for d in outcome.skipped)
        assert len(outcome.results) == 4

    def test_window_scenario_caps_at_horizon_multiple(self):
        # daily sampling so a 7-day window holds enough prefix points
        records = noiseless_corpus(n_records=4, n=120, t_scale=120.0)
        setup = PredictionSetup.from_name("window7")
        outcome = run_scenario(records, setup, LmConfig())
        for result in outcome.results:
            assert result.horizon_days == pytest.approx(21.0)
            assert 0.0 <= result.soft_norm <= 3.0
            assert result.hard_norm <= result.soft_norm + 1e-12

    def test_aggregate_table_shape(self):
        records = noiseless_corpus(n_records=8, n=120, t_scale=120.0)
        outcome = run_scenario(records, PredictionSetup.from_name("window7"),
                               LmConfig())
        required = {"count", "distribution_pct", "soft_mean", "soft_var",
                    "soft_bounded_pct", "hard_mean", "hard_var", "hard_bounded_pct"}
        assert "all" in outcome.aggregate
        for stats in outcome.aggregate.values():
            assert required <= set(stats)
        assert outcome.aggregate["all"]["distribution_pct"] == pytest.approx(100.0)

    def test_determinism(self):
        records = noiseless_corpus(n_records=6)
        setup = PredictionSetup.from_name("halflife")
        a = run_scenario(records, setup, LmConfig(seed=3))
        b = run_scenario(records, setup, LmConfig(seed=3))
        assert a.aggregate == b.aggregate
        assert [r.to_dict() for r in a.results] == [r.to_dict() for r in b.results]

    def test_no_eligible_records(self):
        young = noiseless_corpus(n_records=3, t_scale=10.0)
        with pytest.raises(NoEligibleRecordsError):
            run_scenario(young, PredictionSetup.from_name("fixed50"), LmConfig())

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ValueError):
            PredictionSetup.from_name("weekly")
