"""Benchmark harness: report round trips, likelihood agreement between the
dense and hierarchical single-channel algorithms, and argument validation."""

import numpy as np
import pytest

from gpintent.bench import (
    ALGO_BASIC,
    ALGO_EGP,
    ALGO_HOLRD,
    BenchReport,
    bench_horizon,
    bench_window,
    median_cycle_ms,
)


@pytest.fixture(scope="module")
def one_record(corpus_by_pair):
    return [corpus_by_pair[(3, 4)]]


def test_report_csv_round_trip(one_record):
    rep = bench_window(one_record, windows_s=(0.5, 1.0),
                       algos=(ALGO_HOLRD,), reps=1)
    text = rep.to_csv()
    back = BenchReport.from_csv(text)
    assert back.kind == rep.kind
    assert len(back.cells) == len(rep.cells) == 2
    for c1, c2 in zip(rep.cells, back.cells):
        assert (c1.key, c1.algo) == (c2.key, c2.algo)
        # cells are written at 9 significant digits
        assert c1.log_likelihood == pytest.approx(c2.log_likelihood, rel=1e-8)
        assert c1.time_ms == pytest.approx(c2.time_ms, rel=1e-8)


def test_window_likelihoods_deterministic(one_record):
    r1 = bench_window(one_record, windows_s=(1.0,),
                      algos=(ALGO_HOLRD, ALGO_EGP), reps=1)
    r2 = bench_window(one_record, windows_s=(1.0,),
                      algos=(ALGO_HOLRD, ALGO_EGP), reps=1)
    for algo in (ALGO_HOLRD, ALGO_EGP):
        assert (r1.cell(1.0, algo).log_likelihood
                == r2.cell(1.0, algo).log_likelihood)


def test_basic_and_holrd_share_likelihood(one_record):
    # same single-channel model, different factorization: LL must agree
    rep = bench_window(one_record, windows_s=(1.0,),
                       algos=(ALGO_BASIC, ALGO_HOLRD), reps=1)
    lb = rep.cell(1.0, ALGO_BASIC).log_likelihood
    lh = rep.cell(1.0, ALGO_HOLRD).log_likelihood
    assert lb == pytest.approx(lh, rel=1e-4)


def test_window_times_positive(one_record):
    rep = bench_window(one_record, windows_s=(0.5,), algos=(ALGO_HOLRD,), reps=1)
    cell = rep.cell(0.5, ALGO_HOLRD)
    assert cell.time_ms > 0.0
    assert cell.reps >= 1


def test_bench_window_rejects_unknown_algo(one_record):
    with pytest.raises(ValueError):
        bench_window(one_record, algos=("newton",))


def test_bench_horizon_shape_and_ranges(one_record):
    rep = bench_horizon(one_record, horizons_pct=(10.0, 20.0), stride=8)
    assert rep.kind == "horizon"
    for pct in (10.0, 20.0):
        for algo in (ALGO_HOLRD, ALGO_EGP):
            cell = rep.cell(pct, algo)
            assert np.isfinite(cell.mape_pct) and cell.mape_pct >= 0.0
            assert np.isfinite(cell.rmse_m) and cell.rmse_m >= 0.0
            assert cell.reps > 0  # windows actually scored


def test_bench_horizon_rejects_out_of_range(one_record):
    with pytest.raises(ValueError):
        bench_horizon(one_record, horizons_pct=(0.0,))
    with pytest.raises(ValueError):
        bench_horizon(one_record, horizons_pct=(55.0,))


def test_median_cycle_smoke(one_record):
    ms = median_cycle_ms(one_record, ALGO_HOLRD, reps=1)
    assert 0.0 < ms < 1000.0
