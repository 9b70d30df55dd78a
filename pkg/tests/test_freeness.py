from types import SimpleNamespace

import numpy as np
import pytest

from torusent.errors import ConfigError, DegenerateFitError, ResourceCeilingError
from torusent.freeness import (CorrelationSample, correlation_value, exhaustive_low_order_check, f_variable_stats,
                               f_variable_table, fit_decay, fit_rate_vs_entropy, format_sequence,
                               independence_prediction, parse_sequence, sample_correlations)
from torusent.measurement import build_partition
from torusent.torus_maps import QuantizedMap, build_unitary


def test_sequence_text_format():
    seq = ((1, 2), (-2, 1), (3, 4))
    assert format_sequence(seq) == "1:2,-2:1,3:4"
    assert parse_sequence("1:2,-2:1,3:4") == seq
    with pytest.raises(ConfigError):
        parse_sequence("1:2,3")


def test_correlation_against_dense_product():
    N, K = 8, 2
    qmap, P = build_unitary("cat", N), build_partition(N, K)
    Q = [np.diag([1.0 if P.block(j).start <= i < P.block(j).stop else 0.0 for i in range(N)]) - np.eye(N) / K
         for j in (1, 2)]
    seq = [(1, 1), (-2, 2), (1, 2)]
    expected = np.trace(qmap.power(1) @ Q[0] @ qmap.power(-2) @ Q[1] @ qmap.power(1) @ Q[1]) / N
    sample = correlation_value(qmap, P, seq)
    assert abs(sample.value - expected) < 1e-12
    assert sample.n == 3


@pytest.mark.parametrize("r", [1, 3, 7, -1, -5])
def test_shift_first_order_vanishes(r):
    qmap, P = build_unitary("shift", 8), build_partition(8, 4)
    for k in range(1, 5):
        assert correlation_value(qmap, P, [(r, k)]).value == 0


def test_period_makes_single_step_trace():
    qmap, P = build_unitary("elliptic", 16), build_partition(16, 4)
    # U^4 = -1, so C reduces to -(1/N) Tr Q_k = 0
    for k in range(1, 5):
        assert abs(correlation_value(qmap, P, [(4, k)]).value) < 1e-12


@pytest.mark.parametrize("sequence", [[], [(0, 1)], [(1, 0)], [(1, 5)]])
def test_rejects_bad_sequences(sequence):
    with pytest.raises(ConfigError):
        correlation_value(build_unitary("cat", 8), build_partition(8, 4), sequence)


def test_global_phase_invariance():
    U = build_unitary("cat", 16).matrix
    qmap, phased = QuantizedMap("cat", U), QuantizedMap("cat", np.exp(0.7j) * U)
    P = build_partition(16, 4)
    seq = [(1, 2), (2, 3), (-1, 1), (2, 4)]
    assert abs(correlation_value(qmap, P, seq).abs_value - correlation_value(phased, P, seq).abs_value) < 1e-12


def test_conjugate_is_reversed_sequence():
    qmap, P = build_unitary("cat", 16), build_partition(16, 4)
    rs, ks = [1, -2, 2, 1], [2, 3, 1, 4]
    conj_seq = list(zip([-r for r in reversed(rs)], list(reversed(ks[:-1])) + [ks[-1]]))
    c = correlation_value(qmap, P, list(zip(rs, ks))).value
    assert abs(np.conj(c) - correlation_value(qmap, P, conj_seq).value) < 1e-12


@pytest.mark.parametrize("centering", ["printed", "traceless"])
def test_centered_projectors_sum_to_zero(centering):
    qmap, P = build_unitary("cat", 16), build_partition(16, "sizes:2,2,4,8")
    head = [(1, 2), (-1, 3)]
    total = sum(correlation_value(qmap, P, head + [(2, k)], centering).value for k in range(1, 5))
    assert abs(total) < 1e-12


def test_sampling_is_deterministic_and_thread_independent():
    P = build_partition(16, 4)
    a = sample_correlations(build_unitary("cat", 16), P, 5, 6, seed=11)
    b = sample_correlations(build_unitary("cat", 16), P, 5, 6, seed=11)
    c = sample_correlations(build_unitary("cat", 16), P, 5, 6, seed=11, n_jobs=2)
    assert [s.value for s in a] == [s.value for s in b] == [s.value for s in c]
    assert [s.sequence for s in a] == [s.sequence for s in c]
    d = sample_correlations(build_unitary("cat", 16), P, 5, 6, seed=12)
    assert [s.sequence for s in a] != [s.sequence for s in d]


def test_sampled_sequences_respect_ranges():
    samples = sample_correlations(build_unitary("cat", 8), build_partition(8, 2), 4, 10, r_max=3)
    assert len(samples) == 40
    assert sorted({s.n for s in samples}) == [1, 2, 3, 4]
    for s in samples:
        assert all(1 <= abs(r) <= 3 and 1 <= k <= 2 for r, k in s.sequence)


def test_trivial_partition_gives_zero_correlations():
    samples = sample_correlations(build_unitary("cat", 8), build_partition(8, 1), 3, 4)
    assert all(s.abs_value < 1e-12 for s in samples)


def test_sampling_rejects_bad_parameters():
    with pytest.raises(ConfigError):
        sample_correlations(build_unitary("cat", 8), build_partition(8, 2), 3, 4, r_max=0)


def test_exhaustive_check_identity_map():
    results = exhaustive_low_order_check(QuantizedMap("haar", np.eye(8)), build_partition(8, 4), max_n=1)
    assert len(results) == 1
    assert results[0].count == 8
    assert results[0].max_abs < 1e-15


def test_exhaustive_check_counts():
    results = exhaustive_low_order_check(build_unitary("haar", 8, seed=1), build_partition(8, 2), max_n=3)
    assert [r.count for r in results] == [4, 16, 64]
    assert all(len(r.argmax) == r.n for r in results)


def test_exhaustive_check_limits():
    with pytest.raises(ConfigError):
        exhaustive_low_order_check(build_unitary("cat", 8), build_partition(8, 2), max_n=4)
    with pytest.raises(ConfigError):
        exhaustive_low_order_check(build_unitary("cat", 8), build_partition(8, 2), r_set=(0,))
    with pytest.raises(ResourceCeilingError):
        exhaustive_low_order_check(build_unitary("cat", 10), build_partition(10, 10), r_set=range(1, 11))


def test_independence_prediction():
    P = build_partition(64, 4)
    assert abs(independence_prediction(P, 2) - 0.25) < 1e-12


def synthetic_samples(h, orders, scale=lambda n: 1.0):
    return [CorrelationSample(((1, 1),) * n, scale(n) * np.exp(-0.5 * n * h)) for n in orders]


def test_fit_recovers_unit_ansatz_constant():
    P = build_partition(64, 4)
    summary = fit_decay(synthetic_samples(P.h_meas, range(1, 13)), P)
    assert summary.breaking_time == pytest.approx(6.0)
    assert summary.window == (7, 8, 9, 10, 11, 12)
    assert abs(summary.A - 1) < 1e-10
    assert abs(summary.rate - np.log(4) / 2) < 1e-10
    assert set(summary.as_dict()["per_n"]) == {str(n) for n in range(1, 13)}


def test_fit_records_values_below_extrapolation():
    P = build_partition(64, 4)
    samples = synthetic_samples(P.h_meas, range(1, 13), scale=lambda n: 0.1 if n <= 6 else 1.0)
    summary = fit_decay(samples, P)
    assert summary.below_extrapolation_fraction == 1.0
    assert all(g == pytest.approx(np.log(0.1)) for g in summary.early_gaps.values())
    assert summary.early_mean_gaps == pytest.approx(summary.early_gaps)


def test_fit_needs_enough_orders():
    P = build_partition(64, 4)
    with pytest.raises(ConfigError):
        fit_decay(synthetic_samples(P.h_meas, range(1, 9)), P)


def test_fit_rejects_numerical_zeros():
    P = build_partition(64, 4)
    samples = [CorrelationSample(((1, 1),) * n, 0j) for n in range(1, 13)]
    with pytest.raises(DegenerateFitError):
        fit_decay(samples, P)


def test_fit_rejects_trivial_partition():
    with pytest.raises(ConfigError):
        fit_decay(synthetic_samples(0.0, range(1, 13)), build_partition(64, 1))


@pytest.mark.slow
def test_cat_early_orders_follow_the_long_time_line():
    # the median of ln|C[n]| does not drop below the backward extrapolation for 2 <= n <= 2 ln N / h(P)
    qmap, P = build_unitary("cat", 256), build_partition(256, 4)
    summary = fit_decay(sample_correlations(qmap, P, 20, 64, seed=0), P)
    assert summary.breaking_time == pytest.approx(8.0)
    assert summary.below_extrapolation_fraction < 0.8
    assert summary.early_gaps[1] < 0
    for n in range(2, 9):
        assert abs(summary.early_gaps[n]) < 0.5


def test_rate_vs_entropy():
    h = np.log([2, 4, 8])
    summaries = [SimpleNamespace(h_meas=x, rate=0.5 * x) for x in h]
    fit = fit_rate_vs_entropy(summaries)
    assert abs(fit.A - 1) < 1e-12
    assert fit.A_stderr < 1e-12
    assert abs(fit.slope - 0.5) < 1e-10
    with pytest.raises(ConfigError):
        fit_rate_vs_entropy(summaries[:1])


def test_f_variable_second_moments():
    qmap, P = build_unitary("cat", 16), build_partition(16, 4)
    stats = f_variable_stats(qmap, P, 3, 2, variant="Q")
    assert abs(stats.second_moment - 0.1875) < 1e-12
    assert abs(f_variable_stats(qmap, P, 3, 2, variant="P").second_moment - 0.25) < 1e-12


def test_f_variable_table_equal_blocks():
    table = f_variable_table(build_unitary("cat", 64), build_partition(64, 4), 4, variant="P")
    assert len(table.stats) == 8 * 4
    assert abs(table.rms - 0.5) < 1e-12
    assert abs(table.prediction - 0.5) < 1e-12
    assert set(table.summary()) == {"mean_abs", "rms", "prediction", "h_meas", "count"}


def test_f_variable_shift_has_zero_mean():
    qmap, P = build_unitary("shift", 16), build_partition(16, 4)
    for m in range(1, 16):
        assert f_variable_stats(qmap, P, m, 1, variant="P").mean_abs == 0


def test_f_variable_rejects_bad_input():
    qmap, P = build_unitary("cat", 16), build_partition(16, 4)
    with pytest.raises(ConfigError):
        f_variable_stats(qmap, P, 0, 1)
    with pytest.raises(ConfigError):
        f_variable_stats(qmap, P, 1, 1, variant="R")


@pytest.mark.parametrize("kind", ["cat", "shift", "haar"])
def test_f_variable_rms_does_not_depend_on_the_map(kind):
    table = f_variable_table(build_unitary(kind, 256), build_partition(256, 4), 8, variant="P")
    assert abs(table.rms - table.prediction) < 1e-12


def test_cat_f_variable_mean_is_far_below_prediction():
    table = f_variable_table(build_unitary("cat", 256), build_partition(256, 4), 8, variant="P")
    assert table.mean_abs < 0.1 * table.prediction
