import numpy as np
import pytest

from mpstomo.certification import certify, check_error_bound, cumulative_bound, disentangler_deviation
from mpstomo.errors import IncompleteLog
from mpstomo.mps_core import dense_from_mps
from mpstomo.states import StateSpec, build, random_mps
from mpstomo.tomography import NoiseConfig, ProtocolConfig, StepRecord, TruncationLog, run_protocol


def log_of(probs):
    return TruncationLog(tuple(StepRecord(i + 1, p, 1 - p, 0.0) for i, p in enumerate(probs)), len(probs))


def test_cumulative_bound_values():
    assert cumulative_bound([1.0, 1.0]) == 0.0
    assert cumulative_bound([0.5, 0.5]) == pytest.approx(0.75)
    assert cumulative_bound([0.0, 1.0]) == 1.0
    assert cumulative_bound([1 - 1e-12] * 10) == pytest.approx(1e-11, rel=1e-6)


def test_bound_is_at_least_largest_single_truncation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.uniform(0.5, 1.0, 6)
        assert cumulative_bound(p) >= (1 - p).max() - 1e-15


def test_bound_monotone_in_each_truncation():
    base = [0.99, 0.98, 0.97]
    worse = [0.99, 0.90, 0.97]
    assert cumulative_bound(worse) > cumulative_bound(base)


def test_exact_mps_accepted():
    res = run_protocol(dense_from_mps(random_mps(8, 2, 2, seed=1)), ProtocolConfig(chi=2))
    cert = certify(res.log, 1e-6, res.config.noise)
    assert cert.accepted and cert.cumulative_bound <= 1e-9
    assert cert.to_dict()["noise"]["mode"] == "exact"


def test_ghz_under_product_hypothesis_rejected():
    res = run_protocol(build(StateSpec("ghz", n=4)), ProtocolConfig(chi=1, truncation_abort_threshold=1.0))
    cert = certify(res.log, 0.1)
    assert cert.verdict == "reject"
    assert cert.cumulative_bound == pytest.approx(0.5, abs=1e-12)


def test_haar_rejected():
    res = run_protocol(build(StateSpec("haar_random", n=8, seed=3)), ProtocolConfig(chi=2, truncation_abort_threshold=1.0))
    assert certify(res.log, 0.1).verdict == "reject"


def test_threshold_edge_accepts_equal():
    assert certify(log_of([0.5]), 0.5).accepted


def test_incomplete_log():
    partial = TruncationLog(log_of([1.0, 1.0, 1.0]).records[:2], 3)
    with pytest.raises(IncompleteLog):
        certify(partial, 0.1)
    with pytest.raises(IncompleteLog):
        certify(TruncationLog(log_of([1.0, 1.0]).records), 0.1)


def test_error_bound_zero_noise():
    report = check_error_bound(n=6, epsilon=0.0, trials=3, seed=0)
    assert report.distances.max() <= 1e-7


def test_error_bound_holds_and_scales():
    small = check_error_bound(n=6, epsilon=1e-4, trials=5, seed=11)
    large = check_error_bound(n=6, epsilon=2e-4, trials=5, seed=11)
    assert small.bound_holds and large.bound_holds
    assert large.median_distance >= small.median_distance
    assert small.step_deviation.shape == (5,)
    assert np.all(small.step_deviation <= 2 * 1e-4 * 10)


def test_disentangler_deviation_zero_for_identical_runs():
    psi = dense_from_mps(random_mps(6, 2, 2, seed=2))
    res = run_protocol(psi, ProtocolConfig(chi=2))
    np.testing.assert_allclose(disentangler_deviation(res, res), 0.0, atol=1e-10)
