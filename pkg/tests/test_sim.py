import json
import math

import numpy as np
import pytest

from jidas.binary_adder import build
from jidas.estimator import point_mass_distortions
from jidas.idf_code import build_idf_code
from jidas.sim import CSV_HEADER, Proportion, TrialPlan, distortion_trace, run_trials

from conftest import degenerate_spec, noiseless_spec


@pytest.fixture(scope="module")
def adder_code():
    return build_idf_code(build(), (0.2, 0.2), 196, 0.05, (2, 1), (16, 16), seed=7)


@pytest.fixture(scope="module")
def noiseless_code():
    return build_idf_code(noiseless_spec(), 1.0, 25, 0.5, 1024, 2, seed=3)


def test_same_seed_same_result(adder_code):
    plan = TrialPlan(3000, seed=11, batch_size=1000)
    a = run_trials(adder_code.spec, adder_code, plan)
    b = run_trials(adder_code.spec, adder_code, plan)
    assert a.to_json() == b.to_json()
    c = run_trials(adder_code.spec, adder_code, TrialPlan(3000, seed=12, batch_size=1000))
    assert c.to_json() != a.to_json()


def test_batches_are_keyed_by_index():
    sizes = [size for size, _ in TrialPlan(10_000, batch_size=4096).batches()]
    assert sizes == [4096, 4096, 1808]
    first = [rng.random() for _, rng in TrialPlan(10_000, seed=1).batches()]
    again = [rng.random() for _, rng in TrialPlan(9000, seed=1).batches()]
    assert first == again


def test_single_output_letter_identifies_nothing():
    code = build_idf_code(degenerate_spec(), 0.0, 16, 0.1, 1, 8, seed=0)
    stats = run_trials(code.spec, code, TrialPlan(2000, seed=0))
    assert stats.senders[0].type2.estimate == 1.0
    assert stats.senders[0].type1.estimate == 0.0


def test_noiseless_channel_errors(noiseless_code):
    stats = run_trials(noiseless_code.spec, noiseless_code, TrialPlan(100_000, seed=5))
    s = stats.senders[0]
    assert s.type1.count == 0
    assert s.type2.ci_low <= 1 / 1024 <= s.type2.ci_high
    assert s.cr_failure_rate == 0.0
    assert s.distortion <= 1.0


def test_distortion_within_budget(adder_code):
    stats = run_trials(adder_code.spec, adder_code, TrialPlan(20_000, seed=1))
    for s in stats.senders:
        assert s.distortion <= s.budget + 3 * s.distortion_se
        lo, hi = s.distortion_ci
        assert lo < s.distortion < hi


def test_interval_shrinks_with_quadrupled_trials(adder_code):
    small = run_trials(adder_code.spec, adder_code, TrialPlan(10_000, seed=2))
    large = run_trials(adder_code.spec, adder_code, TrialPlan(40_000, seed=2))
    for a, b in zip(small.senders, large.senders):
        assert b.type2.width / a.type2.width == pytest.approx(0.5, rel=0.2)
        assert b.distortion_se / a.distortion_se == pytest.approx(0.5, rel=0.2)


def test_wilson_interval():
    p = Proportion.wilson(10, 100)
    assert p.ci_low == pytest.approx(0.05522, abs=1e-4)
    assert p.ci_high == pytest.approx(0.17437, abs=1e-4)
    assert Proportion.wilson(0, 0).estimate is None


def test_trace_mean_equals_reported_distortion(adder_code):
    plan = TrialPlan(8000, seed=3)
    stats = run_trials(adder_code.spec, adder_code, plan)
    trace = distortion_trace(adder_code.spec, adder_code, plan)
    assert trace.shape == (adder_code.m, 2)
    for k, s in enumerate(stats.senders):
        assert trace[:, k].mean() == pytest.approx(s.distortion, abs=1e-12)
    # common-randomness phase: every use has mean d*(x*)
    expected = point_mass_distortions(adder_code.spec)[(slice(None),) + adder_code.cr_symbol]
    cr = trace[: adder_code.n].mean(axis=0)
    se = math.sqrt(0.2 * 0.8 / (8000 * adder_code.n))
    assert np.all(np.abs(cr - expected) <= 4 * se)


def test_single_state_gives_zero_trace():
    code = build_idf_code(degenerate_spec(), 0.0, 9, 0.1, 1, 2, seed=0)
    assert np.all(distortion_trace(code.spec, code, TrialPlan(100)) == 0.0)


def test_pairs_mode_tests_every_wrong_identity():
    code = build_idf_code(noiseless_spec(), 1.0, 25, 0.5, 4, 8, seed=3)
    stats = run_trials(code.spec, code, TrialPlan(500, seed=0, identities="pairs"))
    assert stats.senders[0].type2.total == 500 * 7
    assert stats.senders[0].type2.ci_low <= 0.25 <= stats.senders[0].type2.ci_high
    big = build_idf_code(noiseless_spec(), 1.0, 25, 0.5, 4, 33, seed=3)
    with pytest.raises(ValueError):
        run_trials(big.spec, big, TrialPlan(10, identities="pairs"))


def test_fixed_identities():
    code = build_idf_code(noiseless_spec(), 1.0, 25, 0.5, 4, 8, seed=3)
    stats = run_trials(code.spec, code, TrialPlan(300, identities="fixed", fixed=(5,)))
    assert stats.senders[0].type1.count == 0
    with pytest.raises(ValueError):
        TrialPlan(10, identities="fixed")


def test_exports(adder_code):
    stats = run_trials(adder_code.spec, adder_code, TrialPlan(500, seed=0))
    lines = stats.to_csv().splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 3
    data = json.loads(stats.to_json())
    assert data["m"] == 210 and len(data["senders"]) == 2


def test_type2_below_collision_bound(adder_code):
    stats = run_trials(adder_code.spec, adder_code, TrialPlan(40_000, seed=4))
    for k, s in enumerate(stats.senders):
        bound = min(1 / adder_code.num_colors[k] + adder_code.transmission.delta, 1.0)
        assert s.type2.estimate <= bound + 3 * math.sqrt(bound * (1 - bound) / s.type2.total)
