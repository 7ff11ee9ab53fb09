import math

import numpy as np
import pytest

from gazedwell.policy import PolicyParams, policy_family_ii
from gazedwell.simulate import (GridSpec, PolicyEvalResult, SynthConfig, evaluate_policy_tabled,
                                grid_search, infer_posterior, pareto_frontier, precompute_tables,
                                results_to_csv, simulate_policy, synth_trials)
from gazedwell.segmentation import GazeSample
from gazedwell.traceio import TrialRecord
from gazedwell.units import TS_MS

from conftest import make_layout
from oracles import pareto_oracle, window_rule_fires


@pytest.fixture(scope="module")
def small_corpus(fixture_bundle):
    trials = synth_trials(SynthConfig(n_trials=60, seed=21), fixture_bundle.intent)
    posteriors = [infer_posterior(t, fixture_bundle.seg, fixture_bundle.intent) for t in trials]
    return trials, posteriors


UNIFORM_300 = PolicyParams(300, 300, 300, 1.0)


# -- synth determinism and structure ------------------------------------------------

def test_synth_deterministic_given_seed(fixture_bundle):
    a = synth_trials(SynthConfig(n_trials=8, seed=5), fixture_bundle.intent)
    b = synth_trials(SynthConfig(n_trials=8, seed=5), fixture_bundle.intent)
    assert len(a) == len(b)
    for ta, tb in zip(a, b):
        assert ta.pre_select == tb.pre_select
        assert ta.post_select == tb.post_select
        assert ta.true_target == tb.true_target
        assert [l.bbox for l in ta.layout.links] == [l.bbox for l in tb.layout.links]


def test_synth_seed_changes_corpus(fixture_bundle):
    a = synth_trials(SynthConfig(n_trials=3, seed=5), fixture_bundle.intent)
    b = synth_trials(SynthConfig(n_trials=3, seed=6), fixture_bundle.intent)
    assert any(ta.pre_select != tb.pre_select for ta, tb in zip(a, b))


def test_noiseless_corpus_has_zero_error_for_every_policy(fixture_bundle):
    cfg = SynthConfig(n_trials=25, seed=9, fixation_jitter_px=0.0,
                      post_jitter_px=0.0, distractor_rate=0.0)
    trials = synth_trials(cfg, fixture_bundle.intent)
    for pol in (PolicyParams(100, 100, 100, 1.0), UNIFORM_300,
                PolicyParams(500, 500, 500, 1.0), PolicyParams(500, TS_MS, 50, 0.3)):
        res = simulate_policy(trials, pol, fixture_bundle.seg, fixture_bundle.intent)
        assert res.error_rate == 0.0
        assert res.n_timeouts == 0


def test_trial_that_dwells_on_target_selects_it(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    res = simulate_policy(trials, PolicyParams(500, 500, 500, 1.0),
                          fixture_bundle.seg, fixture_bundle.intent, posteriors=posteriors)
    assert res.n_trials == len(trials)


# -- uniform-policy invariance --------------------------------------------------------

def test_uniform_policy_ignores_posterior(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    rng = np.random.default_rng(0)
    scrambled = [rng.dirichlet(np.ones(len(p))) for p in posteriors]
    a = simulate_policy(trials, UNIFORM_300, fixture_bundle.seg, fixture_bundle.intent,
                        posteriors=posteriors)
    b = simulate_policy(trials, UNIFORM_300, fixture_bundle.seg, fixture_bundle.intent,
                        posteriors=scrambled)
    assert a == b


def test_shuffling_trials_changes_no_metric(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    rng = np.random.default_rng(1)
    order = rng.permutation(len(trials))
    shuffled = [trials[i] for i in order]
    sh_post = [posteriors[i] for i in order]
    pol = PolicyParams(500, TS_MS, 50, 0.3)
    a = simulate_policy(trials, pol, fixture_bundle.seg, fixture_bundle.intent,
                        posteriors=posteriors)
    b = simulate_policy(shuffled, pol, fixture_bundle.seg, fixture_bundle.intent,
                        posteriors=sh_post)
    assert a.error_rate == b.error_rate
    assert a.mean_response_time_ms == pytest.approx(b.mean_response_time_ms, abs=1e-9)
    assert a.n_timeouts == b.n_timeouts


# -- engine path vs table path ---------------------------------------------------------

def test_tabled_evaluation_equals_engine_replay(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    tables = precompute_tables(trials, fixture_bundle.seg, fixture_bundle.intent,
                               posteriors=posteriors)
    rng = np.random.default_rng(2)
    for _ in range(25):
        ts = np.sort(rng.integers(1, 31, 3)) * TS_MS
        pol = PolicyParams(float(ts[2]), float(ts[0]), float(ts[1]),
                           float(round(rng.uniform(0, 1), 2)))
        a = simulate_policy(trials, pol, fixture_bundle.seg, fixture_bundle.intent,
                            posteriors=posteriors)
        b = evaluate_policy_tabled(pol, tables)
        assert a.error_rate == b.error_rate
        assert a.n_timeouts == b.n_timeouts
        assert (a.mean_response_time_ms == b.mean_response_time_ms
                or (math.isnan(a.mean_response_time_ms) and math.isnan(b.mean_response_time_ms)))


def test_firing_table_matches_window_oracle(fixture_bundle):
    # One crafted trial with a known assignment pattern.
    layout = make_layout([(100, 100, 200, 20), (100, 200, 200, 20)])
    xs = [150, 150, 500, 150, 150, 500, 150, 150, 150, 500, 150, 150]
    pre = [GazeSample(t, 150.0, 110.0) for t in range(5)]
    post = [GazeSample(40 + i, float(x), 110.0 if x == 150 else 800.0)
            for i, x in enumerate(xs)]
    trial = TrialRecord(layout=layout, pre_select=pre, post_select=post,
                        true_target=1, meta={})
    tables = precompute_tables([trial], fixture_bundle.seg, fixture_bundle.intent,
                               posteriors=[np.array([0.5, 0.5])])
    assigned = [1 if x == 150 else None for x in xs]
    for n in range(1, 12):
        want = window_rule_fires(assigned, 1, n)
        got = tables.firing[0, 0, n - 1]
        assert (want if want is not None else 10 ** 6) == got


# -- timeouts ----------------------------------------------------------------------------

def test_timeout_counts_as_error_without_rt(fixture_bundle):
    layout = make_layout([(100, 100, 200, 20), (100, 200, 200, 20)])
    pre = [GazeSample(t, 150.0, 110.0) for t in range(40)]
    post = [GazeSample(80 + t, 900.0, 900.0) for t in range(30)]  # never near a link
    trial = TrialRecord(layout=layout, pre_select=pre, post_select=post,
                        true_target=1, meta={})
    res = simulate_policy([trial], UNIFORM_300, fixture_bundle.seg, fixture_bundle.intent)
    assert res.n_timeouts == 1
    assert res.error_rate == 1.0
    assert math.isnan(res.mean_response_time_ms)


# -- grid -------------------------------------------------------------------------------

def test_grid_size_matches_combinatorial_count():
    spec = GridSpec()
    policies = spec.policies()
    count = 0
    for a in range(1, 31):          # t_max index
        for b in range(1, a + 1):   # t_min
            for c in range(b, a + 1):  # t_break
                count += 1
    assert len(policies) == count * 11
    # and the uniform slice is present
    uniform = [p for p in policies if p.t_min == p.t_max]
    assert len(uniform) == 30 * 11
    assert all(p.t_min == p.t_break == p.t_max for p in uniform)


def test_two_point_degenerate_grid(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    spec = GridSpec(n_time_steps=1, time_step_ms=300.0, p_breaks=(0.0, 1.0))
    results = grid_search(trials, fixture_bundle.seg, fixture_bundle.intent, spec=spec)
    assert len(results) == 2
    assert all(r.policy.t_max == 300.0 for r in results)


def test_grid_rows_in_grid_order_and_parallel_identical(fixture_bundle, small_corpus):
    trials, _ = small_corpus
    spec = GridSpec.coarse()
    serial = grid_search(trials, fixture_bundle.seg, fixture_bundle.intent, spec=spec, jobs=1)
    parallel = grid_search(trials, fixture_bundle.seg, fixture_bundle.intent, spec=spec, jobs=2)
    assert results_to_csv(serial) == results_to_csv(parallel)
    assert [r.policy for r in serial] == [p for p in spec.policies()]


def test_grid_csv_deterministic(fixture_bundle, small_corpus):
    trials, _ = small_corpus
    spec = GridSpec(n_time_steps=3, time_step_ms=100.0, p_breaks=(0.0, 0.5, 1.0))
    a = results_to_csv(grid_search(trials, fixture_bundle.seg, fixture_bundle.intent, spec=spec))
    b = results_to_csv(grid_search(trials, fixture_bundle.seg, fixture_bundle.intent, spec=spec))
    assert a == b
    assert a.splitlines()[0] == ("tmax_ms,tmin_ms,tbreak_ms,pbreak,error_rate,err_ci,"
                                 "mean_rt_ms,rt_ci,n,timeouts")


def test_uniform_slice_error_staircase_on_noiseless_corpus(fixture_bundle):
    cfg = SynthConfig(n_trials=20, seed=13, fixation_jitter_px=0.0,
                      post_jitter_px=0.0, distractor_rate=0.0)
    trials = synth_trials(cfg, fixture_bundle.intent)
    posteriors = [infer_posterior(t, fixture_bundle.seg, fixture_bundle.intent) for t in trials]
    tables = precompute_tables(trials, fixture_bundle.seg, fixture_bundle.intent,
                               posteriors=posteriors)
    errs = []
    for k in range(1, 31):
        ms = k * TS_MS
        errs.append(evaluate_policy_tabled(PolicyParams(ms, ms, ms, 1.0), tables).error_rate)
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] == 0.0


# -- pareto -------------------------------------------------------------------------------

def _result(e, rt):
    return PolicyEvalResult(policy=UNIFORM_300, error_rate=e, error_ci=0.0,
                            mean_response_time_ms=rt, rt_ci=0.0, n_trials=10, n_timeouts=0)


def test_pareto_single_row_is_itself():
    rows = [_result(0.1, 200.0)]
    assert pareto_frontier(rows) == rows


def test_pareto_dominated_row_dropped():
    rows = [_result(0.1, 200.0), _result(0.2, 300.0)]
    assert pareto_frontier(rows) == [rows[0]]


def test_pareto_matches_quadratic_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        rows = [_result(float(rng.integers(0, 6)) / 10.0, float(rng.integers(1, 6)) * 100.0)
                for _ in range(100)]
        got = pareto_frontier(rows)
        want_idx = pareto_oracle([(r.error_rate, r.mean_response_time_ms) for r in rows])
        want = [rows[i] for i in want_idx]
        assert sorted((r.error_rate, r.mean_response_time_ms) for r in got) == \
               sorted((r.error_rate, r.mean_response_time_ms) for r in want)
        assert len(got) == len(want)


# -- directional behaviour (small-corpus smoke; the full 500-trial versions
#    live in the acceptance suite) ------------------------------------------------------

def test_uniform_policies_tradeoff_direction(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    results = [simulate_policy(trials, PolicyParams(ms, ms, ms, 1.0), fixture_bundle.seg,
                               fixture_bundle.intent, posteriors=posteriors)
               for ms in (100.0, 300.0, 500.0)]
    errs = [r.error_rate for r in results]
    rts = [r.mean_response_time_ms for r in results]
    assert errs[0] >= errs[1] >= errs[2]
    assert rts[0] < rts[1] < rts[2]


def test_family_ii_point_weakly_dominates_uniform_300(fixture_bundle, small_corpus):
    trials, posteriors = small_corpus
    base = simulate_policy(trials, UNIFORM_300, fixture_bundle.seg, fixture_bundle.intent,
                           posteriors=posteriors)
    dominated = False
    for t_min in (100.0, 150.0, 200.0, 250.0, 300.0):
        r = simulate_policy(trials, policy_family_ii(t_min), fixture_bundle.seg,
                            fixture_bundle.intent, posteriors=posteriors)
        if r.error_rate <= base.error_rate and r.mean_response_time_ms <= base.mean_response_time_ms:
            dominated = True
            break
    assert dominated


def test_simulate_empty_trials_rejected(fixture_bundle):
    with pytest.raises(ValueError):
        simulate_policy([], UNIFORM_300, fixture_bundle.seg, fixture_bundle.intent)
