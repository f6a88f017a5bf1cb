import math
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from gravred import dpcore as dp
from gravred.constants import HBAR
from gravred.errors import (InvalidInputError, ScheduleTimeoutError,
                            StepTooLargeError)


def equal_coupling_matrix(d, scale=1.0):
    e = np.full((d, d), scale * HBAR)
    np.fill_diagonal(e, 0.0)
    return e


# state 1 (index 1) is the star center: E_12 = E_32 = hbar, E_13 = 0
REDUCER = HBAR * np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])


# ---------------------------------------------------------------------------
# oracle: absorbing-chain hitting probabilities for a constant matrix
# ---------------------------------------------------------------------------

def absorbing_chain_oracle(w0, e_matrix):
    """Exact absorption probabilities of the embedded jump chain."""
    e = np.asarray(e_matrix, float)
    d = len(w0)

    def jumps(w):
        out = []
        for k in range(d):
            for l in range(d):
                if k == l or w[k] <= 0.0 or w[l] <= 0.0:
                    continue
                if e[k, l] > 0.0:
                    lam = e[k, l] / HBAR * w[l]
                elif e[k, l] < 0.0:
                    lam = -e[k, l] / HBAR * w[k]
                else:
                    continue
                w2 = list(w)
                w2[l] += w2[k]
                w2[k] = 0.0
                out.append((tuple(w2), lam))
        return out

    start = tuple(w0)
    configs = {start: 0}
    order = [start]
    trans = []
    i = 0
    while i < len(order):
        w = order[i]
        if sum(1 for x in w if x > 0) > 1:
            for w2, lam in jumps(w):
                if w2 not in configs:
                    configs[w2] = len(order)
                    order.append(w2)
                trans.append((i, configs[w2], lam))
        i += 1
    n = len(order)
    p = np.zeros((n, n))
    for i, j, lam in trans:
        p[i, j] += lam
    tot = p.sum(axis=1)
    transient = tot > 0.0
    p[transient] /= tot[transient, None]
    absorbing = ~transient
    q = p[np.ix_(transient, transient)]
    r = p[np.ix_(transient, absorbing)]
    npass = np.linalg.solve(np.eye(q.shape[0]) - q, r)
    probs = np.zeros(d)
    trans_idx = np.where(transient)[0]
    abs_idx = np.where(absorbing)[0]
    if transient[0]:
        row = npass[list(trans_idx).index(0)]
        for col, j in enumerate(abs_idx):
            winner = int(np.argmax(np.asarray(order[j]) > 0))
            probs[winner] += row[col]
    else:
        probs[int(np.argmax(np.asarray(order[0]) > 0))] = 1.0
    return probs


# ---------------------------------------------------------------------------
# step probabilities and single-step sampling
# ---------------------------------------------------------------------------

def test_zero_coupling_stays():
    s = dp.Superposition((0.5, 0.5))
    p, stay = dp.step_probabilities(s, np.zeros((2, 2)), 1e-3)
    assert stay == 1.0 and np.all(p == 0.0)


def test_two_state_direct_substitution():
    s = dp.Superposition((0.5, 0.5))
    e = HBAR * np.array([[0.0, 1.0], [1.0, 0.0]])
    p, stay = dp.step_probabilities(s, e, 1e-3)
    assert p[0, 1] == pytest.approx(5e-4, rel=1e-12)
    assert p[1, 0] == pytest.approx(5e-4, rel=1e-12)
    assert stay == pytest.approx(0.999, rel=1e-12)


def test_three_equal_states_six_equal_jumps():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    p, stay = dp.step_probabilities(s, equal_coupling_matrix(3), 1e-3)
    off = p[~np.eye(3, dtype=bool)]
    assert np.allclose(off, off[0]) and off[0] == pytest.approx(1e-3 / 3, rel=1e-12)


def test_step_guard_raises():
    s = dp.Superposition((0.5, 0.5))
    e = HBAR * np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(StepTooLargeError):
        dp.step_probabilities(s, e, 1.0)


def test_negative_coupling_inverts_direction():
    s = dp.Superposition((0.9, 0.1))
    e = -HBAR * np.array([[0.0, 1.0], [1.0, 0.0]])
    p, _ = dp.step_probabilities(s, e, 1e-3)
    # inverted mode: the loser's own amplitude drives its decay
    assert p[0, 1] == pytest.approx(0.9e-3, rel=1e-12)
    assert p[1, 0] == pytest.approx(0.1e-3, rel=1e-12)


def test_sample_step_none_and_deterministic():
    s = dp.Superposition((0.5, 0.5))
    assert dp.sample_step(s, np.zeros((2, 2)), 1e-3, np.random.default_rng(0)) is None
    e = equal_coupling_matrix(2, 10.0)
    seq1 = [dp.sample_step(s, e, 1e-3, np.random.default_rng(7)) for _ in range(50)]
    seq2 = [dp.sample_step(s, e, 1e-3, np.random.default_rng(7)) for _ in range(50)]
    assert seq1 == seq2


def test_sample_step_winner_frequencies_binomial():
    s = dp.Superposition((0.5, 0.5))
    e = equal_coupling_matrix(2, 30.0)
    rand = np.random.default_rng(123)
    wins = {0: 0, 1: 0}
    n_events = 0
    for _ in range(20000):
        ev = dp.sample_step(s, e, 1e-3, rand)
        if ev is not None:
            wins[ev.winner] += 1
            n_events += 1
    p_hat = wins[0] / n_events
    sigma = math.sqrt(0.25 / n_events)
    assert abs(p_hat - 0.5) < 3 * sigma


# ---------------------------------------------------------------------------
# reductions and splits
# ---------------------------------------------------------------------------

def test_apply_reduction_examples():
    s = dp.Superposition((0.2, 0.8))
    out = dp.apply_reduction(s, dp.ReductionEvent(loser=0, winner=1))
    assert out.weights == (0.0, 1.0)

    s3 = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    out3 = dp.apply_reduction(s3, dp.ReductionEvent(loser=1, winner=0))
    assert out3.weights[1] == 0.0
    assert out3.weights[0] == pytest.approx(2 / 3, abs=1e-15)
    assert out3.weights[2] == pytest.approx(1 / 3, abs=1e-15)
    assert sum(out3.weights) == pytest.approx(1.0, abs=1e-15)


def test_apply_reduction_until_one_state():
    s = dp.Superposition((0.25, 0.25, 0.5))
    s = dp.apply_reduction(s, dp.ReductionEvent(loser=0, winner=2))
    s = dp.apply_reduction(s, dp.ReductionEvent(loser=1, winner=2))
    assert s.weights == (0.0, 0.0, 1.0)


def test_apply_reduction_empty_loser_warns_noop():
    s = dp.Superposition((0.0, 1.0))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        out = dp.apply_reduction(s, dp.ReductionEvent(loser=0, winner=1))
    assert out is s and len(rec) == 1


def test_split_state_examples():
    s = dp.Superposition((1.0,))
    out = dp.split_state(s, 0, (0.5, 0.5))
    assert out.weights == (0.5, 0.5)

    # photon through two mirrors with equal beam intensities
    s = dp.Superposition((1.0,))
    s = dp.split_state(s, 0, (1 / 3, 2 / 3))
    s = dp.split_state(s, 1, (0.5, 0.5))
    assert np.allclose(s.weights, (1 / 3, 1 / 3, 1 / 3))
    assert sum(s.weights) == pytest.approx(1.0, abs=1e-15)

    with pytest.raises(InvalidInputError):
        dp.split_state(dp.Superposition((1.0,)), 0, (0.6, 0.5))


def test_split_then_reduce_bookkeeping():
    s = dp.Superposition((0.4, 0.6))
    s = dp.split_state(s, 1, (0.25, 0.75))
    assert sum(s.weights) == pytest.approx(1.0, abs=1e-14)
    s = dp.apply_reduction(s, dp.ReductionEvent(loser=2, winner=0))
    assert sum(s.weights) == pytest.approx(1.0, abs=1e-14)


# ---------------------------------------------------------------------------
# exact trees
# ---------------------------------------------------------------------------

def test_fig2_tree_exact_thirds():
    chans = tuple(dp.Channel((k,), (l,), F(1))
                  for k in range(3) for l in range(3) if k != l)
    sch = dp.CouplingsSchedule.from_channels([(math.inf, chans)], 3)
    tree = dp.enumerate_tree([F(1, 3)] * 3, sch)
    probs = dp.final_probabilities(tree)
    assert probs == [F(1, 3), F(1, 3), F(1, 3)]


def test_fig2_tree_float_and_branch():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    tree = dp.enumerate_tree(s, dp.CouplingsSchedule.constant(equal_coupling_matrix(3)))
    probs = dp.final_probabilities(tree)
    assert np.max(np.abs(probs - 1 / 3)) < 1e-12
    assert tree.has_transition((1 / 3, 1 / 3, 1 / 3), (2 / 3, 0.0, 1 / 3))


def test_fig13_bundled_channels_tree():
    # location classes: {1} vs {2,3} at detector 1, {2} vs {1,3} at 2, ...
    groups = [((0,), (1, 2)), ((1,), (0, 2)), ((2,), (0, 1))]
    chans = []
    for a, b in groups:
        chans.append(dp.Channel(a, b, F(1)))
        chans.append(dp.Channel(b, a, F(1)))
    sch = dp.CouplingsSchedule.from_channels([(math.inf, tuple(chans))], 3)
    tree = dp.enumerate_tree([F(1, 3)] * 3, sch)
    probs = dp.final_probabilities(tree)
    assert probs == [F(1, 3)] * 3
    assert tree.has_transition((F(1, 3),) * 3, (F(1, 2), F(0), F(1, 2)))


def test_reducer_first_winner_exact_quarters():
    chans = tuple(dp.Channel((k,), (l,), F(1))
                  for k, l in ((0, 1), (1, 0), (2, 1), (1, 2)))
    sch = dp.CouplingsSchedule.from_channels([(math.inf, chans)], 3)
    tree = dp.enumerate_tree([F(1, 3)] * 3, sch, policy="first-winner")
    probs = dp.final_probabilities(tree)
    assert probs == [F(1, 4), F(1, 2), F(1, 4)]


def test_reducer_float_policy_none_is_born():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    tree = dp.enumerate_tree(s, dp.CouplingsSchedule.constant(REDUCER))
    assert np.max(np.abs(dp.final_probabilities(tree) - 1 / 3)) < 1e-12


def test_final_probabilities_born_two_state():
    s = dp.Superposition((0.2, 0.8))
    tree = dp.enumerate_tree(s, dp.CouplingsSchedule.constant(equal_coupling_matrix(2)))
    assert np.allclose(dp.final_probabilities(tree), (0.2, 0.8), atol=1e-15)


def test_tree_matches_absorbing_chain_oracle():
    rand = np.random.default_rng(11)
    for _ in range(8):
        d = 4
        w = rand.random(d)
        w /= w.sum()
        e = rand.random((d, d)) * HBAR
        e = e + e.T
        np.fill_diagonal(e, 0.0)
        s = dp.Superposition(tuple(w))
        tree = dp.enumerate_tree(s, dp.CouplingsSchedule.constant(e))
        got = dp.final_probabilities(tree)
        want = absorbing_chain_oracle(w, e)
        assert np.max(np.abs(got - want)) < 1e-10


def test_pairwise_decay_paths_have_d_minus_1_events():
    rand = np.random.default_rng(3)
    for d in (2, 3, 4):
        w = rand.random(d)
        w /= w.sum()
        e = rand.random((d, d)) + 0.2
        e = HBAR * (e + e.T)
        np.fill_diagonal(e, 0.0)
        tree = dp.enumerate_tree(dp.Superposition(tuple(w)),
                                 dp.CouplingsSchedule.constant(e))
        for leaf in tree.leaves():
            assert leaf.depth == d - 1


def test_born_recovery_randomized_instances():
    rand = np.random.default_rng(2024)
    for trial in range(200):
        d = int(rand.integers(2, 6))
        w = rand.random(d) + 0.05
        w /= w.sum()
        e = rand.random((d, d)) + 0.1
        e = HBAR * (e + e.T)
        np.fill_diagonal(e, 0.0)
        if trial % 4 == 0:
            sch = dp.CouplingsSchedule.piecewise(
                [(0.3, e * 0.5), (0.7, e * 1.5), (math.inf, e)])
        else:
            sch = dp.CouplingsSchedule.constant(e)
        tree = dp.enumerate_tree(dp.Superposition(tuple(w)), sch)
        probs = dp.final_probabilities(tree)
        assert np.max(np.abs(probs - w)) < 1e-10


def test_split_invariance_no_signaling():
    rand = np.random.default_rng(77)
    for _ in range(25):
        d = int(rand.integers(2, 5))
        w = rand.random(d) + 0.05
        w /= w.sum()
        e = rand.random((d, d)) + 0.1
        e = HBAR * (e + e.T)
        np.fill_diagonal(e, 0.0)
        base = dp.final_probabilities(
            dp.enumerate_tree(dp.Superposition(tuple(w)),
                              dp.CouplingsSchedule.constant(e)))
        j = int(rand.integers(0, d))
        f = float(rand.uniform(0.2, 0.8))
        s_split = dp.split_state(dp.Superposition(tuple(w)), j, (f, 1.0 - f))
        e2 = np.zeros((d + 1, d + 1))
        idx = list(range(j)) + [j, j] + list(range(j + 1, d))
        for a in range(d + 1):
            for b in range(d + 1):
                e2[a, b] = e[idx[a], idx[b]]
        e2[j, j + 1] = e2[j + 1, j] = 0.0  # children are uncoupled
        np.fill_diagonal(e2, 0.0)
        split = dp.final_probabilities(
            dp.enumerate_tree(s_split, dp.CouplingsSchedule.constant(e2)))
        merged = np.concatenate([split[:j], [split[j] + split[j + 1]], split[j + 2:]])
        assert np.max(np.abs(merged - base)) < 1e-10


def test_stall_without_final_measurement_times_out():
    s = dp.Superposition((0.5, 0.5))
    sch = dp.CouplingsSchedule.constant(np.zeros((2, 2)))
    with pytest.raises(ScheduleTimeoutError) as err:
        dp.enumerate_tree(s, sch, final_measurement=False)
    assert err.value.partial_tree is not None
    # with the declared final measurement the stall resolves to Born
    tree = dp.enumerate_tree(s, sch, final_measurement=True)
    assert np.allclose(dp.final_probabilities(tree), (0.5, 0.5))


def test_schedule_accessors():
    e = equal_coupling_matrix(2)
    sch = dp.CouplingsSchedule.piecewise([(1.0, e * 0.0), (math.inf, e)])
    assert sch.breakpoints == (0.0, 1.0)
    assert np.all(sch.matrix_at(0.5) == 0.0)
    assert np.all(sch.matrix_at(1.5) == e)
    with pytest.raises(InvalidInputError):
        dp.CouplingsSchedule.piecewise([(math.inf, e), (1.0, e)])
    with pytest.raises(InvalidInputError):
        dp.CouplingsSchedule.constant(np.array([[0.0, 1.0], [2.0, 0.0]]))


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def test_single_run_reproduces_a_tree_leaf():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    sch = dp.CouplingsSchedule.constant(equal_coupling_matrix(3))
    res = dp.run_monte_carlo(s, sch, 1, seed=5, keep_logs=True)
    tree = dp.enumerate_tree(s, sch)
    leaf_winners = {leaf.alive[0] for leaf in tree.leaves()}
    assert int(res.winners[0]) in leaf_winners
    assert len(res.logs[0].events) == 2


def test_fig2_monte_carlo_within_three_sigma():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    sch = dp.CouplingsSchedule.constant(equal_coupling_matrix(3))
    res = dp.run_monte_carlo(s, sch, 100000, seed=99)
    sigma = math.sqrt((1 / 3) * (2 / 3) / res.n_runs)
    assert np.max(np.abs(res.frequencies - 1 / 3)) < 3 * sigma


def test_seed_repeat_identical():
    s = dp.Superposition((0.3, 0.7))
    sch = dp.CouplingsSchedule.constant(equal_coupling_matrix(2))
    r1 = dp.run_monte_carlo(s, sch, 2000, seed=17, keep_logs=True)
    r2 = dp.run_monte_carlo(s, sch, 2000, seed=17, keep_logs=True)
    assert np.array_equal(r1.winners, r2.winners)
    assert r1.logs[3].events == r2.logs[3].events


def test_tree_vs_monte_carlo_four_sigma():
    rand = np.random.default_rng(31)
    d = 4
    w = rand.random(d) + 0.1
    w /= w.sum()
    e = rand.random((d, d)) + 0.2
    e = HBAR * (e + e.T)
    np.fill_diagonal(e, 0.0)
    s = dp.Superposition(tuple(w))
    sch = dp.CouplingsSchedule.constant(e)
    probs = dp.final_probabilities(dp.enumerate_tree(s, sch))
    res = dp.run_monte_carlo(s, sch, 100000, seed=4)
    for i in range(d):
        sigma = math.sqrt(probs[i] * (1 - probs[i]) / res.n_runs)
        assert abs(res.frequencies[i] - probs[i]) < 4 * sigma


def test_monte_carlo_multi_epoch_matches_tree():
    e = equal_coupling_matrix(3)
    sch = dp.CouplingsSchedule.piecewise(
        [(1e-26, e * 0.0), (2e-26, 0.5 * e), (math.inf, e)])
    s = dp.Superposition((0.5, 0.3, 0.2))
    probs = dp.final_probabilities(dp.enumerate_tree(s, sch))
    res = dp.run_monte_carlo(s, sch, 50000, seed=8)
    for i in range(3):
        sigma = math.sqrt(probs[i] * (1 - probs[i]) / res.n_runs)
        assert abs(res.frequencies[i] - probs[i]) < 4 * sigma


def test_monte_carlo_first_winner_reducer():
    s = dp.Superposition((1 / 3, 1 / 3, 1 / 3))
    res = dp.run_monte_carlo(s, dp.CouplingsSchedule.constant(REDUCER),
                             100000, seed=21, policy="first-winner")
    want = np.array([0.25, 0.5, 0.25])
    for i in range(3):
        sigma = math.sqrt(want[i] * (1 - want[i]) / res.n_runs)
        assert abs(res.frequencies[i] - want[i]) < 4 * sigma


def test_backends_agree_decision_for_decision():
    s = dp.Superposition((0.4, 0.35, 0.25))
    e = equal_coupling_matrix(3, 2.0)
    sch = dp.CouplingsSchedule.piecewise([(1e-26, 0.3 * e), (math.inf, e)])
    try:
        from gravred.kernels import get_impl
        get_impl("numba")
    except Exception:
        pytest.skip("numba backend unavailable")
    r_nb = dp.run_monte_carlo(s, sch, 3000, seed=12, impl="numba", keep_logs=True)
    r_np = dp.run_monte_carlo(s, sch, 3000, seed=12, impl="numpy", keep_logs=True)
    assert np.array_equal(r_nb.winners, r_np.winners)
    for a, b in zip(r_nb.logs[::137], r_np.logs[::137]):
        assert len(a.events) == len(b.events)
        for ea, eb in zip(a.events, b.events):
            assert (ea.loser, ea.winner, ea.kind) == (eb.loser, eb.winner, eb.kind)
            assert ea.time == pytest.approx(eb.time, rel=1e-12)
