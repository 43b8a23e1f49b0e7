import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import colex_key, random_generic, random_obs
from pmmviterbi.canonical import noinf_model, nonodes_model, tiebreak_model, two_state_model
from pmmviterbi.dp import (COLEX, LEX, GuardError, TieRule, all_path_weights, brute_force_oracle,
                           check_guard, constrained_path, delta_forward, enumerate_paths,
                           maxplus_product, path_score, segment_max, viterbi_path)
from pmmviterbi.model import path_weight_exact


def test_lex_path_matches_oracle_on_random_models():
    rng = np.random.default_rng(11)
    for _ in range(60):
        model = random_generic(rng)
        obs = random_obs(rng, model, int(rng.integers(1, 7)))
        ref = brute_force_oracle(model, obs, exact=True)
        got = viterbi_path(model, obs, exact=True)
        assert got.ok == ref.ok
        if ref.ok:
            assert got.score == ref.score
            assert got.path == ref.path


def test_colex_picks_colex_smallest_maximiser():
    rng = np.random.default_rng(5)
    for _ in range(60):
        model = random_generic(rng, zero_prob=0.2, top=2)
        obs = random_obs(rng, model, int(rng.integers(1, 6)))
        w = all_path_weights(model, obs, exact=True)
        best = w.max()
        if best == 0:
            continue
        paths = [p for p in enumerate_paths(model.n_states, len(obs))
                 if path_weight_exact(model, obs, p) == best]
        got = viterbi_path(model, obs, tie=COLEX, exact=True)
        assert got.path == min(paths, key=colex_key)


def test_float_loglik_agrees_with_exact():
    rng = np.random.default_rng(3)
    for _ in range(40):
        model = random_generic(rng)
        obs = random_obs(rng, model, 7)
        ex = viterbi_path(model, obs, exact=True)
        fl = viterbi_path(model, obs)
        if not ex.ok:
            assert not fl.ok
            continue
        assert abs(ex.loglik - fl.loglik) <= 1e-9


def test_unnormalised_run_gives_same_path():
    model = two_state_model()
    obs = [1, 2, 2, 1, 1, 1, 2, 1, 2, 2]
    a = viterbi_path(model, obs, normalize=False)
    b = viterbi_path(model, obs)
    assert a.path == b.path and abs(a.loglik - b.loglik) < 1e-12


def test_delta_table_raw_values():
    model = tiebreak_model()
    obs = [1, 1, 2, 1, 1]
    table = delta_forward(model, obs, exact=True)
    w = all_path_weights(model, obs[:3], exact=True)
    direct = w.reshape(-1, model.n_states).max(axis=0)
    assert list(table.raw(3)) == list(direct)
    fl = delta_forward(model, obs)
    logs = np.array([math.log(v) if v else -math.inf for v in direct])
    assert np.allclose(fl.raw(3), logs)


def test_zero_likelihood_diagnostic():
    model = nonodes_model()
    # identity transitions and a two-symbol emission support cannot be zero; pin both ends apart
    res = constrained_path(model, [1, 1, 1], start_state=1, end_state=2)
    assert not res.ok
    assert res.loglik == -math.inf
    assert "zero-likelihood" in res.diagnostic


def test_constrained_path_matches_pinned_oracle():
    rng = np.random.default_rng(8)
    for _ in range(40):
        model = random_generic(rng)
        obs = random_obs(rng, model, int(rng.integers(1, 6)))
        s = int(rng.integers(1, model.n_states + 1))
        e = int(rng.integers(1, model.n_states + 1))
        for init in (True, False):
            ref = brute_force_oracle(model, obs, s, e, include_initial=init, exact=True)
            got = constrained_path(model, obs, s, e, include_initial=init, exact=True)
            assert got.ok == ref.ok
            if ref.ok:
                assert got.path == ref.path and got.score == ref.score


def test_pinned_rule_flags_suboptimal_pins():
    model = tiebreak_model()
    obs = [1, 1, 2, 1, 1, 1, 1]
    bad = viterbi_path(model, obs, tie=TieRule.pinned({2: 1, 4: 1}), exact=True)
    assert bad.diagnostic and bad.diagnostic.startswith("pins-suboptimal")
    good = viterbi_path(model, obs, tie=TieRule.pinned({2: 1, 4: 2}), exact=True)
    assert good.ok and good.path[1] == 1 and good.path[3] == 2


def test_tie_rule_parse():
    assert TieRule.parse("lex") == LEX
    assert TieRule.parse("Co-Lexicographic") == COLEX
    with pytest.raises(ValueError):
        TieRule.parse("random")


def test_segment_of_length_one_is_identity():
    model = noinf_model()
    seg = segment_max(model, [2], exact=True)
    n = model.n_states
    assert [[seg.matrix[i, j] for j in range(n)] for i in range(n)] == \
        [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def test_segment_entries_are_pinned_maxima():
    model = tiebreak_model()
    obs = [1, 1, 2, 1]
    seg = segment_max(model, obs, exact=True)
    for i in range(1, 5):
        for j in range(1, 5):
            ref = brute_force_oracle(model, obs, i, j, include_initial=False, exact=True)
            assert seg.entry(i, j) == (ref.score if ref.ok else 0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 7), data=st.data())
def test_segment_split_is_maxplus_product(seed, n, data):
    rng = np.random.default_rng(seed)
    model = random_generic(rng)
    obs = random_obs(rng, model, n)
    split = data.draw(st.integers(1, n))
    whole = segment_max(model, obs, exact=True)
    left = segment_max(model, obs[:split], exact=True)
    right = segment_max(model, obs[split - 1:], exact=True, start=split)
    glued = maxplus_product(left, right)
    assert (glued.matrix == whole.matrix).all()
    assert glued.start == 1 and glued.end == n


def test_maxplus_product_rejects_disjoint_segments():
    model = noinf_model()
    a = segment_max(model, [1, 2], start=1)
    b = segment_max(model, [1, 2], start=5)
    with pytest.raises(ValueError):
        maxplus_product(a, b)


def test_oracle_guard():
    with pytest.raises(GuardError):
        check_guard(10, 8)
    model = noinf_model()
    with pytest.raises(GuardError):
        brute_force_oracle(model, [1] * 12)


def test_path_score_modes_agree():
    model = two_state_model()
    obs, path = [1, 2, 1, 1], (1, 2, 2, 1)
    ex = path_score(model, obs, path, exact=True)
    assert abs(math.log(ex) - path_score(model, obs, path)) < 1e-12


def test_empty_observations_rejected():
    with pytest.raises(ValueError):
        viterbi_path(noinf_model(), [])
