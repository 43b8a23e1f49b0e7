import pytest

from pmmviterbi.canonical import noinf_model, two_state_model
from pmmviterbi.dp import COLEX, viterbi_path
from pmmviterbi.experiments import (RECIPES, checkpoints, first_state_series, run_experiment,
                                    to_csv, walk)
from pmmviterbi.simulate import simulate


@pytest.mark.parametrize("model", [noinf_model(), two_state_model()])
def test_first_state_series_matches_offline(model):
    obs = simulate(model, 60, 12).obs_list()
    series = first_state_series(model, obs)
    assert list(series) == [viterbi_path(model, obs[:n], exact=True).path[0]
                            for n in range(1, 61)]
    colex = first_state_series(model, obs, tie=COLEX)
    assert list(colex) == [viterbi_path(model, obs[:n], tie=COLEX, exact=True).path[0]
                           for n in range(1, 61)]


def test_walk_counts_from_second_symbol():
    assert list(walk([2, 1, 1, 2])) == [0, 1, 2, 1]


def test_checkpoints():
    pts = checkpoints(5000, grid=10)
    assert pts[0] == 500 and pts[-1] == 5000
    assert {1024, 2048, 4096} <= set(pts)


def test_no_stabilize_follows_majority_rule():
    header, rows = run_experiment("no-stabilize", 3, 20_000)
    assert header == ("n", "first_state", "flips_so_far", "walk")
    for n, first, flips, s in rows:
        assert first == (1 if s >= 0 else 2)
    assert [r[2] for r in rows] == sorted(r[2] for r in rows)


def test_no_nodes_recipe():
    _, rows = run_experiment("no-nodes", 2, 1500)
    assert [r[0] for r in rows] == list(range(11))
    assert all(r[1] == 0 and r[2] == 0 for r in rows)


def test_tiebreak_recipe():
    _, rows = run_experiment("tiebreak-pathology", 0)
    finite = {(a, b): f for a, b, _, f in rows}
    assert finite == {(1, 1): 0, (1, 2): 1, (2, 1): 1, (2, 2): 0}


@pytest.mark.parametrize("name", ["barrier-growth", "glm-growth"])
def test_growth_recipes_commit(name):
    _, rows = run_experiment(name, 1, 3000)
    committed = [r[1] for r in rows]
    assert committed == sorted(committed) and committed[-1] > 1000


@pytest.mark.parametrize("name", sorted(RECIPES))
def test_recipes_are_reproducible(name):
    steps = None if name == "tiebreak-pathology" else 1200
    a = to_csv(*run_experiment(name, 4, steps))
    b = to_csv(*run_experiment(name, 4, steps))
    assert a == b


def test_unknown_recipe():
    with pytest.raises(KeyError):
        run_experiment("bogus", 1)
