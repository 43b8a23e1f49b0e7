import io
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from pmmviterbi import canonical
from pmmviterbi import io as pio
from pmmviterbi.arith import EXACT
from pmmviterbi.dp import viterbi_path
from pmmviterbi.model import (ConstraintError, CovarianceError, GaussianLinearSwitching, Hmm,
                              ModelError, RowSumError, SchemaError, TwoStatePmmParams,
                              build_two_state_pmm, pair_model, path_log_likelihood,
                              path_weight_exact)


@pytest.mark.parametrize("name", sorted(canonical.BUILDERS))
def test_shipped_canonical_files_match_builders(name):
    shipped = json.loads(pio.canonical_path(name).read_text())
    assert shipped == json.loads(canonical.dumps(canonical.canonical_document(name)))


@pytest.mark.parametrize("name", sorted(pio.CANONICAL))
def test_canonical_models_load_and_round_trip(name):
    model = pio.load_canonical(name)
    again = pio.load_model(pio.model_to_dict(model))
    obs = [1, 2, 1] if model.is_discrete else [np.array([0.3]), np.array([1.1]), np.array([-0.2])]
    for t in range(1, len(obs)):
        assert np.allclose(model.kernel(obs[t - 1], obs[t]), again.kernel(obs[t - 1], obs[t]))


def test_resolve_model_accepts_underscores_and_paths(tmp_path):
    assert pio.resolve_model("two_state_pmm").n_states == 2
    p = tmp_path / "m.json"
    p.write_text(pio.canonical_path("noinf").read_text())
    assert pio.resolve_model(str(p)).n_states == 6
    with pytest.raises(FileNotFoundError):
        pio.resolve_model(str(tmp_path / "missing.json"))


def test_two_state_kernel_values():
    model = canonical.two_state_model()
    K = model.kernel(1, 1, EXACT)
    assert K[0, 0] == Fraction(2, 5) and K[0, 1] == Fraction(1, 10)
    assert K[1, 0] == Fraction(3, 20)


def test_two_state_constraints():
    TwoStatePmmParams.of("0.5", "0.5", "0.8", "0.3", "0.6", "0.4").validate()
    with pytest.raises(ConstraintError) as err:
        build_two_state_pmm(TwoStatePmmParams.of("0.5", "0.5", "0.8", "1.2", "0.6", "0.4"))
    assert err.value.parameter == "lambda2"
    with pytest.raises(ConstraintError):
        TwoStatePmmParams.of("0.9", "0.5", "0.8", "0.3", "0.6", "0.4").validate()


def test_row_sum_error_names_the_row():
    doc = json.loads(pio.canonical_path("two-state-pmm").read_text())
    doc["kernel"][1][0] = "0.5"
    with pytest.raises(RowSumError) as err:
        pio.load_model(doc)
    assert "(1, 2)" in str(err.value)


def test_schema_errors():
    with pytest.raises(SchemaError):
        pio.load_model("{not json")
    with pytest.raises(SchemaError):
        pio.load_model({"type": "hmm"})
    with pytest.raises(SchemaError):
        pio.load_model("[1, 2]")


def test_covariance_must_be_positive_definite():
    with pytest.raises(CovarianceError):
        GaussianLinearSwitching([[0.5, 0.5], [0.5, 0.5]], [[[0.5]], [[0.5]]],
                                [[0.0], [1.0]], [[[1.0]], [[-1.0]]])


def test_hmm_kernel_factorises():
    hmm = canonical.noinf_hmm()
    K = hmm.kernel(1, 2, EXACT)
    P = hmm.transitions
    E = hmm.emissions
    for i in range(hmm.n_states):
        for j in range(hmm.n_states):
            assert K[i, j] == P[i][j] * E[j][1]


def test_gaussian_hmm_is_linear_switching_with_zero_f():
    model = canonical.glm_scalar_model()
    hmm = Hmm(model.transitions, [Fraction(1, 2)] * 2, gaussian=(model.means, model.covariances))
    lin = hmm.as_linear_switching()
    assert np.allclose(lin.F, 0)
    x0, x1 = np.array([0.2]), np.array([0.9])
    assert np.allclose(hmm.kernel(x0, x1), lin.kernel(x0, x1))


def test_path_likelihood_exact_and_float_agree():
    model = canonical.tiebreak_model()
    obs = [1, 1, 2, 1]
    path = viterbi_path(model, obs, exact=True).path
    w = path_weight_exact(model, obs, path)
    assert w > 0
    assert abs(math.log(w) - path_log_likelihood(model, obs, path)) < 1e-12


def test_pair_model_states_are_pairs():
    model = canonical.two_state_model()
    paired = pair_model(model)
    assert paired.state_labels is not None
    assert all(len(s) == 2 for s in paired.state_labels)


def test_check_state_bounds():
    model = canonical.noinf_model()
    assert model.check_state(1) == 0
    with pytest.raises(ModelError):
        model.check_state(0)
    with pytest.raises(ModelError):
        model.check_obs(9)


def test_trajectory_csv_round_trip():
    model = canonical.glm_scalar_model()
    obs = [np.array([0.25]), np.array([-1.5])]
    buf = io.StringIO()
    pio.write_trajectory(buf, model, obs, [1, 2])
    buf.seek(0)
    back, hidden = pio.read_trajectory(buf, model)
    assert hidden == [1, 2]
    assert all(np.array_equal(a, b) for a, b in zip(obs, back))


def test_to_jsonable_conventions():
    out = pio.to_jsonable({"a": Fraction(1, 4), "b": -math.inf, "c": {3, 1}, "d": np.int64(2)})
    assert out == {"a": 0.25, "b": "-inf", "c": [1, 3], "d": 2}
