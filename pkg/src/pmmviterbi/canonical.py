"""Constructors for the reference models used by the experiments and tests.

The JSON files under ``data/models`` are generated from these functions
(``python -m pmmviterbi.canonical``) and a test keeps the two in sync.
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from .model import (
    TWO_STATE_ORDER,
    GaussianLinearSwitching,
    GenericDiscrete,
    Hmm,
    TwoStatePmmParams,
    build_two_state_pmm,
    generic_from_joint,
)


def noinf_epsilon(p, K: int) -> Fraction:
    """eps = 1/(2K), checked against eps < 1-p-eps/2 < 1/2 < p-eps/2 < 1."""
    p = Fraction(p)
    eps = Fraction(1, 2 * K)
    if not (eps < 1 - p - eps / 2 < Fraction(1, 2) < p - eps / 2 < 1):
        raise ValueError(f"K={K} too small for p={p}")
    return eps


def noinf_model(p="0.75", K: int = 4) -> GenericDiscrete:
    """Model whose Viterbi paths never stabilise: states 1 and 2 are absorbing
    until Y jumps into the uniform block {3, ..., K+2}, after which X is a fair
    coin sequence."""
    p = Fraction(p)
    eps = noinf_epsilon(p, K)
    n_y = K + 2
    order = [(x, y) for y in range(1, n_y + 1) for x in (1, 2)]
    m = np.empty((len(order), len(order)), dtype=object)
    for r, (_, yp) in enumerate(order):
        for c, (x, y) in enumerate(order):
            if yp in (1, 2):
                if y == yp:
                    favoured = (x == yp)
                    m[r, c] = p - eps / 2 if favoured else 1 - p - eps / 2
                elif y >= 3:
                    m[r, c] = eps * eps
                else:
                    m[r, c] = Fraction(0)
            else:
                m[r, c] = eps if y >= 3 else Fraction(0)
    init = [Fraction(1, 4) if y in (1, 2) else Fraction(0) for _, y in order]
    return generic_from_joint(order, m, init, name=f"noinf p={p} K={K}",
                              n_obs=2, n_states=n_y)


def noinf_hmm(p="0.75", K: int = 4) -> Hmm:
    """The same kernel written as an HMM. Its initial law is pi_y f_y(x) with
    pi uniform on {1, 2}, so it differs from :func:`noinf_model` at time 1."""
    p = Fraction(p)
    eps = noinf_epsilon(p, K)
    n_y = K + 2
    P = np.empty((n_y, n_y), dtype=object)
    P.fill(Fraction(0))
    for i in (0, 1):
        P[i, i] = 1 - eps
        for k in range(2, n_y):
            P[i, k] = eps / K
    for k in range(2, n_y):
        for l in range(2, n_y):
            P[k, l] = Fraction(1, K)
    E = np.empty((n_y, 2), dtype=object)
    hi, lo = (p - eps / 2) / (1 - eps), (1 - p - eps / 2) / (1 - eps)
    E[0] = [hi, lo]
    E[1] = [lo, hi]
    for k in range(2, n_y):
        E[k] = [Fraction(1, 2), Fraction(1, 2)]
    pi = [Fraction(1, 2), Fraction(1, 2)] + [Fraction(0)] * K
    return Hmm(P, pi, emissions=E, name=f"noinf as HMM p={p} K={K}")


def nonodes_model(p="0.75") -> Hmm:
    """Identity transitions, emissions (p, 1-p) / (1-p, p), uniform start."""
    p = Fraction(p)
    return Hmm([[1, 0], [0, 1]], [Fraction(1, 2)] * 2,
               emissions=[[p, 1 - p], [1 - p, p]], name=f"nonodes p={p}")


def tiebreak_model(p="0.5") -> Hmm:
    """Four-state HMM where separately valid node tie-breaks can clash.

    Completion of the under-specified entries: eps = 1/3, p33 = p34 = p43 =
    p44 = 1/3, and a third symbol carrying the residual mass 1 - p from every
    state.
    """
    p = Fraction(p)
    e = Fraction(1, 3)
    z = Fraction(0)
    P = [[e, e, e, z],
         [e, e, z, e],
         [z, e, e, e],
         [e, z, e, e]]
    E = [[p, z, 1 - p],
         [p, z, 1 - p],
         [z, p, 1 - p],
         [z, p, 1 - p]]
    return Hmm(P, [Fraction(1, 4)] * 4, emissions=E, name=f"tiebreak p={p}")


TWO_STATE_DEFAULT = dict(p="0.5", q="0.5", lambda1="0.8", lambda2="0.3", mu1="0.6", mu2="0.4")


def two_state_params(**overrides) -> TwoStatePmmParams:
    kw = dict(TWO_STATE_DEFAULT)
    kw.update(overrides)
    return TwoStatePmmParams.of(**kw)


def two_state_model(**overrides) -> GenericDiscrete:
    return build_two_state_pmm(two_state_params(**overrides), name="two-state PMM")


def glm_scalar_model() -> GaussianLinearSwitching:
    """Scalar switching AR(1): P=[[.6,.4],[.5,.5]], F=(.3,.4), means (0,2), unit variances."""
    return GaussianLinearSwitching(
        [["0.6", "0.4"], ["0.5", "0.5"]],
        F=[[[0.3]], [[0.4]]],
        means=[[0.0], [2.0]],
        covariances=[[[1.0]], [[1.0]]],
        initial_hidden=["0.5", "0.5"],
        name="glm scalar",
    )


BUILDERS = {
    "noinf": noinf_model,
    "noinf-hmm": noinf_hmm,
    "nonodes": nonodes_model,
    "tiebreak": tiebreak_model,
    "two-state-pmm": two_state_model,
    "glm-scalar": glm_scalar_model,
}

DESCRIPTIONS = {
    "noinf": "p=0.75, K=4, eps=1/8; X_1 and Y_1 independent, uniform on {1,2}.",
    "noinf-hmm": "HMM form of the noinf kernel (initial law pi_y f_y(x), pi uniform on {1,2}).",
    "nonodes": "Identity hidden transitions; emissions (p,1-p) and (1-p,p) with p=0.75.",
    "tiebreak": "Four-state HMM, eps=1/3, p=1/2, third symbol carries mass 1-p.",
    "two-state-pmm": "p=q=0.5, lambda1=0.8, lambda2=0.3, mu1=0.6, mu2=0.4; uniform initial law.",
    "glm-scalar": "P=[[0.6,0.4],[0.5,0.5]], F=(0.3,0.4), means (0,2), variances (1,1).",
}


def canonical_document(name: str) -> dict:
    from .io import model_to_dict, _probs, _prob_str

    model = BUILDERS[name]()
    doc = model_to_dict(model)
    if name == "two-state-pmm":
        from .model import two_state_matrix
        init = model.initial_table()
        doc["joint_states"] = [list(z) for z in TWO_STATE_ORDER]
        doc["kernel"] = _probs(two_state_matrix(two_state_params()))
        doc["initial"] = [_prob_str(init[x - 1, y - 1]) for x, y in TWO_STATE_ORDER]
    doc["description"] = DESCRIPTIONS[name]
    head = {k: doc.pop(k) for k in ("type", "name", "description") if k in doc}
    return {**head, **doc}


def dumps(doc: dict) -> str:
    """JSON text with each innermost list kept on one line."""
    def enc(v, indent):
        pad = " " * indent
        if isinstance(v, dict):
            items = [f'{pad}  {json.dumps(k)}: {enc(x, indent + 2).lstrip()}' for k, x in v.items()]
            return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(v, list) and any(isinstance(x, (list, dict)) for x in v):
            return pad + "[\n" + ",\n".join(enc(x, indent + 2) for x in v) + "\n" + pad + "]"
        return pad + json.dumps(v)
    return enc(doc, 0) + "\n"


def write_canonical_files(directory=None) -> None:
    from pathlib import Path
    from .io import CANONICAL

    directory = Path(directory or Path(__file__).parent / "data" / "models")
    for name, fname in CANONICAL.items():
        (directory / fname).write_text(dumps(canonical_document(name)))


if __name__ == "__main__":
    write_canonical_files()
