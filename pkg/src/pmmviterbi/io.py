"""JSON model documents and CSV trajectories."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, TextIO

import jsonschema
import numpy as np

from .model import (
    DiscreteSwitching,
    GaussianLinearSwitching,
    GenericDiscrete,
    Hmm,
    PMM,
    SchemaError,
    generic_from_joint,
)

DATA = resources.files("pmmviterbi") / "data"

#: canonical model files shipped with the package
CANONICAL = {
    "noinf": "noinf.json",
    "noinf-hmm": "noinf_hmm.json",
    "nonodes": "nonodes.json",
    "tiebreak": "tiebreak.json",
    "two-state-pmm": "two_state_pmm.json",
    "glm-scalar": "glm_scalar.json",
}


@lru_cache(maxsize=1)
def model_schema() -> dict:
    return json.loads((DATA / "model.schema.json").read_text())


def _reals(a) -> np.ndarray:
    return np.array(a, dtype=object).astype(float) if not isinstance(a, np.ndarray) else a.astype(float)


def model_from_dict(doc: dict) -> PMM:
    try:
        jsonschema.validate(doc, model_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"schema violation at {where}: {exc.message}") from None
    kind = doc["type"]
    name = doc.get("name", "")
    if kind == "generic_discrete":
        n_x, n_y = doc["n_obs"], doc["n_states"]
        order = doc.get("joint_states") or [[x, y] for y in range(1, n_y + 1)
                                            for x in range(1, n_x + 1)]
        if any(not (1 <= x <= n_x and 1 <= y <= n_y) for x, y in order):
            raise SchemaError("joint_states label outside n_obs / n_states")
        return generic_from_joint(order, doc["kernel"], doc["initial"], name=name,
                                  n_obs=n_x, n_states=n_y)
    if kind == "hmm":
        if "emissions" in doc:
            return Hmm(doc["transitions"], doc["initial_hidden"], emissions=doc["emissions"],
                       name=name)
        g = doc["gaussian_emissions"]
        return Hmm(doc["transitions"], doc["initial_hidden"],
                   gaussian=(_reals(g["means"]), _reals(g["covariances"])), name=name)
    if kind == "discrete_switching":
        return DiscreteSwitching(doc["transitions"], doc["emissions"], doc["initial"], name=name)
    init = doc.get("initial_obs")
    n_y = len(doc["transitions"])
    return GaussianLinearSwitching(
        doc["transitions"], _reals(doc["F"]), _reals(doc["means"]), _reals(doc["covariances"]),
        initial_hidden=doc.get("initial_hidden"),
        initial_means=None if init is None else _reals(init["means"]).reshape(n_y, -1),
        initial_covariances=None if init is None else _reals(init["covariances"]),
        name=name,
    )


def load_model(document) -> PMM:
    """Parse a model from JSON text, a dict, or a path to a JSON file."""
    if isinstance(document, dict):
        return model_from_dict(document)
    if isinstance(document, Path):
        return model_from_dict(json.loads(document.read_text()))
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    return model_from_dict(doc)


def canonical_path(name: str):
    return DATA / "models" / CANONICAL[name]


def load_canonical(name: str) -> PMM:
    return model_from_dict(json.loads(canonical_path(name).read_text()))


def resolve_model(ref: str) -> PMM:
    """A file path, or the name of a canonical model (``noinf``, ...)."""
    key = ref.replace("_", "-")
    if key in CANONICAL:
        return load_canonical(key)
    path = Path(ref)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {ref}")
    return load_model(path)


def _prob_str(v: Fraction) -> str:
    v = Fraction(v)
    # finite decimal when the denominator allows it, else a rational string
    den = v.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    if den != 1:
        return f"{v.numerator}/{v.denominator}"
    digits = 0
    while (v * 10 ** digits).denominator != 1:
        digits += 1
    scaled = v.numerator * 10 ** digits // v.denominator
    s = str(scaled).rjust(digits + 1, "0")
    return f"{s[:-digits]}.{s[-digits:]}" if digits else s


def _probs(a) -> list:
    arr = np.asarray(a, dtype=object)
    if arr.ndim == 1:
        return [_prob_str(v) for v in arr]
    return [_probs(row) for row in arr]


def model_to_dict(model: PMM) -> dict:
    """Inverse of :func:`model_from_dict` for the four families."""
    doc: dict = {"name": model.name} if model.name else {}
    if isinstance(model, GenericDiscrete):
        order, m = model.joint_matrix()
        init = model.initial_table()
        doc.update(type="generic_discrete", n_obs=model.n_symbols, n_states=model.n_states,
                   joint_states=[list(p) for p in order], kernel=_probs(m),
                   initial=[_prob_str(init[x - 1, y - 1]) for x, y in order])
    elif isinstance(model, Hmm):
        doc.update(type="hmm", transitions=_probs(model.transitions),
                   initial_hidden=_probs(model.initial_hidden))
        if model.emissions is not None:
            doc["emissions"] = _probs(model.emissions)
        else:
            means, covs = model.gaussian
            doc["gaussian_emissions"] = {"means": means.tolist(), "covariances": covs.tolist()}
    elif isinstance(model, DiscreteSwitching):
        doc.update(type="discrete_switching", transitions=_probs(model.transitions),
                   emissions=_probs(model.emissions), initial=_probs(model.initial_table()))
    elif isinstance(model, GaussianLinearSwitching):
        doc.update(type="gaussian_linear_switching", transitions=_probs(model.transitions),
                   F=model.F.tolist(), means=model.means.tolist(),
                   covariances=model.covariances.tolist(),
                   initial_hidden=_probs(model.initial_hidden),
                   initial_obs={"means": model.initial_means.tolist(),
                                "covariances": model.initial_covariances.tolist()})
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return doc


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def trajectory_header(model: PMM, with_hidden: bool = True) -> list[str]:
    if model.is_discrete:
        cols = ["t", "x"]
    else:
        d = model.obs_space.size
        cols = ["t"] + [f"x_{k}" for k in range(1, d + 1)]
    return cols + (["y"] if with_hidden else [])


def write_trajectory(fh: TextIO, model: PMM, observations, hidden=None) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(trajectory_header(model, hidden is not None))
    for t, x in enumerate(observations, start=1):
        if model.is_discrete:
            row = [t, int(x)]
        else:
            row = [t] + [repr(float(v)) for v in np.atleast_1d(x)]
        if hidden is not None:
            row.append(int(hidden[t - 1]))
        w.writerow(row)


def parse_obs_row(row: dict, model: PMM):
    if model.is_discrete:
        if "x" not in row:
            raise ValueError("observation CSV needs an 'x' column")
        return int(row["x"])
    d = model.obs_space.size
    if d == 1 and "x" in row:
        return np.array([float(row["x"])])
    return np.array([float(row[f"x_{k}"]) for k in range(1, d + 1)])


def iter_observations(fh: TextIO, model: PMM) -> Iterable:
    """Yield observations from a CSV with header ``t,x[,y]`` or
    ``t,x_1..x_d[,y]``; extra columns are ignored."""
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        return
    for row in reader:
        yield parse_obs_row(row, model)


def read_observations(source, model: PMM) -> list:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return list(iter_observations(fh, model))
    return list(iter_observations(source, model))


def read_trajectory(source, model: PMM) -> tuple[list, list[int] | None]:
    text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    obs = [parse_obs_row(r, model) for r in rows]
    hidden = [int(r["y"]) for r in rows] if rows and "y" in rows[0] else None
    return obs, hidden


def write_decode(fh: TextIO, path, start: int = 1, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(["t", "v"])
    for t, v in enumerate(path, start=start):
        w.writerow([t, int(v)])


# ---------------------------------------------------------------------------
# JSON reports
# ---------------------------------------------------------------------------

def to_jsonable(obj):
    """Plain JSON data from reports: dataclasses become dicts, fractions and
    numpy scalars become floats, infinities become strings."""
    import dataclasses
    import math

    if hasattr(obj, "to_dict") and not isinstance(obj, type):
        obj = obj.to_dict()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (frozenset, set)):
        return [to_jsonable(v) for v in sorted(obj)]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, Fraction)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(obj, fh: TextIO | None = None) -> str:
    text = json.dumps(to_jsonable(obj), indent=2)
    if fh is not None:
        fh.write(text + "\n")
    return text
