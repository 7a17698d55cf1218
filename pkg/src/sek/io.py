"""JSON formats for states and POVMs.

Complex matrices are nested row-major lists of ``[re, im]`` pairs. Files are
UTF-8 with a trailing newline; floats use Python's shortest round-trip repr
(at most 17 significant digits).
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from sek.errors import ArgumentError, SekError
from sek.measurement import Povm
from sek.states import MultipartiteState, as_state

DATA_PACKAGE = "sek.data"


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def matrix_from_json(obj) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed complex matrix: {exc}") from exc
    if a.ndim != 3 or a.shape[2] != 2 or a.shape[0] == 0:
        raise ArgumentError(f"complex matrix must have shape (rows, cols, 2), got {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def state_to_dict(s) -> dict:
    s = as_state(s)
    return {"labels": list(s.labels), "dims": list(s.dims), "matrix": matrix_to_json(s.matrix)}


def state_from_dict(obj) -> MultipartiteState:
    if not isinstance(obj, dict) or not {"labels", "dims", "matrix"} <= obj.keys():
        raise ArgumentError("state object needs 'labels', 'dims' and 'matrix'")
    dims = obj["dims"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and d > 0 for d in dims):
        raise ArgumentError("'dims' must be a list of positive integers")
    labels = obj["labels"]
    if not isinstance(labels, list) or not all(isinstance(lb, str) for lb in labels):
        raise ArgumentError("'labels' must be a list of strings")
    return MultipartiteState(matrix_from_json(obj["matrix"]), tuple(dims), tuple(labels))


def povm_to_dict(p: Povm) -> dict:
    return {
        "dim": p.dim,
        "outcomes": list(p.outcome_labels),
        "elements": [matrix_to_json(m) for m in p.elements],
        **({"name": p.name} if p.name else {}),
    }


def povm_from_dict(obj) -> Povm:
    if not isinstance(obj, dict) or not {"dim", "elements"} <= obj.keys():
        raise ArgumentError("POVM object needs 'dim' and 'elements'")
    elems = tuple(matrix_from_json(m) for m in obj["elements"])
    if any(m.shape != (obj["dim"], obj["dim"]) for m in elems):
        raise ArgumentError("POVM element shape does not match 'dim'")
    return Povm(elems, tuple(obj.get("outcomes", ())), name=str(obj.get("name", "")))


def dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False) + "\n"


def _read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path} is not valid JSON: {exc}") from exc


def load_state(path) -> MultipartiteState:
    return state_from_dict(_read_json(path))


def load_povm(path) -> Povm:
    return povm_from_dict(_read_json(path))


def save_state(s, path) -> None:
    Path(path).write_text(dumps(state_to_dict(s)), encoding="utf-8")


def save_povm(p: Povm, path) -> None:
    Path(path).write_text(dumps(povm_to_dict(p)), encoding="utf-8")


def data_file(name: str) -> Path:
    """Path of a bundled data file (``bb84_x.json``, ``fourier3_z.json``, ...)."""
    ref = resources.files(DATA_PACKAGE) / name
    if not ref.is_file():
        raise SekError(f"no bundled data file {name!r}")
    return Path(str(ref))
