"""Line-oriented text formats for dictionaries, vectors and key=value configs.

Dictionary::

    convdict v1 n=<n> m=<m>
    <n lines of m floats, row-major>

Vector::

    vec v1 len=<L>
    <one float per line>

Floats are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import FormatError

_DICT_HEADER = re.compile(r"^convdict v1 n=(\d+) m=(\d+)$")
_VEC_HEADER = re.compile(r"^vec v1 len=(\d+)$")


def format_float(x) -> str:
    return f"{float(x):.17g}"


def _lines(text):
    return [ln.strip() for ln in text.splitlines() if ln.strip()]


def dumps_dictionary(atoms) -> str:
    atoms = np.asarray(atoms, dtype=float)
    n, m = atoms.shape
    rows = [" ".join(format_float(v) for v in row) for row in atoms]
    return "\n".join([f"convdict v1 n={n} m={m}", *rows]) + "\n"


def loads_dictionary(text) -> np.ndarray:
    lines = _lines(text)
    if not lines:
        raise FormatError("empty dictionary file")
    match = _DICT_HEADER.match(lines[0])
    if not match:
        raise FormatError(f"bad dictionary header: {lines[0]!r}")
    n, m = int(match[1]), int(match[2])
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} rows, found {len(lines) - 1}")
    try:
        atoms = np.array([[float(tok) for tok in ln.split()] for ln in lines[1:]])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    if atoms.shape != (n, m):
        raise FormatError(f"expected {n} x {m} entries, got {atoms.shape}")
    return atoms


def dumps_vector(vec) -> str:
    vec = np.asarray(vec, dtype=float).ravel()
    return "\n".join([f"vec v1 len={vec.size}", *map(format_float, vec)]) + "\n"


def loads_vector(text) -> np.ndarray:
    lines = _lines(text)
    if not lines:
        raise FormatError("empty vector file")
    match = _VEC_HEADER.match(lines[0])
    if not match:
        raise FormatError(f"bad vector header: {lines[0]!r}")
    length = int(match[1])
    if len(lines) - 1 != length:
        raise FormatError(f"expected {length} values, found {len(lines) - 1}")
    try:
        return np.array([float(ln) for ln in lines[1:]], dtype=float)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def save_dictionary(path, atoms):
    with open(path, "w") as fh:
        fh.write(dumps_dictionary(atoms))


def load_dictionary(path) -> np.ndarray:
    with open(path) as fh:
        return loads_dictionary(fh.read())


def save_vector(path, vec):
    with open(path, "w") as fh:
        fh.write(dumps_vector(vec))


def load_vector(path) -> np.ndarray:
    with open(path) as fh:
        return loads_vector(fh.read())


def dumps_keyvalue(items) -> str:
    """Flat ``key=value`` block, one pair per line, in insertion order."""
    out = []
    for key, value in dict(items).items():
        if isinstance(value, (float, np.floating)):
            value = format_float(value)
        elif isinstance(value, (list, tuple)):
            value = ",".join(format_float(v) if isinstance(v, float) else str(v) for v in value)
        elif value is None:
            value = ""
        out.append(f"{key}={value}")
    return "\n".join(out) + "\n"


def loads_keyvalue(text) -> dict:
    """Parse ``key=value`` lines into a dict of strings; ``#`` starts a comment."""
    result = {}
    for ln in _lines(text):
        if ln.startswith("#"):
            continue
        if "=" not in ln:
            raise FormatError(f"expected key=value, got {ln!r}")
        key, value = ln.split("=", 1)
        result[key.strip()] = value.strip()
    return result
