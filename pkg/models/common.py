# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""Common model file plumbing: versioned JSON documents with field validation."""

import json
import math
from pathlib import Path

from utils import ModelFormatError, ModelVersionError


def save_json(path, doc):
    """
    Writes a model document as UTF-8 JSON and returns its path.

    Floats are written with Python's shortest round-trip repr (at most 17 significant digits), so loading restores
    every value bit for bit.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, allow_nan=False)
        f.write("\n")
    return path


def load_json(path, kind, version):
    """Reads a model document, checking its `kind` and `version` fields."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"{path}: malformed model file ({e})") from e
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model file must hold a JSON object")
    if doc.get("kind") != kind:
        raise ModelFormatError(f"{path}: expected a '{kind}' model, found '{doc.get('kind')}'")
    if doc.get("version") != version:
        raise ModelVersionError(f"{path}: unsupported {kind} model version {doc.get('version')}, expected {version}")
    return doc


def peek_kind(path):
    """Returns the `kind` field of a model file without validating the rest."""
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f).get("kind")
    except (json.JSONDecodeError, UnicodeDecodeError, AttributeError) as e:
        raise ModelFormatError(f"{path}: malformed model file ({e})") from e


def check_fields(doc, keys, path=""):
    """Raises ModelFormatError naming the first of `keys` missing from `doc`."""
    for k in keys:
        if k not in doc:
            raise ModelFormatError(f"{path}: missing field '{k}'")


def check_vector(x, n, name, path=""):
    """Returns `x` as a tuple of `n` finite floats, raising ModelFormatError otherwise."""
    if not isinstance(x, list) or len(x) != n:
        raise ModelFormatError(f"{path}: '{name}' must be a list of {n} numbers")
    try:
        x = tuple(float(v) for v in x)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: '{name}' holds non-numeric values") from e
    if not all(math.isfinite(v) for v in x):
        raise ModelFormatError(f"{path}: '{name}' holds non-finite values")
    return x
