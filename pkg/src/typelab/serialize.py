"""File formats: JSON for structured objects, CSV for curves, atomic writes throughout."""

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .measures import SpectralMeasure
from .nazarov import GammaDiffeo
from .products import CanonicalProduct
from .report import dumps
from .sturm import Potential, SmoothBump
from .weights import Weight


def read_json(path):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{p} is not valid JSON: {exc}") from None


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, dumps(obj, indent=2) + "\n")


def csv_text(columns):
    """CSV text from an ordered mapping name -> 1-D sequence (equal lengths)."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    lengths = {c.shape[0] for c in cols}
    if len(lengths) > 1:
        raise ValidationError(f"CSV columns differ in length: {sorted(lengths)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, columns):
    atomic_write_text(path, csv_text(columns))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    head, body = rows[0], rows[1:]
    return {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(head)}


# -- typed loaders ---------------------------------------------------------------

def _source(obj):
    return read_json(obj) if isinstance(obj, (str, os.PathLike)) else obj


def load_measure(obj):
    d = _source(obj)
    if "product" in d and "real_atoms" not in d:
        return SpectralMeasure.from_dict(CanonicalProduct.from_dict(d).to_measure_dict())
    return SpectralMeasure.from_dict(d)


def save_measure(path, mu):
    write_json(path, mu.to_dict())


def load_product(obj):
    """Zero-set file: the measure schema with a "product" block, or a bare product dict."""
    return CanonicalProduct.from_dict(_source(obj))


def save_product(path, F):
    write_json(path, F.to_measure_dict())


def load_diffeo(obj):
    return GammaDiffeo.from_dict(_source(obj))


def load_potential(obj):
    return Potential.from_dict(_source(obj))


def load_bump(obj):
    d = _source(obj)
    if d.get("kind", "bump") != "bump":
        raise ValidationError(f"unsupported test function kind {d.get('kind')!r}")
    return SmoothBump.from_dict(d)


def load_weight(obj):
    return Weight.from_dict(_source(obj))
