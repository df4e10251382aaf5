"""Certificate records and JSON helpers."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into strict-JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


def dumps(obj, **kw):
    return json.dumps(jsonable(obj), sort_keys=True, allow_nan=False, **kw)


@dataclass
class Certificate:
    """A verdict on one statement together with the numbers behind it.

    ``verdict`` is one of ``holds``/``fails``/``inconclusive`` for statement
    checks; some tail tests use ``finite``/``growing`` in the same slot.
    """

    statement: str
    anchor: str
    verdict: str
    value: object = None
    direction: str = "exact"
    params: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    truncation_radius: float = math.inf
    flags: list = field(default_factory=list)

    @property
    def holds(self):
        return self.verdict == HOLDS

    def to_dict(self):
        return {
            "statement": self.statement,
            "paper_anchor": self.anchor,
            "direction": self.direction,
            "value": self.value,
            "verdict": self.verdict,
            "params": self.params,
            "evidence": self.evidence,
            "truncation_radius": self.truncation_radius,
            "flags": list(self.flags),
        }

    def to_json(self, **kw):
        return dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        value = d.get("value")
        if isinstance(value, str) and value in ("Infinity", "-Infinity", "NaN"):
            value = float(value.replace("Infinity", "inf"))
        radius = d.get("truncation_radius", math.inf)
        return cls(
            statement=d["statement"],
            anchor=d.get("paper_anchor", ""),
            verdict=d["verdict"],
            value=value,
            direction=d.get("direction", "exact"),
            params=d.get("params", {}),
            evidence=d.get("evidence", {}),
            truncation_radius=float(str(radius).replace("Infinity", "inf")),
            flags=list(d.get("flags", [])),
        )
