"""Feature grounding for tabular inputs via a dataset schema.

Attribute mentions map to fixed input coordinates, so "detection" here is a
schema lookup followed by interval construction on the normalized value.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .core import FeatureRange, Grounding, InputSample, SemanticSpec
from .errors import AmbiguousAttribute, UnknownAttribute
from .parser import RangeOverride

DEFAULT_DELTA = 0.1


@dataclass(frozen=True)
class AttributeDef:
    name: str
    description: str
    index: int
    raw_min: float
    raw_max: float

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("attribute index must be non-negative")
        if not self.raw_min < self.raw_max:
            raise ValueError(f"{self.name}: raw_min must be < raw_max")

    def normalize(self, raw: float) -> float:
        """Map a raw-unit value into [0, 1], clipped at the range ends."""
        v = (raw - self.raw_min) / (self.raw_max - self.raw_min)
        return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class DatasetSchema:
    attributes: tuple[AttributeDef, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        indices = [a.index for a in self.attributes]
        if len(set(indices)) != len(indices):
            raise ValueError("attribute indices must be distinct")

    def resolve(self, mention: str) -> AttributeDef:
        """Exact-name match first, description-substring second, error on ties.

        Description matching is word-bounded, so "age" matches "Age (years)"
        but not "percentage".
        """
        mention_l = mention.strip().lower()
        for attr in self.attributes:
            if attr.name.lower() == mention_l:
                return attr
        pattern = re.compile(rf"\b{re.escape(mention_l)}\b")
        matches = [a for a in self.attributes if pattern.search(a.description.lower())]
        if not matches:
            raise UnknownAttribute(f"no attribute matches {mention!r}")
        if len(matches) > 1:
            names = [a.name for a in matches]
            raise AmbiguousAttribute(f"{mention!r} matches several attributes: {names}")
        return matches[0]

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        attrs = tuple(
            AttributeDef(a["name"], a.get("description", ""), int(a["index"]),
                         float(a["raw_min"]), float(a["raw_max"]))
            for a in d["attributes"]
        )
        return cls(attrs, d.get("name", ""))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "attributes": [
                {"name": a.name, "description": a.description, "index": a.index,
                 "raw_min": a.raw_min, "raw_max": a.raw_max}
                for a in self.attributes
            ],
        }


def load_schema(path: Optional[str] = None) -> DatasetSchema:
    """Load a schema file; with no path, the bundled Statlog credit schema."""
    if path is None:
        text = resources.files("specground.data").joinpath("statlog_schema.json").read_text("utf-8")
        return DatasetSchema.from_dict(json.loads(text))
    with open(path, encoding="utf-8") as fh:
        return DatasetSchema.from_dict(json.load(fh))


def ground_tabular(spec: SemanticSpec, x: InputSample, schema: DatasetSchema,
                   delta: float = DEFAULT_DELTA,
                   range_override: Optional[RangeOverride] = None) -> Grounding:
    """One feature_range region per referenced attribute.

    Without an override the action widens the normalized reference value v by
    ``delta`` (increase: [v, v+delta], decrease: [v-delta, v], change: both
    sides), clipped to [0, 1]. An explicit bound from the property text
    replaces the delta semantics entirely.
    """
    if spec.domain_hint != "tabular":
        raise ValueError(f"tabular grounder got a {spec.domain_hint} spec")
    if x.kind != "tabular_vector":
        raise ValueError(f"tabular grounder got input kind {x.kind}")

    regions = []
    for obj in spec.objects:
        attr = schema.resolve(obj)
        if attr.index >= x.dim:
            raise UnknownAttribute(
                f"{attr.name} points at coordinate {attr.index}, input has dim {x.dim}"
            )
        v = float(x.values[attr.index])
        if range_override is not None:
            lo = attr.normalize(range_override.raw_lower) if range_override.raw_lower is not None else 0.0
            hi = attr.normalize(range_override.raw_upper) if range_override.raw_upper is not None else 1.0
        elif spec.operation == "increase":
            lo, hi = v, min(1.0, v + delta)
        elif spec.operation == "decrease":
            lo, hi = max(0.0, v - delta), v
        elif spec.operation == "change":
            lo, hi = max(0.0, v - delta), min(1.0, v + delta)
        else:
            raise ValueError(f"unexpected tabular operation {spec.operation!r}")
        regions.append(FeatureRange(attr.index, lo, hi, label=obj, score=1.0))

    grounding = Grounding(tuple(regions), source="schema")
    grounding.validate_against(x)
    return grounding
