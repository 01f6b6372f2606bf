"""Shared domain types: specifications, groundings, networks, verdicts.

All types are immutable after construction (frozen dataclasses; numpy
buffers are marked read-only) and therefore safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatch

IMAGE_ACTIONS = frozenset({
    "remove", "add_noise",
    "increase_brightness", "decrease_brightness",
    "increase_contrast", "decrease_contrast",
    "rotate", "scale_up", "scale_down",
})
TABULAR_ACTIONS = frozenset({"increase", "decrease", "change"})
AUDIO_ACTIONS = frozenset({"amplify"})

ACTIONS_BY_DOMAIN = {
    "image": IMAGE_ACTIONS,
    "tabular": TABULAR_ACTIONS,
    "audio": AUDIO_ACTIONS,
}

DOMAINS = ("tabular", "image", "audio")
KINDS = ("tabular_vector", "image_grayscale", "audio_waveform")

KIND_BY_DOMAIN = {
    "tabular": "tabular_vector",
    "image": "image_grayscale",
    "audio": "audio_waveform",
}


def action_domain(action: str) -> str:
    """Return the single domain whose action set contains ``action``."""
    for domain, actions in ACTIONS_BY_DOMAIN.items():
        if action in actions:
            return domain
    raise ValueError(f"unknown action: {action!r}")


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SemanticSpec:
    """Parsed user intent: the entities to locate and one operation."""

    objects: tuple[str, ...]
    operation: str
    domain_hint: str

    def __post_init__(self):
        objects = tuple(o.strip() for o in self.objects)
        object.__setattr__(self, "objects", objects)
        if not objects or any(not o for o in objects):
            raise ValueError("objects must be a non-empty list of non-empty phrases")
        if self.domain_hint not in DOMAINS:
            raise ValueError(f"unknown domain_hint: {self.domain_hint!r}")
        if action_domain(self.operation) != self.domain_hint:
            raise ValueError(
                f"operation {self.operation!r} does not belong to domain {self.domain_hint!r}"
            )

    def to_dict(self) -> dict:
        return {
            "objects": list(self.objects),
            "operation": self.operation,
            "domain_hint": self.domain_hint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SemanticSpec":
        return cls(tuple(d["objects"]), d["operation"], d["domain_hint"])


@dataclass(frozen=True)
class InputSample:
    """A concrete input: normalized values plus shape metadata.

    tabular: shape [n]; image: [height, width] row-major; audio: [num_samples].
    """

    kind: str
    values: np.ndarray
    shape: tuple[int, ...]
    id: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown input kind: {self.kind!r}")
        object.__setattr__(self, "values", _frozen_array(self.values))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        n = 1
        for s in self.shape:
            n *= s
        if n != self.values.size:
            raise ValueError(f"shape {self.shape} does not match {self.values.size} values")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("input values must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return int(self.values.size)

    @property
    def width(self) -> int:
        if self.kind != "image_grayscale":
            raise ValueError("width is only defined for images")
        return self.shape[1]

    @property
    def height(self) -> int:
        if self.kind != "image_grayscale":
            raise ValueError("height is only defined for images")
        return self.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "values": [float(v) for v in self.values],
            "shape": list(self.shape),
            "id": self.id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InputSample":
        return cls(d["kind"], d["values"], tuple(d["shape"]), d["id"])


# ---- regions ----------------------------------------------------------------

@dataclass(frozen=True)
class FeatureRange:
    """Interval constraint on one input coordinate, in normalized units."""

    index: int
    lower: float
    upper: float
    label: str
    score: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"feature range [{self.lower}, {self.upper}] invalid")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must be in [0, 1]")


@dataclass(frozen=True)
class PixelBox:
    """Axis-aligned pixel rectangle, inclusive-exclusive coordinates."""

    x1: int
    y1: int
    x2: int
    y2: int
    label: str
    score: float = 1.0

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate pixel box ({self.x1},{self.y1},{self.x2},{self.y2})")
        if self.x1 < 0 or self.y1 < 0:
            raise ValueError("pixel box coordinates must be non-negative")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must be in [0, 1]")

    @property
    def coords(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def contains(self, other: "PixelBox") -> bool:
        """Strict geometric containment: covers ``other`` and is not equal to it."""
        covers = (
            self.x1 <= other.x1 and self.y1 <= other.y1
            and self.x2 >= other.x2 and self.y2 >= other.y2
        )
        return covers and self.coords != other.coords


@dataclass(frozen=True)
class TimeInterval:
    """Half-open sample-index interval of an audio waveform."""

    t_start: int
    t_end: int
    label: str
    score: float = 1.0

    def __post_init__(self):
        if not (0 <= self.t_start < self.t_end):
            raise ValueError(f"degenerate time interval [{self.t_start}, {self.t_end})")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must be in [0, 1]")


Region = Union[FeatureRange, PixelBox, TimeInterval]

REGION_KIND_FOR_INPUT = {
    "tabular_vector": FeatureRange,
    "image_grayscale": PixelBox,
    "audio_waveform": TimeInterval,
}

GROUNDING_SOURCES = ("schema", "detector", "fixture", "user_edited")


def region_to_dict(r: Region) -> dict:
    if isinstance(r, FeatureRange):
        return {"variant": "feature_range", "index": r.index, "lower": r.lower,
                "upper": r.upper, "label": r.label, "score": r.score}
    if isinstance(r, PixelBox):
        return {"variant": "pixel_box", "x1": r.x1, "y1": r.y1, "x2": r.x2,
                "y2": r.y2, "label": r.label, "score": r.score}
    if isinstance(r, TimeInterval):
        return {"variant": "time_interval", "t_start": r.t_start,
                "t_end": r.t_end, "label": r.label, "score": r.score}
    raise TypeError(f"not a region: {r!r}")


def region_from_dict(d: dict) -> Region:
    variant = d["variant"]
    if variant == "feature_range":
        return FeatureRange(d["index"], d["lower"], d["upper"], d["label"], d.get("score", 1.0))
    if variant == "pixel_box":
        return PixelBox(d["x1"], d["y1"], d["x2"], d["y2"], d["label"], d.get("score", 1.0))
    if variant == "time_interval":
        return TimeInterval(d["t_start"], d["t_end"], d["label"], d.get("score", 1.0))
    raise ValueError(f"unknown region variant: {variant!r}")


def check_region_within(region: Region, sample: InputSample) -> None:
    """Raise ValueError unless ``region`` lies within the sample's bounds."""
    expected = REGION_KIND_FOR_INPUT[sample.kind]
    if not isinstance(region, expected):
        raise ValueError(
            f"region {type(region).__name__} does not match input kind {sample.kind}"
        )
    if isinstance(region, PixelBox):
        if region.x2 > sample.width or region.y2 > sample.height:
            raise ValueError(f"pixel box {region.coords} exceeds image {sample.shape}")
    elif isinstance(region, TimeInterval):
        if region.t_end > sample.dim:
            raise ValueError(f"time interval exceeds {sample.dim} samples")
    else:
        if region.index < 0 or region.index >= sample.dim:
            raise ValueError(f"feature index {region.index} out of range for dim {sample.dim}")


def region_coordinate_indices(region: Region, sample: InputSample) -> np.ndarray:
    """Flat input-coordinate indices covered by a region."""
    check_region_within(region, sample)
    if isinstance(region, FeatureRange):
        return np.array([region.index], dtype=np.intp)
    if isinstance(region, TimeInterval):
        return np.arange(region.t_start, region.t_end, dtype=np.intp)
    w = sample.width
    rows = np.arange(region.y1, region.y2, dtype=np.intp)
    cols = np.arange(region.x1, region.x2, dtype=np.intp)
    return (rows[:, None] * w + cols[None, :]).ravel()


@dataclass(frozen=True)
class Grounding:
    """Where the parsed objects live in a concrete input."""

    regions: tuple[Region, ...]
    source: str

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValueError("a Grounding must contain at least one region")
        if self.source not in GROUNDING_SOURCES:
            raise ValueError(f"unknown grounding source: {self.source!r}")

    def validate_against(self, sample: InputSample) -> None:
        for r in self.regions:
            check_region_within(r, sample)

    def to_dict(self) -> dict:
        return {"regions": [region_to_dict(r) for r in self.regions], "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "Grounding":
        return cls(tuple(region_from_dict(r) for r in d["regions"]), d["source"])


@dataclass(frozen=True)
class GroundedSpec:
    """Box input constraints plus an argmax-invariance output constraint.

    Coordinates outside every region stay degenerate at the reference value;
    coordinates inside a region carry the operation's interval semantics
    (which may exclude the reference, e.g. constant masking).
    """

    input_lower: np.ndarray
    input_upper: np.ndarray
    reference: InputSample
    target_class: int
    provenance: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "input_lower", _frozen_array(self.input_lower))
        object.__setattr__(self, "input_upper", _frozen_array(self.input_upper))
        lo, up = self.input_lower, self.input_upper
        if lo.shape != up.shape or lo.ndim != 1:
            raise ValueError("bounds must be 1-D vectors of equal length")
        if lo.size != self.reference.dim:
            raise ValueError("bounds length does not match reference input")
        if np.any(lo < 0.0) or np.any(up > 1.0) or np.any(lo > up):
            raise ValueError("bounds must satisfy 0 <= lower <= upper <= 1")
        if self.target_class < 0:
            raise ValueError("target_class must be a 0-based class index")

    @property
    def dim(self) -> int:
        return int(self.input_lower.size)

    def free_coordinates(self) -> np.ndarray:
        return np.flatnonzero(self.input_upper > self.input_lower)

    def contains_point(self, x: np.ndarray, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(
            np.all(x >= self.input_lower - atol) and np.all(x <= self.input_upper + atol)
        )

    def to_dict(self) -> dict:
        return {
            "lower": [float(v) for v in self.input_lower],
            "upper": [float(v) for v in self.input_upper],
            "target_class": self.target_class,
            "reference": self.reference.to_dict(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundedSpec":
        return cls(
            np.array(d["lower"], dtype=np.float64),
            np.array(d["upper"], dtype=np.float64),
            InputSample.from_dict(d["reference"]),
            int(d["target_class"]),
            d.get("provenance"),
        )


# ---- networks ----------------------------------------------------------------

@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # [out x in]
    bias: np.ndarray     # [out]
    activation: str      # "relu" | "none"

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        object.__setattr__(self, "bias", _frozen_array(self.bias))
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("weights must be a matrix and bias a vector")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError("bias length must equal the layer's output width")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation: {self.activation!r}")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    """Feedforward dense ReLU network, last layer linear."""

    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for prev, cur in zip(self.layers, self.layers[1:]):
            if cur.in_dim != prev.out_dim:
                raise ValueError(
                    f"layer dims do not chain: {prev.out_dim} -> {cur.in_dim}"
                )
        if self.layers[-1].activation != "none":
            raise ValueError("last layer must have no activation")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "weights": [[float(w) for w in row] for row in layer.weights],
                    "bias": [float(b) for b in layer.bias],
                    "activation": layer.activation,
                }
                for layer in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        layers = tuple(
            DenseLayer(
                np.array(spec["weights"], dtype=np.float64),
                np.array(spec["bias"], dtype=np.float64),
                spec["activation"],
            )
            for spec in d["layers"]
        )
        net = cls(layers)
        if net.input_dim != d["input_dim"]:
            raise ValueError(
                f"declared input_dim {d['input_dim']} != first layer width {net.input_dim}"
            )
        return net


def forward(net: Network, x) -> np.ndarray:
    """Exact feedforward evaluation of a single input vector."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape != (net.input_dim,):
        raise DimensionMismatch(f"expected input of shape ({net.input_dim},), got {a.shape}")
    for layer in net.layers:
        a = layer.weights @ a + layer.bias
        if layer.activation == "relu":
            a = np.maximum(a, 0.0)
    return a


def forward_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    """Vectorized forward over rows of ``xs`` (shape [k, input_dim])."""
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.input_dim:
        raise DimensionMismatch(f"expected [k, {net.input_dim}] batch, got {a.shape}")
    for layer in net.layers:
        a = a @ layer.weights.T + layer.bias
        if layer.activation == "relu":
            a = np.maximum(a, 0.0)
    return a


def predict(net: Network, x) -> int:
    return int(np.argmax(forward(net, x)))


def load_network(path: str) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return Network.from_dict(json.load(fh))


def save_network(net: Network, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(net.to_dict(), fh, indent=1)
        fh.write("\n")


# ---- verdicts -----------------------------------------------------------------

@dataclass(frozen=True)
class VerdictStats:
    nodes_explored: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class Verdict:
    """SAFE / UNSAFE(counterexample) / UNKNOWN."""

    status: str
    counterexample: Optional[np.ndarray] = None
    stats: VerdictStats = field(default_factory=VerdictStats)

    def __post_init__(self):
        if self.status not in ("SAFE", "UNSAFE", "UNKNOWN"):
            raise ValueError(f"unknown verdict status: {self.status!r}")
        if (self.status == "UNSAFE") != (self.counterexample is not None):
            raise ValueError("counterexample present iff status is UNSAFE")
        if self.counterexample is not None:
            object.__setattr__(self, "counterexample", _frozen_array(self.counterexample))

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "counterexample": (
                None if self.counterexample is None
                else [float(v) for v in self.counterexample]
            ),
            "stats": {
                "nodes_explored": self.stats.nodes_explored,
                "wall_time": self.stats.wall_time,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        cex = d.get("counterexample")
        stats = d.get("stats", {})
        return cls(
            d["status"],
            None if cex is None else np.array(cex, dtype=np.float64),
            VerdictStats(stats.get("nodes_explored", 0), stats.get("wall_time", 0.0)),
        )


def check_counterexample(net: Network, spec: GroundedSpec, cex) -> bool:
    """Re-verify a counterexample by exact forward evaluation."""
    x = np.asarray(cex, dtype=np.float64)
    if not spec.contains_point(x):
        return False
    return int(np.argmax(forward(net, x))) != spec.target_class
