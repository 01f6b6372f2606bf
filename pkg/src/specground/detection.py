"""Open-vocabulary detection client: thresholds, box conversion, pruning.

Talks to a detection service over HTTP (image + free-text query in, scored
normalized boxes out) or replays a recorded fixture. Loose mode lowers the
score thresholds and prunes boxes that fully contain other boxes, keeping
the most granular regions.
"""
from __future__ import annotations

import base64
import io
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import requests

from .core import Grounding, InputSample, PixelBox, SemanticSpec
from .errors import MalformedResponse, NoDetections, TransportError

MODE_THRESHOLDS = {
    "tight": (0.35, 0.25),
    "loose": (0.15, 0.15),
}


@dataclass(frozen=True)
class DetectorConfig:
    mode: str = "tight"
    box_threshold: Optional[float] = None
    text_threshold: Optional[float] = None
    endpoint: str = ""
    fixture_path: str = ""
    timeout: float = 60.0

    def __post_init__(self):
        if self.mode not in MODE_THRESHOLDS:
            raise ValueError(f"unknown detector mode: {self.mode!r}")
        box_t, text_t = MODE_THRESHOLDS[self.mode]
        if self.box_threshold is None:
            object.__setattr__(self, "box_threshold", box_t)
        if self.text_threshold is None:
            object.__setattr__(self, "text_threshold", text_t)
        for t in (self.box_threshold, self.text_threshold):
            if not (0.0 < t < 1.0):
                raise ValueError(f"threshold {t} outside (0, 1)")


@dataclass(frozen=True)
class Detection:
    box: PixelBox
    phrase: str
    box_score: float
    text_score: float

    def __post_init__(self):
        for s in (self.box_score, self.text_score):
            if not (0.0 <= s <= 1.0):
                raise ValueError(f"detection score {s} outside [0, 1]")


def load_detector_fixture(path: str) -> dict:
    """Map of 'imageid|query|mode' -> recorded service response."""
    try:
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedResponse(f"cannot load detector fixture {path}: {exc}") from exc
    if not isinstance(table, dict):
        raise MalformedResponse(f"detector fixture {path} is not a JSON map")
    return table


def image_to_png_base64(x: InputSample) -> str:
    from PIL import Image

    pixels = (np.asarray(x.values).reshape(x.shape) * 255.0).round().astype(np.uint8)
    img = Image.fromarray(pixels, mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def wire_box_to_pixels(cx: float, cy: float, w: float, h: float,
                       width: int, height: int) -> tuple[int, int, int, int]:
    """Normalized center-format box -> absolute inclusive-exclusive pixels."""
    x1 = max(0, math.floor((cx - w / 2.0) * width))
    y1 = max(0, math.floor((cy - h / 2.0) * height))
    x2 = min(width, math.ceil((cx + w / 2.0) * width))
    y2 = min(height, math.ceil((cy + h / 2.0) * height))
    if not (x1 < x2 and y1 < y2):
        raise MalformedResponse(
            f"wire box ({cx},{cy},{w},{h}) collapses to nothing at {width}x{height}"
        )
    return x1, y1, x2, y2


def filter_by_thresholds(raw: list[dict], config: DetectorConfig) -> list[dict]:
    return [
        d for d in raw
        if d["box_score"] >= config.box_threshold and d["text_score"] >= config.text_threshold
    ]


def _fetch_raw(x: InputSample, query: str, config: DetectorConfig) -> list[dict]:
    if config.fixture_path:
        table = load_detector_fixture(config.fixture_path)
        key = f"{x.id}|{query}|{config.mode}"
        if key not in table:
            raise NoDetections(f"fixture has no entry for {key!r}")
        response = table[key]
    else:
        payload = {
            "image": image_to_png_base64(x),
            "query": query,
            "box_threshold": config.box_threshold,
            "text_threshold": config.text_threshold,
        }
        try:
            resp = requests.post(config.endpoint, json=payload, timeout=config.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"detector unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"detector returned {resp.status_code}")
        try:
            response = resp.json()
        except ValueError as exc:
            raise MalformedResponse("detector returned non-JSON body") from exc
    if not isinstance(response, dict) or "detections" not in response:
        raise MalformedResponse("detector response missing 'detections'")
    return response["detections"]


def detect(x: InputSample, objects: list[str], config: DetectorConfig) -> list[Detection]:
    """Locate the object phrases in the image; thresholds applied client-side."""
    if x.kind != "image_grayscale":
        raise ValueError(f"detector got input kind {x.kind}")
    if not objects:
        raise ValueError("detector needs at least one object phrase")
    query = " . ".join(objects)
    raw = _fetch_raw(x, query, config)

    detections = []
    for d in filter_by_thresholds(raw, config):
        x1, y1, x2, y2 = wire_box_to_pixels(
            d["cx"], d["cy"], d["w"], d["h"], x.width, x.height
        )
        phrase = d.get("phrase", query)
        box = PixelBox(x1, y1, x2, y2, label=phrase, score=float(d["box_score"]))
        detections.append(Detection(box, phrase, float(d["box_score"]), float(d["text_score"])))
    if not detections:
        raise NoDetections(f"no detection above thresholds for {query!r} on {x.id}")
    return detections


def _dedupe_equal(dets: list[Detection]) -> list[Detection]:
    """Collapse geometrically equal boxes, keeping the best-scored one."""
    best: dict[tuple[int, int, int, int], Detection] = {}
    order: list[tuple[int, int, int, int]] = []
    for d in dets:
        key = d.box.coords
        if key not in best:
            best[key] = d
            order.append(key)
        elif (d.box_score, d.text_score) > (best[key].box_score, best[key].text_score):
            best[key] = d
    return [best[k] for k in order]


def prune_containing(dets: list[Detection]) -> list[Detection]:
    """Drop every box that strictly contains another box.

    Strict containment is a partial order, so the survivors are exactly the
    minimal boxes; the result is an antichain and independent of input order.
    """
    deduped = _dedupe_equal(dets)
    return [
        d for d in deduped
        if not any(d.box.contains(o.box) for o in deduped if o is not d)
    ]


def ground_image(spec: SemanticSpec, x: InputSample, config: DetectorConfig) -> Grounding:
    dets = detect(x, list(spec.objects), config)
    if config.mode == "loose":
        dets = prune_containing(dets)
    regions = tuple(d.box for d in dets)
    grounding = Grounding(regions, source="fixture" if config.fixture_path else "detector")
    grounding.validate_against(x)
    return grounding
