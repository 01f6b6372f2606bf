"""Fixture-driven evaluation: parsing accuracy and detection accuracy.

Accuracy is exact (correct/total); latency spread uses the sample standard
deviation (n-1 denominator). Detection success for one configuration means
every labeled object box is matched by a surviving detection with
IoU >= threshold; the "any" row aggregates success across configurations.
"""
from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .core import InputSample
from .detection import DetectorConfig, detect, prune_containing
from .errors import SpecGroundError
from .parser import Parser, ParserConfig

DETECT_CONFIGURATIONS = (
    ("detailed", "loose"),
    ("detailed", "tight"),
    ("minimal", "loose"),
    ("minimal", "tight"),
)


def _load_items(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    items = data["items"] if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise ValueError(f"fixture file {path} holds no items")
    return items


def _latency_stats(latencies: list[float]) -> tuple[float, float]:
    if not latencies:
        return 0.0, 0.0
    mean = float(np.mean(latencies))
    std = float(np.std(latencies, ddof=1)) if len(latencies) > 1 else 0.0
    return mean, std


def _normalize_objects(objects) -> frozenset[str]:
    return frozenset(o.strip().lower() for o in objects)


def eval_parse(fixtures_path: str, config: ParserConfig,
               fixture_table: Optional[dict[str, str]] = None) -> dict:
    """Score object and action extraction independently over labeled prompts."""
    items = _load_items(fixtures_path)
    parser = Parser(config, fixture=fixture_table)

    results = []
    object_hits = action_hits = 0
    latencies = []
    for item in items:
        prompt = item["prompt"]
        expected_objects = _normalize_objects(item["expected_objects"])
        expected_action = item["expected_action"].strip().lower()
        row = {"prompt": prompt, "object_correct": False, "action_correct": False}
        try:
            res = parser.parse(prompt)
        except SpecGroundError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        else:
            row["parsed_objects"] = list(res.spec.objects)
            row["parsed_action"] = res.spec.operation
            row["object_correct"] = _normalize_objects(res.spec.objects) == expected_objects
            row["action_correct"] = res.spec.operation == expected_action
            row["latency"] = res.latency
            latencies.append(res.latency)
        object_hits += row["object_correct"]
        action_hits += row["action_correct"]
        results.append(row)

    mean, std = _latency_stats(latencies)
    return {
        "schema": 1,
        "kind": "parse_eval",
        "n": len(items),
        "mode": config.mode,
        "backend": config.backend,
        "object_accuracy": object_hits / len(items),
        "action_accuracy": action_hits / len(items),
        "latency_mean": mean,
        "latency_std": std,
        "items": results,
    }


def iou(box_a, box_b) -> float:
    """Intersection over union of two inclusive-exclusive pixel boxes."""
    ax1, ay1, ax2, ay2 = box_a
    bx1, by1, bx2, by2 = box_b
    ix1, iy1 = max(ax1, bx1), max(ay1, by1)
    ix2, iy2 = min(ax2, bx2), min(ay2, by2)
    iw, ih = max(0, ix2 - ix1), max(0, iy2 - iy1)
    inter = iw * ih
    if inter == 0:
        return 0.0
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    return inter / float(area_a + area_b - inter)


def _config_success(item: dict, parse_mode: str, tightness: str,
                    fixture_path: str, iou_threshold: float) -> bool:
    query = item["queries"][parse_mode]
    sample = InputSample(
        "image_grayscale",
        np.zeros(item["height"] * item["width"]),
        (item["height"], item["width"]),
        item["image_id"],
    )
    config = DetectorConfig(mode=tightness, fixture_path=fixture_path)
    try:
        dets = detect(sample, query.split(" . "), config)
    except SpecGroundError:
        return False
    if tightness == "loose":
        dets = prune_containing(dets)
    boxes = [d.box.coords for d in dets]
    for labeled in item["labeled_boxes"]:
        target = tuple(labeled["box"])
        if not any(iou(b, target) >= iou_threshold for b in boxes):
            return False
    return True


def eval_detect(fixtures_path: str, detector_fixture_path: str,
                iou_threshold: float = 0.5) -> dict:
    """Per-configuration detection accuracy plus the any-configuration row."""
    items = _load_items(fixtures_path)

    config_hits = {cfg: 0 for cfg in DETECT_CONFIGURATIONS}
    any_hits = 0
    rows = []
    for item in items:
        successes = {}
        for parse_mode, tightness in DETECT_CONFIGURATIONS:
            ok = _config_success(item, parse_mode, tightness,
                                 detector_fixture_path, iou_threshold)
            successes[f"{parse_mode}|{tightness}"] = ok
            config_hits[(parse_mode, tightness)] += ok
        any_ok = any(successes.values())
        any_hits += any_ok
        rows.append({"image_id": item["image_id"], "successes": successes, "any": any_ok})

    n = len(items)
    return {
        "schema": 1,
        "kind": "detect_eval",
        "n": n,
        "iou_threshold": iou_threshold,
        "configs": {
            f"{m}|{t}": config_hits[(m, t)] / n for m, t in DETECT_CONFIGURATIONS
        },
        "any": any_hits / n,
        "items": rows,
    }


def format_parse_report(report: dict) -> str:
    lines = [
        f"{'Backend':<10} {'Mode':<10} {'Acc. (object)':<15} {'Acc. (action)':<15} {'Time (Sec.)':<18}",
        f"{report['backend']:<10} {report['mode']:<10} "
        f"{report['object_accuracy'] * 100:.0f}%{'':<12} "
        f"{report['action_accuracy'] * 100:.0f}%{'':<12} "
        f"{report['latency_mean']:.2f} ± {report['latency_std']:.2f}",
    ]
    return "\n".join(lines)


def format_detect_report(report: dict) -> str:
    lines = [f"{'Mode':<12} {'Tightness':<12} {'Accuracy':<10}"]
    for parse_mode, tightness in DETECT_CONFIGURATIONS:
        acc = report["configs"][f"{parse_mode}|{tightness}"]
        lines.append(f"{parse_mode:<12} {tightness:<12} {acc * 100:.0f}%")
    lines.append(f"{'any':<12} {'any':<12} {report['any'] * 100:.0f}%")
    return "\n".join(lines)
