"""Run-report construction and atomic JSON persistence.

A run report is self-contained: the embedded grounded spec, network path,
and verdict are enough to replay the verification stage on its own.
"""
from __future__ import annotations

import json
import os
import tempfile
import time
import uuid

REPORT_SCHEMA = 1


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def build_report(*, run_id: str, property_text: str, domain: str,
                 parse_section: dict, grounding_section: dict,
                 approval_section: dict, grounded_spec_section: dict | None,
                 verdict_section: dict | None, timings: dict,
                 network_path: str, input_path: str) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "run_id": run_id,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "property": property_text,
        "domain": domain,
        "parse": parse_section,
        "grounding": grounding_section,
        "approval": approval_section,
        "grounded_spec": grounded_spec_section,
        "verdict": verdict_section,
        "timings": timings,
        "network_path": network_path,
        "input_path": input_path,
    }


def save_json_atomic(obj: dict, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
