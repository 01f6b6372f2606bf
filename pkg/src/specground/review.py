"""Local HTTP server backing the interactive region-approval panel.

The pipeline pauses at the approval gate, serves the session (proposed
regions + input preview) on a local port, and resumes with the user's
decision. The panel itself is static assets plus fetch calls; the server
also exposes finished run reports so the panel can render verdicts and
counterexamples. Exactly one decision is accepted per session.
"""
from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    Grounding,
    InputSample,
    Region,
    check_region_within,
    region_from_dict,
    region_to_dict,
)

_FALLBACK_PAGE = b"""<!doctype html>
<html><head><title>specground review</title></head>
<body><h1>specground review</h1>
<p>UI assets are not built. The JSON API is live:</p>
<ul><li>GET /session</li><li>GET /image</li><li>POST /decision</li><li>GET /report</li></ul>
</body></html>
"""


@dataclass
class ReviewSession:
    run_id: str
    property_text: str
    sample: InputSample
    regions: list[Region]
    attribute_names: Optional[list[str]] = None
    status: str = "pending"
    decided_regions: Optional[list[Region]] = None
    edited: bool = False
    _event: threading.Event = field(default_factory=threading.Event)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "property": self.property_text,
            "input": self.sample.to_dict(),
            "attribute_names": self.attribute_names,
            "regions": [region_to_dict(r) for r in self.regions],
        }


def _png_bytes(values: np.ndarray, shape: tuple[int, ...]) -> bytes:
    from PIL import Image

    pixels = (np.asarray(values).reshape(shape) * 255.0).round().astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


class _Handler(BaseHTTPRequestHandler):
    server_version = "specground-review/1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    # -- helpers ------------------------------------------------------------

    def _send(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Cache-Control", "no-store")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, obj) -> None:
        self._send(code, json.dumps(obj).encode("utf-8"), "application/json")

    def _static(self, rel: str) -> None:
        root: Optional[Path] = self.server.static_dir
        if rel in ("", "/"):
            rel = "index.html"
        if root is not None:
            target = (root / rel).resolve()
            if str(target).startswith(str(root.resolve())) and target.is_file():
                ctype = {
                    ".html": "text/html", ".js": "text/javascript",
                    ".css": "text/css", ".map": "application/json",
                    ".png": "image/png", ".svg": "image/svg+xml",
                }.get(target.suffix, "application/octet-stream")
                self._send(200, target.read_bytes(), ctype)
                return
        if rel == "index.html":
            self._send(200, _FALLBACK_PAGE, "text/html")
        else:
            self._send_json(404, {"error": f"no such file: {rel}"})

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        session: Optional[ReviewSession] = self.server.session
        report: Optional[dict] = self.server.report
        if path == "/session":
            if session is None:
                self._send_json(404, {"error": "no pending session"})
            else:
                self._send_json(200, session.to_dict())
        elif path == "/image":
            if session is None or session.sample.kind != "image_grayscale":
                self._send_json(404, {"error": "no image for this session"})
            else:
                self._send(200, _png_bytes(session.sample.values, session.sample.shape),
                           "image/png")
        elif path == "/report":
            if report is None:
                self._send_json(404, {"error": "no report available"})
            else:
                self._send_json(200, report)
        elif path == "/counterexample.png":
            cex = (report or {}).get("verdict", {}) or {}
            values = cex.get("counterexample")
            sample = (report or {}).get("grounded_spec", {}) or {}
            ref = sample.get("reference", {})
            if values is None or ref.get("kind") != "image_grayscale":
                self._send_json(404, {"error": "no counterexample image"})
            else:
                self._send(200, _png_bytes(np.array(values), tuple(ref["shape"])),
                           "image/png")
        else:
            self._static(path.lstrip("/"))

    def do_POST(self):
        if self.path.split("?", 1)[0] != "/decision":
            self._send_json(404, {"error": "unknown endpoint"})
            return
        session: Optional[ReviewSession] = self.server.session
        length = int(self.headers.get("Content-Length", 0))
        try:
            payload = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            self._send_json(400, {"error": "body is not JSON"})
            return

        if session is None or payload.get("run_id") != session.run_id:
            self._send_json(404, {"error": "unknown run_id"})
            return
        with self.server.decision_lock:
            if session.status != "pending":
                self._send_json(409, {"error": "decision already made"})
                return
            status = payload.get("status")
            if status not in ("approved", "rejected"):
                self._send_json(400, {"error": "status must be approved or rejected"})
                return
            regions = session.regions
            edited = False
            if status == "approved" and payload.get("regions") is not None:
                try:
                    regions = [region_from_dict(d) for d in payload["regions"]]
                    for r in regions:
                        check_region_within(r, session.sample)
                    if not regions:
                        raise ValueError("approved region list is empty")
                except (KeyError, ValueError, TypeError) as exc:
                    self._send_json(400, {"error": f"invalid regions: {exc}"})
                    return
                edited = [region_to_dict(r) for r in regions] != \
                         [region_to_dict(r) for r in session.regions]
            session.status = status
            session.decided_regions = regions
            session.edited = edited
            session._event.set()
        self._send_json(200, {"run_id": session.run_id, "status": status})


class ReviewServer:
    """Serves one approval session and/or one finished report."""

    def __init__(self, session: Optional[ReviewSession] = None,
                 report: Optional[dict] = None,
                 static_dir: Optional[str] = None,
                 host: str = "127.0.0.1", port: int = 0,
                 verbose: bool = False):
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.session = session
        self._httpd.report = report
        self._httpd.decision_lock = threading.Lock()
        self._httpd.verbose = verbose
        self._httpd.static_dir = Path(static_dir) if static_dir else None
        self._thread: Optional[threading.Thread] = None
        self.session = session

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def wait_decision(self, timeout: Optional[float] = None) -> str:
        """Block until a decision lands; a timeout reads as rejection-by-silence."""
        if self.session is None:
            raise RuntimeError("server has no session to wait on")
        decided = self.session._event.wait(timeout)
        if not decided:
            self.session.status = "timeout"
        return self.session.status

    def attach_report(self, report: dict) -> None:
        self._httpd.report = report

    def shutdown(self) -> None:
        self._httpd.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self._httpd.server_close()


def approved_grounding(session: ReviewSession, original: Grounding) -> Grounding:
    """Grounding the pipeline resumes with after approval."""
    regions = session.decided_regions or list(original.regions)
    source = "user_edited" if session.edited else original.source
    return Grounding(tuple(regions), source=source)


def default_static_dir() -> Optional[str]:
    """Locate built panel assets next to a source checkout, if any."""
    import os

    env = os.environ.get("SPECGROUND_UI_DIR")
    if env and Path(env).is_dir():
        return env
    for base in (Path.cwd(), Path(__file__).resolve().parents[2]):
        cand = base / "frontend" / "dist"
        if cand.is_dir():
            return str(cand)
    return None
