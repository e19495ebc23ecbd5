"""HTTP service for crowd-sourced click collection.

A stimulus is an (image, absent object class) pair: subjects see the
scene and click the ten most plausible locations for an object that is
verifiably not present. The server hands out sessions of trials,
serves the stimulus images, validates submissions, and appends one
JSONL click-log line per accepted response. A pair retires once three
distinct sessions have submitted for it; on restart the server rebuilds
its progress from the log file.

Built on the stdlib threading HTTP server; one lock serializes state
changes and log appends.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .datasets import SceneDataset
from .humanmaps import ClickLog, validate_clicks
from .imageops import bilinear_resize, save_image

__all__ = [
    "CollectionConfig",
    "TrialAssignment",
    "build_collection_manifest",
    "CollectionState",
    "serve_collection",
]


@dataclass
class CollectionConfig:
    port: int = 8765
    trials_per_session: int = 20
    sessions_per_pair: int = 3
    pairs_per_image: int = 4
    image_size: int = 800
    required_clicks: int = 10

    def validate(self) -> None:
        if self.port < 0:  # 0 binds an ephemeral port
            raise ValueError("port must be non-negative")
        if min(
            self.trials_per_session,
            self.sessions_per_pair,
            self.pairs_per_image,
            self.image_size,
            self.required_clicks,
        ) < 1:
            raise ValueError("collection settings must be positive")


@dataclass
class TrialAssignment:
    trial_id: str
    pair_id: int
    image_id: int
    image_url: str
    target_class: str
    required_clicks: int

    def to_json(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "pair_id": self.pair_id,
            "image_id": self.image_id,
            "image_url": self.image_url,
            "target_class": self.target_class,
            "required_clicks": self.required_clicks,
        }


def build_collection_manifest(
    dataset: SceneDataset, out_dir, cfg: CollectionConfig, seed: int = 0
) -> Path:
    """Prepare stimuli: resized images plus absent-class pairs.

    Every emitted pair's target class is checked against the image's
    annotations; an image annotated with all classes contributes no
    pairs. Images are re-rendered at the collection resolution.
    """
    cfg.validate()
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    size = cfg.image_size
    pairs = []
    pair_id = 0
    for image_id in dataset.image_ids:
        present = {cat for _, cat in dataset.boxes(image_id)}
        absent = [c for c in sorted(dataset.categories) if c not in present]
        if not absent:
            continue
        chosen = (
            absent
            if len(absent) <= cfg.pairs_per_image
            else [absent[int(i)] for i in rng.choice(len(absent), cfg.pairs_per_image, replace=False)]
        )
        img = dataset.load_image(image_id)
        big = bilinear_resize(img.astype(np.float32), size, size)
        fname = f"images/{image_id:08d}.png"
        save_image(out / fname, np.clip(np.round(big), 0, 255).astype(np.uint8))
        for cat in sorted(chosen):
            name = dataset.categories[cat]
            if any(c == cat for _, c in dataset.boxes(image_id)):
                raise AssertionError(f"class {name} present in image {image_id}")
            pairs.append(
                {
                    "pair_id": pair_id,
                    "image_id": image_id,
                    "image_file": fname,
                    "target_class": name,
                }
            )
            pair_id += 1
    manifest = {
        "image_size": size,
        "required_clicks": cfg.required_clicks,
        "sessions_per_pair": cfg.sessions_per_pair,
        "pairs": pairs,
    }
    (out / "collection_manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return out


class CollectionState:
    """Sessions, per-pair completion counts, and the click log."""

    def __init__(self, workdir, cfg: CollectionConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.workdir = Path(workdir)
        manifest = json.loads(
            (self.workdir / "collection_manifest.json").read_text(encoding="utf-8")
        )
        self.image_size = int(manifest["image_size"])
        self.pairs = {int(p["pair_id"]): p for p in manifest["pairs"]}
        self.log_path = self.workdir / "clicks.jsonl"
        self.lock = threading.Lock()
        self.rng = np.random.default_rng(seed)
        self.sessions: dict[str, dict[str, TrialAssignment]] = {}
        self.submitted: set[tuple[str, str]] = set()
        self.completed_by: dict[int, set[str]] = {pid: set() for pid in self.pairs}
        self._replay_log()

    def _replay_log(self) -> None:
        if not self.log_path.exists():
            return
        for line in self.log_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            pid = int(rec["pair_id"])
            sid = str(rec["session_id"])
            if pid in self.completed_by:
                self.completed_by[pid].add(sid)
            self.submitted.add((sid, str(rec["trial_id"])))

    def eligible_pairs(self) -> list[int]:
        cap = self.cfg.sessions_per_pair
        return [pid for pid, done in sorted(self.completed_by.items()) if len(done) < cap]

    def new_session(self) -> tuple[str, list[TrialAssignment]]:
        with self.lock:
            pool = self.eligible_pairs()
            if not pool:
                raise LookupError("all stimulus pairs have been completed")
            n = min(self.cfg.trials_per_session, len(pool))
            picked = [pool[int(i)] for i in self.rng.choice(len(pool), n, replace=False)]
            session_id = uuid.uuid4().hex
            trials = []
            for pid in picked:
                pair = self.pairs[pid]
                trials.append(
                    TrialAssignment(
                        trial_id=uuid.uuid4().hex,
                        pair_id=pid,
                        image_id=int(pair["image_id"]),
                        image_url=f"/api/image/{int(pair['image_id'])}",
                        target_class=pair["target_class"],
                        required_clicks=self.cfg.required_clicks,
                    )
                )
            self.sessions[session_id] = {t.trial_id: t for t in trials}
            return session_id, trials

    def image_bytes(self, image_id: int) -> bytes | None:
        for pair in self.pairs.values():
            if int(pair["image_id"]) == image_id:
                path = self.workdir / pair["image_file"]
                return path.read_bytes() if path.exists() else None
        return None

    def submit(self, session_id: str, trial_id: str, clicks: list[dict]) -> tuple[int, dict]:
        """Returns (http status, response body)."""
        parsed = []
        for c in clicks:
            if not isinstance(c, dict) or not {"x", "y", "t_ms"} <= set(c):
                return 400, {"error": "each click needs integer x, y, t_ms"}
            try:
                parsed.append((int(c["x"]), int(c["y"]), int(c["t_ms"])))
            except (TypeError, ValueError):
                return 400, {"error": "each click needs integer x, y, t_ms"}
        with self.lock:
            trials = self.sessions.get(session_id)
            if trials is None or trial_id not in trials:
                return 404, {"error": "unknown session or trial"}
            if (session_id, trial_id) in self.submitted:
                return 409, {"error": "trial already submitted"}
            trial = trials[trial_id]
            log = ClickLog(
                image_id=trial.image_id,
                target_class=trial.target_class,
                subject_id=session_id,
                clicks=parsed,
                image_size=(self.image_size, self.image_size),
            )
            violations = validate_clicks(log, required=self.cfg.required_clicks)
            if violations:
                return 422, {"violations": violations}
            rec = json.loads(log.to_json())
            rec.update(pair_id=trial.pair_id, session_id=session_id, trial_id=trial_id)
            with open(self.log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(rec, sort_keys=True) + "\n")
                f.flush()
            self.submitted.add((session_id, trial_id))
            self.completed_by[trial.pair_id].add(session_id)
            remaining = sum(
                1 for t in trials.values() if (session_id, t.trial_id) not in self.submitted
            )
            return 200, {"status": "ok", "remaining": remaining}


_MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
}


def _make_handler(state: CollectionState, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def _send_json(self, status: int, body: dict) -> None:
            payload = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def _send_bytes(self, data: bytes, ctype: str) -> None:
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/health":
                self._send_json(200, {"status": "ok"})
                return
            if path == "/api/session":
                try:
                    session_id, trials = state.new_session()
                except LookupError as e:
                    self._send_json(409, {"error": str(e)})
                    return
                self._send_json(
                    200,
                    {
                        "session_id": session_id,
                        "image_size": state.image_size,
                        "trials": [t.to_json() for t in trials],
                    },
                )
                return
            if path.startswith("/api/image/"):
                tail = path.rsplit("/", 1)[-1]
                try:
                    image_id = int(tail)
                except ValueError:
                    self._send_json(400, {"error": "image id must be an integer"})
                    return
                data = state.image_bytes(image_id)
                if data is None:
                    self._send_json(404, {"error": f"no image {image_id}"})
                    return
                self._send_bytes(data, "image/png")
                return
            if ui_dir is not None:
                rel = "index.html" if path == "/" else path.lstrip("/")
                target = (ui_dir / rel).resolve()
                if target.is_file() and ui_dir.resolve() in target.parents:
                    ctype = _MIME.get(target.suffix, "application/octet-stream")
                    self._send_bytes(target.read_bytes(), ctype)
                    return
            self._send_json(404, {"error": "not found"})

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            if path != "/api/response":
                self._send_json(404, {"error": "not found"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (ValueError, json.JSONDecodeError):
                self._send_json(400, {"error": "malformed JSON body"})
                return
            if not isinstance(body, dict) or not {
                "session_id",
                "trial_id",
                "clicks",
            } <= set(body):
                self._send_json(400, {"error": "need session_id, trial_id, clicks"})
                return
            if not isinstance(body["clicks"], list):
                self._send_json(400, {"error": "clicks must be a list"})
                return
            status, resp = state.submit(
                str(body["session_id"]), str(body["trial_id"]), body["clicks"]
            )
            self._send_json(status, resp)

    return Handler


def serve_collection(
    workdir,
    cfg: CollectionConfig,
    ui_dir=None,
    seed: int = 0,
    started_cb=None,
) -> None:
    """Run the collection server until interrupted.

    ``started_cb`` (if given) receives the listening server object;
    callers can read ``server_address`` and request ``shutdown()``.
    """
    state = CollectionState(workdir, cfg, seed=seed)
    ui = Path(ui_dir) if ui_dir is not None else None
    handler = _make_handler(state, ui)
    server = ThreadingHTTPServer(("127.0.0.1", cfg.port), handler)
    if started_cb is not None:
        started_cb(server)
    try:
        server.serve_forever()
    finally:
        server.server_close()
