"""HTTP service for live human-plays-receiver sessions.

JSON over HTTP under /v1: create a session against a stored checkpoint,
fetch the pending round (two rendered scenes in shuffled order plus the
sender's symbol), submit a choice, read running statistics. Round fetches are
idempotent, choices are submit-once, and the round payload never encodes
which side is the target.
"""

from __future__ import annotations

import copy
import json
import math
import os
import re
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .agents import SenderParams, sender_forward
from .nn import GibbsConfig, sgd_apply
from .agents import sender_logprob_grad
from .persistence import load_checkpoint, load_world
from .scenes import render_scene
from .training import TrainConfig
from .world import GamePair, World, sample_game

API_PREFIX = "/v1"


def binomial_p_value(wins: int, rounds: int) -> float:
    """Two-sided exact binomial test against p = 0.5."""
    if rounds == 0:
        return 1.0
    tail = min(wins, rounds - wins)
    low = sum(math.comb(rounds, k) for k in range(0, tail + 1)) / 2.0**rounds
    return min(1.0, 2.0 * low)


@dataclass
class PendingRound:
    round_id: str
    pair: GamePair
    symbol: int
    shuffle: tuple[int, int]  # presented slot -> original side (0=L, 1=R)
    view: dict


@dataclass
class Session:
    session_id: str
    checkpoint_id: str
    mode: str
    online_update: bool
    sender: SenderParams
    train_config: TrainConfig
    label_set: dict[int, int] | None
    world: World
    rng: np.random.Generator
    seed: int
    rounds: int = 0
    wins: int = 0
    pending: PendingRound | None = None
    pending_action: object = None
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def stats(self) -> dict:
        return {
            "session_id": self.session_id,
            "rounds": self.rounds,
            "wins": self.wins,
            "success_rate": (100.0 * self.wins / self.rounds) if self.rounds else None,
            "p_value_vs_chance": binomial_p_value(self.wins, self.rounds),
            "online_update": self.online_update,
        }


class PlayServer:
    """Threaded JSON-over-HTTP server around a run directory.

    The run directory provides `world.json` and `checkpoint.json` (registered
    as checkpoint id "default"); request bodies may also name other
    checkpoint files relative to the run directory.
    """

    SNAPSHOT_EVERY = 10  # rounds between session-state snapshots

    def __init__(
        self,
        run_dir: str,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: str | None = None,
        expose_target: bool = False,
        base_seed: int = 20_000,
    ):
        self.run_dir = run_dir
        self.world = load_world(os.path.join(run_dir, "world.json"))
        self.static_dir = static_dir
        self.expose_target = expose_target
        self.base_seed = base_seed
        self.sessions: dict[str, Session] = {}
        self.session_counter = 0
        self.lock = threading.Lock()
        self._checkpoints: dict[str, tuple] = {}
        self._rounds_since_snapshot = 0

        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.port = self.httpd.server_address[1]
        self._serving = threading.Event()

    # -- lifecycle

    def serve_forever(self):
        self._serving.set()
        self.httpd.serve_forever()

    def shutdown(self):
        # HTTPServer.shutdown blocks forever unless serve_forever is running.
        if self._serving.is_set():
            self.httpd.shutdown()
        self.httpd.server_close()

    # -- checkpoint registry

    def _load_checkpoint(self, name: str):
        key = name or "default"
        if key in self._checkpoints:
            return self._checkpoints[key]
        filename = "checkpoint.json" if key == "default" else key
        path = os.path.normpath(os.path.join(self.run_dir, filename))
        if not path.startswith(os.path.normpath(self.run_dir)) or not os.path.exists(path):
            raise KeyError(key)
        ckpt = load_checkpoint(path)
        self._checkpoints[key] = ckpt
        return ckpt

    # -- session operations

    def create_session(self, body: dict) -> Session:
        name = body.get("checkpoint", "default")
        if not isinstance(name, str):
            raise ValueError("checkpoint must be a string id or relative path")
        ckpt = self._load_checkpoint(name)
        mode = body.get("mode", ckpt.train_config.mode)
        if mode not in ("instance_level", "class_level"):
            raise ValueError(f"unknown mode {mode!r}")
        online_update = bool(body.get("online_update", False))
        with self.lock:
            self.session_counter += 1
            counter = self.session_counter
        seed = int(body.get("seed", self.base_seed + counter))
        sender = copy.deepcopy(ckpt.sender) if online_update else ckpt.sender
        session = Session(
            session_id=str(uuid.uuid4()),
            checkpoint_id=name,
            mode=mode,
            online_update=online_update,
            sender=sender,
            train_config=ckpt.train_config,
            label_set=ckpt.label_set,
            world=self.world,
            rng=np.random.default_rng(seed),
            seed=seed,
        )
        with self.lock:
            self.sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        with self.lock:
            return self.sessions[session_id]

    def next_round(self, session: Session) -> dict:
        with session.lock:
            if session.pending is not None:
                return session.pending.view
            pair = sample_game(session.world, session.mode, session.rng)
            g = session.train_config.gibbs()
            action = sender_forward(
                session.sender,
                pair.sender_target.features,
                pair.sender_distractor.features,
                g,
                session.rng,
            )
            shuffle = (0, 1) if session.rng.integers(0, 2) == 0 else (1, 0)
            presented = (pair.left, pair.right) if shuffle == (0, 1) else (pair.right, pair.left)
            label = None
            if session.label_set:
                by_symbol = {s: c for c, s in session.label_set.items()}
                concept = by_symbol.get(action.symbol)
                if concept is not None:
                    label = session.world.concept_name(concept)
            view = {
                "round_id": str(uuid.uuid4()),
                "scenes": [render_scene(inst, session.world).to_dict() for inst in presented],
                "symbol": action.symbol,
                "label": label,
            }
            session.pending = PendingRound(view["round_id"], pair, action.symbol, shuffle, view)
            session.pending_action = action
            return view

    def submit_choice(self, session: Session, body: dict) -> dict:
        side = body.get("side")
        if side not in ("L", "R"):
            raise ValueError(f"side must be 'L' or 'R', got {side!r}")
        with session.lock:
            pending = session.pending
            if pending is None or body.get("round_id") != pending.round_id:
                raise StaleRoundError("no pending round with that round_id")
            picked_slot = 0 if side == "L" else 1
            original = "L" if pending.shuffle[picked_slot] == 0 else "R"
            correct = original == pending.pair.target_side
            session.rounds += 1
            session.wins += int(correct)
            session.history.append(
                {
                    "round_id": pending.round_id,
                    "symbol": pending.symbol,
                    "picked": side,
                    "correct": correct,
                }
            )
            if session.online_update:
                reward = 1.0 if correct else 0.0
                grads = sender_logprob_grad(session.sender, session.pending_action)
                if hasattr(grads, "pairconv"):
                    grads.pairconv.combiner -= grads.pairconv.combiner.mean()
                session.sender = sgd_apply(session.sender, grads, -session.train_config.effective_lr() * reward)
            session.pending = None
            session.pending_action = None
            result = {"correct": correct, "stats": session.stats()}
        self._maybe_snapshot()
        return result

    def _maybe_snapshot(self):
        """Periodic JSON snapshot of all session states (stats + round log)."""
        with self.lock:
            self._rounds_since_snapshot += 1
            if self._rounds_since_snapshot < self.SNAPSHOT_EVERY:
                return
            self._rounds_since_snapshot = 0
            sessions = list(self.sessions.values())
        doc = {
            "schema_version": "sessions_snapshot/1",
            "sessions": [
                {**s.stats(), "seed": s.seed, "checkpoint": s.checkpoint_id,
                 "mode": s.mode, "history": list(s.history)}
                for s in sessions
            ],
        }
        from .persistence import atomic_write_json

        atomic_write_json(os.path.join(self.run_dir, "sessions_snapshot.json"), doc)

    def debug_target(self, session: Session) -> dict:
        if not self.expose_target:
            raise KeyError("debug endpoint disabled")
        with session.lock:
            if session.pending is None:
                raise StaleRoundError("no pending round")
            slot = session.pending.shuffle.index(
                0 if session.pending.pair.target_side == "L" else 1
            )
            return {
                "round_id": session.pending.round_id,
                "target_side_presented": "L" if slot == 0 else "R",
            }


class StaleRoundError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# HTTP plumbing

_SESSION_RE = re.compile(rf"^{API_PREFIX}/sessions/([0-9a-f-]+)/(round|choice|stats|debug/target)$")


def _make_handler(server: PlayServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, code: int, doc: dict):
            payload = json.dumps(doc).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(payload)

        def _error(self, code: int, message: str):
            self._send(code, {"error": message})

        def _body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            raw = self.rfile.read(length)
            doc = json.loads(raw)
            if not isinstance(doc, dict):
                raise ValueError("body must be a JSON object")
            return doc

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_POST(self):
            try:
                if self.path == f"{API_PREFIX}/sessions":
                    try:
                        body = self._body()
                    except (ValueError, json.JSONDecodeError) as exc:
                        return self._error(400, f"bad request body: {exc}")
                    try:
                        session = server.create_session(body)
                    except KeyError as exc:
                        return self._error(404, f"unknown checkpoint: {exc.args[0]}")
                    except ValueError as exc:
                        return self._error(400, str(exc))
                    return self._send(201, {"session_id": session.session_id})

                m = _SESSION_RE.match(self.path)
                if m and m.group(2) == "choice":
                    try:
                        session = server.get_session(m.group(1))
                    except KeyError:
                        return self._error(404, "unknown session")
                    try:
                        body = self._body()
                    except (ValueError, json.JSONDecodeError) as exc:
                        return self._error(400, f"bad request body: {exc}")
                    try:
                        return self._send(200, server.submit_choice(session, body))
                    except StaleRoundError as exc:
                        return self._error(409, str(exc))
                    except ValueError as exc:
                        return self._error(400, str(exc))
                return self._error(404, "no such endpoint")
            except Exception as exc:  # last-resort guard
                return self._error(500, f"internal error: {exc}")

        def do_GET(self):
            try:
                m = _SESSION_RE.match(self.path)
                if m:
                    try:
                        session = server.get_session(m.group(1))
                    except KeyError:
                        return self._error(404, "unknown session")
                    kind = m.group(2)
                    if kind == "round":
                        return self._send(200, server.next_round(session))
                    if kind == "stats":
                        return self._send(200, session.stats())
                    if kind == "debug/target":
                        try:
                            return self._send(200, server.debug_target(session))
                        except KeyError:
                            return self._error(404, "debug endpoint disabled")
                        except StaleRoundError as exc:
                            return self._error(409, str(exc))
                if self.path == f"{API_PREFIX}/healthz":
                    return self._send(200, {"status": "ok"})
                if server.static_dir:
                    return self._serve_static()
                return self._error(404, "no such endpoint")
            except Exception as exc:
                return self._error(500, f"internal error: {exc}")

        def _serve_static(self):
            rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
            path = os.path.normpath(os.path.join(server.static_dir, rel))
            if not path.startswith(os.path.normpath(server.static_dir)) or not os.path.isfile(path):
                return self._error(404, "not found")
            types = {
                ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                ".svg": "image/svg+xml", ".json": "application/json",
            }
            ctype = types.get(os.path.splitext(path)[1], "application/octet-stream")
            with open(path, "rb") as fh:
                data = fh.read()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler
