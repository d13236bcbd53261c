"""Environment server and client over length-prefixed JSON frames.

Frame layout: a 4-byte big-endian unsigned length ``N`` (at most 16 MiB)
followed by ``N`` bytes of UTF-8 JSON, an object with keys ``type``, ``id``
and ``body``. Every request gets exactly one reply, either ``<TYPE>_REPLY``
or ``ERROR``, carrying the request's ``id``.

Requests and their bodies:

``HELLO``   ``{"version": "1"}``; reply echoes the version.
``CONFIG``  any of ``seed``, ``reward``, ``threshold``, ``max_tries``,
            ``stage``, ``action_space`` (``{"low", "high", "name"}``) and
            ``geometry`` (``{"chain", "table"}``). The first CONFIG, or any
            CONFIG carrying a ``seed`` or ``geometry``, builds a fresh
            environment; others change the live one in place. The reply
            reports the resulting ``config`` and ``geometry``.
``RESET``   ``{}``; reply ``{"observation": [12 numbers]}``.
``STEP``    ``{"action": [6 numbers]}``; reply ``observation``, ``reward``,
            ``done``, ``distance``, ``success``, ``tries``, ``exhausted``,
            ``truncated``.
``RENDER``  ``{}``; reply ``{"ppm": base64 P6 image}``.
``CLOSE``   ``{}``; the server replies, then ends the session.

``ERROR`` bodies are ``{"code", "message"}``. Malformed frames are answered
with ``id: null`` and close the connection; request-level errors leave the
session usable. Floats travel as shortest round-trip decimals, so remote and
in-process runs see bit-identical numbers.
"""
import base64
from dataclasses import dataclass, field
import json
import logging
import math
import socket
import socketserver
import struct
import threading

import numpy as np

from . import kinematics
from .environment import (ActionSpace, EpisodeConfig, Observation, ReachingEnv, UsageError,
                          builtin_action_space)

log = logging.getLogger(__name__)

PROTOCOL_VERSION = "1"
DEFAULT_PORT = 7777
MAX_FRAME = 16 * 1024 * 1024
REQUESTS = ("HELLO", "CONFIG", "RESET", "STEP", "RENDER", "CLOSE")
MESSAGE_TYPES = frozenset(REQUESTS + tuple(r + "_REPLY" for r in REQUESTS) + ("ERROR",))
_HEADER = struct.Struct(">I")


class FrameError(ValueError):
    """Base class for undecodable frames."""


class FrameTooLarge(FrameError):
    pass


class FrameTruncated(FrameError):
    pass


class FramePayloadError(FrameError):
    """Payload is not UTF-8, not JSON, or not a well-formed message."""


class TransportError(ConnectionError):
    """The connection failed, timed out or closed; distinct from env errors."""


class RemoteEnvError(RuntimeError):
    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass
class WireMessage:
    type: str
    id: int = None
    body: dict = field(default_factory=dict)


def _reject_constant(name):
    raise FramePayloadError(f"non-finite number {name} in payload")


def _finite_float(text):
    x = float(text)
    if not math.isfinite(x):
        raise FramePayloadError(f"number {text} overflows a 64-bit float")
    return x


def encode_frame(msg):
    if msg.type not in MESSAGE_TYPES:
        raise ValueError(f"unknown message type {msg.type!r}")
    payload = json.dumps({"type": msg.type, "id": msg.id, "body": msg.body},
                         allow_nan=False, separators=(",", ":")).encode("utf-8")
    if len(payload) > MAX_FRAME:
        raise FrameTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_FRAME}")
    return _HEADER.pack(len(payload)) + payload


def decode_payload(payload):
    try:
        text = payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FramePayloadError(f"payload is not valid UTF-8: {exc}") from None
    try:
        obj = json.loads(text, parse_constant=_reject_constant, parse_float=_finite_float)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise FramePayloadError(f"payload is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or set(obj) != {"type", "id", "body"}:
        raise FramePayloadError("payload must be an object with exactly type, id and body")
    if obj["type"] not in MESSAGE_TYPES:
        raise FramePayloadError(f"unknown message type {obj['type']!r}")
    mid = obj["id"]
    if mid is not None and (not isinstance(mid, int) or isinstance(mid, bool)):
        raise FramePayloadError("id must be an integer or null")
    if not isinstance(obj["body"], dict):
        raise FramePayloadError("body must be an object")
    return WireMessage(obj["type"], mid, obj["body"])


def decode_frame(data):
    """Decode the first frame in ``data``; returns ``(message, bytes_consumed)``."""
    if len(data) < _HEADER.size:
        raise FrameTruncated(f"need {_HEADER.size} header bytes, have {len(data)}")
    (n,) = _HEADER.unpack_from(data)
    if n > MAX_FRAME:
        raise FrameTooLarge(f"declared payload of {n} bytes exceeds {MAX_FRAME}")
    end = _HEADER.size + n
    if len(data) < end:
        raise FrameTruncated(f"declared {n} payload bytes, have {len(data) - _HEADER.size}")
    return decode_payload(bytes(data[_HEADER.size:end])), end


def _recv_exact(sock, n):
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return bytes(buf)
        buf.extend(chunk)
    return bytes(buf)


def read_frame(sock):
    """Read one message; ``None`` on a clean close before any header byte."""
    head = _recv_exact(sock, _HEADER.size)
    if not head:
        return None
    if len(head) < _HEADER.size:
        raise FrameTruncated("connection closed inside frame header")
    (n,) = _HEADER.unpack(head)
    if n > MAX_FRAME:
        raise FrameTooLarge(f"declared payload of {n} bytes exceeds {MAX_FRAME}")
    payload = _recv_exact(sock, n)
    if len(payload) < n:
        raise FrameTruncated("connection closed inside frame payload")
    return decode_payload(payload)


def fuzz_decoder(n_cases, seed=0):
    """Throw random and mutated frames at :func:`decode_frame`.

    A case passes if decoding raises :class:`FrameError` or yields a message
    that survives an encode/decode round trip unchanged. Returns the failing
    cases as ``(bytes, exception)`` pairs.
    """
    rng = np.random.default_rng(seed)
    samples = [encode_frame(m) for m in (
        WireMessage("HELLO", 1, {"version": PROTOCOL_VERSION}),
        WireMessage("CLOSE", 7, {}),
        WireMessage("STEP", 42, {"action": [0.1, -1.5, 3.0, 0.0, 1e-300, -0.0]}),
        WireMessage("ERROR", None, {"code": "usage", "message": "caf\u00e9"}),
    )]
    failures = []
    for i in range(n_cases):
        kind = i % 4
        if kind == 0:
            data = rng.bytes(int(rng.integers(0, 48)))
        elif kind == 1:
            frame = samples[int(rng.integers(len(samples)))]
            data = frame[:int(rng.integers(0, len(frame) + 1))]
        elif kind == 2:
            data = bytearray(samples[int(rng.integers(len(samples)))])
            for _ in range(int(rng.integers(1, 4))):
                data[int(rng.integers(len(data)))] = int(rng.integers(256))
            data = bytes(data)
        else:
            body = rng.bytes(int(rng.integers(0, 32)))
            data = _HEADER.pack(len(body) + int(rng.integers(-2, 3)) % 40) + body
        try:
            msg, _ = decode_frame(data)
            again, _ = decode_frame(encode_frame(msg))
            if again != msg:
                failures.append((data, AssertionError("round trip changed the message")))
        except FrameError:
            pass
        except Exception as exc:
            failures.append((data, exc))
    return failures


# -- server -------------------------------------------------------------------

def _action_space_body(space):
    return {"low": space.low.tolist(), "high": space.high.tolist(), "name": space.name}


def _geometry_body(chain, table):
    return {"chain": chain.to_dict(), "table": table.to_dict()}


class RequestError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class Session:
    """One connection's environment; nothing here is shared across sessions."""

    def __init__(self, base_config):
        self.base = dict(base_config or {})
        self.env = None
        self.reset_count = 0
        self.step_count = 0
        self.finished = False

    def handle(self, msg):
        handler = getattr(self, "_on_" + msg.type.lower(), None)
        if handler is None or msg.type not in REQUESTS:
            raise RequestError("bad_request", f"{msg.type} is not a request")
        return handler(msg.body)

    def _on_hello(self, body):
        version = body.get("version")
        if version != PROTOCOL_VERSION:
            raise RequestError("version", f"unsupported protocol version {version!r}; "
                                          f"server speaks {PROTOCOL_VERSION!r}")
        return {"version": PROTOCOL_VERSION}

    def _build(self, body):
        opts = dict(self.base)
        opts.update(body)
        geo = opts.get("geometry")
        if geo is None:
            chain, table = kinematics.load_geometry()
        else:
            chain = kinematics.KinematicChain.from_dict(geo["chain"])
            table = kinematics.TableGeometry.from_dict(geo["table"])
        space = (ActionSpace(**opts["action_space"]) if opts.get("action_space")
                 else builtin_action_space(opts.get("stage", "A1")))
        cfg = EpisodeConfig(opts.get("reward", "dense"), opts.get("threshold", 0.20),
                            opts.get("max_tries", 1), space)
        self.env = ReachingEnv(cfg, chain, table, seed=opts.get("seed"))

    def _on_config(self, body):
        known = {"seed", "reward", "threshold", "max_tries", "stage", "action_space", "geometry"}
        unknown = set(body) - known
        if unknown:
            raise RequestError("bad_request", f"unknown CONFIG fields {sorted(unknown)}")
        try:
            if self.env is None or "seed" in body or "geometry" in body:
                self._build(body)
            else:
                cfg = self.env.config
                if "reward" in body:
                    cfg.reward_kind = type(cfg.reward_kind)(body["reward"])
                if "threshold" in body:
                    self.env.threshold = body["threshold"]
                if "max_tries" in body:
                    if int(body["max_tries"]) < 1:
                        raise ValueError("max_tries must be >= 1")
                    cfg.max_tries = int(body["max_tries"])
                if "action_space" in body:
                    self.env.action_space = ActionSpace(**body["action_space"])
                elif "stage" in body:
                    self.env.action_space = builtin_action_space(body["stage"])
        except (ValueError, TypeError, KeyError) as exc:
            raise RequestError("bad_config", str(exc)) from None
        cfg = self.env.config
        return {"config": {"reward": cfg.reward_kind.value, "threshold": cfg.threshold,
                           "max_tries": cfg.max_tries,
                           "action_space": _action_space_body(cfg.action_space)},
                "geometry": _geometry_body(self.env.chain, self.env.table)}

    def _require_env(self):
        if self.env is None:
            raise RequestError("not_initialized", "session not initialized")

    def _on_reset(self, body):
        self._require_env()
        obs = self.env.reset()
        self.reset_count += 1
        return {"observation": obs.to_array().tolist()}

    def _on_step(self, body):
        self._require_env()
        if self.reset_count == 0:
            raise RequestError("not_initialized", "session not initialized")
        action = body.get("action")
        if not isinstance(action, list) or len(action) != 6:
            raise RequestError("bad_request", "STEP needs an action of 6 numbers")
        try:
            obs, reward, done, info = self.env.step(np.asarray(action, dtype=np.float64))
        except UsageError as exc:
            raise RequestError("usage", str(exc)) from None
        except (ValueError, TypeError) as exc:
            raise RequestError("bad_request", str(exc)) from None
        self.step_count += 1
        return {"observation": obs.to_array().tolist(), "reward": float(reward),
                "done": bool(done), "distance": float(info["distance"]),
                "success": bool(info["success"]), "tries": int(info["tries"]),
                "exhausted": bool(info["exhausted"]), "truncated": bool(info["truncated"])}

    def _on_render(self, body):
        self._require_env()
        if self.env.target is None:
            raise RequestError("not_initialized", "session not initialized")
        from .vision import encode_ppm, render_scene
        return {"ppm": base64.b64encode(encode_ppm(render_scene(self.env))).decode("ascii")}

    def _on_close(self, body):
        self.finished = True
        return {}


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        session = Session(self.server.base_config)
        while not session.finished:
            try:
                msg = read_frame(sock)
            except FrameError as exc:
                self._send(WireMessage("ERROR", None, {"code": "protocol", "message": str(exc)}))
                return
            except OSError:
                return
            if msg is None:
                return
            try:
                reply = WireMessage(msg.type + "_REPLY", msg.id, session.handle(msg))
            except RequestError as exc:
                reply = WireMessage("ERROR", msg.id, {"code": exc.code, "message": str(exc)})
            except Exception as exc:  # keep the server alive for other sessions
                log.exception("session failure")
                reply = WireMessage("ERROR", msg.id, {"code": "internal", "message": repr(exc)})
            if not self._send(reply):
                return

    def _send(self, msg):
        try:
            self.request.sendall(encode_frame(msg))
            return True
        except OSError:
            return False


class EnvServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, base_config=None):
        self.base_config = base_config or {}
        super().__init__(address, _Handler)


def parse_address(address, default_host="127.0.0.1"):
    if isinstance(address, tuple):
        return address[0], int(address[1])
    host, sep, port = str(address).rpartition(":")
    if not sep:
        return default_host, int(address) if str(address).isdigit() else DEFAULT_PORT
    return host or default_host, int(port)


def make_server(address=("127.0.0.1", DEFAULT_PORT), base_config=None):
    """Bound but not yet serving; call ``serve_forever`` (or use :func:`serve`)."""
    return EnvServer(parse_address(address), base_config)


def serve(address=("127.0.0.1", DEFAULT_PORT), base_config=None):
    with make_server(address, base_config) as server:
        log.info("environment server listening on %s:%d", *server.server_address[:2])
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def serve_in_thread(address=("127.0.0.1", 0), base_config=None):
    """Start a server on a background thread; returns it (``shutdown()`` to stop)."""
    server = make_server(address, base_config)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


# -- client -------------------------------------------------------------------

class RemoteEnv:
    """Drop-in stand-in for :class:`ReachingEnv` backed by a server session."""

    def __init__(self, address, timeout=10.0):
        host, port = parse_address(address)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._sock.settimeout(timeout)
        self._next_id = 0
        self.config = None
        self.chain = None
        self.table = None
        self.done = True
        self.target = None
        self.joints = np.zeros(6)
        self.request("HELLO", version=PROTOCOL_VERSION)

    def request(self, type_, **body):
        if self._sock is None:
            raise TransportError("connection is closed")
        self._next_id += 1
        mid = self._next_id
        try:
            self._sock.sendall(encode_frame(WireMessage(type_, mid, body)))
            reply = read_frame(self._sock)
        except (OSError, FrameError) as exc:
            self._drop()
            raise TransportError(f"{type_} failed: {exc}") from exc
        if reply is None:
            self._drop()
            raise TransportError(f"server closed the connection during {type_}")
        if reply.type == "ERROR":
            if reply.id is None:
                self._drop()
            raise RemoteEnvError(reply.body.get("code"), reply.body.get("message"))
        if reply.id != mid or reply.type != type_ + "_REPLY":
            self._drop()
            raise TransportError(f"unexpected reply {reply.type} id={reply.id} to {type_} id={mid}")
        return reply.body

    def _drop(self):
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def configure(self, seed=None, reward=None, threshold=None, max_tries=None, stage=None,
                  geometry=None, action_space=None):
        """Send CONFIG. ``geometry`` may be a geometry file path or a ``(chain, table)`` pair."""
        body = {}
        if seed is not None:
            body["seed"] = int(seed)
        if reward is not None:
            body["reward"] = getattr(reward, "value", reward)
        if threshold is not None:
            body["threshold"] = float(threshold)
        if max_tries is not None:
            body["max_tries"] = int(max_tries)
        if stage is not None:
            body["stage"] = stage
        if action_space is not None:
            body["action_space"] = _action_space_body(action_space)
        if geometry is not None:
            chain, table = kinematics.load_geometry(geometry) if isinstance(geometry, str) else geometry
            body["geometry"] = _geometry_body(chain, table)
        reply = self.request("CONFIG", **body)
        c = reply["config"]
        self.config = EpisodeConfig(c["reward"], c["threshold"], c["max_tries"],
                                    ActionSpace(**c["action_space"]))
        self.chain = kinematics.KinematicChain.from_dict(reply["geometry"]["chain"])
        self.table = kinematics.TableGeometry.from_dict(reply["geometry"]["table"])
        return self.config

    @property
    def action_space(self):
        return self.config.action_space

    @action_space.setter
    def action_space(self, space):
        self.configure(action_space=space)

    @property
    def threshold(self):
        return self.config.threshold

    @threshold.setter
    def threshold(self, tau):
        if tau != self.config.threshold:
            self.configure(threshold=tau)

    def reset(self):
        obs = Observation.from_array(np.asarray(self.request("RESET")["observation"]))
        self.target = obs.target_position.copy()
        self.joints = obs.joint_angles.copy()
        self.done = False
        return obs

    def step(self, action):
        a = np.asarray(action, dtype=np.float64)
        r = self.request("STEP", action=a.tolist())
        obs = Observation.from_array(np.asarray(r["observation"]))
        self.joints = obs.joint_angles.copy()
        self.done = r["done"]
        info = {k: r[k] for k in ("distance", "success", "tries", "exhausted", "truncated")}
        return obs, r["reward"], r["done"], info

    def render(self):
        from .vision import decode_ppm
        return decode_ppm(base64.b64decode(self.request("RENDER")["ppm"]))

    def close(self):
        if self._sock is None:
            return
        try:
            self.request("CLOSE")
        except (TransportError, RemoteEnvError):
            pass
        self._drop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
