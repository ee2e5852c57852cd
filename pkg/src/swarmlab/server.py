"""Session protocol server.

One exclusive simulation loop thread per session applies queued commands at
step boundaries and streams tile frames to subscribed connections. The same
JSON record schema is served over two transports: length-delimited records on
raw TCP, and one record per message over WebSocket (browsers cannot open raw
sockets). Sequence numbers increase strictly per connection, and a session's
messages are never reordered.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import queue
import socketserver
import threading
import time

import numpy as np

from .metrics import color_for_params
from .protocol import PROTOCOL_VERSION, RecordDecoder, encode_record
from .recipe import serialize_recipe
from .rng import SeededRng
from .session import ModeError, Session, SessionConfig, UnknownTileError

FRAME_INTERVAL = 1.0 / 20.0
DEFAULT_STEPS_PER_SECOND = 20.0
_WS_GUID = b"258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class Connection:
    """One client link; serializes writes and stamps sequence numbers."""

    def __init__(self, write_payload):
        self._write_payload = write_payload
        self._lock = threading.Lock()
        self.seq = 0
        self.alive = True

    def send(self, record: dict) -> bool:
        with self._lock:
            if not self.alive:
                return False
            self.seq += 1
            payload = {"v": PROTOCOL_VERSION, "seq": self.seq, **record}
            try:
                self._write_payload(payload)
                return True
            except OSError:
                self.alive = False
                return False


def _tile_frame(tile) -> dict:
    world = tile.world
    uniq, inverse = np.unique(world.params, axis=0, return_inverse=True)
    palette = ["#%02x%02x%02x" % color_for_params(row) for row in uniq]
    return {
        "tile": tile.id,
        "size": world.size,
        "positions": [[round(float(x), 2), round(float(y), 2)] for x, y in world.pos],
        "colors": [palette[k] for k in inverse],
    }


class SessionHost:
    """Owns one session and its simulation loop thread."""

    def __init__(self, session_id: str, session: Session, seed: int):
        self.id = session_id
        self.session = session
        self.seed = seed
        self.paused = False
        self.steps_per_second = DEFAULT_STEPS_PER_SECOND
        self.commands: queue.Queue = queue.Queue()
        self.subscribers: list[Connection] = []
        self.watchers: list[Connection] = []
        self._stop = threading.Event()
        self.thread = threading.Thread(target=self._loop, name=f"session-{session_id}",
                                       daemon=True)

    def start(self) -> None:
        self.thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.thread.join(timeout=5)

    def submit(self, record: dict, conn: Connection) -> None:
        self.commands.put((record, conn))

    # -- loop ------------------------------------------------------------------

    def _loop(self) -> None:
        next_step = time.monotonic()
        next_frame = time.monotonic()
        while not self._stop.is_set():
            while True:
                try:
                    record, conn = self.commands.get_nowait()
                except queue.Empty:
                    break
                self._apply(record, conn)
            now = time.monotonic()
            if not self.paused and now >= next_step:
                self.session.step_all(1)
                next_step += 1.0 / max(self.steps_per_second, 1e-6)
                if next_step < now - 0.25:
                    next_step = now  # fell behind; do not spiral
            if now >= next_frame:
                if not self.paused and self.subscribers:
                    self._send_frames()
                next_frame = now + FRAME_INTERVAL
            delay = min(next_frame, next_step if not self.paused else now + 0.01)
            time.sleep(min(max(delay - time.monotonic(), 0.0), 0.01))

    def _send_frames(self) -> None:
        frames = [_tile_frame(t) for t in self.session.tiles]
        msg = {"type": "tile_frames", "session": self.id,
               "step": self.session.step, "frames": frames}
        self._broadcast(msg, self.subscribers)

    def _broadcast(self, msg: dict, conns: list[Connection]) -> None:
        for conn in list(conns):
            if not conn.send(msg):
                self.detach(conn)

    def detach(self, conn: Connection) -> None:
        if conn in self.subscribers:
            self.subscribers.remove(conn)
        if conn in self.watchers:
            self.watchers.remove(conn)

    def state_message(self) -> dict:
        s = self.session
        return {
            "type": "session_state", "session": self.id, "mode": s.mode,
            "paused": self.paused, "steps_per_second": self.steps_per_second,
            "step": s.step, "seed": self.seed,
            "tiles": [{"id": t.id, "entries": len(t.recipe),
                       "particles": t.world.n, "created_step": t.created_step}
                      for t in s.tiles],
        }

    def _push_state(self, conn: Connection) -> None:
        targets = {id(c): c for c in (*self.watchers, *self.subscribers, conn)}
        self._broadcast(self.state_message(), list(targets.values()))

    # -- commands ---------------------------------------------------------------

    def _apply(self, record: dict, conn: Connection) -> None:
        cmd = record.get("cmd")
        s = self.session
        try:
            if cmd == "mutate":
                tile = s.mutate_tile(record["tile"])
                self._ack(conn, cmd, [record["tile"]], [tile.id])
            elif cmd == "mix":
                tile = s.mix_tiles(record["a"], record["b"])
                self._ack(conn, cmd, [record["a"], record["b"]], [tile.id])
            elif cmd == "replicate":
                tile = s.replicate_tile(record["tile"])
                self._ack(conn, cmd, [record["tile"]], [tile.id])
            elif cmd == "kill":
                s.kill_tile(record["tile"])
                self._ack(conn, cmd, [record["tile"]], [])
            elif cmd == "random":
                tile = s.random_tile()
                self._ack(conn, cmd, [], [tile.id])
            elif cmd == "niec_select":
                tiles = s.niec_generation(list(record["tiles"]))
                self._ack(conn, cmd, list(record["tiles"]), [t.id for t in tiles])
            elif cmd == "pause":
                self.paused = True
                self._ack(conn, cmd, [], [])
            elif cmd == "resume":
                self.paused = False
                self._ack(conn, cmd, [], [])
            elif cmd == "set_speed":
                value = float(record["steps_per_second"])
                self.steps_per_second = min(max(value, 0.1), 1000.0)
                self._ack(conn, cmd, [value], [])
            elif cmd == "subscribe_frames":
                enabled = bool(record.get("enabled", True))
                self.detach(conn)
                if enabled:
                    self.subscribers.append(conn)
                if conn not in self.watchers:
                    self.watchers.append(conn)
                self._ack(conn, cmd, [enabled], [])
                return
            elif cmd == "get_recipe":
                tile = s.tile(record["tile"])
                conn.send({"type": "recipe_text", "session": self.id,
                           "tile": tile.id, "text": serialize_recipe(tile.recipe)})
                return
            elif cmd == "get_log":
                conn.send({"type": "operator_log", "session": self.id,
                           "mode": s.mode, "seed": self.seed,
                           "records": [{"op": r.op, "args": list(r.args),
                                        "result_ids": list(r.result_ids),
                                        "step": r.step, "rng_draws": r.rng_draws}
                                       for r in s.history]})
                return
            elif cmd == "get_state":
                conn.send(self.state_message())
                return
            else:
                conn.send({"type": "error", "session": self.id,
                           "message": f"unknown command {cmd!r}"})
                return
        except (UnknownTileError, ModeError, ValueError, KeyError, TypeError) as exc:
            conn.send({"type": "error", "session": self.id, "message": str(exc)})
            return
        self._push_state(conn)

    def _ack(self, conn: Connection, op: str, args: list, result_ids: list) -> None:
        conn.send({"type": "operator_ack", "session": self.id, "op": op,
                   "args": args, "result_ids": result_ids})


class LabServer:
    """Threaded TCP/WebSocket server hosting interactive sessions."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 session_config: SessionConfig | None = None):
        self.session_config = session_config
        self.hosts: dict[str, SessionHost] = {}
        self._lock = threading.Lock()
        self._next_session = 1
        server = self

        class _Handler(socketserver.StreamRequestHandler):
            def handle(self):
                server._handle_connection(self)

        self._tcp = socketserver.ThreadingTCPServer((host, port), _Handler,
                                                    bind_and_activate=True)
        self._tcp.daemon_threads = True
        self.address = self._tcp.server_address
        self._serve_thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> None:
        self._serve_thread = threading.Thread(target=self._tcp.serve_forever,
                                              name="lab-server", daemon=True)
        self._serve_thread.start()

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def shutdown(self) -> None:
        for host in list(self.hosts.values()):
            host.stop()
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._serve_thread is not None:
            self._serve_thread.join(timeout=5)

    # -- connection handling --------------------------------------------------------

    def _handle_connection(self, handler: socketserver.StreamRequestHandler) -> None:
        first = handler.rfile.read(1)
        if not first:
            return
        if first == b"G":
            self._handle_websocket(handler)
        else:
            self._handle_framed(handler, first)

    def _handle_framed(self, handler, first: bytes) -> None:
        conn = Connection(lambda payload: handler.wfile.write(encode_record(payload)))
        decoder = RecordDecoder()
        buffered = first
        try:
            while True:
                for record in decoder.feed(buffered):
                    self.dispatch(record, conn)
                buffered = handler.rfile.read1(65536) if hasattr(handler.rfile, "read1") \
                    else handler.rfile.read(65536)
                if not buffered:
                    break
        except (ValueError, OSError, ConnectionError):
            pass
        finally:
            conn.alive = False
            self._detach_everywhere(conn)

    # -- websocket transport ----------------------------------------------------------

    def _handle_websocket(self, handler) -> None:
        request_line = b"G" + handler.rfile.readline()
        headers = {}
        while True:
            line = handler.rfile.readline()
            if line in (b"\r\n", b"\n", b""):
                break
            name, _, value = line.decode("latin-1").partition(":")
            headers[name.strip().lower()] = value.strip()
        key = headers.get("sec-websocket-key")
        if not request_line.startswith(b"GET ") or key is None:
            handler.wfile.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return
        accept = base64.b64encode(
            hashlib.sha1(key.encode("latin-1") + _WS_GUID).digest()).decode("ascii")
        handler.wfile.write(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + accept.encode("ascii") + b"\r\n\r\n")

        def write_payload(payload: dict) -> None:
            handler.wfile.write(_ws_encode_text(
                json.dumps(payload, separators=(",", ":")).encode("utf-8")))

        conn = Connection(write_payload)
        try:
            message = bytearray()
            while True:
                frame = _ws_read_frame(handler.rfile)
                if frame is None:
                    break
                fin, opcode, payload = frame
                if opcode == 8:  # close
                    try:
                        handler.wfile.write(bytes([0x88, 0]))
                    except OSError:
                        pass
                    break
                if opcode == 9:  # ping -> pong
                    handler.wfile.write(_ws_encode(0x0A, payload))
                    continue
                if opcode in (1, 2, 0):
                    message.extend(payload)
                    if fin:
                        self.dispatch(json.loads(message.decode("utf-8")), conn)
                        message.clear()
        except (ValueError, OSError, ConnectionError):
            pass
        finally:
            conn.alive = False
            self._detach_everywhere(conn)

    # -- dispatch ----------------------------------------------------------------------

    def _detach_everywhere(self, conn: Connection) -> None:
        with self._lock:
            hosts = list(self.hosts.values())
        for host in hosts:
            host.detach(conn)

    def dispatch(self, record: dict, conn: Connection) -> None:
        cmd = record.get("cmd")
        if cmd == "create_session":
            self._create_session(record, conn)
            return
        session_id = record.get("session")
        with self._lock:
            host = self.hosts.get(session_id)
        if host is None:
            conn.send({"type": "error", "session": session_id,
                       "message": f"unknown session {session_id!r}"})
            return
        host.submit(record, conn)

    def _create_session(self, record: dict, conn: Connection) -> None:
        mode = record.get("mode", "hiec")
        tile_count = int(record.get("tile_count", 6))
        seed = int(record.get("seed", int.from_bytes(os.urandom(7), "big")))
        config = self.session_config
        if config is None and mode == "niec":
            config = SessionConfig(generation_size=tile_count)
        try:
            session = Session(mode, SeededRng(seed), config)
            session.seed_tiles(tile_count)
        except (ModeError, ValueError) as exc:
            conn.send({"type": "error", "message": str(exc)})
            return
        with self._lock:
            session_id = f"s{self._next_session}"
            self._next_session += 1
            host = SessionHost(session_id, session, seed)
            self.hosts[session_id] = host
        conn.send({"type": "session_created", "session": session_id,
                   "mode": mode, "seed": seed})
        conn.send(host.state_message())
        host.watchers.append(conn)
        host.start()


def _ws_encode(opcode: int, payload: bytes) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += n.to_bytes(2, "big")
    else:
        header.append(127)
        header += n.to_bytes(8, "big")
    return bytes(header) + payload


def _ws_encode_text(payload: bytes) -> bytes:
    return _ws_encode(0x01, payload)


def _read_exact(rfile, n: int) -> bytes | None:
    data = rfile.read(n)
    if data is None or len(data) < n:
        return None
    return data


def _ws_read_frame(rfile):
    head = _read_exact(rfile, 2)
    if head is None:
        return None
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        raw = _read_exact(rfile, 2)
        if raw is None:
            return None
        length = int.from_bytes(raw, "big")
    elif length == 127:
        raw = _read_exact(rfile, 8)
        if raw is None:
            return None
        length = int.from_bytes(raw, "big")
    mask = None
    if masked:
        mask = _read_exact(rfile, 4)
        if mask is None:
            return None
    payload = _read_exact(rfile, length) if length else b""
    if payload is None:
        return None
    if mask:
        payload = bytes(b ^ mask[i & 3] for i, b in enumerate(payload))
    return fin, opcode, payload


def serve_session(bind: str, session_config: SessionConfig | None = None) -> None:
    """Run the session server in the foreground until interrupted."""
    host, _, port = bind.rpartition(":")
    server = LabServer(host or "127.0.0.1", int(port), session_config)
    print(f"session server listening on {server.address[0]}:{server.address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
