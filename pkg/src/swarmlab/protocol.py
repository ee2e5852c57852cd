"""Length-delimited JSON record protocol shared by the session server and clients.

Wire format: each record is the decimal byte length of a UTF-8 JSON document,
a newline, the document, and a trailing newline. Every record carries a
protocol version field "v"; every server-to-client record carries a strictly
increasing sequence number "seq".
"""

from __future__ import annotations

import json
import socket

PROTOCOL_VERSION = 1
MAX_RECORD_BYTES = 16 * 1024 * 1024


def encode_record(record: dict) -> bytes:
    payload = json.dumps(record, separators=(",", ":")).encode("utf-8")
    return f"{len(payload)}\n".encode("ascii") + payload + b"\n"


class RecordDecoder:
    """Incremental decoder: feed bytes, iterate complete records."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buf.extend(data)
        out = []
        while True:
            nl = self._buf.find(b"\n")
            if nl < 0:
                break
            try:
                length = int(self._buf[:nl])
            except ValueError:
                raise ValueError("malformed record length header")
            if not 0 <= length <= MAX_RECORD_BYTES:
                raise ValueError(f"record length {length} out of bounds")
            end = nl + 1 + length + 1
            if len(self._buf) < end:
                break
            payload = bytes(self._buf[nl + 1:nl + 1 + length])
            if self._buf[end - 1:end] != b"\n":
                raise ValueError("record missing trailing newline")
            del self._buf[:end]
            out.append(json.loads(payload.decode("utf-8")))
        return out


class ProtocolClient:
    """Blocking TCP client for the session protocol; used by tests and scripts."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self._decoder = RecordDecoder()
        self._pending: list[dict] = []

    def send(self, record: dict) -> None:
        record = {"v": PROTOCOL_VERSION, **record}
        self.sock.sendall(encode_record(record))

    def recv(self) -> dict:
        while not self._pending:
            data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("server closed the connection")
            self._pending.extend(self._decoder.feed(data))
        return self._pending.pop(0)

    def recv_type(self, msg_type: str) -> dict:
        """Pop messages until one of the given type arrives (errors raise)."""
        while True:
            msg = self.recv()
            if msg.get("type") == msg_type:
                return msg
            if msg.get("type") == "error":
                raise RuntimeError(f"server error: {msg.get('message')}")

    def command(self, cmd: str, ack_type: str = "operator_ack", **fields) -> dict:
        self.send({"cmd": cmd, **fields})
        return self.recv_type(ack_type)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass
