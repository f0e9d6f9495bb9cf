"""Framed request/response protocol across the trust boundary.

The untrusted gateway never touches enclave state directly: it sends
frames into a single queue owned by a worker thread that holds the
enclave, and receives exactly one response frame per request, matching
request ids. An optional two-process mode speaks the same frames over a
unix socket as length-prefixed JSON.
"""

from __future__ import annotations

import base64
import json
import queue
import socket
import struct
import threading
import uuid
from dataclasses import dataclass
from enum import Enum

from . import lang
from .checker import QueryRejected
from .enclave import BudgetExhausted, Enclave, SchemaError
from .envelope import DecryptError, Envelope, MalformedEnvelope


class FrameKind(Enum):
    ATTEST = "Attest"
    PUBKEY = "PubKey"
    BUDGET = "Budget"
    INSERT = "Insert"
    QUERY = "Query"


@dataclass(frozen=True)
class BoundaryFrame:
    request_id: str
    kind: FrameKind
    payload: bytes

    @classmethod
    def make(cls, kind: FrameKind, obj: dict) -> "BoundaryFrame":
        return cls(uuid.uuid4().hex, kind, json.dumps(obj).encode())

    def obj(self) -> dict:
        return json.loads(self.payload.decode())

    def reply(self, obj: dict) -> "BoundaryFrame":
        return BoundaryFrame(self.request_id, self.kind, json.dumps(obj).encode())


class EnclaveUnavailable(Exception):
    pass


class ProtocolError(Exception):
    pass


def _error_obj(kind: str, detail: str) -> dict:
    return {"error": {"error_kind": kind, "detail": detail}}


def handle_frame(enclave: Enclave, frame: BoundaryFrame) -> BoundaryFrame:
    """Execute one frame against the enclave; never raises domain errors."""
    try:
        obj = frame.obj()
    except (ValueError, UnicodeDecodeError):
        return frame.reply(_error_obj("BadRequest", "payload is not JSON"))
    try:
        if frame.kind is FrameKind.ATTEST:
            nonce = bytes.fromhex(obj.get("nonce", ""))
            quote = enclave.get_quote(nonce)
            return frame.reply(quote.to_wire())
        if frame.kind is FrameKind.PUBKEY:
            return frame.reply({"pem": enclave.public_pem})
        if frame.kind is FrameKind.BUDGET:
            return frame.reply(enclave.signed_budget().to_wire())
        if frame.kind is FrameKind.INSERT:
            env = Envelope.from_wire(obj.get("envelope"))
            count = enclave.ingest(env)
            return frame.reply({"status": "ok", "count": count})
        if frame.kind is FrameKind.QUERY:
            program = obj.get("program")
            if not isinstance(program, str):
                return frame.reply(_error_obj("BadRequest", "missing program text"))
            result = enclave.run_query(program)
            return frame.reply({
                "value": result.value_text,
                "cost": {"eps": str(result.cost.eps),
                         "delta": str(result.cost.delta)},
                "remaining": result.remaining.to_wire(),
            })
        return frame.reply(_error_obj("BadRequest", f"unknown kind {frame.kind}"))
    except lang.ParseError as exc:
        return frame.reply(_error_obj("ParseError", str(exc)))
    except QueryRejected as exc:
        return frame.reply(_error_obj(exc.reason.value, exc.detail))
    except BudgetExhausted as exc:
        return frame.reply(_error_obj("BudgetExhausted", str(exc)))
    except DecryptError as exc:
        return frame.reply(_error_obj("DecryptError", str(exc)))
    except SchemaError as exc:
        return frame.reply(_error_obj("SchemaError", str(exc)))
    except MalformedEnvelope as exc:
        return frame.reply(_error_obj("MalformedEnvelope", str(exc)))
    except ValueError as exc:
        return frame.reply(_error_obj("BadRequest", str(exc)))


class EnclaveChannel:
    """In-process boundary: one queue, one worker thread owning the enclave."""

    def __init__(self, enclave: Enclave):
        self._queue: queue.Queue = queue.Queue()
        self._closed = False
        self._worker = threading.Thread(target=self._run, args=(enclave,),
                                        daemon=True)
        self._worker.start()

    def _run(self, enclave: Enclave):
        while True:
            item = self._queue.get()
            if item is None:
                return
            frame, reply_box, done = item
            try:
                reply_box.append(handle_frame(enclave, frame))
            except Exception as exc:  # defensive: enclave bug
                reply_box.append(frame.reply(_error_obj("EnclaveFault", str(exc))))
            finally:
                done.set()

    def request(self, frame: BoundaryFrame, timeout: float = 60.0) -> BoundaryFrame:
        if self._closed:
            raise EnclaveUnavailable("channel closed")
        reply_box: list[BoundaryFrame] = []
        done = threading.Event()
        self._queue.put((frame, reply_box, done))
        if not done.wait(timeout):
            raise EnclaveUnavailable("enclave did not respond in time")
        response = reply_box[0]
        if response.request_id != frame.request_id:
            raise ProtocolError("response does not match request id")
        return response

    def close(self):
        self._closed = True
        self._queue.put(None)


# ---------------------------------------------------------------------------
# Two-process mode: the same frames over a unix socket.

_HEADER = struct.Struct(">I")
_MAX_FRAME = 16 * 1024 * 1024


def _frame_to_wire(frame: BoundaryFrame) -> bytes:
    body = json.dumps({
        "request_id": frame.request_id,
        "kind": frame.kind.value,
        "payload": base64.b64encode(frame.payload).decode(),
    }).encode()
    return _HEADER.pack(len(body)) + body


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("peer closed")
        buf += chunk
    return buf


def _frame_from_socket(sock: socket.socket) -> BoundaryFrame:
    (length,) = _HEADER.unpack(_read_exact(sock, _HEADER.size))
    if length > _MAX_FRAME:
        raise ProtocolError("oversized frame")
    obj = json.loads(_read_exact(sock, length).decode())
    try:
        return BoundaryFrame(str(obj["request_id"]),
                             FrameKind(obj["kind"]),
                             base64.b64decode(obj["payload"]))
    except (KeyError, ValueError) as exc:
        raise ProtocolError(f"malformed frame: {exc}") from exc


class EnclaveHost:
    """Serves an enclave to other processes over a unix socket."""

    def __init__(self, enclave: Enclave, sock_path: str):
        self._channel = EnclaveChannel(enclave)
        self._path = sock_path
        self._listener = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._listener.bind(sock_path)
        self._listener.listen(16)
        self._accepting = True
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self):
        while self._accepting:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_conn, args=(conn,),
                             daemon=True).start()

    def _serve_conn(self, conn: socket.socket):
        with conn:
            while True:
                try:
                    frame = _frame_from_socket(conn)
                except (ConnectionError, ProtocolError, ValueError):
                    return
                response = self._channel.request(frame)
                try:
                    conn.sendall(_frame_to_wire(response))
                except OSError:
                    return

    def close(self):
        self._accepting = False
        try:
            self._listener.close()
        finally:
            self._channel.close()


class SocketChannel:
    """Client side of the two-process boundary; gateway-facing API matches
    EnclaveChannel."""

    def __init__(self, sock_path: str):
        self._path = sock_path
        self._lock = threading.Lock()
        self._sock: socket.socket | None = None

    def _connect(self) -> socket.socket:
        if self._sock is None:
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            try:
                sock.connect(self._path)
            except OSError as exc:
                raise EnclaveUnavailable(str(exc)) from exc
            self._sock = sock
        return self._sock

    def request(self, frame: BoundaryFrame, timeout: float = 60.0) -> BoundaryFrame:
        with self._lock:
            try:
                sock = self._connect()
                sock.settimeout(timeout)
                sock.sendall(_frame_to_wire(frame))
                response = _frame_from_socket(sock)
            except (ConnectionError, OSError) as exc:
                self._sock = None
                raise EnclaveUnavailable(str(exc)) from exc
        if response.request_id != frame.request_id:
            raise ProtocolError("response does not match request id")
        return response

    def close(self):
        with self._lock:
            if self._sock is not None:
                self._sock.close()
                self._sock = None
