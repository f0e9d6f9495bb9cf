"""Untrusted HTTP front end.

Exposes exactly six routes and relays everything enclave-bound through
the boundary channel; it never sees plaintext rows or key material.
Numbers carrying privacy semantics travel as decimal strings.

    GET  /epsilon    -> {eps, serial, sig}
    GET  /delta      -> {delta, serial, sig}
    GET  /attest     ?nonce=hex16 -> quote object
    GET  /pubkeypem  -> public key PEM (text/plain)
    POST /insert     {envelope} -> {status, count}
    POST /query      {program}  -> {value, cost, remaining}

Errors are {error_kind, detail} with 400 for parse/type/schema trouble,
403 for an exhausted budget, 503 when the enclave is unreachable.
CORS is wide open so the browser console can be served from anywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .boundary import (BoundaryFrame, EnclaveUnavailable, FrameKind,
                       SocketChannel)
from .envelope import Envelope, MalformedEnvelope
from .store import RecordLog

ROUTES = frozenset({
    ("GET", "/epsilon"),
    ("GET", "/delta"),
    ("GET", "/attest"),
    ("GET", "/pubkeypem"),
    ("POST", "/insert"),
    ("POST", "/query"),
})

_STATUS_BY_ERROR = {
    "ParseError": 400,
    "TypeError": 400,
    "NotPrivFn": 400,
    "SchemaMismatch": 400,
    "InfiniteCost": 400,
    "NonConstantCost": 400,
    "SchemaError": 400,
    "DecryptError": 400,
    "MalformedEnvelope": 400,
    "BadRequest": 400,
    "BudgetExhausted": 403,
    "EnclaveFault": 500,
}


class Gateway:
    """Route handling over a boundary channel plus the untrusted record log."""

    def __init__(self, channel, store: RecordLog | None = None):
        self.channel = channel
        self.store = store if store is not None else RecordLog()

    # Each handler returns (status, content_type, body_bytes).

    def handle(self, method: str, path: str, query: dict, body: bytes):
        if (method, path) not in ROUTES:
            if any(path == p for _, p in ROUTES):
                return self._json(405, {"error_kind": "MethodNotAllowed",
                                        "detail": f"{method} {path}"})
            return self._json(404, {"error_kind": "NotFound", "detail": path})
        try:
            if path == "/epsilon":
                obj = self._relay(FrameKind.BUDGET, {})
                return self._json(200, {"eps": obj["eps"],
                                        "serial": obj["serial"],
                                        "sig": obj["sig"]})
            if path == "/delta":
                obj = self._relay(FrameKind.BUDGET, {})
                return self._json(200, {"delta": obj["delta"],
                                        "serial": obj["serial"],
                                        "sig": obj["sig"]})
            if path == "/attest":
                nonce = (query.get("nonce") or [""])[0]
                if not _is_hex16(nonce):
                    return self._json(400, {"error_kind": "BadRequest",
                                            "detail": "nonce must be 16 bytes hex"})
                obj = self._relay(FrameKind.ATTEST, {"nonce": nonce})
                return self._json(200, obj)
            if path == "/pubkeypem":
                obj = self._relay(FrameKind.PUBKEY, {})
                return 200, "text/plain; charset=utf-8", obj["pem"].encode()
            if path == "/insert":
                payload = _json_body(body)
                envelope = Envelope.from_wire(payload.get("envelope"))
                obj = self._relay(FrameKind.INSERT,
                                  {"envelope": envelope.to_wire()})
                self.store.append(envelope)
                return self._json(200, obj)
            if path == "/query":
                payload = _json_body(body)
                obj = self._relay(FrameKind.QUERY,
                                  {"program": payload.get("program")})
                return self._json(200, obj)
        except _RelayedError as exc:
            return self._json(exc.status, exc.obj)
        except MalformedEnvelope as exc:
            return self._json(400, {"error_kind": "MalformedEnvelope",
                                    "detail": str(exc)})
        except _BadBody as exc:
            return self._json(400, {"error_kind": "BadRequest",
                                    "detail": str(exc)})
        except EnclaveUnavailable as exc:
            return self._json(503, {"error_kind": "EnclaveUnavailable",
                                    "detail": str(exc)})
        raise AssertionError(f"unhandled route {method} {path}")

    def _relay(self, kind: FrameKind, obj: dict) -> dict:
        response = self.channel.request(BoundaryFrame.make(kind, obj)).obj()
        if "error" in response:
            err = response["error"]
            status = _STATUS_BY_ERROR.get(err.get("error_kind", ""), 400)
            raise _RelayedError(status, err)
        return response

    @staticmethod
    def _json(status: int, obj: dict):
        return status, "application/json", json.dumps(obj).encode()


class _RelayedError(Exception):
    def __init__(self, status: int, obj: dict):
        self.status = status
        self.obj = obj


class _BadBody(Exception):
    pass


def _json_body(body: bytes) -> dict:
    try:
        obj = json.loads(body.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise _BadBody(f"request body is not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise _BadBody("request body must be a JSON object")
    return obj


def _is_hex16(text: str) -> bool:
    if len(text) != 32:
        return False
    try:
        bytes.fromhex(text)
        return True
    except ValueError:
        return False


def make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "duet-gateway/0.1"

        def log_message(self, *args):
            pass

        def _respond(self, status, ctype, body: bytes):
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            parts = urlsplit(self.path)
            status, ctype, body = gateway.handle(
                "GET", parts.path, parse_qs(parts.query), b"")
            self._respond(status, ctype, body)

        def do_POST(self):
            parts = urlsplit(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            status, ctype, resp = gateway.handle(
                "POST", parts.path, parse_qs(parts.query), body)
            self._respond(status, ctype, resp)

        def do_OPTIONS(self):
            # CORS preflight for the browser console
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


def make_server(gateway: Gateway, host: str = "127.0.0.1",
                port: int = 0) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(gateway))


def serve(bind_addr: tuple[str, int], channel,
          store: RecordLog | None = None) -> None:
    """Run the gateway until interrupted."""
    server = make_server(Gateway(channel, store), bind_addr[0], bind_addr[1])
    server.serve_forever()


# ---------------------------------------------------------------------------
# Two-process entry point and the test-only memory dump hook.


def _install_memdump_handler():
    """SIGUSR1 dumps this process's writable memory for leak inspection."""
    dump_path = os.environ.get("DUET_GATEWAY_MEMDUMP")
    if not dump_path:
        return

    def dump(*_args):
        try:
            with open("/proc/self/maps") as maps, \
                 open("/proc/self/mem", "rb", 0) as mem, \
                 open(dump_path + ".tmp", "wb") as out:
                total = 0
                for line in maps:
                    fields = line.split()
                    addr, perms = fields[0], fields[1]
                    if "r" not in perms or "w" not in perms:
                        continue
                    lo, hi = (int(x, 16) for x in addr.split("-"))
                    pos = lo
                    while pos < hi and total < 1 << 30:
                        chunk = min(1 << 20, hi - pos)
                        try:
                            mem.seek(pos)
                            data = mem.read(chunk)
                        except (OSError, ValueError):
                            break
                        out.write(data)
                        total += len(data)
                        pos += chunk
            os.replace(dump_path + ".tmp", dump_path)
        except Exception as exc:  # pragma: no cover - diagnostics only
            sys.stderr.write(f"memdump failed: {exc}\n")

    signal.signal(signal.SIGUSR1, dump)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="untrusted HTTP gateway (two-process mode)")
    parser.add_argument("--socket", required=True,
                        help="unix socket of the enclave host")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    args = parser.parse_args(argv)

    _install_memdump_handler()
    channel = SocketChannel(args.socket)
    server = make_server(Gateway(channel), args.host, args.port)
    host, port = server.server_address[:2]
    print(f"gateway listening on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
