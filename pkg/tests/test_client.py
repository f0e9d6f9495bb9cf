import json
import threading
from decimal import Decimal
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
import requests

from conftest import COUNTING_QUERY, RAW_COUNT_QUERY, make_config
from miniduet.client import (AbortReason, NegotiationAbort, OwnerPolicy,
                             ServerError, encrypt_row, main, negotiate,
                             submit_query, submit_row)
from miniduet.enclave import Enclave, HardwareRoot


def policy_for(live_server, tmp_path, max_eps="2.0", max_delta="0.01",
               measurement=None, root_pem=None) -> OwnerPolicy:
    pem_path = tmp_path / "root_pub.pem"
    pem_path.write_text(root_pem or live_server.root.public_pem)
    policy_path = tmp_path / "owner.policy"
    policy_path.write_text(
        f"max_epsilon={max_eps}\n"
        f"max_delta={max_delta}\n"
        f"measurement={measurement or live_server.enclave.measurement}\n"
        f"root_pubkey_file={pem_path}\n")
    return OwnerPolicy.from_file(policy_path)


def test_negotiate_happy_path(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path)
    server = negotiate(live_server.url, policy)
    assert server.enclave_pubkey == live_server.enclave.public_pem
    assert server.initial_eps == Decimal("2.0")


def test_negotiate_budget_too_large(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path, max_eps="1.0")
    with pytest.raises(NegotiationAbort) as err:
        negotiate(live_server.url, policy)
    assert err.value.reason is AbortReason.BUDGET_TOO_LARGE


def test_negotiate_wrong_root_key(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path,
                        root_pem=HardwareRoot().public_pem)
    with pytest.raises(NegotiationAbort) as err:
        negotiate(live_server.url, policy)
    assert err.value.reason is AbortReason.ATTEST_FAILED


def test_negotiate_wrong_measurement(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path, measurement="00" * 32)
    with pytest.raises(NegotiationAbort) as err:
        negotiate(live_server.url, policy)
    assert err.value.reason is AbortReason.ATTEST_FAILED


def test_negotiate_transport_failure(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path)
    with pytest.raises(NegotiationAbort) as err:
        negotiate("http://127.0.0.1:1", policy, timeout=0.5)
    assert err.value.reason is AbortReason.TRANSPORT


def test_submit_row_roundtrips(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path)
    server = negotiate(live_server.url, policy)
    assert submit_row(server, [Decimal("44.47"), Decimal("-73.21")]) == 1
    assert live_server.enclave.db.rows[0] == (Decimal("44.47"),
                                              Decimal("-73.21"))


def test_two_encryptions_differ(live_server):
    row = [Decimal("1"), Decimal("2")]
    a = encrypt_row(row, live_server.enclave.public_pem)
    b = encrypt_row(row, live_server.enclave.public_pem)
    assert a.ciphertext != b.ciphertext


def test_submit_query_verifies_budget_signature(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path)
    server = negotiate(live_server.url, policy)
    submit_row(server, [Decimal("1"), Decimal("2")])
    outcome = submit_query(server, COUNTING_QUERY)
    assert outcome.remaining_verified
    assert (outcome.cost_eps, outcome.cost_delta) == ("1.0", "0.001")
    assert outcome.remaining.eps == Decimal("1.0")


def test_submit_query_server_error(live_server, tmp_path):
    policy = policy_for(live_server, tmp_path)
    server = negotiate(live_server.url, policy)
    with pytest.raises(ServerError) as err:
        submit_query(server, RAW_COUNT_QUERY)
    assert err.value.status == 400
    assert err.value.error_kind == "InfiniteCost"


# ---------------------------------------------------------------------------
# Hostile-network scenarios


class _Mitm:
    """HTTP front that forwards to a real server but rewrites responses."""

    def __init__(self, upstream_url: str, rewrite):
        mitm = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _proxy(self, method):
                body = None
                length = int(self.headers.get("Content-Length") or 0)
                if length:
                    body = self.rfile.read(length)
                resp = requests.request(method, upstream_url + self.path,
                                        data=body,
                                        headers={"Content-Type":
                                                 "application/json"})
                status, ctype, payload = rewrite(self.path, resp.status_code,
                                                 resp.headers.get("Content-Type",
                                                                  ""),
                                                 resp.content)
                self.send_response(status)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                self._proxy("GET")

            def do_POST(self):
                self._proxy("POST")

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        host, port = self.httpd.server_address[:2]
        self.url = f"http://{host}:{port}"
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def test_mitm_pubkeypem_swap_is_harmless(live_server, tmp_path, root):
    """An attacker rewrites /pubkeypem; the client keys off the quote, so
    submissions stay decryptable only by the real enclave."""
    attacker = Enclave(make_config(), root)

    def rewrite(path, status, ctype, payload):
        if path == "/pubkeypem":
            return 200, "text/plain", attacker.public_pem.encode()
        return status, ctype, payload

    mitm = _Mitm(live_server.url, rewrite)
    try:
        policy = policy_for(live_server, tmp_path)
        server = negotiate(mitm.url, policy)
        # the swapped endpoint did lie...
        assert requests.get(f"{mitm.url}/pubkeypem").text == attacker.public_pem
        # ...but the client trusts only the quote-embedded key
        assert server.enclave_pubkey == live_server.enclave.public_pem
        env = encrypt_row([Decimal("5"), Decimal("6")], server.enclave_pubkey)
        from miniduet.envelope import DecryptError, open_envelope
        with pytest.raises(DecryptError):
            open_envelope(env, attacker._private_key)
        assert live_server.enclave.ingest(env) == 1
    finally:
        mitm.close()


def test_tampered_budget_is_flagged_loudly(live_server, tmp_path):
    """A proxy that inflates the remaining budget must not be believed."""

    def rewrite(path, status, ctype, payload):
        if path == "/query" and status == 200:
            obj = json.loads(payload)
            obj["remaining"]["eps"] = "99.0"
            return status, ctype, json.dumps(obj).encode()
        return status, ctype, payload

    mitm = _Mitm(live_server.url, rewrite)
    try:
        policy = policy_for(live_server, tmp_path)
        server = negotiate(mitm.url, policy)
        submit_row(server, [Decimal("1"), Decimal("2")])
        outcome = submit_query(server, COUNTING_QUERY)
        assert not outcome.remaining_verified
    finally:
        mitm.close()


class _ArbitraryServer:
    """A fully malicious endpoint answering every request with a canned body."""

    def __init__(self, status: int, body: bytes):
        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _answer(self):
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            do_GET = _answer
            do_POST = _answer

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        host, port = self.httpd.server_address[:2]
        self.url = f"http://{host}:{port}"
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.mark.parametrize("status,body", [
    (200, b"not json at all"),
    (200, b"{}"),
    (200, json.dumps({"measurement": "00" * 32, "enclave_pubkey": "fake",
                      "initial_budget": {"eps": "0.1", "delta": "0"},
                      "nonce": "00" * 16, "sig": "AAAA"}).encode()),
    (500, b"{}"),
])
def test_malicious_gateway_never_yields_a_key(live_server, tmp_path, status,
                                              body):
    """Whatever a hostile server replies, negotiate must abort; the client
    never obtains (and so never encrypts to) an unattested key."""
    evil = _ArbitraryServer(status, body)
    try:
        policy = policy_for(live_server, tmp_path)
        with pytest.raises(NegotiationAbort):
            negotiate(evil.url, policy)
    finally:
        evil.close()


def test_replayed_quote_fails_nonce_check(live_server, tmp_path):
    """Replaying a previously captured (honest) quote misses the fresh nonce."""
    captured = requests.get(
        f"{live_server.url}/attest",
        params={"nonce": "ab" * 16}).content

    evil = _ArbitraryServer(200, captured)
    try:
        policy = policy_for(live_server, tmp_path)
        with pytest.raises(NegotiationAbort) as err:
            negotiate(evil.url, policy)
        assert err.value.reason is AbortReason.ATTEST_FAILED
    finally:
        evil.close()


# ---------------------------------------------------------------------------
# CLI


def write_policy_file(live_server, tmp_path, max_eps="2.0"):
    pem_path = tmp_path / "root_pub.pem"
    pem_path.write_text(live_server.root.public_pem)
    policy_path = tmp_path / "owner.policy"
    policy_path.write_text(
        f"max_epsilon={max_eps}\nmax_delta=0.01\n"
        f"measurement={live_server.enclave.measurement}\n"
        f"root_pubkey_file={pem_path}\n")
    return policy_path


def test_cli_attest_ok(live_server, tmp_path, capsys):
    policy = write_policy_file(live_server, tmp_path)
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "attest"])
    assert code == 0
    out = capsys.readouterr().out
    assert live_server.enclave.measurement in out


def test_cli_submit_and_query(live_server, tmp_path, capsys):
    policy = write_policy_file(live_server, tmp_path)
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "submit", "--row", "44.47,-73.21"])
    assert code == 0
    program = tmp_path / "count.duet"
    program.write_text(COUNTING_QUERY)
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "query", str(program)])
    assert code == 0
    out = capsys.readouterr().out
    assert "cost: <1.0, 0.001>" in out
    assert "remaining: <1.0, 0.001>" in out


def test_cli_abort_exit_code(live_server, tmp_path, capsys):
    policy = write_policy_file(live_server, tmp_path, max_eps="0.5")
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "attest"])
    assert code == 2
    assert "BudgetTooLarge" in capsys.readouterr().err


def test_cli_server_error_exit_code(live_server, tmp_path, capsys):
    policy = write_policy_file(live_server, tmp_path)
    program = tmp_path / "raw.duet"
    program.write_text(RAW_COUNT_QUERY)
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "query", str(program)])
    assert code == 3
    assert "InfiniteCost" in capsys.readouterr().err


def test_cli_bad_row_exit_code(live_server, tmp_path):
    policy = write_policy_file(live_server, tmp_path)
    code = main(["--server", live_server.url, "--policy", str(policy),
                 "submit", "--row", "not,decimals"])
    assert code == 2
