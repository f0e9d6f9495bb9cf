"""Data-owner and analyst clients.

Trust anchors: the root public key and the expected measurement, both
supplied in the owner policy. Everything else — the enclave public key
and the advertised budget — is accepted only out of a root-signed quote
with a fresh nonce. The /pubkeypem endpoint is never trusted for
encryption.
"""

from __future__ import annotations

import argparse
import secrets
import sys
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Sequence

import requests

from .enclave import AttestationError, Quote, SignedBudget, verify_signature
from .enclave import verify_quote as _verify_quote
from .envelope import Envelope, encode_row, seal


class AbortReason(Enum):
    ATTEST_FAILED = "AttestFailed"
    BUDGET_TOO_LARGE = "BudgetTooLarge"
    TRANSPORT = "Transport"


class NegotiationAbort(Exception):
    def __init__(self, reason: AbortReason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)


class ServerError(Exception):
    """Structured error payload returned by the server."""

    def __init__(self, status: int, error_kind: str, detail: str):
        self.status = status
        self.error_kind = error_kind
        self.detail = detail
        super().__init__(f"{status} {error_kind}: {detail}")


@dataclass(frozen=True)
class OwnerPolicy:
    max_total_eps: Decimal
    max_total_delta: Decimal
    expected_measurement: str
    root_pubkey_pem: str

    @classmethod
    def from_file(cls, path: str | Path) -> "OwnerPolicy":
        fields = {}
        base = Path(path).parent
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        try:
            key_path = Path(fields["root_pubkey_file"])
            if not key_path.is_absolute():
                key_path = base / key_path
            return cls(
                max_total_eps=Decimal(fields["max_epsilon"]),
                max_total_delta=Decimal(fields["max_delta"]),
                expected_measurement=fields["measurement"],
                root_pubkey_pem=key_path.read_text(encoding="utf-8"),
            )
        except (KeyError, InvalidOperation, OSError) as exc:
            raise ValueError(f"bad policy file {path}: {exc}") from exc


@dataclass(frozen=True)
class VerifiedServer:
    url: str
    enclave_pubkey: str
    initial_eps: Decimal
    initial_delta: Decimal
    measurement: str


def negotiate(server_url: str, policy: OwnerPolicy, *,
              timeout: float = 10.0) -> VerifiedServer:
    """Attest the server with a fresh nonce and check its budget against policy."""
    nonce = secrets.token_bytes(16)
    try:
        resp = requests.get(f"{server_url}/attest",
                            params={"nonce": nonce.hex()}, timeout=timeout)
        resp.raise_for_status()
        quote = Quote.from_wire(resp.json())
    except (requests.RequestException, ValueError) as exc:
        raise NegotiationAbort(AbortReason.TRANSPORT, str(exc)) from exc
    try:
        accepted = _verify_quote(quote, policy.root_pubkey_pem,
                                 policy.expected_measurement, nonce)
    except AttestationError as exc:
        raise NegotiationAbort(AbortReason.ATTEST_FAILED, str(exc)) from exc
    if (accepted.initial_eps > policy.max_total_eps
            or accepted.initial_delta > policy.max_total_delta):
        raise NegotiationAbort(
            AbortReason.BUDGET_TOO_LARGE,
            f"server budget <{accepted.initial_eps}, {accepted.initial_delta}> "
            f"exceeds policy <{policy.max_total_eps}, {policy.max_total_delta}>")
    return VerifiedServer(server_url, accepted.enclave_pubkey,
                          accepted.initial_eps, accepted.initial_delta,
                          accepted.measurement)


def encrypt_row(values: Sequence[Decimal], enclave_pubkey_pem: str) -> Envelope:
    """Envelope-encrypt one row with a fresh symmetric key."""
    for v in values:
        if not v.is_finite():
            raise ValueError("row values must be finite")
    return seal(encode_row(values), enclave_pubkey_pem)


def _post_json(url: str, obj: dict, timeout: float) -> dict:
    try:
        resp = requests.post(url, json=obj, timeout=timeout)
    except requests.RequestException as exc:
        raise NegotiationAbort(AbortReason.TRANSPORT, str(exc)) from exc
    try:
        payload = resp.json()
    except ValueError:
        payload = {}
    if resp.status_code != 200:
        raise ServerError(resp.status_code,
                          payload.get("error_kind", "Unknown"),
                          payload.get("detail", resp.text[:200]))
    return payload


def submit_row(server: VerifiedServer, values: Sequence[Decimal], *,
               timeout: float = 10.0) -> int:
    """Encrypt and insert one row; returns the server-side record count."""
    envelope = encrypt_row(values, server.enclave_pubkey)
    obj = _post_json(f"{server.url}/insert", {"envelope": envelope.to_wire()},
                     timeout)
    return int(obj["count"])


@dataclass(frozen=True)
class QueryOutcome:
    value: str
    cost_eps: str
    cost_delta: str
    remaining: SignedBudget
    remaining_verified: bool


def submit_query(server: VerifiedServer, program_text: str, *,
                 timeout: float = 60.0) -> QueryOutcome:
    """Run a query and verify the returned budget under the attested key."""
    obj = _post_json(f"{server.url}/query", {"program": program_text}, timeout)
    remaining = SignedBudget.from_wire(obj["remaining"])
    verified = verify_signature(server.enclave_pubkey, remaining.sig,
                                remaining.signing_bytes())
    return QueryOutcome(
        value=str(obj["value"]),
        cost_eps=str(obj["cost"]["eps"]),
        cost_delta=str(obj["cost"]["delta"]),
        remaining=remaining,
        remaining_verified=verified,
    )


# ---------------------------------------------------------------------------
# Command line


def _parse_row(text: str) -> list[Decimal]:
    try:
        return [Decimal(part.strip()) for part in text.split(",")]
    except InvalidOperation as exc:
        raise ValueError(f"row must be comma-separated decimals: {text!r}") from exc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="duet-client")
    parser.add_argument("--server", required=True, help="server base URL")
    parser.add_argument("--policy", required=True, help="policy file path")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("attest", help="verify the server and print its identity")
    p_submit = sub.add_parser("submit", help="encrypt and submit one row")
    p_submit.add_argument("--row", required=True,
                          help="comma-separated decimals matching the schema")
    p_query = sub.add_parser("query", help="run a query program file")
    p_query.add_argument("file", help="program file")
    args = parser.parse_args(argv)

    try:
        policy = OwnerPolicy.from_file(args.policy)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        server = negotiate(args.server, policy)
    except NegotiationAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "attest":
            print(f"measurement: {server.measurement}")
            print(f"initial budget: <{server.initial_eps}, {server.initial_delta}>")
            print("attestation: verified")
            return 0
        if args.command == "submit":
            count = submit_row(server, _parse_row(args.row))
            print(f"submitted; server now holds {count} records")
            return 0
        if args.command == "query":
            program = Path(args.file).read_text(encoding="utf-8")
            outcome = submit_query(server, program)
            print(f"value: {outcome.value}")
            print(f"cost: <{outcome.cost_eps}, {outcome.cost_delta}>")
            print(f"remaining: <{outcome.remaining.eps}, "
                  f"{outcome.remaining.delta}> (serial {outcome.remaining.serial})")
            if not outcome.remaining_verified:
                print("WARNING: remaining-budget signature DID NOT VERIFY; "
                      "the server may be lying about the budget",
                      file=sys.stderr)
                return 3
            print("remaining budget signature: verified")
            return 0
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NegotiationAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 2
    except ServerError as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
