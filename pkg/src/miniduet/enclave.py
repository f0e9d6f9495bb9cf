"""The simulated trusted component.

Holds the only copy of the decryption/signing keypair (generated at
startup, never serialized: process exit destroys it and with it every
submitted record), decrypts submissions, typechecks and prices queries,
charges the signed monotone budget, and runs certified queries.

Attestation is simulated: a root signing key stands in for the CPU
manufacturer key, and quote verification against the locally
distributed root public key stands in for the vendor attestation
service. The enclave public key is embedded in the signed quote, so an
untrusted relay cannot substitute its own.

Canonical signing form: each field rendered as UTF-8 text, prefixed
with its 4-byte big-endian length, concatenated in declared field
order; signatures are RSA-PSS (SHA-256, 32-byte salt) over that byte
string, i.e. over its SHA-256 digest.
"""

from __future__ import annotations

import base64
import hashlib
import struct
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from . import lang
from .checker import validate_query
from .cost import PrivCost, as_decimal, decimal_str
from .envelope import DecryptError, Envelope, decode_row, open_envelope
from .interp import Database, apply_query, evaluate, render_value
from .mech import NoiseRng


class ConfigError(Exception):
    pass


class SchemaError(Exception):
    """Decrypted payload does not fit the configured schema."""


class BudgetExhausted(Exception):
    """The query's cost exceeds the remaining budget; nothing was charged."""


class QuoteRejectReason(Enum):
    BAD_SIGNATURE = "BadSignature"
    WRONG_MEASUREMENT = "WrongMeasurement"
    NONCE_MISMATCH = "NonceMismatch"


class AttestationError(Exception):
    def __init__(self, reason: QuoteRejectReason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)


_PSS = padding.PSS(mgf=padding.MGF1(hashes.SHA256()), salt_length=32)


def _lp(text: str) -> bytes:
    raw = text.encode()
    return struct.pack(">I", len(raw)) + raw


def quote_signing_bytes(measurement: str, pubkey_pem: str,
                        eps: Decimal, delta: Decimal, nonce_hex: str) -> bytes:
    return (_lp(measurement) + _lp(pubkey_pem) +
            _lp(decimal_str(eps)) + _lp(decimal_str(delta)) + _lp(nonce_hex))


def budget_signing_bytes(eps: Decimal, delta: Decimal, serial: int) -> bytes:
    return _lp(decimal_str(eps)) + _lp(decimal_str(delta)) + _lp(str(serial))


@dataclass(frozen=True)
class EnclaveConfig:
    epsilon: Decimal
    delta: Decimal
    schema_text: str
    build_id: str

    @classmethod
    def from_text(cls, text: str) -> "EnclaveConfig":
        fields = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        missing = {"epsilon", "delta", "schema", "build_id"} - fields.keys()
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            eps = Decimal(fields["epsilon"])
            delta = Decimal(fields["delta"])
        except InvalidOperation as exc:
            raise ConfigError("epsilon/delta must be decimals") from exc
        return cls(eps, delta, fields["schema"], fields["build_id"])

    @classmethod
    def from_file(cls, path: str | Path) -> "EnclaveConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def compute_measurement(config: EnclaveConfig) -> str:
    """Digest of build identifier and canonical configuration (hex, 32 bytes)."""
    schema = lang.parse_type(config.schema_text)
    canonical = (_lp(config.build_id) +
                 _lp(decimal_str(config.epsilon)) +
                 _lp(decimal_str(config.delta)) +
                 _lp(lang.render_type(schema)))
    return hashlib.sha256(canonical).hexdigest()


@dataclass(frozen=True)
class Quote:
    """Attestation evidence: binds measurement, enclave key, and initial budget."""

    measurement: str
    enclave_pubkey: str
    eps: Decimal
    delta: Decimal
    nonce: str  # hex of the 16-byte challenge
    sig: bytes

    def signing_bytes(self) -> bytes:
        return quote_signing_bytes(self.measurement, self.enclave_pubkey,
                                   self.eps, self.delta, self.nonce)

    def to_wire(self) -> dict:
        return {
            "measurement": self.measurement,
            "enclave_pubkey": self.enclave_pubkey,
            "initial_budget": {"eps": decimal_str(self.eps),
                               "delta": decimal_str(self.delta)},
            "nonce": self.nonce,
            "sig": base64.b64encode(self.sig).decode(),
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "Quote":
        try:
            budget = obj["initial_budget"]
            return cls(
                measurement=str(obj["measurement"]),
                enclave_pubkey=str(obj["enclave_pubkey"]),
                eps=Decimal(str(budget["eps"])),
                delta=Decimal(str(budget["delta"])),
                nonce=str(obj["nonce"]),
                sig=base64.b64decode(obj["sig"]),
            )
        except (KeyError, TypeError, ValueError, InvalidOperation) as exc:
            raise ValueError(f"malformed quote: {exc}") from exc


@dataclass(frozen=True)
class SignedBudget:
    """Remaining budget under the enclave signature; serial grows per charge."""

    eps: Decimal
    delta: Decimal
    serial: int
    sig: bytes

    def signing_bytes(self) -> bytes:
        return budget_signing_bytes(self.eps, self.delta, self.serial)

    def to_wire(self) -> dict:
        return {
            "eps": decimal_str(self.eps),
            "delta": decimal_str(self.delta),
            "serial": self.serial,
            "sig": base64.b64encode(self.sig).decode(),
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "SignedBudget":
        try:
            return cls(eps=Decimal(str(obj["eps"])),
                       delta=Decimal(str(obj["delta"])),
                       serial=int(obj["serial"]),
                       sig=base64.b64decode(obj["sig"]))
        except (KeyError, TypeError, ValueError, InvalidOperation) as exc:
            raise ValueError(f"malformed signed budget: {exc}") from exc


@dataclass(frozen=True)
class QueryResult:
    value: float
    value_text: str
    cost: PrivCost
    remaining: SignedBudget


class HardwareRoot:
    """Simulated CPU root of trust: signs quotes, publishes its public key."""

    def __init__(self):
        self._key = rsa.generate_private_key(public_exponent=65537, key_size=2048)

    def sign(self, data: bytes) -> bytes:
        return self._key.sign(data, _PSS, hashes.SHA256())

    @property
    def public_key(self):
        return self._key.public_key()

    @property
    def public_pem(self) -> str:
        return self.public_key.public_bytes(
            serialization.Encoding.PEM,
            serialization.PublicFormat.SubjectPublicKeyInfo).decode()


def _load_public_key(key_or_pem):
    if isinstance(key_or_pem, str):
        return serialization.load_pem_public_key(key_or_pem.encode())
    if isinstance(key_or_pem, bytes):
        return serialization.load_pem_public_key(key_or_pem)
    return key_or_pem


def verify_signature(key_or_pem, sig: bytes, data: bytes) -> bool:
    try:
        _load_public_key(key_or_pem).verify(sig, data, _PSS, hashes.SHA256())
        return True
    except (InvalidSignature, ValueError):
        return False


@dataclass(frozen=True)
class AcceptedQuote:
    enclave_pubkey: str
    initial_eps: Decimal
    initial_delta: Decimal
    measurement: str


def verify_quote(quote: Quote, root_public_key, expected_measurement: str,
                 expected_nonce: bytes) -> AcceptedQuote:
    """Locally verify attestation evidence against the trusted root key.

    Accepts iff the root signature covers the quote verbatim, the
    measurement equals the expected one, and the nonce echoes the
    caller's challenge. Raises AttestationError otherwise.
    """
    if not verify_signature(root_public_key, quote.sig, quote.signing_bytes()):
        raise AttestationError(QuoteRejectReason.BAD_SIGNATURE,
                               "root signature does not verify")
    if quote.measurement != expected_measurement:
        raise AttestationError(QuoteRejectReason.WRONG_MEASUREMENT,
                               "unexpected enclave measurement")
    if quote.nonce != expected_nonce.hex():
        raise AttestationError(QuoteRejectReason.NONCE_MISMATCH,
                               "quote does not echo the challenge nonce")
    return AcceptedQuote(quote.enclave_pubkey, quote.eps, quote.delta,
                         quote.measurement)


class Enclave:
    """Trusted state and operations; one instance per server process.

    Not thread-safe: the boundary channel serializes every call. The
    private key lives only in this object and is never serialized.
    """

    def __init__(self, config: EnclaveConfig, root: HardwareRoot, *,
                 rng_seed: int | None = None, keypair=None):
        if config.epsilon <= 0:
            raise ConfigError("initial epsilon must be positive")
        if config.delta < 0:
            raise ConfigError("initial delta must be nonnegative")
        try:
            schema = lang.parse_type(config.schema_text)
        except lang.ParseError as exc:
            raise ConfigError(f"bad schema: {exc}") from exc
        if not isinstance(schema, lang.MatrixTy):
            raise ConfigError("schema must be a matrix type")
        self.config = config
        self.schema = schema
        self.measurement = compute_measurement(config)
        self._root = root
        self._private_key = keypair or rsa.generate_private_key(
            public_exponent=65537, key_size=2048)
        self.public_pem = self._private_key.public_key().public_bytes(
            serialization.Encoding.PEM,
            serialization.PublicFormat.SubjectPublicKeyInfo).decode()
        self._eps = as_decimal(config.epsilon)
        self._delta = as_decimal(config.delta)
        self._serial = 0
        self._signed = self._sign_budget()
        self.db = Database(schema)
        self._rng = NoiseRng(rng_seed)

    # -- budget --

    def _sign_budget(self) -> SignedBudget:
        data = budget_signing_bytes(self._eps, self._delta, self._serial)
        sig = self._private_key.sign(data, _PSS, hashes.SHA256())
        return SignedBudget(self._eps, self._delta, self._serial, sig)

    def signed_budget(self) -> SignedBudget:
        return self._signed

    def charge(self, cost: PrivCost) -> SignedBudget:
        """Subtract a finite cost, or raise BudgetExhausted leaving state intact."""
        if not cost.is_finite:
            raise ValueError("cannot charge an infinite cost")
        remaining = PrivCost.finite(self._eps, self._delta)
        if not cost.fits_within(remaining):
            raise BudgetExhausted(
                f"cost {cost.render()} exceeds remaining "
                f"<{decimal_str(self._eps)}, {decimal_str(self._delta)}>")
        self._eps -= cost.eps.value
        self._delta -= cost.delta.value
        self._serial += 1
        self._signed = self._sign_budget()
        return self._signed

    # -- attestation --

    def get_quote(self, nonce: bytes) -> Quote:
        if len(nonce) != 16:
            raise ValueError("nonce must be exactly 16 bytes")
        data = quote_signing_bytes(self.measurement, self.public_pem,
                                   self.config.epsilon, self.config.delta,
                                   nonce.hex())
        return Quote(self.measurement, self.public_pem, self.config.epsilon,
                     self.config.delta, nonce.hex(), self._root.sign(data))

    # -- data collection --

    def ingest(self, env: Envelope) -> int:
        """Decrypt, validate, and append one record; returns the new row count."""
        payload = open_envelope(env, self._private_key)
        try:
            values = decode_row(payload)
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
        if len(values) != len(self.schema.schema):
            raise SchemaError(
                f"row has {len(values)} fields, schema has "
                f"{len(self.schema.schema)}")
        for v in values:
            if not v.is_finite():
                raise SchemaError("row values must be finite")
        self.db.add_row(tuple(values))
        return len(self.db)

    # -- query processing --

    def run_query(self, program_text: str) -> QueryResult:
        """parse -> validate -> charge -> evaluate.

        Charging happens strictly before evaluation; any rejection before
        the charge leaves budget, database, and serial untouched.
        """
        expr = lang.parse(program_text)
        cert = validate_query(expr, self.schema)
        remaining = self.charge(cert.cost)
        closure = evaluate(expr, {}, self._rng)
        value = apply_query(closure, self.db, self._rng)
        return QueryResult(value, render_value(value), cert.cost, remaining)

    # -- diagnostics --

    def diagnostic_dump(self) -> dict:
        """Public-state summary; contains no key material by construction."""
        return {
            "measurement": self.measurement,
            "schema": lang.render_type(self.schema),
            "row_count": len(self.db),
            "remaining_eps": decimal_str(self._eps),
            "remaining_delta": decimal_str(self._delta),
            "serial": self._serial,
            "public_key": self.public_pem,
        }
