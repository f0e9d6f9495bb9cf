"""Hybrid record encryption: per-record AES-256-GCM under an RSA-wrapped key.

Each submission carries a fresh symmetric key wrapped with RSA-OAEP
(SHA-256) under the enclave public key; the row payload itself is
AES-GCM authenticated ciphertext. Tampering with any component makes
decryption fail. The same byte format is produced by the browser
console via WebCrypto.

Row payload format: the column values as plain decimal strings joined
by commas, UTF-8 encoded.
"""

from __future__ import annotations

import base64
import binascii
import os
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.serialization import load_pem_public_key

from .cost import decimal_str


class DecryptError(Exception):
    """Wrong key or tampered ciphertext."""


class MalformedEnvelope(Exception):
    """Structurally invalid envelope (missing fields, bad encoding)."""


_OAEP = padding.OAEP(mgf=padding.MGF1(algorithm=hashes.SHA256()),
                     algorithm=hashes.SHA256(), label=None)


@dataclass(frozen=True)
class Envelope:
    wrapped_key: bytes
    nonce: bytes
    ciphertext: bytes

    def to_wire(self) -> dict:
        return {
            "wrapped_key": base64.b64encode(self.wrapped_key).decode(),
            "nonce": base64.b64encode(self.nonce).decode(),
            "ciphertext": base64.b64encode(self.ciphertext).decode(),
        }

    @classmethod
    def from_wire(cls, obj) -> "Envelope":
        if not isinstance(obj, dict):
            raise MalformedEnvelope("envelope must be an object")
        fields = {}
        for name in ("wrapped_key", "nonce", "ciphertext"):
            raw = obj.get(name)
            if not isinstance(raw, str) or not raw:
                raise MalformedEnvelope(f"missing field {name!r}")
            try:
                fields[name] = base64.b64decode(raw, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise MalformedEnvelope(f"field {name!r} is not base64") from exc
            if not fields[name]:
                raise MalformedEnvelope(f"field {name!r} is empty")
        return cls(**fields)


def encode_row(values: Sequence[Decimal]) -> bytes:
    return ",".join(decimal_str(v) for v in values).encode()


def decode_row(payload: bytes) -> list[Decimal]:
    try:
        text = payload.decode()
        return [Decimal(part.strip()) for part in text.split(",")]
    except (UnicodeDecodeError, InvalidOperation) as exc:
        raise ValueError("payload is not a comma-separated decimal row") from exc


def seal(payload: bytes, public_key_pem: str) -> Envelope:
    """Encrypt one record to the enclave public key with a fresh data key."""
    public_key = load_pem_public_key(public_key_pem.encode())
    if not isinstance(public_key, rsa.RSAPublicKey):
        raise ValueError("enclave public key must be RSA")
    data_key = AESGCM.generate_key(bit_length=256)
    nonce = os.urandom(12)
    ciphertext = AESGCM(data_key).encrypt(nonce, payload, None)
    wrapped = public_key.encrypt(data_key, _OAEP)
    return Envelope(wrapped, nonce, ciphertext)


def open_envelope(env: Envelope, private_key) -> bytes:
    """Recover the record payload; only the enclave private key can."""
    try:
        data_key = private_key.decrypt(env.wrapped_key, _OAEP)
    except ValueError as exc:
        raise DecryptError("key unwrap failed") from exc
    try:
        return AESGCM(data_key).decrypt(env.nonce, env.ciphertext, None)
    except (InvalidTag, ValueError) as exc:
        raise DecryptError("payload authentication failed") from exc
