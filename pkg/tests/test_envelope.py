from decimal import Decimal

import pytest
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import rsa

from miniduet.envelope import (DecryptError, Envelope, MalformedEnvelope,
                               decode_row, encode_row, open_envelope, seal)


@pytest.fixture(scope="module")
def keypair():
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    pem = key.public_key().public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo).decode()
    return key, pem


def test_row_codec_roundtrip():
    row = [Decimal("44.47"), Decimal("-73.21")]
    assert decode_row(encode_row(row)) == row
    assert encode_row(row) == b"44.47,-73.21"


def test_row_codec_rejects_garbage():
    with pytest.raises(ValueError):
        decode_row(b"not,a,number,x")
    with pytest.raises(ValueError):
        decode_row(b"\xff\xfe")


def test_seal_open_roundtrip(keypair):
    key, pem = keypair
    env = seal(b"44.47,-73.21", pem)
    assert open_envelope(env, key) == b"44.47,-73.21"


def test_fresh_key_per_record(keypair):
    _, pem = keypair
    a = seal(b"same payload", pem)
    b = seal(b"same payload", pem)
    assert a.ciphertext != b.ciphertext
    assert a.wrapped_key != b.wrapped_key


def test_tampered_ciphertext_fails_auth(keypair):
    key, pem = keypair
    env = seal(b"payload", pem)
    flipped = bytes([env.ciphertext[0] ^ 1]) + env.ciphertext[1:]
    with pytest.raises(DecryptError):
        open_envelope(Envelope(env.wrapped_key, env.nonce, flipped), key)


def test_tampered_wrapped_key_fails(keypair):
    key, pem = keypair
    env = seal(b"payload", pem)
    flipped = bytes([env.wrapped_key[0] ^ 1]) + env.wrapped_key[1:]
    with pytest.raises(DecryptError):
        open_envelope(Envelope(flipped, env.nonce, env.ciphertext), key)


def test_wrong_private_key_fails(keypair):
    _, pem = keypair
    other = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    env = seal(b"payload", pem)
    with pytest.raises(DecryptError):
        open_envelope(env, other)


def test_wire_roundtrip(keypair):
    _, pem = keypair
    env = seal(b"payload", pem)
    assert Envelope.from_wire(env.to_wire()) == env


def test_wire_missing_field_is_malformed():
    with pytest.raises(MalformedEnvelope):
        Envelope.from_wire({"nonce": "AAAA", "ciphertext": "AAAA"})
    with pytest.raises(MalformedEnvelope):
        Envelope.from_wire({"wrapped_key": "!!!", "nonce": "AAAA",
                            "ciphertext": "AAAA"})
    with pytest.raises(MalformedEnvelope):
        Envelope.from_wire("just a string")
