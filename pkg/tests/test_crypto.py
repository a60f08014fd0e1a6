"""Signature scheme behavior: determinism, verification, key separation."""

import pytest

from fastbft.crypto import (
    Ed25519Scheme,
    KeyDirectory,
    MockScheme,
    get_scheme,
)


def test_mock_scheme_is_deterministic():
    scheme = MockScheme()
    pair_a = scheme.keygen(1, 7)
    pair_b = scheme.keygen(1, 7)
    assert pair_a == pair_b
    sig1 = scheme.sign(pair_a.private_key, b"hello")
    sig2 = scheme.sign(pair_a.private_key, b"hello")
    assert sig1 == sig2
    assert scheme.verify(pair_a.public_key, b"hello", sig1)
    assert not scheme.verify(pair_a.public_key, b"hellO", sig1)


def test_mock_scheme_rejects_cross_key_signatures():
    scheme = MockScheme()
    pair_a = scheme.keygen(1, 7)
    pair_b = scheme.keygen(2, 7)
    sig = scheme.sign(pair_a.private_key, b"msg")
    assert scheme.verify(pair_a.public_key, b"msg", sig)
    assert not scheme.verify(pair_b.public_key, b"msg", sig)
    # Same owner under a different run seed is a different key too.
    pair_c = scheme.keygen(1, 8)
    assert not scheme.verify(pair_c.public_key, b"msg", sig)


def test_mock_signature_tamper_detected():
    scheme = MockScheme()
    pair = scheme.keygen(3, 0)
    sig = bytearray(scheme.sign(pair.private_key, b"payload"))
    sig[0] ^= 1
    assert not scheme.verify(pair.public_key, b"payload", bytes(sig))


def test_ed25519_round_trip():
    scheme = Ed25519Scheme()
    pair = scheme.keygen(5, 11)
    sig = scheme.sign(pair.private_key, b"payload")
    assert scheme.verify(pair.public_key, b"payload", sig)
    assert not scheme.verify(pair.public_key, b"payload!", sig)
    again = scheme.keygen(5, 11)
    assert again.public_key == pair.public_key
    assert scheme.verify(again.public_key, b"payload", scheme.sign(again.private_key, b"payload"))


def test_get_scheme_lookup():
    assert isinstance(get_scheme("mock"), MockScheme)
    assert isinstance(get_scheme("ed25519"), Ed25519Scheme)
    with pytest.raises(KeyError):
        get_scheme("rot13")


def test_directory_per_process_keys(cfg9):
    directory = KeyDirectory(cfg9, seed=42)
    sig = directory.sign(3, b"data")
    assert directory.verify(3, b"data", sig)
    # Same bytes attributed to a different signer must fail.
    assert not directory.verify(4, b"data", sig)
    assert not directory.verify(3, b"datA", sig)


def test_directory_seed_isolation(cfg9):
    a = KeyDirectory(cfg9, seed=1)
    b = KeyDirectory(cfg9, seed=2)
    sig = a.sign(1, b"x")
    assert a.verify(1, b"x", sig)
    assert not b.verify(1, b"x", sig)
    # Same seed reproduces the same key material.
    c = KeyDirectory(cfg9, seed=1)
    assert c.verify(1, b"x", sig)


def test_directory_with_ed25519(cfg4):
    directory = KeyDirectory(cfg4, seed=9, scheme=Ed25519Scheme())
    sig = directory.sign(2, b"propose")
    assert directory.verify(2, b"propose", sig)
    assert not directory.verify(1, b"propose", sig)


def test_directory_carries_config(cfg4):
    directory = KeyDirectory(cfg4, seed=0)
    assert directory.cfg is cfg4
