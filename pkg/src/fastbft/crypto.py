"""Signature scheme abstraction: a fast deterministic mock plus an Ed25519 slot.

The mock is a keyed MAC (blake2b, 16-byte digests) over (owner-id || message)
with a per-process secret derived from the run seed. Verification recomputes
the MAC, so the "public" key carries the same secret; unforgeability holds
within the harness because Byzantine scripts are never handed other processes'
key material. The Ed25519 scheme is a real asymmetric drop-in for anyone who
wants signatures that survive outside the simulator; nothing in the test suite
needs it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .core import ProcessId, Signature

_OWNER_BYTES = 8
_DIGEST = 16


@dataclass(slots=True, frozen=True)
class KeyPair:
    owner: ProcessId
    private_key: bytes
    public_key: bytes


def _seed_bytes(seed: int) -> bytes:
    return seed.to_bytes((seed.bit_length() + 8) // 8 + 1, "big", signed=True)


class MockScheme:
    name = "mock"

    def keygen(self, owner: ProcessId, seed: int) -> KeyPair:
        secret = hashlib.blake2b(
            owner.to_bytes(_OWNER_BYTES, "big"), key=_seed_bytes(seed)[:64], digest_size=32
        ).digest()
        material = owner.to_bytes(_OWNER_BYTES, "big") + secret
        return KeyPair(owner, material, material)

    def sign(self, private_key: bytes, message: bytes) -> Signature:
        return hashlib.blake2b(
            private_key[:_OWNER_BYTES] + message, key=private_key[_OWNER_BYTES:], digest_size=_DIGEST
        ).digest()

    def verify(self, public_key: bytes, message: bytes, sig: Signature) -> bool:
        return self.sign(public_key, message) == sig


class Ed25519Scheme:
    """Real signatures via the cryptography package; imported only on use."""

    name = "ed25519"

    def keygen(self, owner: ProcessId, seed: int) -> KeyPair:
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
        from cryptography.hazmat.primitives.serialization import (
            Encoding,
            NoEncryption,
            PrivateFormat,
            PublicFormat,
        )

        raw = hashlib.blake2b(
            owner.to_bytes(_OWNER_BYTES, "big"), key=_seed_bytes(seed)[:64], digest_size=32
        ).digest()
        key = Ed25519PrivateKey.from_private_bytes(raw)
        private = key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())
        public = key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return KeyPair(owner, private, public)

    def sign(self, private_key: bytes, message: bytes) -> Signature:
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify(self, public_key: bytes, message: bytes, sig: Signature) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(sig, message)
            return True
        except InvalidSignature:
            return False


_SCHEMES = {"mock": MockScheme, "ed25519": Ed25519Scheme}


def get_scheme(name: str):
    return _SCHEMES[name]()


_default = MockScheme()


def keygen(owner: ProcessId, seed: int) -> KeyPair:
    return _default.keygen(owner, seed)


def sign(private_key: bytes, message: bytes) -> Signature:
    return _default.sign(private_key, message)


def verify(public_key: bytes, message: bytes, sig: Signature) -> bool:
    return _default.verify(public_key, message, sig)


class KeyDirectory:
    """All n keypairs for one run, with sign/verify caches.

    Carries the quorum config so vote validity and leader lookups need only
    the directory. Caches are per run; simulations sign and verify the same
    few payloads thousands of times.
    """

    def __init__(self, cfg, seed: int, scheme: Optional[object] = None) -> None:
        self.cfg = cfg
        self.seed = seed
        self.scheme = scheme if scheme is not None else _default
        self.keys: Dict[ProcessId, KeyPair] = {
            pid: self.scheme.keygen(pid, seed) for pid in range(1, cfg.n + 1)
        }
        self._sign_cache: Dict[Tuple[ProcessId, bytes], Signature] = {}
        self._verify_cache: Dict[Tuple[ProcessId, bytes, Signature], bool] = {}

    def keypair(self, pid: ProcessId) -> KeyPair:
        return self.keys[pid]

    def sign(self, pid: ProcessId, message: bytes) -> Signature:
        key = (pid, message)
        sig = self._sign_cache.get(key)
        if sig is None:
            sig = self.scheme.sign(self.keys[pid].private_key, message)
            self._sign_cache[key] = sig
        return sig

    def verify(self, pid: ProcessId, message: bytes, sig: Signature) -> bool:
        if pid not in self.keys:
            return False
        key = (pid, message, sig)
        ok = self._verify_cache.get(key)
        if ok is None:
            ok = self.scheme.verify(self.keys[pid].public_key, message, sig)
            self._verify_cache[key] = ok
        return ok
