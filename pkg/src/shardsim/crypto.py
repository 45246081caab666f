"""Deterministic simulation cryptography: hashing, signatures and a VRF.

All primitives are keyed-hash constructions over SHA-256.  Verification is
performed by a provider registry that knows every generated key pair, which
gives exact unforgeability semantics at simulation speed.  Outputs are pure
functions of (secret key, input), so a run seed fully determines every
signature and VRF value.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from random import Random

DIGEST_LEN = 32

_SIG_TAG = b"SIG/"
_VRF_TAG = b"VRF/"
_VRF_PROOF_TAG = b"VRFPI/"
_PK_TAG = b"PK/"


def sha256(data: bytes) -> bytes:
    """32-octet hash of ``data``."""
    return hashlib.sha256(data).digest()


def digest_int(digest: bytes) -> int:
    """Interpret a digest as a big-endian unsigned integer."""
    return int.from_bytes(digest, "big")


MAX_DIGEST = (1 << (8 * DIGEST_LEN)) - 1


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    secret_key: bytes


@dataclass(frozen=True)
class Signature:
    bytes: bytes
    signer: bytes  # public key


@dataclass(frozen=True)
class VrfOutput:
    hash: bytes
    proof: bytes


class UnknownKeyError(KeyError):
    """Secret or public key not issued by this provider."""


class SimCrypto:
    """Key registry plus hash/sign/VRF operations.

    Immutable apart from key generation; all evaluation operations are pure.
    """

    def __init__(self, seed: int = 0):
        self._rng = Random(("crypto", seed).__repr__())
        self._sk_by_pk: dict[bytes, bytes] = {}
        self._pks: set[bytes] = set()

    def keygen(self) -> KeyPair:
        sk = self._rng.getrandbits(8 * DIGEST_LEN).to_bytes(DIGEST_LEN, "big")
        pk = sha256(_PK_TAG + sk)
        self._sk_by_pk[pk] = sk
        self._pks.add(pk)
        return KeyPair(public_key=pk, secret_key=sk)

    # -- hash oracle -----------------------------------------------------

    @staticmethod
    def hash(data: bytes) -> bytes:
        return sha256(data)

    # -- signatures ------------------------------------------------------

    def sign(self, secret_key: bytes, message: bytes) -> Signature:
        pk = sha256(_PK_TAG + secret_key)
        if pk not in self._pks:
            raise UnknownKeyError("secret key was not issued by this provider")
        return Signature(bytes=sha256(_SIG_TAG + secret_key + message), signer=pk)

    def verify(self, public_key: bytes, message: bytes, sig: Signature) -> bool:
        sk = self._sk_by_pk.get(public_key)
        if sk is None or sig.signer != public_key:
            return False
        return sig.bytes == sha256(_SIG_TAG + sk + message)

    # -- verifiable random function ---------------------------------------

    def vrf_eval(self, secret_key: bytes, data: bytes) -> VrfOutput:
        pk = sha256(_PK_TAG + secret_key)
        if pk not in self._pks:
            raise UnknownKeyError("secret key was not issued by this provider")
        value = sha256(_VRF_TAG + secret_key + data)
        proof = sha256(_VRF_PROOF_TAG + secret_key + data + value)
        return VrfOutput(hash=value, proof=proof)

    def vrf_verify(self, public_key: bytes, data: bytes, out: VrfOutput) -> bool:
        sk = self._sk_by_pk.get(public_key)
        if sk is None:
            return False
        if out.hash != sha256(_VRF_TAG + sk + data):
            return False
        return out.proof == sha256(_VRF_PROOF_TAG + sk + data + out.hash)
