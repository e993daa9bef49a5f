"""Discrete-log signatures and address derivation.

Schnorr-style signatures over the same prime-order group the
commitments live in.  Nonces are derived deterministically from the
private key and message, so signing the same bytes twice yields the
same signature; that keeps ledger contents reproducible under seeded
simulation runs.

An address is a 20-byte digest of the public key rendered as
"ab1" + 40 lowercase hex characters.  Addresses are what messages and
pair keys carry; the registry maps them back to public keys.
"""

from __future__ import annotations

import hashlib
import re
import secrets
from dataclasses import dataclass

from .errors import ScalarRangeError, SignatureDecodeError
from .groups import GroupParams, powmod

_DOMAIN_NONCE = b"FutureAB-nonce-v1"
_DOMAIN_CHALLENGE = b"FutureAB-challenge-v1"
_DOMAIN_ADDRESS = b"FutureAB-address-v1"

ADDRESS_PREFIX = "ab1"
ADDRESS_RE = re.compile(r"^ab1[0-9a-f]{40}$")


@dataclass(frozen=True)
class KeyPair:
    """Signing key: private scalar x and public element g^x."""

    private: int
    public: int
    params: GroupParams

    def public_bytes(self) -> bytes:
        return self.params.encode_element(self.public)

    @classmethod
    def from_private(cls, params: GroupParams, private: int) -> "KeyPair":
        params.check_scalar(private)
        if private == 0:
            raise ScalarRangeError("private key must be non-zero")
        return cls(private=private, public=powmod(params.g, private, params.p), params=params)


@dataclass(frozen=True)
class Signature:
    challenge: int
    response: int

    def to_bytes(self, params: GroupParams) -> bytes:
        size = params.scalar_size
        return self.challenge.to_bytes(size, "big") + self.response.to_bytes(
            size, "big"
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, raw: bytes) -> "Signature":
        size = params.scalar_size
        if len(raw) != 2 * size:
            raise SignatureDecodeError(
                f"signature must be {2 * size} bytes, got {len(raw)}"
            )
        return cls(
            challenge=int.from_bytes(raw[:size], "big"),
            response=int.from_bytes(raw[size:], "big"),
        )


def keygen(params: GroupParams, rng=None) -> KeyPair:
    """Generate a keypair; pass a seeded random.Random for reproducibility."""
    if rng is None:
        rng = secrets.SystemRandom()
    x = rng.randrange(1, params.q)
    return KeyPair(private=x, public=powmod(params.g, x, params.p), params=params)


def _challenge(params: GroupParams, nonce_point: int, public: int, message: bytes) -> int:
    digest = hashlib.sha512(
        _DOMAIN_CHALLENGE
        + params.encode_element(nonce_point)
        + params.encode_element(public)
        + message
    ).digest()
    return int.from_bytes(digest, "big") % params.q


def sign(key: KeyPair, message: bytes) -> Signature:
    params = key.params
    counter = 0
    while True:
        material = hashlib.sha512(
            _DOMAIN_NONCE
            + params.encode_scalar(key.private)
            + counter.to_bytes(4, "big")
            + message
        ).digest()
        k = int.from_bytes(material, "big") % params.q
        if k != 0:
            break
        counter += 1
    nonce_point = powmod(params.g, k, params.p)
    e = _challenge(params, nonce_point, key.public, message)
    s = (k + e * key.private) % params.q
    return Signature(challenge=e, response=s)


def verify_sig(
    params: GroupParams, public: int, message: bytes, sig: Signature
) -> bool:
    """True iff sig is a valid signature on message under public.

    Out-of-range scalar values verify as False; only structurally
    malformed byte strings raise (see Signature.from_bytes).
    """
    if not (0 <= sig.challenge < params.q and 0 <= sig.response < params.q):
        return False
    if not 1 < public < params.p:
        return False
    # R' = g^s * public^(-e); for an honest signature this recovers g^k.
    recovered = (
        powmod(params.g, sig.response, params.p)
        * powmod(public, params.q - sig.challenge, params.p)
        % params.p
    )
    return _challenge(params, recovered, public, message) == sig.challenge


def derive_address(params: GroupParams, public: int) -> str:
    """Deterministic 20-byte public-key digest as "ab1" + hex."""
    digest = hashlib.sha256(
        _DOMAIN_ADDRESS + params.encode_element(public)
    ).digest()
    return ADDRESS_PREFIX + digest[-20:].hex()


def is_valid_address(address: str) -> bool:
    return isinstance(address, str) and ADDRESS_RE.match(address) is not None
