"""Pedersen commitments with homomorphic combination.

A commitment to value v under randomness r is g^v * h^r mod p.  Because
h is hash-derived, the scheme is binding; because r blinds the value, a
commitment reveals nothing about v.  Multiplying two commitments yields
a commitment to the sum of the values under the sum of the randomness,
which is what lets both counterparties of a relationship produce
byte-identical commitments for equal daily totals.

Shared randomness: counterparties hold one 32-byte secret per
relationship and derive per-day randomness from it with a KDF, so equal
inputs always produce equal commitments without any extra round trip.
"""

from __future__ import annotations

import datetime
import hashlib
import secrets
from dataclasses import dataclass
from typing import Sequence

from .errors import GroupMismatchError, ValidationError
from .groups import GroupParams, powmod

_DOMAIN_RANDOMNESS = b"FutureAB-randomness-v1"
_DOMAIN_DETAILS = b"FutureAB-details-v1"

SECRET_SIZE = 32

# The daily aggregate amount always uses slot 0; transaction details use 1.
AMOUNT_SLOT = 0
DETAIL_SLOT = 1


@dataclass(frozen=True)
class Commitment:
    """One group element committing to a hidden scalar."""

    element: int
    params: GroupParams

    def to_bytes(self) -> bytes:
        return self.params.encode_element(self.element)

    @classmethod
    def from_bytes(cls, params: GroupParams, raw: bytes) -> "Commitment":
        return cls(element=params.decode_element(raw), params=params)


def commit(params: GroupParams, v: int, r: int) -> Commitment:
    """Commit to value v under randomness r: g^v * h^r mod p.

    Raises ScalarRangeError unless both scalars lie in [0, q).
    """
    params.check_scalar(v)
    params.check_scalar(r)
    element = powmod(params.g, v, params.p) * powmod(params.h, r, params.p)
    return Commitment(element % params.p, params)


def combine(c1: Commitment, c2: Commitment) -> Commitment:
    """Multiply two commitments; commits to v1+v2 under r1+r2 (mod q)."""
    if c1.params != c2.params:
        raise GroupMismatchError("commitments use different group parameters")
    return Commitment(c1.element * c2.element % c1.params.p, c1.params)


def verify_opening(c: Commitment, v: int, r: int) -> bool:
    """Check that (v, r) opens c.  Scalars are reduced mod q first."""
    q = c.params.q
    return commit(c.params, v % q, r % q) == c


def new_commitment_secret(rng=None) -> bytes:
    """Fresh 32-byte shared secret for one counterparty relationship."""
    if rng is None:
        return secrets.token_bytes(SECRET_SIZE)
    return rng.randbytes(SECRET_SIZE)


def derive_randomness(
    params: GroupParams, secret: bytes, date: datetime.date, index: int
) -> int:
    """Deterministic per-day commitment randomness from a shared secret.

    Both holders of the secret derive identical scalars for the same
    date and slot index, so equal committed values match byte for byte.
    """
    if len(secret) != SECRET_SIZE:
        raise ValidationError(f"secret must be {SECRET_SIZE} bytes")
    if index < 0:
        raise ValidationError("slot index must be non-negative")
    material = hashlib.sha512(
        _DOMAIN_RANDOMNESS
        + secret
        + date.isoformat().encode("ascii")
        + index.to_bytes(4, "big")
    ).digest()
    return int.from_bytes(material, "big") % params.q


def hash_details(details: Sequence[str]) -> bytes:
    """Digest of a detail-text sequence; each entry is length-prefixed
    so boundaries are unambiguous."""
    hasher = hashlib.sha512(_DOMAIN_DETAILS)
    for text in details:
        raw = text.encode("utf-8")
        hasher.update(len(raw).to_bytes(4, "big"))
        hasher.update(raw)
    return hasher.digest()


def details_scalar(params: GroupParams, details: Sequence[str]) -> int:
    """Reduce a detail digest into the scalar field for committing."""
    return int.from_bytes(hash_details(details), "big") % params.q
