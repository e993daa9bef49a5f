"""Prime-order multiplicative group arithmetic.

All commitment and signature operations in this package run inside a
subgroup of order q of the multiplicative group mod p, where p and q are
prime and q divides p-1.  Two parameter profiles ship with the package:

- "test": a 43-bit modulus whose arithmetic a schoolbook big-integer
  oracle can re-check exhaustively in tests;
- "production": a 2048-bit modulus with a 256-bit prime-order subgroup.

Generators are derived by hashing a public label onto the group, so no
participant knows the discrete log of h with respect to g.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field

from .errors import ScalarRangeError, ValidationError

try:
    from gmpy2 import powmod as _gmpy_powmod

    def powmod(base: int, exp: int, mod: int) -> int:
        return int(_gmpy_powmod(base, exp, mod))

except ImportError:  # pragma: no cover - exercised only without gmpy2
    powmod = pow

_DOMAIN_GROUP = b"FutureAB-group-v1"

# Fixed test profile: p = 6*q + 1 with q prime, small enough for oracle checks.
_TEST_Q = 1099511627791
_TEST_P = 6597069766747

# Fixed production profile: 2048-bit p = k*q + 1 with 256-bit prime q.
# Primality and subgroup structure are re-verified by the test suite.
_PROD_Q = 0xDC8B626408ACD7ADBC49FE4285D7F80C9A38D246C5E4F8E65714E7FFBB48E751
_PROD_P = int(
    "96A0863C20F8C15641C2CAF116D13B3C4521990AB9BF135F6933011DE113B2D0"
    "8DCF421288DE2C2DDCDC38606B7AF4ACE425CA462F6AE96C24B4B0E2B1D76F8A"
    "80272D56C41B670DBAC377C5DB931D02D0317F1E0F57930DC962E16D7BB08C2C"
    "8E75D4568D75FF7A5EAB13A2C3A94F31ED6F9419D79DEAA61A7CBDF6D8C2032E"
    "56F43A1AE9897DD94B19BE9FCA04C620A72C5E6CDB14CD67DE2F8EC44C5C0899"
    "1872008DC7A72646FD0164266830EA6A8B639D9793F1B631E601CD251E6470D2"
    "28084F3F84748167AA22E9E8C336B7EDDE3D70C05B1618027DCE4C72276BFBEC"
    "E9819D06CA10D8265C00FED40E509B8AB2D5B881110C9E1F762F5C95BE68CF25",
    16,
)


@dataclass(frozen=True)
class GroupParams:
    """Public parameters (p, q, g, h) of one prime-order subgroup.

    g and h are independent order-q generators; h must come from a
    nothing-up-my-sleeve derivation so that log_g(h) is unknown.
    """

    p: int
    q: int
    g: int
    h: int
    profile: str = field(default="custom", compare=False)

    def __post_init__(self) -> None:
        if self.p <= 3 or self.p % 2 == 0:
            raise ValidationError("modulus must be an odd prime > 3")
        if (self.p - 1) % self.q != 0:
            raise ValidationError("subgroup order q must divide p-1")
        for name, gen in (("g", self.g), ("h", self.h)):
            if not 1 < gen < self.p:
                raise ValidationError(f"generator {name} out of range")
            if powmod(gen, self.q, self.p) != 1:
                raise ValidationError(f"generator {name} does not have order q")
        if self.g == self.h:
            raise ValidationError("g and h must be distinct")

    @property
    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def fingerprint(self) -> bytes:
        """8-byte digest identifying this parameter set."""
        material = b"|".join(
            str(n).encode() for n in (self.p, self.q, self.g, self.h)
        )
        return hashlib.sha256(_DOMAIN_GROUP + material).digest()[:8]

    # Canonical fixed-width big-endian encodings.  These byte strings are
    # the exact inputs to signing and hashing throughout the system.

    def encode_element(self, x: int) -> bytes:
        return x.to_bytes(self.element_size, "big")

    def decode_element(self, raw: bytes) -> int:
        if len(raw) != self.element_size:
            raise ValidationError(
                f"element must be {self.element_size} bytes, got {len(raw)}"
            )
        return int.from_bytes(raw, "big")

    def encode_scalar(self, v: int) -> bytes:
        self.check_scalar(v)
        return v.to_bytes(self.scalar_size, "big")

    def decode_scalar(self, raw: bytes) -> int:
        if len(raw) != self.scalar_size:
            raise ValidationError(
                f"scalar must be {self.scalar_size} bytes, got {len(raw)}"
            )
        return int.from_bytes(raw, "big")

    def check_scalar(self, v: int) -> int:
        if not 0 <= v < self.q:
            raise ScalarRangeError(f"scalar {v} outside [0, {self.q})")
        return v


def hash_to_group(p: int, q: int, label: bytes) -> int:
    """Derive an order-q element from a public label.

    Hashes label || counter, reduces mod p and raises to the cofactor,
    retrying until the result is a nontrivial subgroup element.  Anyone
    can recompute the derivation; nobody learns a discrete log from it.
    """
    cofactor = (p - 1) // q
    for counter in itertools.count():
        digest = hashlib.sha256(
            _DOMAIN_GROUP + label + counter.to_bytes(4, "big")
        ).digest()
        candidate = int.from_bytes(digest, "big") % p
        element = powmod(candidate, cofactor, p)
        if element not in (0, 1):
            return element
    raise AssertionError("unreachable")


def _build_profile(p: int, q: int, profile: str) -> GroupParams:
    g = hash_to_group(p, q, b"FutureAB-g")
    h = hash_to_group(p, q, b"FutureAB-h")
    if g == h:  # astronomically unlikely; fall back to an offset label
        h = hash_to_group(p, q, b"FutureAB-h2")
    return GroupParams(p=p, q=q, g=g, h=h, profile=profile)


_PROFILES: dict[str, GroupParams] = {}


def setup_group(security_level: str) -> GroupParams:
    """Return the fixed parameter set for "test" or "production"."""
    if security_level not in ("test", "production"):
        raise ValidationError(f"unknown security level {security_level!r}")
    if security_level not in _PROFILES:
        if security_level == "test":
            _PROFILES["test"] = _build_profile(_TEST_P, _TEST_Q, "test")
        else:
            _PROFILES["production"] = _build_profile(_PROD_P, _PROD_Q, "production")
    return _PROFILES[security_level]
