"""Collaborative transaction-auditing node.

Counterparties post commitment-encoded daily transaction messages, a
matcher pairs and classifies them, verified records land on an
append-only hash-chained ledger, and auditors resolve risks through
commitment openings.
"""

from .commitments import (
    Commitment,
    combine,
    commit,
    derive_randomness,
    details_scalar,
    hash_details,
    new_commitment_secret,
    verify_opening,
)
from .groups import GroupParams, hash_to_group, setup_group
from .signatures import (
    KeyPair,
    Signature,
    derive_address,
    is_valid_address,
    keygen,
    sign,
    verify_sig,
)

__all__ = [
    "Commitment",
    "GroupParams",
    "KeyPair",
    "Signature",
    "combine",
    "commit",
    "derive_address",
    "derive_randomness",
    "details_scalar",
    "hash_details",
    "hash_to_group",
    "is_valid_address",
    "keygen",
    "new_commitment_secret",
    "setup_group",
    "sign",
    "verify_sig",
]

__version__ = "0.1.0"
