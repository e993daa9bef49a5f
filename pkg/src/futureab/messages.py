"""Posted-message type, canonical signing bytes, and wire encodings.

A posted message is one side's daily aggregate for one counterparty:
addresses, two commitments, the GMT date, and a direction flag.  The
canonical byte layout is the exact signing payload, so both sides and
every verifier reproduce it bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from datetime import date as Date

from .commitments import Commitment
from .errors import ValidationError
from .groups import GroupParams
from .signatures import Signature, is_valid_address

FLAG_SENDER_POSTED = 0
FLAG_RECEIVER_POSTED = 1

ADDRESS_LEN = 43
DATE_LEN = 8


@dataclass(frozen=True, order=True)
class PairKey:
    """Join key for matching the two sides of one daily aggregate."""

    sender_address: str
    receiver_address: str
    date: Date

    def to_bytes(self) -> bytes:
        return (
            self.sender_address.encode("ascii")
            + self.receiver_address.encode("ascii")
            + self.date.strftime("%Y%m%d").encode("ascii")
        )

    def to_wire(self) -> dict:
        return {
            "sender_address": self.sender_address,
            "receiver_address": self.receiver_address,
            "date": self.date.isoformat(),
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "PairKey":
        if not isinstance(obj, dict):
            raise ValidationError("pair key must be an object")
        try:
            sender = obj["sender_address"]
            receiver = obj["receiver_address"]
            date = Date.fromisoformat(obj["date"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed pair key: {exc}") from None
        for label, address in (("sender", sender), ("receiver", receiver)):
            if not (isinstance(address, str) and is_valid_address(address)):
                raise ValidationError(f"malformed {label} address {address!r}")
        return cls(sender, receiver, date)


def canonical_message_bytes(
    sender_address: str,
    receiver_address: str,
    amount_commitment: Commitment,
    detail_commitment: Commitment,
    date: Date,
    flag: int,
) -> bytes:
    """Exact byte string a message signature covers."""
    if flag not in (FLAG_SENDER_POSTED, FLAG_RECEIVER_POSTED):
        raise ValidationError(f"flag must be 0 or 1, got {flag!r}")
    return (
        sender_address.encode("ascii")
        + receiver_address.encode("ascii")
        + amount_commitment.to_bytes()
        + detail_commitment.to_bytes()
        + date.strftime("%Y%m%d").encode("ascii")
        + bytes([flag])
    )


@dataclass(frozen=True)
class PostedMessage:
    """One signed daily aggregate posting."""

    sender_address: str
    receiver_address: str
    amount_commitment: Commitment
    detail_commitment: Commitment
    date: Date
    flag: int
    signature: Signature

    @property
    def signer_address(self) -> str:
        """Sender posted flag-0 messages, receiver posted flag-1."""
        if self.flag == FLAG_SENDER_POSTED:
            return self.sender_address
        return self.receiver_address

    def pair_key(self) -> PairKey:
        return PairKey(self.sender_address, self.receiver_address, self.date)

    def canonical_bytes(self) -> bytes:
        return canonical_message_bytes(
            self.sender_address,
            self.receiver_address,
            self.amount_commitment,
            self.detail_commitment,
            self.date,
            self.flag,
        )

    def message_id(self) -> str:
        """Stable hex identifier covering content and signature."""
        params = self.amount_commitment.params
        digest = hashlib.sha256(
            self.canonical_bytes() + self.signature.to_bytes(params)
        )
        return digest.hexdigest()

    def to_wire(self) -> dict:
        """JSON-safe dict used on every transport boundary."""
        params = self.amount_commitment.params
        return {
            "sender_address": self.sender_address,
            "receiver_address": self.receiver_address,
            "amount_commitment": self.amount_commitment.to_bytes().hex(),
            "detail_commitment": self.detail_commitment.to_bytes().hex(),
            "date": self.date.isoformat(),
            "flag": self.flag,
            "signature": self.signature.to_bytes(params).hex(),
        }

    @classmethod
    def from_wire(cls, params: GroupParams, obj: dict) -> "PostedMessage":
        if not isinstance(obj, dict):
            raise ValidationError("message must be an object")
        try:
            sender = obj["sender_address"]
            receiver = obj["receiver_address"]
            amount_hex = obj["amount_commitment"]
            detail_hex = obj["detail_commitment"]
            date_text = obj["date"]
            flag = obj["flag"]
            sig_hex = obj["signature"]
        except KeyError as exc:
            raise ValidationError(f"message missing field {exc.args[0]!r}") from None
        for label, address in (("sender", sender), ("receiver", receiver)):
            if not (isinstance(address, str) and is_valid_address(address)):
                raise ValidationError(f"malformed {label} address {address!r}")
        if flag not in (FLAG_SENDER_POSTED, FLAG_RECEIVER_POSTED):
            raise ValidationError(f"flag must be 0 or 1, got {flag!r}")
        try:
            date = Date.fromisoformat(date_text)
        except (TypeError, ValueError):
            raise ValidationError(f"invalid date {date_text!r}") from None
        try:
            amount_c = Commitment.from_bytes(params, bytes.fromhex(amount_hex))
            detail_c = Commitment.from_bytes(params, bytes.fromhex(detail_hex))
            signature = Signature.from_bytes(params, bytes.fromhex(sig_hex))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed message field: {exc}") from None
        return cls(sender, receiver, amount_c, detail_c, date, flag, signature)

    def to_bytes(self) -> bytes:
        """Fixed-width binary form for log and file storage."""
        params = self.amount_commitment.params
        return self.canonical_bytes() + self.signature.to_bytes(params)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "PostedMessage":
        el = params.element_size
        sig_len = 2 * params.scalar_size
        expected = 2 * ADDRESS_LEN + 2 * el + DATE_LEN + 1 + sig_len
        if len(data) != expected:
            raise ValidationError(
                f"message record is {len(data)} bytes, expected {expected}"
            )
        pos = 0
        sender = data[pos : pos + ADDRESS_LEN].decode("ascii")
        pos += ADDRESS_LEN
        receiver = data[pos : pos + ADDRESS_LEN].decode("ascii")
        pos += ADDRESS_LEN
        amount_c = Commitment.from_bytes(params, data[pos : pos + el])
        pos += el
        detail_c = Commitment.from_bytes(params, data[pos : pos + el])
        pos += el
        raw_date = data[pos : pos + DATE_LEN].decode("ascii")
        pos += DATE_LEN
        date = Date(int(raw_date[:4]), int(raw_date[4:6]), int(raw_date[6:]))
        flag = data[pos]
        pos += 1
        signature = Signature.from_bytes(params, data[pos:])
        for label, address in (("sender", sender), ("receiver", receiver)):
            if not is_valid_address(address):
                raise ValidationError(f"malformed {label} address {address!r}")
        if flag not in (FLAG_SENDER_POSTED, FLAG_RECEIVER_POSTED):
            raise ValidationError(f"flag must be 0 or 1, got {flag}")
        return cls(sender, receiver, amount_c, detail_c, date, flag, signature)
