"""Append-only hash-chained ledger of verified audit records.

A single-node stand-in for the permissioned chain: blocks link by hash,
every record carries both counterparties' signatures, and an operator
countersigned tip registry takes the place of network consensus.  Any
byte of recorded history that changes is caught by re-walking the chain.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from datetime import date as Date
from typing import Callable, Optional

from .commitments import Commitment
from .errors import LedgerError, NotFoundError
from .groups import GroupParams
from .messages import PairKey, canonical_message_bytes
from .signatures import Signature, verify_sig

LEDGER_MAGIC = b"ABL1"
LEDGER_VERSION = 1

GENESIS_PREVIOUS = bytes(32)
ANNOTATION_CLEAN = "clean"
ANNOTATION_RISK_RESOLVED = "risk-resolved"
_ANNOTATION_CODES = {ANNOTATION_CLEAN: 0, ANNOTATION_RISK_RESOLVED: 1}
_ANNOTATION_NAMES = {v: k for k, v in _ANNOTATION_CODES.items()}

_PROPOSAL_TAG = b"FutureAB-block-proposal-v1"
_TIP_TAG = b"FutureAB-tip-v1"

_ADDRESS_LEN = 43
_DATE_LEN = 8


@dataclass(frozen=True)
class LedgerRecord:
    """One verified pair: both sides' commitments and signatures."""

    key: PairKey
    amount_commitment_0: Commitment
    detail_commitment_0: Commitment
    signature_0: Signature
    amount_commitment_1: Commitment
    detail_commitment_1: Commitment
    signature_1: Signature
    verified_at: int
    annotation: str

    def to_bytes(self) -> bytes:
        params = self.amount_commitment_0.params
        return (
            self.key.to_bytes()
            + self.amount_commitment_0.to_bytes()
            + self.detail_commitment_0.to_bytes()
            + self.signature_0.to_bytes(params)
            + self.amount_commitment_1.to_bytes()
            + self.detail_commitment_1.to_bytes()
            + self.signature_1.to_bytes(params)
            + struct.pack(">q", self.verified_at)
            + bytes([_ANNOTATION_CODES[self.annotation]])
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, raw: bytes) -> "LedgerRecord":
        el = params.element_size
        sig_len = 2 * params.scalar_size
        expected = 2 * _ADDRESS_LEN + _DATE_LEN + 2 * (2 * el + sig_len) + 8 + 1
        if len(raw) != expected:
            raise LedgerError(f"record is {len(raw)} bytes, expected {expected}")
        pos = 0
        sender = raw[pos : pos + _ADDRESS_LEN].decode("ascii")
        pos += _ADDRESS_LEN
        receiver = raw[pos : pos + _ADDRESS_LEN].decode("ascii")
        pos += _ADDRESS_LEN
        raw_date = raw[pos : pos + _DATE_LEN].decode("ascii")
        pos += _DATE_LEN
        key = PairKey(
            sender, receiver, Date(int(raw_date[:4]), int(raw_date[4:6]), int(raw_date[6:]))
        )
        fields = []
        for _ in range(2):
            amount_c = Commitment.from_bytes(params, raw[pos : pos + el])
            pos += el
            detail_c = Commitment.from_bytes(params, raw[pos : pos + el])
            pos += el
            signature = Signature.from_bytes(params, raw[pos : pos + sig_len])
            pos += sig_len
            fields.extend((amount_c, detail_c, signature))
        verified_at = struct.unpack(">q", raw[pos : pos + 8])[0]
        code = raw[pos + 8]
        if code not in _ANNOTATION_NAMES:
            raise LedgerError(f"unknown annotation code {code}")
        return cls(key, *fields, verified_at, _ANNOTATION_NAMES[code])

    def side_canonical_bytes(self, flag: int) -> bytes:
        """Signing payload of the original flag-0 or flag-1 message."""
        amount_c = self.amount_commitment_0 if flag == 0 else self.amount_commitment_1
        detail_c = self.detail_commitment_0 if flag == 0 else self.detail_commitment_1
        return canonical_message_bytes(
            self.key.sender_address,
            self.key.receiver_address,
            amount_c,
            detail_c,
            self.key.date,
            flag,
        )

    def verify_signatures(self, resolve_key: Callable[[str], Optional[int]]) -> bool:
        params = self.amount_commitment_0.params
        for flag, signer, signature in (
            (0, self.key.sender_address, self.signature_0),
            (1, self.key.receiver_address, self.signature_1),
        ):
            public = resolve_key(signer)
            if public is None:
                return False
            if not verify_sig(params, public, self.side_canonical_bytes(flag), signature):
                return False
        return True

    def to_wire(self) -> dict:
        return {
            "key": self.key.to_wire(),
            "amount_commitment_0": self.amount_commitment_0.to_bytes().hex(),
            "detail_commitment_0": self.detail_commitment_0.to_bytes().hex(),
            "amount_commitment_1": self.amount_commitment_1.to_bytes().hex(),
            "detail_commitment_1": self.detail_commitment_1.to_bytes().hex(),
            "verified_at": self.verified_at,
            "annotation": self.annotation,
        }


@dataclass(frozen=True)
class Block:
    """Immutable chain element; the hash covers the raw payload bytes."""

    height: int
    previous_hash: bytes
    timestamp: int
    payload: bytes
    block_hash: bytes
    records: tuple[LedgerRecord, ...]

    @staticmethod
    def compute_hash(height: int, previous_hash: bytes, payload: bytes, timestamp: int) -> bytes:
        return hashlib.sha256(
            struct.pack(">q", height) + previous_hash + payload + struct.pack(">q", timestamp)
        ).digest()

    @classmethod
    def build(
        cls,
        height: int,
        previous_hash: bytes,
        records: tuple[LedgerRecord, ...],
        timestamp: int,
    ) -> "Block":
        payload = b"".join(
            struct.pack(">I", len(raw)) + raw for raw in (r.to_bytes() for r in records)
        )
        return cls(
            height=height,
            previous_hash=previous_hash,
            timestamp=timestamp,
            payload=payload,
            block_hash=cls.compute_hash(height, previous_hash, payload, timestamp),
            records=records,
        )

    def to_bytes(self) -> bytes:
        return (
            struct.pack(">q", self.height)
            + self.previous_hash
            + struct.pack(">q", self.timestamp)
            + struct.pack(">I", len(self.payload))
            + self.payload
            + self.block_hash
        )

    @classmethod
    def from_bytes(cls, params: GroupParams, raw: bytes) -> "Block":
        if len(raw) < 8 + 32 + 8 + 4 + 32:
            raise LedgerError(f"block record too short: {len(raw)} bytes")
        height = struct.unpack(">q", raw[:8])[0]
        previous_hash = raw[8:40]
        timestamp = struct.unpack(">q", raw[40:48])[0]
        payload_len = struct.unpack(">I", raw[48:52])[0]
        if len(raw) != 52 + payload_len + 32:
            raise LedgerError("block length fields are inconsistent")
        payload = raw[52 : 52 + payload_len]
        block_hash = raw[52 + payload_len :]
        return cls(
            height=height,
            previous_hash=previous_hash,
            timestamp=timestamp,
            payload=payload,
            block_hash=block_hash,
            records=_decode_payload(params, payload),
        )


def _decode_payload(params: GroupParams, payload: bytes) -> tuple[LedgerRecord, ...]:
    records = []
    pos = 0
    while pos < len(payload):
        if pos + 4 > len(payload):
            raise LedgerError("truncated record length prefix")
        (length,) = struct.unpack(">I", payload[pos : pos + 4])
        pos += 4
        if pos + length > len(payload):
            raise LedgerError("record overruns payload")
        records.append(LedgerRecord.from_bytes(params, payload[pos : pos + length]))
        pos += length
    return tuple(records)


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    first_bad_height: Optional[int] = None

    def to_wire(self) -> dict:
        return {"ok": self.ok, "first_bad_height": self.first_bad_height}


@dataclass(frozen=True)
class TipEntry:
    """Operator countersignature of a chain tip."""

    height: int
    block_hash: bytes
    signature: Signature


class Ledger:
    """Hash-chained block store with signature-checked appends."""

    def __init__(
        self,
        params: GroupParams,
        operator_public: int,
        resolve_key: Callable[[str], Optional[int]],
        clock: Optional[Callable[[], int]] = None,
        path: Optional[str] = None,
    ):
        self.params = params
        self.operator_public = operator_public
        self._resolve_key = resolve_key
        self._clock = clock or _wall_clock
        self._path = path
        self._blocks: list[Block] = [Block.build(0, GENESIS_PREVIOUS, (), 0)]
        self._index: dict[PairKey, tuple[int, int]] = {}
        self._tip_registry: list[TipEntry] = []
        self._corrupt_from: Optional[int] = None
        if path is not None:
            self._start_file()

    # -- appends ---------------------------------------------------------

    def tip(self) -> Block:
        return self._blocks[-1]

    def height(self) -> int:
        return self._blocks[-1].height

    def __len__(self) -> int:
        return len(self._blocks)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    def proposal_message(self, records: tuple[LedgerRecord, ...]) -> bytes:
        """Bytes the proposer must sign to append these records."""
        body = b"".join(r.to_bytes() for r in records)
        return _PROPOSAL_TAG + hashlib.sha256(body).digest()

    def append_block(
        self, records: tuple[LedgerRecord, ...], proposer_signature: Signature
    ) -> Block:
        """Append one block after checking every signature; all-or-nothing."""
        if not records:
            raise LedgerError("cannot append an empty block")
        if not verify_sig(
            self.params,
            self.operator_public,
            self.proposal_message(records),
            proposer_signature,
        ):
            raise LedgerError("proposer signature does not verify")
        for record in records:
            if record.key in self._index:
                raise LedgerError(f"pair already ledgered: {record.key}")
            if record.annotation not in _ANNOTATION_CODES:
                raise LedgerError(f"unknown annotation {record.annotation!r}")
            if not record.verify_signatures(self._resolve_key):
                raise LedgerError(f"record signature does not verify: {record.key}")
        tip = self.tip()
        block = Block.build(tip.height + 1, tip.block_hash, tuple(records), self._clock())
        self._blocks.append(block)
        for idx, record in enumerate(block.records):
            self._index[record.key] = (block.height, idx)
        if self._path is not None:
            self._append_file(block)
        return block

    def tip_message(self) -> bytes:
        """Bytes the operator countersigns to register the current tip."""
        tip = self.tip()
        return _TIP_TAG + struct.pack(">q", tip.height) + tip.block_hash

    def countersign_tip(self, signature: Signature) -> TipEntry:
        if not verify_sig(self.params, self.operator_public, self.tip_message(), signature):
            raise LedgerError("tip countersignature does not verify")
        entry = TipEntry(self.height(), self.tip().block_hash, signature)
        self._tip_registry.append(entry)
        return entry

    @property
    def tip_registry(self) -> tuple[TipEntry, ...]:
        return tuple(self._tip_registry)

    # -- verification ------------------------------------------------------

    def verify_chain(self) -> ChainCheck:
        """Re-walk every hash link and record signature from genesis."""
        for i, block in enumerate(self._blocks):
            if self._corrupt_from is not None and i >= self._corrupt_from:
                return ChainCheck(ok=False, first_bad_height=self._corrupt_from)
            if block.height != i:
                return ChainCheck(ok=False, first_bad_height=i)
            expected_prev = GENESIS_PREVIOUS if i == 0 else self._blocks[i - 1].block_hash
            if block.previous_hash != expected_prev:
                return ChainCheck(ok=False, first_bad_height=i)
            recomputed = Block.compute_hash(
                block.height, block.previous_hash, block.payload, block.timestamp
            )
            if recomputed != block.block_hash:
                return ChainCheck(ok=False, first_bad_height=i)
            try:
                records = _decode_payload(self.params, block.payload)
            except LedgerError:
                return ChainCheck(ok=False, first_bad_height=i)
            for record in records:
                if not record.verify_signatures(self._resolve_key):
                    return ChainCheck(ok=False, first_bad_height=i)
        if self._corrupt_from is not None:
            return ChainCheck(ok=False, first_bad_height=self._corrupt_from)
        return ChainCheck(ok=True)

    def check_tip_registry(self) -> ChainCheck:
        """Confirm registry entries match the chain; catches truncation."""
        for entry in self._tip_registry:
            if entry.height > self.height():
                return ChainCheck(ok=False, first_bad_height=self.height() + 1)
            if self._blocks[entry.height].block_hash != entry.block_hash:
                return ChainCheck(ok=False, first_bad_height=entry.height)
            message = _TIP_TAG + struct.pack(">q", entry.height) + entry.block_hash
            if not verify_sig(self.params, self.operator_public, message, entry.signature):
                return ChainCheck(ok=False, first_bad_height=entry.height)
        return ChainCheck(ok=True)

    # -- queries ---------------------------------------------------------

    def get_record(self, key: PairKey) -> tuple[LedgerRecord, int, int]:
        """Record plus its inclusion proof (block height, index in block)."""
        location = self._index.get(key)
        if location is None:
            raise NotFoundError(f"pair not on ledger: {key}")
        height, idx = location
        return self._blocks[height].records[idx], height, idx

    def has_record(self, key: PairKey) -> bool:
        return key in self._index

    # -- file persistence ---------------------------------------------------

    def _header_bytes(self) -> bytes:
        profile = self.params.profile.encode("ascii")
        return (
            LEDGER_MAGIC
            + bytes([LEDGER_VERSION, len(profile)])
            + profile
            + self.params.fingerprint()
        )

    def _start_file(self) -> None:
        with open(self._path, "wb") as fh:
            fh.write(self._header_bytes())
            for block in self._blocks:
                raw = block.to_bytes()
                fh.write(struct.pack(">I", len(raw)) + raw)

    def _append_file(self, block: Block) -> None:
        raw = block.to_bytes()
        with open(self._path, "ab") as fh:
            fh.write(struct.pack(">I", len(raw)) + raw)

    @classmethod
    def load(
        cls,
        path: str,
        params: GroupParams,
        operator_public: int,
        resolve_key: Callable[[str], Optional[int]],
        clock: Optional[Callable[[], int]] = None,
    ) -> "Ledger":
        """Rebuild a ledger from its file.

        Structurally unreadable regions are remembered rather than
        raised so verify_chain can report the first bad height.
        """
        with open(path, "rb") as fh:
            blob = fh.read()
        header = cls._parse_header(params, blob)
        ledger = cls(params, operator_public, resolve_key, clock=clock, path=None)
        ledger._path = path
        ledger._blocks = []
        pos = header
        height = 0
        while pos < len(blob):
            if pos + 4 > len(blob):
                ledger._corrupt_from = height
                break
            (length,) = struct.unpack(">I", blob[pos : pos + 4])
            pos += 4
            if pos + length > len(blob):
                ledger._corrupt_from = height
                break
            try:
                block = Block.from_bytes(params, blob[pos : pos + length])
            except (LedgerError, UnicodeDecodeError, ValueError):
                # Undecodable block: keep a placeholder so heights line up.
                block = Block(
                    height=height,
                    previous_hash=GENESIS_PREVIOUS,
                    timestamp=0,
                    payload=blob[pos : pos + length],
                    block_hash=bytes(32),
                    records=(),
                )
                if ledger._corrupt_from is None:
                    ledger._corrupt_from = height
            pos += length
            ledger._blocks.append(block)
            height += 1
        if not ledger._blocks:
            raise LedgerError("ledger file holds no blocks")
        for block in ledger._blocks:
            for idx, record in enumerate(block.records):
                ledger._index.setdefault(record.key, (block.height, idx))
        return ledger

    @staticmethod
    def _parse_header(params: GroupParams, blob: bytes) -> int:
        if len(blob) < len(LEDGER_MAGIC) + 2:
            raise LedgerError("ledger file too short")
        if blob[: len(LEDGER_MAGIC)] != LEDGER_MAGIC:
            raise LedgerError("not a ledger file")
        pos = len(LEDGER_MAGIC)
        version, profile_len = blob[pos], blob[pos + 1]
        if version != LEDGER_VERSION:
            raise LedgerError(f"unsupported ledger version {version}")
        pos += 2
        profile = blob[pos : pos + profile_len].decode("ascii")
        pos += profile_len
        fingerprint = blob[pos : pos + 8]
        if profile != params.profile or fingerprint != params.fingerprint():
            raise LedgerError("ledger file was written under different group parameters")
        return pos + 8


def _wall_clock() -> int:
    import time

    return int(time.time())
