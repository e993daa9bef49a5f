"""Pairing and classification of posted messages.

Each (sender, receiver, date) key owns two slots, one per direction
flag.  A key with one filled slot is Pending; with both filled it is
Verified when the commitments agree byte for byte and Risk otherwise.
Risks move to RiskResolvedVerified or RiskConfirmedMismatch once both
sides' commitment openings are in.  Every mutation is an event; state
is a deterministic fold of the event log, which doubles as the
persistence format.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Callable, Optional

from .commitments import details_scalar, verify_opening
from .errors import (
    AuthorizationError,
    ConflictError,
    InvalidOpeningError,
    NotFoundError,
    ValidationError,
)
from .groups import GroupParams
from .ledger import (
    ANNOTATION_CLEAN,
    ANNOTATION_RISK_RESOLVED,
    Ledger,
    LedgerRecord,
)
from .messages import PairKey, PostedMessage
from .signatures import KeyPair, sign, verify_sig
from .wallet import OpeningPackage

_LOG_TAGS = {
    "ingest": b"MSG ",
    "opening_requested": b"OPRQ",
    "opening_fulfilled": b"OPFL",
    "opening_refused": b"OPRF",
    "finalized": b"FINL",
    "stale_flagged": b"STAL",
}
_TAG_TYPES = {tag: name for name, tag in _LOG_TAGS.items()}

DEFAULT_STALE_AFTER = timedelta(days=7)


class PairState(str, Enum):
    PENDING = "pending"
    VERIFIED = "verified"
    RISK = "risk"
    RISK_RESOLVED_VERIFIED = "risk_resolved_verified"
    RISK_CONFIRMED_MISMATCH = "risk_confirmed_mismatch"


class OpeningStatus(str, Enum):
    REQUESTED = "requested"
    FULFILLED = "fulfilled"
    REFUSED = "refused"


@dataclass
class OpeningRequest:
    """One auditor's demand that one party open one message."""

    request_id: str
    key: PairKey
    auditor_id: str
    target_address: str
    target_flag: int
    status: OpeningStatus = OpeningStatus.REQUESTED
    package: Optional[OpeningPackage] = None
    note: str = ""

    def to_wire(self, include_package: bool) -> dict:
        wire = {
            "request_id": self.request_id,
            "key": self.key.to_wire(),
            "auditor_id": self.auditor_id,
            "target_address": self.target_address,
            "target_flag": self.target_flag,
            "status": self.status.value,
            "note": self.note,
        }
        if include_package:
            wire["package"] = self.package.to_wire() if self.package else None
        return wire


@dataclass
class PairRecord:
    """Live pairing state for one key."""

    key: PairKey
    message_flag0: Optional[PostedMessage] = None
    message_flag1: Optional[PostedMessage] = None
    state: PairState = PairState.PENDING
    state_history: list[tuple[PairState, str]] = field(default_factory=list)
    opening_request_ids: list[str] = field(default_factory=list)
    stale: bool = False
    ledgered: bool = False
    annotation: str = ANNOTATION_CLEAN
    first_seen: str = ""

    def message(self, flag: int) -> Optional[PostedMessage]:
        return self.message_flag0 if flag == 0 else self.message_flag1

    def to_wire(self) -> dict:
        return {
            "key": self.key.to_wire(),
            "state": self.state.value,
            "message_flag0": self.message_flag0.to_wire() if self.message_flag0 else None,
            "message_flag1": self.message_flag1.to_wire() if self.message_flag1 else None,
            "state_history": [[state.value, ts] for state, ts in self.state_history],
            "opening_request_ids": list(self.opening_request_ids),
            "stale": self.stale,
            "ledgered": self.ledgered,
            "annotation": self.annotation,
            "first_seen": self.first_seen,
        }


@dataclass(frozen=True)
class FinalizeReceipt:
    """Outcome of one ledger hand-off."""

    block_height: Optional[int]
    record_count: int
    keys: tuple[PairKey, ...]

    def to_wire(self) -> dict:
        return {
            "block_height": self.block_height,
            "record_count": self.record_count,
            "keys": [key.to_wire() for key in self.keys],
        }


def classify(record: PairRecord) -> PairState:
    """Base three-state rule from the two message slots alone."""
    m0, m1 = record.message_flag0, record.message_flag1
    if m0 is None and m1 is None:
        raise ValidationError("cannot classify an empty pair record")
    if m0 is None or m1 is None:
        return PairState.PENDING
    if (
        m0.amount_commitment == m1.amount_commitment
        and m0.detail_commitment == m1.detail_commitment
    ):
        return PairState.VERIFIED
    return PairState.RISK


class Matcher:
    """Event-sourced pairing engine over registered addresses."""

    def __init__(
        self,
        params: GroupParams,
        known_address: Callable[[str], bool],
        resolve_key: Callable[[str], Optional[int]],
        is_auditor: Callable[[str], bool],
        clock: Optional[Callable[[], datetime]] = None,
        ledger: Optional[Ledger] = None,
        proposer_key: Optional[KeyPair] = None,
        log_path: Optional[str] = None,
    ):
        self.params = params
        self._known_address = known_address
        self._resolve_key = resolve_key
        self._is_auditor = is_auditor
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self.ledger = ledger
        self._proposer_key = proposer_key
        self._lock = threading.RLock()
        self._records: dict[PairKey, PairRecord] = {}
        self._requests: dict[str, OpeningRequest] = {}
        self._request_seq = 0
        self._log_path = log_path
        self._log_fh = None
        if log_path is not None:
            self._replay_log(log_path)
            self._log_fh = open(log_path, "ab")

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    # -- event plumbing ---------------------------------------------------

    def _now(self) -> str:
        return self._clock().isoformat()

    def _emit(self, event_type: str, payload: dict) -> None:
        if self._log_fh is None:
            return
        raw = json.dumps(payload, sort_keys=True).encode("utf-8")
        self._log_fh.write(_LOG_TAGS[event_type] + struct.pack(">I", len(raw)) + raw)
        self._log_fh.flush()

    def _replay_log(self, path: str) -> None:
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except FileNotFoundError:
            return
        pos = 0
        while pos < len(blob):
            if pos + 8 > len(blob):
                raise ValidationError("truncated matcher event log")
            tag = blob[pos : pos + 4]
            (length,) = struct.unpack(">I", blob[pos + 4 : pos + 8])
            pos += 8
            if pos + length > len(blob):
                raise ValidationError("truncated matcher event log")
            event_type = _TAG_TYPES.get(tag)
            if event_type is None:
                raise ValidationError(f"unknown event tag {tag!r}")
            payload = json.loads(blob[pos : pos + length].decode("utf-8"))
            pos += length
            self._apply(event_type, payload)

    def _apply(self, event_type: str, payload: dict) -> None:
        if event_type == "ingest":
            message = PostedMessage.from_wire(self.params, payload["message"])
            self._apply_ingest(message, payload["ts"])
        elif event_type == "opening_requested":
            self._apply_opening_requested(payload)
        elif event_type == "opening_fulfilled":
            self._apply_opening_fulfilled(
                payload["request_id"],
                OpeningPackage.from_wire(payload["package"]),
                payload["ts"],
            )
        elif event_type == "opening_refused":
            self._apply_opening_refused(payload["request_id"], payload["note"])
        elif event_type == "finalized":
            self._apply_finalized(
                [PairKey.from_wire(k) for k in payload["keys"]], payload["height"]
            )
        elif event_type == "stale_flagged":
            self._apply_stale([PairKey.from_wire(k) for k in payload["keys"]])
        else:
            raise ValidationError(f"unknown event type {event_type!r}")

    # -- ingest ----------------------------------------------------------

    def ingest(self, message: PostedMessage) -> PairRecord:
        """Validate, store, and classify one posted message."""
        for label, address in (
            ("sender", message.sender_address),
            ("receiver", message.receiver_address),
        ):
            if not self._known_address(address):
                raise ValidationError(f"unregistered party: {label} {address}")
        public = self._resolve_key(message.signer_address)
        if public is None:
            raise ValidationError(f"unregistered party: signer {message.signer_address}")
        if not verify_sig(self.params, public, message.canonical_bytes(), message.signature):
            raise ValidationError("message signature does not verify")
        with self._lock:
            ts = self._now()
            record = self._apply_ingest(message, ts)
            self._emit("ingest", {"message": message.to_wire(), "ts": ts})
            return record

    def _apply_ingest(self, message: PostedMessage, ts: str) -> PairRecord:
        key = message.pair_key()
        record = self._records.get(key)
        if record is None:
            record = PairRecord(key=key, first_seen=ts)
            self._records[key] = record
        superseded = record.message(message.flag) is not None
        if message.flag == 0:
            record.message_flag0 = message
        else:
            record.message_flag1 = message
        if superseded:
            # The replaced side's open requests no longer match a live message.
            for request_id in record.opening_request_ids:
                request = self._requests[request_id]
                if (
                    request.status is OpeningStatus.REQUESTED
                    and request.target_flag == message.flag
                ):
                    request.status = OpeningStatus.REFUSED
                    request.note = "superseded by a newer posting"
            record.annotation = ANNOTATION_CLEAN
        new_state = classify(record)
        self._transition(record, new_state, ts)
        return record

    def _transition(self, record: PairRecord, state: PairState, ts: str) -> None:
        if record.state_history and record.state is state:
            return
        record.state = state
        record.state_history.append((state, ts))

    # -- queries -----------------------------------------------------------

    def record(self, key: PairKey) -> PairRecord:
        with self._lock:
            record = self._records.get(key)
            if record is None:
                raise NotFoundError(f"no pair record for {key}")
            return record

    def all_records(self) -> list[PairRecord]:
        with self._lock:
            return [self._records[k] for k in sorted(self._records)]

    def list_by_state(
        self, state: PairState, page: int = 0, page_size: int = 50
    ) -> list[PairRecord]:
        """Deterministic key-ordered listing with stable pagination."""
        if page < 0 or page_size <= 0:
            raise ValidationError("page must be >= 0 and page_size > 0")
        matching = [r for r in self.all_records() if r.state is state]
        start = page * page_size
        return matching[start : start + page_size]

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {state.value: 0 for state in PairState}
            for record in self._records.values():
                out[record.state.value] += 1
            return out

    def opening_request(self, request_id: str) -> OpeningRequest:
        with self._lock:
            request = self._requests.get(request_id)
            if request is None:
                raise NotFoundError(f"no opening request {request_id!r}")
            return request

    def opening_requests_for(self, key: PairKey) -> list[OpeningRequest]:
        with self._lock:
            record = self._records.get(key)
            if record is None:
                return []
            return [self._requests[rid] for rid in record.opening_request_ids]

    # -- opening workflow ---------------------------------------------------

    def request_opening(
        self, key: PairKey, auditor_id: str, target_address: str
    ) -> OpeningRequest:
        """File an auditor demand that one side open its commitments."""
        if not self._is_auditor(auditor_id):
            raise AuthorizationError(f"{auditor_id!r} does not hold the auditor role")
        with self._lock:
            record = self._records.get(key)
            if record is None:
                raise NotFoundError(f"no pair record for {key}")
            if record.state is not PairState.RISK:
                raise ConflictError(
                    f"openings apply to risk pairs only, state is {record.state.value}"
                )
            if target_address == key.sender_address:
                target_flag = 0
            elif target_address == key.receiver_address:
                target_flag = 1
            else:
                raise ValidationError(f"{target_address} is not a party to {key}")
            if record.message(target_flag) is None:
                raise ConflictError("target party has not posted a message to open")
            self._request_seq += 1
            payload = {
                "request_id": f"opr-{self._request_seq:06d}",
                "key": key.to_wire(),
                "auditor_id": auditor_id,
                "target_address": target_address,
                "target_flag": target_flag,
                "ts": self._now(),
            }
            request = self._apply_opening_requested(payload)
            self._emit("opening_requested", payload)
            return request

    def _apply_opening_requested(self, payload: dict) -> OpeningRequest:
        request = OpeningRequest(
            request_id=payload["request_id"],
            key=PairKey.from_wire(payload["key"]),
            auditor_id=payload["auditor_id"],
            target_address=payload["target_address"],
            target_flag=payload["target_flag"],
        )
        self._requests[request.request_id] = request
        self._records[request.key].opening_request_ids.append(request.request_id)
        seq = int(request.request_id.split("-")[1])
        self._request_seq = max(self._request_seq, seq)
        return request

    def submit_opening(self, request_id: str, package: OpeningPackage) -> PairRecord:
        """Check a party's opening against its commitments and resolve.

        Once both sides of a risk pair have valid openings, equal
        revealed amounts settle it as RiskResolvedVerified and unequal
        amounts as RiskConfirmedMismatch.
        """
        with self._lock:
            request = self.opening_request(request_id)
            if request.status is not OpeningStatus.REQUESTED:
                raise ConflictError(f"request {request_id!r} is {request.status.value}")
            record = self._records[request.key]
            message = record.message(request.target_flag)
            if message is None:
                raise ConflictError("target message is gone")
            if not verify_opening(
                message.amount_commitment, package.amount, package.amount_randomness
            ):
                raise InvalidOpeningError(
                    "amount opening does not match the commitment"
                )
            if not verify_opening(
                message.detail_commitment,
                details_scalar(self.params, package.details),
                package.detail_randomness,
            ):
                raise InvalidOpeningError(
                    "detail opening does not match the commitment"
                )
            ts = self._now()
            record = self._apply_opening_fulfilled(request_id, package, ts)
            self._emit(
                "opening_fulfilled",
                {"request_id": request_id, "package": package.to_wire(), "ts": ts},
            )
            return record

    def _apply_opening_fulfilled(
        self, request_id: str, package: OpeningPackage, ts: str
    ) -> PairRecord:
        request = self._requests[request_id]
        request.status = OpeningStatus.FULFILLED
        request.package = package
        record = self._records[request.key]
        self._resolve_if_both_open(record, ts)
        return record

    def _resolve_if_both_open(self, record: PairRecord, ts: str) -> None:
        if record.state is not PairState.RISK:
            return
        amounts: dict[int, int] = {}
        for request_id in record.opening_request_ids:
            request = self._requests[request_id]
            if request.status is not OpeningStatus.FULFILLED or request.package is None:
                continue
            # Count only packages that open the live message: a repost
            # invalidates openings of the replaced posting.
            message = record.message(request.target_flag)
            if message is None or not verify_opening(
                message.amount_commitment,
                request.package.amount,
                request.package.amount_randomness,
            ):
                continue
            amounts[request.target_flag] = request.package.amount
        if set(amounts) != {0, 1}:
            return
        if amounts[0] == amounts[1]:
            record.annotation = ANNOTATION_RISK_RESOLVED
            self._transition(record, PairState.RISK_RESOLVED_VERIFIED, ts)
        else:
            self._transition(record, PairState.RISK_CONFIRMED_MISMATCH, ts)

    def refuse_opening(self, request_id: str, note: str = "") -> OpeningRequest:
        """Record that the target party declined to open."""
        with self._lock:
            request = self.opening_request(request_id)
            if request.status is not OpeningStatus.REQUESTED:
                raise ConflictError(f"request {request_id!r} is {request.status.value}")
            self._apply_opening_refused(request_id, note)
            self._emit("opening_refused", {"request_id": request_id, "note": note})
            return request

    def _apply_opening_refused(self, request_id: str, note: str) -> None:
        request = self._requests[request_id]
        request.status = OpeningStatus.REFUSED
        request.note = note

    # -- ledger hand-off -----------------------------------------------------

    def finalize_verified(self, batch_size: int = 100) -> FinalizeReceipt:
        """Write up to batch_size verified pairs to the ledger."""
        if self.ledger is None or self._proposer_key is None:
            raise ValidationError("matcher has no ledger attached")
        if batch_size <= 0:
            raise ValidationError("batch_size must be positive")
        with self._lock:
            eligible = [
                record
                for record in self.all_records()
                if not record.ledgered
                and record.state
                in (PairState.VERIFIED, PairState.RISK_RESOLVED_VERIFIED)
            ]
            batch = eligible[:batch_size]
            if not batch:
                return FinalizeReceipt(block_height=None, record_count=0, keys=())
            records = tuple(self._ledger_record(record) for record in batch)
            signature = sign(self._proposer_key, self.ledger.proposal_message(records))
            block = self.ledger.append_block(records, signature)
            self.ledger.countersign_tip(sign(self._proposer_key, self.ledger.tip_message()))
            keys = [record.key for record in batch]
            self._apply_finalized(keys, block.height)
            self._emit(
                "finalized",
                {
                    "keys": [key.to_wire() for key in keys],
                    "height": block.height,
                    "ts": self._now(),
                },
            )
            return FinalizeReceipt(
                block_height=block.height, record_count=len(batch), keys=tuple(keys)
            )

    def _ledger_record(self, record: PairRecord) -> LedgerRecord:
        m0, m1 = record.message_flag0, record.message_flag1
        assert m0 is not None and m1 is not None
        return LedgerRecord(
            key=record.key,
            amount_commitment_0=m0.amount_commitment,
            detail_commitment_0=m0.detail_commitment,
            signature_0=m0.signature,
            amount_commitment_1=m1.amount_commitment,
            detail_commitment_1=m1.detail_commitment,
            signature_1=m1.signature,
            verified_at=_ledger_timestamp(record),
            annotation=record.annotation,
        )

    def _apply_finalized(self, keys: list[PairKey], height: int) -> None:
        for key in keys:
            self._records[key].ledgered = True

    # -- housekeeping ----------------------------------------------------------

    def flag_stale_pending(
        self, age_threshold: timedelta = DEFAULT_STALE_AFTER
    ) -> list[PairRecord]:
        """Mark pending pairs older than the threshold for auditor review."""
        with self._lock:
            cutoff = self._clock() - age_threshold
            flagged = []
            for record in self.all_records():
                if record.state is not PairState.PENDING or record.stale:
                    continue
                if datetime.fromisoformat(record.first_seen) <= cutoff:
                    flagged.append(record)
            if flagged:
                keys = [record.key for record in flagged]
                self._apply_stale(keys)
                self._emit(
                    "stale_flagged",
                    {"keys": [key.to_wire() for key in keys], "ts": self._now()},
                )
            return flagged

    def _apply_stale(self, keys: list[PairKey]) -> None:
        for key in keys:
            self._records[key].stale = True


def _ledger_timestamp(record: PairRecord) -> int:
    """Seconds-precision timestamp of the record's final verification."""
    ts = datetime.fromisoformat(record.state_history[-1][1])
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())
