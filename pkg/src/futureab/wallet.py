"""Company wallet: value sets, transaction staging, and daily postings.

A wallet keeps one value set per counterparty relationship (signing key,
own address, counterparty address, shared commitment secret), stages raw
transactions in a journal, and folds each GMT day's entries into at most
one commitment-encoded signed message per counterparty and direction.
Opening data for every built message is retained so auditors can later
ask for the plaintext behind a commitment.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
from dataclasses import dataclass, field
from datetime import date as Date
from datetime import datetime, timezone
from enum import Enum, IntEnum
from typing import Callable, Iterable, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from .commitments import (
    AMOUNT_SLOT,
    DETAIL_SLOT,
    SECRET_SIZE,
    commit,
    derive_randomness,
    details_scalar,
    new_commitment_secret,
    verify_opening,
)
from .errors import NotFoundError, ValidationError
from .groups import GroupParams
from .messages import PostedMessage, canonical_message_bytes
from .signatures import KeyPair, derive_address, is_valid_address, keygen, sign

WALLET_MAGIC = b"ABW1"
WALLET_VERSION = 1

CSV_HEADER = ["counterparty_id", "direction", "amount_minor", "date", "details"]

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1
_SALT_SIZE = 16
_NONCE_SIZE = 12


class Direction(IntEnum):
    """Which way money moved, from the staging company's point of view."""

    OUTGOING = 0
    INCOMING = 1


class ValueSetStatus(str, Enum):
    AWAITING = "awaiting_counterparty"
    ACTIVE = "active"
    RETIRED = "retired"


@dataclass
class ValueSet:
    """Key material and addresses for one counterparty relationship."""

    created_at: datetime
    counterparty_id: str
    signing_key: KeyPair
    own_address: str
    shared_secret: bytes
    counterparty_address: Optional[str] = None
    status: ValueSetStatus = ValueSetStatus.AWAITING

    def summary(self) -> dict:
        """Public view: never includes the key or the secret."""
        return {
            "counterparty_id": self.counterparty_id,
            "own_address": self.own_address,
            "counterparty_address": self.counterparty_address,
            "status": self.status.value,
            "created_at": self.created_at.isoformat(),
        }


@dataclass(frozen=True)
class StagedTransaction:
    """One raw journal entry before daily aggregation."""

    counterparty_id: str
    direction: Direction
    amount: int
    date: Date
    details: str = ""


@dataclass(frozen=True)
class CounterpartyNotice:
    """Outbound value-set synchronization message.

    An ``invite`` carries a fresh shared secret; a ``confirm`` answers an
    invite with the local address only.
    """

    kind: str
    from_company: str
    to_company: str
    address: str
    secret: Optional[bytes] = None


@dataclass(frozen=True)
class OpeningPackage:
    """Plaintext and randomness that re-open one message's commitments."""

    message_id: str
    amount: int
    amount_randomness: int
    details: tuple[str, ...]
    detail_randomness: int

    def to_wire(self) -> dict:
        return {
            "message_id": self.message_id,
            "amount": self.amount,
            "amount_randomness": hex(self.amount_randomness),
            "details": list(self.details),
            "detail_randomness": hex(self.detail_randomness),
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "OpeningPackage":
        if not isinstance(obj, dict):
            raise ValidationError("opening package must be an object")
        try:
            message_id = obj["message_id"]
            amount = obj["amount"]
            amount_r = int(obj["amount_randomness"], 16)
            details = tuple(obj["details"])
            detail_r = int(obj["detail_randomness"], 16)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed opening package: {exc}") from None
        if not isinstance(amount, int) or amount < 0:
            raise ValidationError(f"opening amount must be a non-negative int")
        if not all(isinstance(d, str) for d in details):
            raise ValidationError("opening details must be strings")
        return cls(message_id, amount, amount_r, details, detail_r)


@dataclass(frozen=True)
class ImportReport:
    """Outcome of a bulk CSV import."""

    accepted: int
    rejected: tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class DailyBuild:
    """Messages built for one date plus per-counterparty failures."""

    messages: tuple[PostedMessage, ...]
    errors: dict[str, str]


@dataclass
class _StoredOpening:
    amount: int
    amount_randomness: int
    details: tuple[str, ...]
    detail_randomness: int


def _expand_selection(
    selected: Iterable[str], gallery: Optional[dict[str, list[str]]]
) -> list[str]:
    """Resolve gallery categories to company ids and validate the rest."""
    known: Optional[set[str]] = None
    if gallery is not None:
        known = {cid for companies in gallery.values() for cid in companies}
    expanded: list[str] = []
    unknown: list[str] = []
    for entry in selected:
        if gallery is not None and entry in gallery:
            expanded.extend(gallery[entry])
        elif known is not None and entry not in known:
            unknown.append(entry)
        else:
            expanded.append(entry)
    if unknown:
        raise ValidationError(f"unknown counterparties: {', '.join(unknown)}")
    deduped: list[str] = []
    seen: set[str] = set()
    for cid in expanded:
        if cid not in seen:
            seen.add(cid)
            deduped.append(cid)
    return deduped


class Wallet:
    """Single-writer wallet state machine for one company."""

    def __init__(
        self,
        company_id: str,
        params: GroupParams,
        rng=None,
        clock: Optional[Callable[[], datetime]] = None,
    ):
        self.company_id = company_id
        self.params = params
        self._rng = rng
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._lock = threading.RLock()
        self._sets: dict[str, list[ValueSet]] = {}
        self._journal: list[StagedTransaction] = []
        self._journal_by_date: dict[Date, list[StagedTransaction]] = {}
        self._outbox: list[CounterpartyNotice] = []
        self._messages: dict[str, PostedMessage] = {}
        self._openings: dict[str, _StoredOpening] = {}

    # -- value-set lifecycle ------------------------------------------------

    @classmethod
    def init_wallet(
        cls,
        company_id: str,
        selected_counterparties: Iterable[str],
        gallery: Optional[dict[str, list[str]]] = None,
        *,
        params: GroupParams,
        rng=None,
        clock: Optional[Callable[[], datetime]] = None,
    ) -> "Wallet":
        """Create a wallet and invite every selected counterparty."""
        wallet = cls(company_id, params, rng=rng, clock=clock)
        for cpid in _expand_selection(selected_counterparties, gallery):
            wallet.open_relationship(cpid)
        return wallet

    def _new_value_set(self, cpid: str, secret: Optional[bytes] = None) -> ValueSet:
        key = keygen(self.params, self._rng)
        return ValueSet(
            created_at=self._clock(),
            counterparty_id=cpid,
            signing_key=key,
            own_address=derive_address(self.params, key.public),
            shared_secret=secret if secret is not None else new_commitment_secret(self._rng),
        )

    def open_relationship(self, cpid: str) -> ValueSet:
        """Start a relationship: fresh awaiting set plus an invite notice."""
        with self._lock:
            vs = self._new_value_set(cpid)
            self._sets.setdefault(cpid, []).append(vs)
            self._outbox.append(
                CounterpartyNotice(
                    kind="invite",
                    from_company=self.company_id,
                    to_company=cpid,
                    address=vs.own_address,
                    secret=vs.shared_secret,
                )
            )
            return vs

    def value_sets(self, counterparty_id: Optional[str] = None) -> list[ValueSet]:
        with self._lock:
            if counterparty_id is not None:
                return list(self._sets.get(counterparty_id, []))
            return [vs for sets in self._sets.values() for vs in sets]

    def active_set(self, counterparty_id: str) -> Optional[ValueSet]:
        for vs in self._sets.get(counterparty_id, []):
            if vs.status is ValueSetStatus.ACTIVE:
                return vs
        return None

    def awaiting_set(self, counterparty_id: str) -> Optional[ValueSet]:
        for vs in self._sets.get(counterparty_id, []):
            if vs.status is ValueSetStatus.AWAITING:
                return vs
        return None

    def _activate(self, vs: ValueSet) -> None:
        for other in self._sets.get(vs.counterparty_id, []):
            if other is not vs and other.status is ValueSetStatus.ACTIVE:
                other.status = ValueSetStatus.RETIRED
        vs.status = ValueSetStatus.ACTIVE

    def receive_counterparty_values(
        self,
        counterparty_id: str,
        their_address: str,
        shared_secret: Optional[bytes] = None,
    ) -> ValueSet:
        """Apply an inbound invite (with secret) or confirmation (without).

        Invites activate the relationship, adopting the sender's secret
        when both sides invited at once (the lower company id wins the
        tie) and rotating to a fresh local set when one is already
        active.  Confirmations complete a handshake this wallet started.
        """
        if not is_valid_address(their_address):
            raise ValidationError(f"malformed counterparty address {their_address!r}")
        with self._lock:
            if shared_secret is None:
                return self._apply_confirmation(counterparty_id, their_address)
            return self._apply_invite(counterparty_id, their_address, shared_secret)

    def _apply_confirmation(self, cpid: str, their_address: str) -> ValueSet:
        vs = self.awaiting_set(cpid)
        if vs is None:
            # Confirmations apply in send order, so a later one for an
            # already-active relationship refreshes the peer's address.
            active = self.active_set(cpid)
            if active is not None:
                active.counterparty_address = their_address
                return active
            raise NotFoundError(f"no pending handshake with {cpid!r}")
        vs.counterparty_address = their_address
        self._activate(vs)
        return vs

    def _apply_invite(self, cpid: str, their_address: str, secret: bytes) -> ValueSet:
        vs = self.awaiting_set(cpid)
        if vs is None:
            # Lazy creation, and rotation when a set is already active:
            # the inviter issued fresh values, so issue fresh ones too.
            vs = self._new_value_set(cpid, secret=secret)
            self._sets.setdefault(cpid, []).append(vs)
        elif cpid < self.company_id:
            # Simultaneous invites: both sides keep the lower id's secret.
            vs.shared_secret = secret
        vs.counterparty_address = their_address
        self._activate(vs)
        self._outbox.append(
            CounterpartyNotice(
                kind="confirm",
                from_company=self.company_id,
                to_company=cpid,
                address=vs.own_address,
            )
        )
        return vs

    def rotate_value_set(self, counterparty_id: str) -> ValueSet:
        """Issue fresh values for a relationship; old set serves until confirmed."""
        with self._lock:
            if self.active_set(counterparty_id) is None:
                raise NotFoundError(f"no active value set for {counterparty_id!r}")
            stale = self.awaiting_set(counterparty_id)
            if stale is not None:
                self._sets[counterparty_id].remove(stale)
                self._outbox = [
                    n for n in self._outbox
                    if not (n.kind == "invite" and n.address == stale.own_address)
                ]
            return self.open_relationship(counterparty_id)

    def drain_outbox(self) -> list[CounterpartyNotice]:
        with self._lock:
            notices, self._outbox = self._outbox, []
            return notices

    # -- staging and daily builds -------------------------------------------

    def stage_transaction(self, tx: StagedTransaction) -> int:
        """Append one journal entry; returns its journal index."""
        if not isinstance(tx.amount, int) or isinstance(tx.amount, bool) or tx.amount < 0:
            raise ValidationError(f"amount must be a non-negative integer, got {tx.amount!r}")
        if tx.direction not in (Direction.OUTGOING, Direction.INCOMING):
            raise ValidationError(f"direction must be 0 or 1, got {tx.direction!r}")
        if not isinstance(tx.date, Date):
            raise ValidationError(f"date must be a calendar date, got {tx.date!r}")
        with self._lock:
            if tx.counterparty_id not in self._sets:
                self.open_relationship(tx.counterparty_id)
            self._journal.append(tx)
            self._journal_by_date.setdefault(tx.date, []).append(tx)
            return len(self._journal) - 1

    def journal(self) -> list[StagedTransaction]:
        with self._lock:
            return list(self._journal)

    def bulk_import(self, csv_payload: str) -> ImportReport:
        """Stage every valid row of a CSV batch; report the rest by line."""
        try:
            rows = list(csv.reader(io.StringIO(csv_payload)))
        except csv.Error as exc:
            raise ValidationError(f"unreadable CSV: {exc}") from None
        if not rows or rows[0] != CSV_HEADER:
            raise ValidationError(
                f"line 1: header must be {','.join(CSV_HEADER)!r}"
            )
        accepted = 0
        rejected: list[tuple[int, str]] = []
        for line_no, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                tx = self._parse_csv_row(row)
            except ValidationError as exc:
                rejected.append((line_no, str(exc)))
                continue
            self.stage_transaction(tx)
            accepted += 1
        return ImportReport(accepted=accepted, rejected=tuple(rejected))

    def _parse_csv_row(self, row: list[str]) -> StagedTransaction:
        if len(row) != len(CSV_HEADER):
            raise ValidationError(f"expected {len(CSV_HEADER)} fields, got {len(row)}")
        cpid, raw_direction, raw_amount, raw_date, details = row
        if not cpid:
            raise ValidationError("empty counterparty_id")
        if raw_direction not in ("0", "1"):
            raise ValidationError(f"direction must be 0 or 1, got {raw_direction!r}")
        try:
            amount = int(raw_amount, 10)
        except ValueError:
            raise ValidationError(f"amount_minor is not an integer: {raw_amount!r}") from None
        if amount < 0:
            raise ValidationError(f"amount_minor is negative: {amount}")
        try:
            date = Date.fromisoformat(raw_date)
        except ValueError:
            raise ValidationError(f"invalid date: {raw_date!r}") from None
        return StagedTransaction(cpid, Direction(int(raw_direction)), amount, date, details)

    def build_daily_messages(self, date: Date) -> DailyBuild:
        """Fold the journal for one GMT date into signed daily messages.

        Per counterparty and direction: amounts are summed, details are
        hashed to a scalar, and both commitments draw their randomness
        from the shared secret, so equal totals on the two sides yield
        byte-identical commitments.
        """
        with self._lock:
            buckets: dict[tuple[str, Direction], list[StagedTransaction]] = {}
            for tx in self._journal_by_date.get(date, []):
                buckets.setdefault((tx.counterparty_id, tx.direction), []).append(tx)
            messages: list[PostedMessage] = []
            errors: dict[str, str] = {}
            for cpid, direction in sorted(buckets):
                vs = self.active_set(cpid)
                if vs is None or vs.counterparty_address is None:
                    errors[cpid] = "no active value set"
                    continue
                entries = buckets[(cpid, direction)]
                amount = sum(tx.amount for tx in entries)
                details = tuple(tx.details for tx in entries)
                messages.append(self._build_message(vs, direction, date, amount, details))
            return DailyBuild(messages=tuple(messages), errors=errors)

    def _build_message(
        self,
        vs: ValueSet,
        direction: Direction,
        date: Date,
        amount: int,
        details: tuple[str, ...],
    ) -> PostedMessage:
        params = self.params
        amount_r = derive_randomness(params, vs.shared_secret, date, AMOUNT_SLOT)
        detail_r = derive_randomness(params, vs.shared_secret, date, DETAIL_SLOT)
        amount_c = commit(params, amount % params.q, amount_r)
        detail_c = commit(params, details_scalar(params, details), detail_r)
        if direction is Direction.OUTGOING:
            sender, receiver = vs.own_address, vs.counterparty_address
        else:
            sender, receiver = vs.counterparty_address, vs.own_address
        flag = int(direction)
        payload = canonical_message_bytes(sender, receiver, amount_c, detail_c, date, flag)
        message = PostedMessage(
            sender_address=sender,
            receiver_address=receiver,
            amount_commitment=amount_c,
            detail_commitment=detail_c,
            date=date,
            flag=flag,
            signature=sign(vs.signing_key, payload),
        )
        mid = message.message_id()
        self._messages[mid] = message
        self._openings[mid] = _StoredOpening(amount, amount_r, details, detail_r)
        return message

    # -- openings -------------------------------------------------------------

    def produce_opening(self, message_id: str) -> OpeningPackage:
        """Reveal the plaintext and randomness behind one built message."""
        with self._lock:
            stored = self._openings.get(message_id)
            if stored is None:
                raise NotFoundError(f"no opening data for message {message_id!r}")
            package = OpeningPackage(
                message_id=message_id,
                amount=stored.amount,
                amount_randomness=stored.amount_randomness,
                details=stored.details,
                detail_randomness=stored.detail_randomness,
            )
            message = self._messages[message_id]
            assert verify_opening(message.amount_commitment, package.amount, package.amount_randomness)
            assert verify_opening(
                message.detail_commitment,
                details_scalar(self.params, package.details),
                package.detail_randomness,
            )
            return package

    def find_message_id(self, sender_address: str, receiver_address: str, date: Date) -> str:
        """Locate this wallet's own posting for a pair key."""
        with self._lock:
            for mid, message in self._messages.items():
                if (
                    message.sender_address == sender_address
                    and message.receiver_address == receiver_address
                    and message.date == date
                ):
                    return mid
        raise NotFoundError("no message built for that pair key")

    def built_messages(self) -> dict[str, PostedMessage]:
        with self._lock:
            return dict(self._messages)

    # -- persistence ------------------------------------------------------------

    def save(self, path: str, passphrase: str) -> None:
        """Write the whole wallet as one passphrase-encrypted container."""
        with self._lock:
            payload = json.dumps(self._to_state()).encode("utf-8")
        salt = os.urandom(_SALT_SIZE)
        nonce = os.urandom(_NONCE_SIZE)
        sealed = AESGCM(_derive_file_key(passphrase, salt)).encrypt(nonce, payload, WALLET_MAGIC)
        with open(path, "wb") as fh:
            fh.write(WALLET_MAGIC + bytes([WALLET_VERSION]) + salt + nonce + sealed)

    @classmethod
    def load(
        cls,
        path: str,
        passphrase: str,
        *,
        params: GroupParams,
        rng=None,
        clock: Optional[Callable[[], datetime]] = None,
    ) -> "Wallet":
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[: len(WALLET_MAGIC)] != WALLET_MAGIC:
            raise ValidationError("not a wallet file")
        if blob[len(WALLET_MAGIC)] != WALLET_VERSION:
            raise ValidationError(f"unsupported wallet version {blob[len(WALLET_MAGIC)]}")
        pos = len(WALLET_MAGIC) + 1
        salt = blob[pos : pos + _SALT_SIZE]
        nonce = blob[pos + _SALT_SIZE : pos + _SALT_SIZE + _NONCE_SIZE]
        sealed = blob[pos + _SALT_SIZE + _NONCE_SIZE :]
        try:
            payload = AESGCM(_derive_file_key(passphrase, salt)).decrypt(nonce, sealed, WALLET_MAGIC)
        except InvalidTag:
            raise ValidationError("wrong passphrase or corrupted wallet file") from None
        state = json.loads(payload.decode("utf-8"))
        if state["profile"] != params.profile:
            raise ValidationError(
                f"wallet was created for group profile {state['profile']!r}"
            )
        wallet = cls(state["company_id"], params, rng=rng, clock=clock)
        wallet._from_state(state)
        return wallet

    def _to_state(self) -> dict:
        return {
            "company_id": self.company_id,
            "profile": self.params.profile,
            "fingerprint": self.params.fingerprint().hex(),
            "sets": [
                {
                    "created_at": vs.created_at.isoformat(),
                    "counterparty_id": vs.counterparty_id,
                    "private": hex(vs.signing_key.private),
                    "shared_secret": vs.shared_secret.hex(),
                    "counterparty_address": vs.counterparty_address,
                    "status": vs.status.value,
                }
                for vs in self.value_sets()
            ],
            "journal": [
                {
                    "counterparty_id": tx.counterparty_id,
                    "direction": int(tx.direction),
                    "amount": tx.amount,
                    "date": tx.date.isoformat(),
                    "details": tx.details,
                }
                for tx in self._journal
            ],
            "messages": {mid: m.to_wire() for mid, m in self._messages.items()},
            "openings": {
                mid: {
                    "amount": op.amount,
                    "amount_randomness": hex(op.amount_randomness),
                    "details": list(op.details),
                    "detail_randomness": hex(op.detail_randomness),
                }
                for mid, op in self._openings.items()
            },
            "outbox": [
                {
                    "kind": n.kind,
                    "from_company": n.from_company,
                    "to_company": n.to_company,
                    "address": n.address,
                    "secret": n.secret.hex() if n.secret is not None else None,
                }
                for n in self._outbox
            ],
        }

    def _from_state(self, state: dict) -> None:
        for raw in state["sets"]:
            key = KeyPair.from_private(self.params, int(raw["private"], 16))
            vs = ValueSet(
                created_at=datetime.fromisoformat(raw["created_at"]),
                counterparty_id=raw["counterparty_id"],
                signing_key=key,
                own_address=derive_address(self.params, key.public),
                shared_secret=bytes.fromhex(raw["shared_secret"]),
                counterparty_address=raw["counterparty_address"],
                status=ValueSetStatus(raw["status"]),
            )
            self._sets.setdefault(vs.counterparty_id, []).append(vs)
        for raw in state["journal"]:
            tx = StagedTransaction(
                counterparty_id=raw["counterparty_id"],
                direction=Direction(raw["direction"]),
                amount=raw["amount"],
                date=Date.fromisoformat(raw["date"]),
                details=raw["details"],
            )
            self._journal.append(tx)
            self._journal_by_date.setdefault(tx.date, []).append(tx)
        for mid, raw in state["messages"].items():
            self._messages[mid] = PostedMessage.from_wire(self.params, raw)
        for mid, raw in state["openings"].items():
            self._openings[mid] = _StoredOpening(
                amount=raw["amount"],
                amount_randomness=int(raw["amount_randomness"], 16),
                details=tuple(raw["details"]),
                detail_randomness=int(raw["detail_randomness"], 16),
            )
        for raw in state["outbox"]:
            self._outbox.append(
                CounterpartyNotice(
                    kind=raw["kind"],
                    from_company=raw["from_company"],
                    to_company=raw["to_company"],
                    address=raw["address"],
                    secret=bytes.fromhex(raw["secret"]) if raw["secret"] else None,
                )
            )


def _derive_file_key(passphrase: str, salt: bytes) -> bytes:
    kdf = Scrypt(salt=salt, length=32, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P)
    return kdf.derive(passphrase.encode("utf-8"))
