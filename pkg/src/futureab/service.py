"""Permissioned request/response layer over the matcher and ledger.

Transport-agnostic: ``handle`` takes one request envelope (a JSON-safe
dict) and returns one response dict.  Every request except the initial
access request is signed with the caller's account key, every endpoint
checks the caller's role against its allow-list, and every response
carries a monotonically increasing sequence number.  Query results are
filtered by role: companies see only pairs they are party to, and
fulfilled opening packages are visible to auditors alone.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Optional

from .errors import (
    AuthorizationError,
    ConflictError,
    InvalidOpeningError,
    LedgerError,
    NotFoundError,
    ProtocolError,
    ValidationError,
)
from .groups import GroupParams
from .ledger import Ledger
from .matcher import FinalizeReceipt, Matcher, PairRecord, PairState
from .messages import PairKey, PostedMessage
from .signatures import KeyPair, Signature, is_valid_address, sign, verify_sig
from .wallet import OpeningPackage

_REQUEST_TAG = b"FutureAB-request-v1"

ROLES = ("company", "auditor", "committee", "operator")
ACCESS_STATUSES = ("requested", "granted", "revoked")

ENDPOINT_ALLOWED_ROLES: dict[str, Optional[frozenset[str]]] = {
    # None marks the one unauthenticated bootstrap endpoint.
    "request-access": None,
    "grant-access": frozenset({"committee"}),
    "register-address": frozenset({"company"}),
    "post-message": frozenset({"company"}),
    "list-pairs": frozenset({"company", "auditor", "committee", "operator"}),
    "request-opening": frozenset({"auditor"}),
    "submit-opening": frozenset({"company"}),
    "get-record": frozenset({"company", "auditor", "committee", "operator"}),
    "verify-chain": frozenset({"company", "auditor", "committee", "operator"}),
    "rewards": frozenset({"company", "auditor", "committee", "operator"}),
}

_ERROR_CODES = {
    ValidationError: "validation",
    NotFoundError: "not_found",
    AuthorizationError: "authorization",
    ConflictError: "conflict",
    InvalidOpeningError: "invalid_opening",
    LedgerError: "ledger",
}


@dataclass(frozen=True)
class RewardSchedule:
    """Credit granted per reward event."""

    posted_message: int = 1
    fulfilled_opening: int = 5
    block_signed: int = 10

    def credit_for(self, event: str) -> int:
        try:
            return getattr(self, event)
        except AttributeError:
            raise ValidationError(f"unknown reward event {event!r}") from None


@dataclass
class RewardAccount:
    company_id: str
    points: int = 0
    events: list[tuple[str, int]] = field(default_factory=list)

    def to_wire(self) -> dict:
        return {
            "company_id": self.company_id,
            "points": self.points,
            "events": [{"event": name, "credit": credit} for name, credit in self.events],
        }


@dataclass
class Participant:
    """One platform account: a company, auditor, committee, or operator."""

    company_id: str
    role: str
    public: int
    status: str = "requested"
    addresses: set[str] = field(default_factory=set)

    def to_wire(self) -> dict:
        return {
            "company_id": self.company_id,
            "role": self.role,
            "status": self.status,
            "addresses": sorted(self.addresses),
        }


def canonical_request_bytes(endpoint: str, company_id: str, params: dict) -> bytes:
    """Exact byte string a request signature covers."""
    body = json.dumps(
        {"endpoint": endpoint, "company_id": company_id, "params": params},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return _REQUEST_TAG + body.encode("utf-8")


def sign_request(key: KeyPair, endpoint: str, company_id: str, params: dict) -> dict:
    """Build a complete signed request envelope."""
    signature = sign(key, canonical_request_bytes(endpoint, company_id, params))
    return {
        "endpoint": endpoint,
        "company_id": company_id,
        "params": params,
        "signature": signature.to_bytes(key.params).hex(),
    }


class NodeService:
    """Single-node deployment: registry, matcher, ledger, and rewards."""

    def __init__(
        self,
        params: GroupParams,
        operator_key: KeyPair,
        *,
        operator_id: str = "operator",
        committee_id: str = "committee",
        committee_public: Optional[int] = None,
        reward_schedule: RewardSchedule = RewardSchedule(),
        clock: Optional[Callable[[], datetime]] = None,
        ledger_clock: Optional[Callable[[], int]] = None,
        ledger_path: Optional[str] = None,
        matcher_log_path: Optional[str] = None,
    ):
        self.params = params
        self.reward_schedule = reward_schedule
        self._operator_id = operator_id
        self._lock = threading.RLock()
        self._seq = 0
        self._registry: dict[str, tuple[str, int]] = {}
        self._participants: dict[str, Participant] = {}
        self._reward_accounts: dict[str, RewardAccount] = {}
        self._participants[operator_id] = Participant(
            operator_id, "operator", operator_key.public, status="granted"
        )
        if committee_public is not None:
            self._participants[committee_id] = Participant(
                committee_id, "committee", committee_public, status="granted"
            )
        self.ledger = Ledger(
            params,
            operator_key.public,
            self._resolve_key,
            clock=ledger_clock,
            path=ledger_path,
        )
        self.matcher = Matcher(
            params,
            known_address=self._known_address,
            resolve_key=self._resolve_key,
            is_auditor=self._is_auditor,
            clock=clock,
            ledger=self.ledger,
            proposer_key=operator_key,
            log_path=matcher_log_path,
        )

    # -- registry callbacks ------------------------------------------------

    def _known_address(self, address: str) -> bool:
        return address in self._registry

    def _resolve_key(self, address: str) -> Optional[int]:
        entry = self._registry.get(address)
        return entry[1] if entry is not None else None

    def _is_auditor(self, company_id: str) -> bool:
        participant = self._participants.get(company_id)
        return (
            participant is not None
            and participant.role == "auditor"
            and participant.status == "granted"
        )

    def participant(self, company_id: str) -> Participant:
        with self._lock:
            participant = self._participants.get(company_id)
            if participant is None:
                raise NotFoundError(f"unknown participant {company_id!r}")
            return participant

    # -- request dispatch -----------------------------------------------------

    def handle(self, envelope: dict) -> dict:
        """Process one request envelope; never raises on caller mistakes."""
        with self._lock:
            self._seq += 1
            seq = self._seq
            try:
                result = self._dispatch(envelope)
                return {"ok": True, "seq": seq, "result": result}
            except ProtocolError as exc:
                code = _ERROR_CODES.get(type(exc), "validation")
                return {
                    "ok": False,
                    "seq": seq,
                    "error": {"code": code, "message": str(exc)},
                }

    def _dispatch(self, envelope: dict) -> dict:
        if not isinstance(envelope, dict):
            raise ValidationError("request must be an object")
        endpoint = envelope.get("endpoint")
        if endpoint not in ENDPOINT_ALLOWED_ROLES:
            raise ValidationError(f"unknown endpoint {endpoint!r}")
        company_id = envelope.get("company_id")
        if not isinstance(company_id, str) or not company_id:
            raise ValidationError("company_id is required")
        params = envelope.get("params") or {}
        if not isinstance(params, dict):
            raise ValidationError("params must be an object")
        allowed = ENDPOINT_ALLOWED_ROLES[endpoint]
        if allowed is None:
            return self._request_access(company_id, params)
        caller = self._authenticate(envelope, endpoint, company_id, params)
        if caller.role not in allowed:
            raise AuthorizationError(
                f"role {caller.role!r} may not call {endpoint}"
            )
        handler = getattr(self, "_" + endpoint.replace("-", "_"))
        return handler(caller, params)

    def _authenticate(
        self, envelope: dict, endpoint: str, company_id: str, params: dict
    ) -> Participant:
        participant = self._participants.get(company_id)
        if participant is None:
            raise AuthorizationError(f"unknown participant {company_id!r}")
        raw_signature = envelope.get("signature")
        if not isinstance(raw_signature, str):
            raise AuthorizationError("request signature is required")
        try:
            signature = Signature.from_bytes(self.params, bytes.fromhex(raw_signature))
        except (ValueError, ProtocolError):
            raise AuthorizationError("request signature is malformed") from None
        message = canonical_request_bytes(endpoint, company_id, params)
        if not verify_sig(self.params, participant.public, message, signature):
            raise AuthorizationError("request signature does not verify")
        if participant.status != "granted":
            raise AuthorizationError(
                f"access status is {participant.status!r}, not granted"
            )
        return participant

    # -- endpoint handlers ------------------------------------------------------

    def _request_access(self, company_id: str, params: dict) -> dict:
        profile = params.get("profile")
        if not isinstance(profile, dict):
            raise ValidationError("profile object is required")
        existing = self._participants.get(company_id)
        if existing is not None:
            # Idempotent: repeating the request never duplicates or resets.
            return existing.to_wire()
        role = profile.get("role", "company")
        if role not in ("company", "auditor"):
            raise ValidationError(
                f"requestable roles are company and auditor, not {role!r}"
            )
        raw_public = profile.get("public_key")
        try:
            public = self.params.decode_element(bytes.fromhex(raw_public))
        except (TypeError, ValueError, ProtocolError):
            raise ValidationError("profile.public_key must be a group element in hex") from None
        participant = Participant(company_id, role, public)
        self._participants[company_id] = participant
        return participant.to_wire()

    def _grant_access(self, caller: Participant, params: dict) -> dict:
        target_id = params.get("target")
        status = params.get("status", "granted")
        if status not in ("granted", "revoked"):
            raise ValidationError(f"status must be granted or revoked, not {status!r}")
        target = self._participants.get(target_id)
        if target is None:
            raise NotFoundError(f"unknown participant {target_id!r}")
        if target.role in ("committee", "operator"):
            raise AuthorizationError("committee and operator accounts are fixed")
        target.status = status
        return target.to_wire()

    def _register_address(self, caller: Participant, params: dict) -> dict:
        address = params.get("address")
        if not (isinstance(address, str) and is_valid_address(address)):
            raise ValidationError(f"malformed address {address!r}")
        raw_public = params.get("public_key")
        try:
            public = self.params.decode_element(bytes.fromhex(raw_public))
        except (TypeError, ValueError, ProtocolError):
            raise ValidationError("public_key must be a group element in hex") from None
        owner = self._registry.get(address)
        if owner is not None and owner[0] != caller.company_id:
            raise ConflictError(f"address {address} is registered to another company")
        self._registry[address] = (caller.company_id, public)
        caller.addresses.add(address)
        return {"address": address, "company_id": caller.company_id}

    def _post_message(self, caller: Participant, params: dict) -> dict:
        message = PostedMessage.from_wire(self.params, params.get("message"))
        if message.signer_address not in caller.addresses:
            raise AuthorizationError(
                "message signer address is not registered to the caller"
            )
        record = self.matcher.ingest(message)
        self._credit(caller.company_id, "posted_message")
        return self._record_wire(record, caller)

    def _list_pairs(self, caller: Participant, params: dict) -> dict:
        raw_state = params.get("state")
        try:
            state = PairState(raw_state)
        except ValueError:
            raise ValidationError(f"unknown state {raw_state!r}") from None
        page = params.get("page", 0)
        page_size = params.get("page_size", 50)
        if not isinstance(page, int) or not isinstance(page_size, int):
            raise ValidationError("page and page_size must be integers")
        records = [
            record
            for record in self.matcher.list_by_state(state, 0, 1 << 30)
            if self._visible(record, caller)
        ]
        total = len(records)
        start = page * page_size
        page_records = records[start : start + page_size]
        return {
            "state": state.value,
            "page": page,
            "page_size": page_size,
            "total": total,
            "records": [self._record_wire(record, caller) for record in page_records],
        }

    def _request_opening(self, caller: Participant, params: dict) -> dict:
        key = PairKey.from_wire(params.get("key"))
        target_address = params.get("target_address")
        if not isinstance(target_address, str):
            raise ValidationError("target_address is required")
        request = self.matcher.request_opening(key, caller.company_id, target_address)
        return request.to_wire(include_package=True)

    def _submit_opening(self, caller: Participant, params: dict) -> dict:
        request_id = params.get("request_id")
        if not isinstance(request_id, str):
            raise ValidationError("request_id is required")
        request = self.matcher.opening_request(request_id)
        if request.target_address not in caller.addresses:
            raise AuthorizationError("only the targeted party may submit this opening")
        package = OpeningPackage.from_wire(params.get("package"))
        record = self.matcher.submit_opening(request_id, package)
        self._credit(caller.company_id, "fulfilled_opening")
        return self._record_wire(record, caller)

    def _get_record(self, caller: Participant, params: dict) -> dict:
        key = PairKey.from_wire(params.get("key"))
        if caller.role == "company" and not self._is_party(key, caller):
            raise NotFoundError(f"pair not on ledger: {key}")
        record, height, index = self.ledger.get_record(key)
        return {
            "record": record.to_wire(),
            "proof": {"block_height": height, "index": index},
        }

    def _verify_chain(self, caller: Participant, params: dict) -> dict:
        chain = self.ledger.verify_chain()
        registry = self.ledger.check_tip_registry()
        return {
            "chain": chain.to_wire(),
            "tip_registry": registry.to_wire(),
            "height": self.ledger.height(),
        }

    def _rewards(self, caller: Participant, params: dict) -> dict:
        target = params.get("company_id")
        if caller.role in ("company", "auditor"):
            if target is not None and target != caller.company_id:
                raise AuthorizationError("may only view own reward account")
            target = caller.company_id
        if target is None:
            accounts = [self._reward_accounts[c].to_wire() for c in sorted(self._reward_accounts)]
            return {"accounts": accounts}
        account = self._reward_accounts.get(target, RewardAccount(target))
        return {"accounts": [account.to_wire()]}

    # -- shared helpers --------------------------------------------------------

    def _is_party(self, key: PairKey, participant: Participant) -> bool:
        return bool(participant.addresses & {key.sender_address, key.receiver_address})

    def _visible(self, record: PairRecord, caller: Participant) -> bool:
        if caller.role == "company":
            return self._is_party(record.key, caller)
        return True

    def _record_wire(self, record: PairRecord, caller: Participant) -> dict:
        wire = record.to_wire()
        include_package = caller.role == "auditor"
        wire["opening_requests"] = [
            request.to_wire(include_package)
            for request in self.matcher.opening_requests_for(record.key)
        ]
        return wire

    def _credit(self, company_id: str, event: str) -> RewardAccount:
        return self.credit_reward(company_id, event)

    def credit_reward(self, company_id: str, event: str) -> RewardAccount:
        """Add the configured credit for one reward event."""
        participant = self._participants.get(company_id)
        if participant is None or participant.status != "granted":
            raise AuthorizationError(
                f"no granted participant {company_id!r} to credit"
            )
        credit = self.reward_schedule.credit_for(event)
        account = self._reward_accounts.setdefault(company_id, RewardAccount(company_id))
        account.points += credit
        account.events.append((event, credit))
        return account

    def reward_account(self, company_id: str) -> RewardAccount:
        with self._lock:
            return self._reward_accounts.get(company_id, RewardAccount(company_id))

    # -- operator actions -------------------------------------------------------

    def finalize_verified(self, batch_size: int = 100) -> FinalizeReceipt:
        """Hand verified pairs to the ledger and credit the block signer."""
        with self._lock:
            receipt = self.matcher.finalize_verified(batch_size)
            if receipt.block_height is not None:
                self._credit(self._operator_id, "block_signed")
            return receipt

    def close(self) -> None:
        self.matcher.close()
