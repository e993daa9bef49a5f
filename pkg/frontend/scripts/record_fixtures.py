"""Record node API responses and wallet snapshots as console test fixtures.

Runs a small deterministic scenario against the real node service and
writes every response the console tests replay, so the TypeScript view
models can be checked for equality against genuine server output.
Regenerate with:

    python3 scripts/record_fixtures.py
"""

from __future__ import annotations

import datetime
import json
import pathlib
import random

from futureab.groups import setup_group
from futureab.service import NodeService, canonical_request_bytes, sign_request
from futureab.signatures import keygen, sign
from futureab.wallet import Direction, StagedTransaction, Wallet

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
DATE = datetime.date(2020, 3, 14)


def day(i: int) -> datetime.date:
    return DATE + datetime.timedelta(days=i)


def write(name: str, payload) -> None:
    path = FIXTURES / name
    if name.endswith(".json"):
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        path.write_text(payload)
    print(f"wrote {path.relative_to(FIXTURES.parent.parent)}")


class Scenario:
    """Node plus two paired company wallets and one auditor."""

    def __init__(self, params):
        self.params = params
        self.rng = random.Random(0xF1C5)
        self.operator_key = keygen(params, self.rng)
        self.committee_key = keygen(params, self.rng)
        self.service = NodeService(
            params, self.operator_key, committee_public=self.committee_key.public
        )
        self.keys = {"operator": self.operator_key, "committee": self.committee_key}
        self.wallets = {}
        for cid, role in (("comp-a", "company"), ("comp-b", "company"), ("aud-1", "auditor")):
            self.onboard(cid, role)
        self.pair("comp-a", "comp-b")

    def call(self, who, endpoint, **params):
        return self.service.handle(sign_request(self.keys[who], endpoint, who, params))

    def ok(self, who, endpoint, **params):
        response = self.call(who, endpoint, **params)
        assert response["ok"], response
        return response

    def onboard(self, company_id, role):
        key = keygen(self.params, self.rng)
        self.keys[company_id] = key
        response = self.service.handle(
            {
                "endpoint": "request-access",
                "company_id": company_id,
                "params": {
                    "profile": {"role": role, "public_key": key.public_bytes().hex()}
                },
            }
        )
        assert response["ok"], response
        self.ok("committee", "grant-access", target=company_id)

    def pair(self, cid_a, cid_b):
        a = Wallet.init_wallet(cid_a, [], params=self.params, rng=random.Random(21))
        b = Wallet.init_wallet(cid_b, [], params=self.params, rng=random.Random(22))
        self.wallets[cid_a], self.wallets[cid_b] = a, b
        a.open_relationship(cid_b)
        for notice in a.drain_outbox():
            b.receive_counterparty_values(notice.from_company, notice.address, notice.secret)
        for notice in b.drain_outbox():
            a.receive_counterparty_values(notice.from_company, notice.address, notice.secret)
        for cid, wallet, cpid in ((cid_a, a, cid_b), (cid_b, b, cid_a)):
            vs = wallet.active_set(cpid)
            self.ok(
                cid,
                "register-address",
                address=vs.own_address,
                public_key=vs.signing_key.public_bytes().hex(),
            )

    def post(self, cid, direction, amount, date, details):
        wallet = self.wallets[cid]
        cpid = "comp-b" if cid == "comp-a" else "comp-a"
        wallet.stage_transaction(StagedTransaction(cpid, direction, amount, date, details))
        build = wallet.build_daily_messages(date)
        assert not build.errors, build.errors
        message = build.messages[-1]
        self.ok(cid, "post-message", message=message.to_wire())
        return message


def record_signing(params) -> None:
    """Byte-exact signing vectors for the wallet-agent implementation."""
    key = keygen(params, random.Random(0x51E))
    samples = [
        ("list-pairs", "comp-a", {"state": "verified", "page": 0, "page_size": 50}),
        (
            "request-opening",
            "aud-1",
            {
                "target_address": "ab1" + "7" * 40,
                "key": {
                    "sender_address": "ab1" + "5" * 40,
                    "receiver_address": "ab1" + "7" * 40,
                    "date": "2020-03-14",
                },
            },
        ),
        (
            "submit-opening",
            "comp-a",
            {
                "request_id": "opr-000001",
                "package": {
                    "message_id": "ab" * 32,
                    "amount": 4200,
                    "amount_randomness": "0xab12",
                    "details": ["näive invoice ü", "ordinary one"],
                    "detail_randomness": "0x7",
                },
            },
        ),
        ("verify-chain", "comp-a", {}),
    ]
    requests = []
    for endpoint, company_id, call_params in samples:
        canonical = canonical_request_bytes(endpoint, company_id, call_params)
        signature = sign(key, canonical)
        requests.append(
            {
                "endpoint": endpoint,
                "company_id": company_id,
                "params": call_params,
                "canonical": canonical.hex(),
                "signature": signature.to_bytes(params).hex(),
                "envelope": sign_request(key, endpoint, company_id, call_params),
            }
        )
    write(
        "signing.json",
        {
            "group": {
                "profile": params.profile,
                "p": hex(params.p),
                "q": hex(params.q),
                "g": hex(params.g),
                "h": hex(params.h),
                "element_size": params.element_size,
                "scalar_size": params.scalar_size,
            },
            "agent": {
                "private_key": hex(key.private),
                "public_key": key.public_bytes().hex(),
            },
            "requests": requests,
        },
    )


def record_status_and_workbench(scenario: Scenario) -> None:
    # Cycle 1: three verified days, two risk days, one pending day.
    verified = []
    for i in range(3):
        verified.append(
            scenario.post("comp-a", Direction.OUTGOING, 1000 + i, day(i), f"inv-{i}")
        )
        scenario.post("comp-b", Direction.INCOMING, 1000 + i, day(i), f"inv-{i}")
    amount_risk = scenario.post("comp-a", Direction.OUTGOING, 100, day(3), "inv-3")
    amount_risk_b = scenario.post("comp-b", Direction.INCOMING, 250, day(3), "inv-3")
    detail_risk = scenario.post("comp-a", Direction.OUTGOING, 4200, day(4), "inv-4a")
    detail_risk_b = scenario.post("comp-b", Direction.INCOMING, 4200, day(4), "inv-4b")
    scenario.post("comp-a", Direction.OUTGOING, 77, day(5), "inv-5")

    def snapshot():
        by_state = {
            state: scenario.ok("aud-1", "list-pairs", state=state)
            for state in ("verified", "risk", "pending")
        }
        counts = {state: resp["result"]["total"] for state, resp in by_state.items()}
        return {"responses": by_state, "counts": counts}

    cycle1 = snapshot()
    scenario.post("comp-b", Direction.INCOMING, 77, day(5), "inv-5")
    cycle2 = snapshot()
    write("status_view.json", {"cycles": [cycle1, cycle2]})

    # Workbench: resolve the detail mismatch, confirm the amount mismatch,
    # and capture one tampered-opening rejection.
    risk_snapshot = scenario.ok("aud-1", "list-pairs", state="risk")

    def open_pair(message_a, message_b, tamper=False):
        key = message_a.pair_key().to_wire()
        r0 = scenario.ok(
            "aud-1", "request-opening", key=key, target_address=key["sender_address"]
        )
        r1 = scenario.ok(
            "aud-1", "request-opening", key=key, target_address=key["receiver_address"]
        )
        prompt = scenario.ok("comp-a", "list-pairs", state="risk")
        package_a = scenario.wallets["comp-a"].produce_opening(message_a.message_id()).to_wire()
        if tamper:
            package_a = dict(package_a, amount=package_a["amount"] + 1)
            failed = scenario.call(
                "comp-a",
                "submit-opening",
                request_id=r0["result"]["request_id"],
                package=package_a,
            )
            assert not failed["ok"]
            return {"requests": [r0, r1], "error_response": failed, "prompt": prompt}
        s0 = scenario.ok(
            "comp-a",
            "submit-opening",
            request_id=r0["result"]["request_id"],
            package=package_a,
        )
        s1 = scenario.ok(
            "comp-b",
            "submit-opening",
            request_id=r1["result"]["request_id"],
            package=scenario.wallets["comp-b"].produce_opening(message_b.message_id()).to_wire(),
        )
        return {"requests": [r0, r1], "submits": [s0, s1], "prompt": prompt}

    resolved = open_pair(detail_risk, detail_risk_b)
    confirmed = open_pair(amount_risk, amount_risk_b)
    tampered_message = scenario.post("comp-a", Direction.OUTGOING, 100, day(6), "inv-6")
    scenario.post("comp-b", Direction.INCOMING, 175, day(6), "inv-6")
    invalid = open_pair(tampered_message, None, tamper=True)
    # Companies never receive packages back, so the revealed amounts come
    # from the auditor's own post-resolution listings.
    auditor_resolved = scenario.ok("aud-1", "list-pairs", state="risk_resolved_verified")
    auditor_confirmed = scenario.ok("aud-1", "list-pairs", state="risk_confirmed_mismatch")
    write(
        "workbench.json",
        {
            "risk_snapshot": risk_snapshot,
            "resolved": dict(resolved, outcome="risk_resolved_verified"),
            "confirmed": dict(confirmed, outcome="risk_confirmed_mismatch"),
            "invalid_opening": invalid,
            "auditor_resolved": auditor_resolved,
            "auditor_confirmed": auditor_confirmed,
            "company_a_address": scenario.wallets["comp-a"].active_set("comp-b").own_address,
        },
    )

    # Ledger inspection: finalize what is final, then record the chain
    # check and one inclusion proof.
    receipt = scenario.service.finalize_verified(batch_size=100)
    assert receipt.record_count > 0
    verify = scenario.ok("aud-1", "verify-chain")
    proof = scenario.ok("aud-1", "get-record", key=verified[0].pair_key().to_wire())
    from fastapi.testclient import TestClient

    from futureab.http_api import create_app

    health = TestClient(create_app(scenario.service)).get("/healthz").json()
    write("ledger.json", {"verify_chain": verify, "get_record": proof, "health": health})


def record_valuesets(params) -> None:
    wallet = Wallet.init_wallet("comp-x", [], params=params, rng=random.Random(31))
    peers = {}
    for i, cpid in enumerate(("comp-p", "comp-q", "comp-r")):
        peers[cpid] = Wallet.init_wallet(cpid, [], params=params, rng=random.Random(41 + i))
        wallet.open_relationship(cpid)

    def deliver():
        for notice in wallet.drain_outbox():
            peer = peers[notice.to_company]
            peer.receive_counterparty_values(notice.from_company, notice.address, notice.secret)
            for reply in peer.drain_outbox():
                wallet.receive_counterparty_values(reply.from_company, reply.address)

    def rows():
        live = [vs for vs in wallet.value_sets() if vs.status.value != "retired"]
        return [
            vs.summary()
            for vs in sorted(live, key=lambda v: (v.counterparty_id, v.created_at))
        ]

    deliver()
    initial = rows()
    wallet.rotate_value_set("comp-q")
    after_rotate = rows()
    deliver()
    after_confirm = rows()
    write(
        "valuesets.json",
        {
            "company_id": "comp-x",
            "snapshots": {
                "initial": initial,
                "after_rotate": after_rotate,
                "after_confirm": after_confirm,
            },
        },
    )


def record_bulk_csv(params) -> None:
    lines = [",".join(["counterparty_id", "direction", "amount_minor", "date", "details"])]
    for i in range(1, 101):
        direction = str(i % 2)
        amount = str(100 + i)
        if i == 16:
            direction = "2"
        if i == 57:
            amount = "12.50"
        lines.append(
            ",".join(["comp-p", direction, amount, day(i % 28).isoformat(), f"inv-{i:03d}"])
        )
    payload = "\n".join(lines) + "\n"

    wallet = Wallet.init_wallet("comp-x", [], params=params, rng=random.Random(51))
    report = wallet.bulk_import(payload)
    write("bulk_upload.csv", payload)
    write(
        "bulk_upload_expected.json",
        {
            "accepted": report.accepted,
            "rejected": [
                {"line": line, "reason": reason} for line, reason in report.rejected
            ],
        },
    )


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    params = setup_group("test")
    record_signing(params)
    scenario = Scenario(params)
    record_status_and_workbench(scenario)
    record_valuesets(params)
    record_bulk_csv(params)


if __name__ == "__main__":
    main()
