"""Wallet lifecycle: handshakes, staging, daily builds, openings, persistence.

Cross-side checks pair two wallets and push notices between them with a
tiny in-test transport, then assert the property the whole protocol
rests on: equal daily totals produce byte-identical commitments.
"""

import datetime
import random

import pytest

from futureab import commit, details_scalar
from futureab.commitments import verify_opening
from futureab.errors import NotFoundError, ValidationError
from futureab.messages import FLAG_RECEIVER_POSTED, FLAG_SENDER_POSTED
from futureab.wallet import (
    CSV_HEADER,
    Direction,
    ImportReport,
    OpeningPackage,
    StagedTransaction,
    ValueSetStatus,
    Wallet,
)

DATE = datetime.date(2020, 3, 14)

GALLERY = {
    "suppliers": ["acme", "globex"],
    "carriers": ["initech"],
}


def make_wallet(params, company_id="comp-a", seed=1, counterparties=()):
    return Wallet.init_wallet(
        company_id,
        counterparties,
        params=params,
        rng=random.Random(seed),
    )


def deliver(src: Wallet, dst: Wallet) -> int:
    """Push src's queued notices addressed to dst; returns count moved."""
    moved = 0
    rest = []
    for notice in src.drain_outbox():
        if notice.to_company == dst.company_id:
            dst.receive_counterparty_values(
                notice.from_company, notice.address, notice.secret
            )
            moved += 1
        else:
            rest.append(notice)
    src._outbox.extend(rest)
    return moved


def connect(a: Wallet, b: Wallet) -> None:
    """Complete an a-initiated handshake with b."""
    deliver(a, b)
    deliver(b, a)


def paired_wallets(params, seed=1):
    a = make_wallet(params, "comp-a", seed)
    b = make_wallet(params, "comp-b", seed + 1)
    a.open_relationship("comp-b")
    connect(a, b)
    return a, b


class TestInitWallet:
    def test_one_awaiting_set_per_counterparty(self, test_params):
        w = make_wallet(test_params, counterparties=["acme", "globex"])
        assert len(w.value_sets()) == 2
        assert all(vs.status is ValueSetStatus.AWAITING for vs in w.value_sets())

    def test_invite_queued_per_counterparty(self, test_params):
        w = make_wallet(test_params, counterparties=["acme"])
        notices = w.drain_outbox()
        assert len(notices) == 1
        assert notices[0].kind == "invite"
        assert notices[0].to_company == "acme"
        assert notices[0].secret is not None

    def test_gallery_category_expands(self, test_params):
        w = Wallet.init_wallet(
            "comp-a", ["suppliers"], GALLERY, params=test_params, rng=random.Random(1)
        )
        assert {vs.counterparty_id for vs in w.value_sets()} == {"acme", "globex"}

    def test_gallery_mixed_selection_dedupes(self, test_params):
        w = Wallet.init_wallet(
            "comp-a",
            ["suppliers", "acme", "initech"],
            GALLERY,
            params=test_params,
            rng=random.Random(1),
        )
        assert len(w.value_sets()) == 3

    def test_unknown_counterparty_rejected_with_gallery(self, test_params):
        with pytest.raises(ValidationError, match="unknown"):
            Wallet.init_wallet(
                "comp-a", ["nobody"], GALLERY, params=test_params, rng=random.Random(1)
            )

    def test_no_gallery_accepts_any_id(self, test_params):
        w = make_wallet(test_params, counterparties=["anyone-at-all"])
        assert len(w.value_sets()) == 1

    def test_distinct_secrets_and_addresses(self, test_params):
        w = make_wallet(test_params, counterparties=["acme", "globex", "initech"])
        secrets = {vs.shared_secret for vs in w.value_sets()}
        addresses = {vs.own_address for vs in w.value_sets()}
        assert len(secrets) == 3
        assert len(addresses) == 3

    def test_summary_redacts_key_material(self, test_params):
        w = make_wallet(test_params, counterparties=["acme"])
        summary = w.value_sets()[0].summary()
        text = str(summary)
        assert w.value_sets()[0].shared_secret.hex() not in text
        assert "private" not in summary


class TestHandshake:
    def test_initiated_handshake_converges(self, test_params):
        a, b = paired_wallets(test_params)
        sa, sb = a.active_set("comp-b"), b.active_set("comp-a")
        assert sa is not None and sb is not None
        assert sa.shared_secret == sb.shared_secret
        assert sa.counterparty_address == sb.own_address
        assert sb.counterparty_address == sa.own_address

    def test_invitee_autocreates_relationship(self, test_params):
        a = make_wallet(test_params, "comp-a", 1)
        b = make_wallet(test_params, "comp-b", 2)
        a.open_relationship("comp-b")
        deliver(a, b)
        assert b.active_set("comp-a") is not None

    def test_simultaneous_invites_agree_on_lower_id_secret(self, test_params):
        a = make_wallet(test_params, "comp-a", 1)
        b = make_wallet(test_params, "comp-b", 2)
        a.open_relationship("comp-b")
        b.open_relationship("comp-a")
        secret_a = a.awaiting_set("comp-b").shared_secret
        # Cross-deliver both invites, then both confirmations.
        deliver(a, b)
        deliver(b, a)
        deliver(a, b)
        deliver(b, a)
        sa, sb = a.active_set("comp-b"), b.active_set("comp-a")
        assert sa.shared_secret == sb.shared_secret == secret_a

    def test_malformed_address_rejected(self, test_params):
        w = make_wallet(test_params, counterparties=["acme"])
        with pytest.raises(ValidationError):
            w.receive_counterparty_values("acme", "not-an-address", b"\x00" * 32)

    def test_confirmation_without_handshake_rejected(self, test_params):
        w = make_wallet(test_params)
        with pytest.raises(NotFoundError):
            w.receive_counterparty_values("stranger", "ab1" + "0" * 40)

    def test_repeat_confirmation_is_idempotent(self, test_params):
        a, b = paired_wallets(test_params)
        before = a.active_set("comp-b")
        again = a.receive_counterparty_values("comp-b", before.counterparty_address)
        assert again is before
        assert len(a.value_sets("comp-b")) == 1


class TestRotation:
    def test_rotate_requires_active_set(self, test_params):
        w = make_wallet(test_params, counterparties=["acme"])
        with pytest.raises(NotFoundError):
            w.rotate_value_set("acme")

    def test_rotation_converges_on_fresh_secret(self, test_params):
        a, b = paired_wallets(test_params)
        old_secret = a.active_set("comp-b").shared_secret
        a.rotate_value_set("comp-b")
        connect(a, b)
        sa, sb = a.active_set("comp-b"), b.active_set("comp-a")
        assert sa.shared_secret == sb.shared_secret
        assert sa.shared_secret != old_secret
        assert len(a.value_sets("comp-b")) == 2
        statuses = sorted(vs.status for vs in a.value_sets("comp-b"))
        assert statuses == [ValueSetStatus.ACTIVE, ValueSetStatus.RETIRED]

    def test_old_set_serves_until_confirmed(self, test_params):
        a, b = paired_wallets(test_params)
        old = a.active_set("comp-b")
        a.rotate_value_set("comp-b")
        assert a.active_set("comp-b") is old
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 500, DATE))
        build = a.build_daily_messages(DATE)
        assert build.messages[0].sender_address == old.own_address

    def test_double_rotate_keeps_single_pending_invite(self, test_params):
        a, b = paired_wallets(test_params)
        a.rotate_value_set("comp-b")
        a.rotate_value_set("comp-b")
        invites = [n for n in a.drain_outbox() if n.kind == "invite"]
        assert len(invites) == 1
        assert invites[0].address == a.awaiting_set("comp-b").own_address

    def test_rotate_after_invite_already_sent_converges(self, test_params):
        # First rotation's invite is already delivered when the second
        # rotation happens; in-order confirmations must still converge.
        a, b = paired_wallets(test_params)
        a.rotate_value_set("comp-b")
        deliver(a, b)
        a.rotate_value_set("comp-b")
        deliver(a, b)
        deliver(b, a)
        sa, sb = a.active_set("comp-b"), b.active_set("comp-a")
        assert sa.shared_secret == sb.shared_secret
        assert sa.counterparty_address == sb.own_address
        assert sb.counterparty_address == sa.own_address


class TestStaging:
    def test_returns_journal_indexes(self, test_params):
        w = make_wallet(test_params)
        tx = StagedTransaction("acme", Direction.OUTGOING, 100, DATE)
        assert w.stage_transaction(tx) == 0
        assert w.stage_transaction(tx) == 1
        assert len(w.journal()) == 2

    def test_lazy_opens_relationship(self, test_params):
        w = make_wallet(test_params)
        w.stage_transaction(StagedTransaction("acme", Direction.INCOMING, 5, DATE))
        assert w.awaiting_set("acme") is not None
        assert any(n.to_company == "acme" for n in w.drain_outbox())

    @pytest.mark.parametrize(
        "tx",
        [
            StagedTransaction("acme", Direction.OUTGOING, -1, DATE),
            StagedTransaction("acme", Direction.OUTGOING, 1.5, DATE),
            StagedTransaction("acme", Direction.OUTGOING, True, DATE),
            StagedTransaction("acme", Direction.OUTGOING, "100", DATE),
            StagedTransaction("acme", 2, 100, DATE),
            StagedTransaction("acme", Direction.OUTGOING, 100, "2020-03-14"),
        ],
    )
    def test_invalid_transactions_rejected(self, test_params, tx):
        w = make_wallet(test_params)
        with pytest.raises(ValidationError):
            w.stage_transaction(tx)

    def test_zero_amount_accepted(self, test_params):
        w = make_wallet(test_params)
        w.stage_transaction(StagedTransaction("acme", Direction.OUTGOING, 0, DATE))
        assert len(w.journal()) == 1


class TestBulkImport:
    def csv(self, *rows):
        return "\n".join([",".join(CSV_HEADER), *rows])

    def test_accepts_valid_rows(self, test_params):
        w = make_wallet(test_params)
        report = w.bulk_import(
            self.csv(
                "acme,0,1500,2020-03-14,inv-1",
                "globex,1,2500,2020-03-15,inv-2",
            )
        )
        assert report == ImportReport(accepted=2, rejected=())
        assert len(w.journal()) == 2

    def test_rejects_rows_with_line_numbers(self, test_params):
        w = make_wallet(test_params)
        report = w.bulk_import(
            self.csv(
                "acme,0,1500,2020-03-14,ok",
                "acme,2,10,2020-03-14,bad direction",
                "acme,0,ten,2020-03-14,bad amount",
                "acme,0,10,2020-13-14,bad date",
                ",0,10,2020-03-14,empty id",
                "acme,0,-5,2020-03-14,negative",
                "acme,0,10,2020-03-14",
            )
        )
        assert report.accepted == 1
        assert [line for line, _ in report.rejected] == [3, 4, 5, 6, 7, 8]
        assert len(w.journal()) == 1

    def test_header_mismatch_rejects_whole_file(self, test_params):
        w = make_wallet(test_params)
        with pytest.raises(ValidationError, match="line 1"):
            w.bulk_import("wrong,header\nacme,0,1,2020-03-14,x")
        assert w.journal() == []

    def test_empty_payload_rejected(self, test_params):
        with pytest.raises(ValidationError):
            make_wallet(test_params).bulk_import("")

    def test_header_only_accepts_zero(self, test_params):
        report = make_wallet(test_params).bulk_import(",".join(CSV_HEADER))
        assert report == ImportReport(accepted=0, rejected=())

    def test_quoted_details_with_commas(self, test_params):
        w = make_wallet(test_params)
        report = w.bulk_import(self.csv('acme,0,10,2020-03-14,"a, b"'))
        assert report.accepted == 1
        assert w.journal()[0].details == "a, b"

    def test_trailing_blank_lines_ignored(self, test_params):
        report = make_wallet(test_params).bulk_import(
            self.csv("acme,0,10,2020-03-14,x") + "\n\n"
        )
        assert report.accepted == 1

    def test_large_batch(self, test_params):
        w = make_wallet(test_params)
        rows = [f"acme,{i % 2},{i},2020-03-{14 + i % 3:02d},ref-{i}" for i in range(20_000)]
        report = w.bulk_import(self.csv(*rows))
        assert report.accepted == 20_000
        assert report.rejected == ()


class TestDailyBuild:
    def test_aggregates_per_counterparty_and_direction(self, test_params):
        a, b = paired_wallets(test_params)
        for amount in (100, 250, 650):
            a.stage_transaction(
                StagedTransaction("comp-b", Direction.OUTGOING, amount, DATE, "x")
            )
        build = a.build_daily_messages(DATE)
        assert len(build.messages) == 1
        msg = build.messages[0]
        package = a.produce_opening(msg.message_id())
        assert package.amount == 1000
        assert verify_opening(msg.amount_commitment, 1000, package.amount_randomness)

    def test_directions_not_netted(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 700, DATE))
        a.stage_transaction(StagedTransaction("comp-b", Direction.INCOMING, 300, DATE))
        build = a.build_daily_messages(DATE)
        assert len(build.messages) == 2
        flags = sorted(m.flag for m in build.messages)
        assert flags == [FLAG_SENDER_POSTED, FLAG_RECEIVER_POSTED]

    def test_equal_totals_give_byte_identical_commitments(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 400, DATE, "inv-1"))
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 600, DATE, "inv-2"))
        b.stage_transaction(StagedTransaction("comp-a", Direction.INCOMING, 400, DATE, "inv-1"))
        b.stage_transaction(StagedTransaction("comp-a", Direction.INCOMING, 600, DATE, "inv-2"))
        ma = a.build_daily_messages(DATE).messages[0]
        mb = b.build_daily_messages(DATE).messages[0]
        assert ma.amount_commitment.to_bytes() == mb.amount_commitment.to_bytes()
        assert ma.detail_commitment.to_bytes() == mb.detail_commitment.to_bytes()
        assert ma.pair_key() == mb.pair_key()
        assert ma.flag != mb.flag

    def test_unequal_totals_differ(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 400, DATE))
        b.stage_transaction(StagedTransaction("comp-a", Direction.INCOMING, 401, DATE))
        ma = a.build_daily_messages(DATE).messages[0]
        mb = b.build_daily_messages(DATE).messages[0]
        assert ma.amount_commitment.to_bytes() != mb.amount_commitment.to_bytes()

    def test_detail_mismatch_leaves_amounts_equal(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 400, DATE, "inv-1"))
        b.stage_transaction(StagedTransaction("comp-a", Direction.INCOMING, 400, DATE, "inv-X"))
        ma = a.build_daily_messages(DATE).messages[0]
        mb = b.build_daily_messages(DATE).messages[0]
        assert ma.amount_commitment.to_bytes() == mb.amount_commitment.to_bytes()
        assert ma.detail_commitment.to_bytes() != mb.detail_commitment.to_bytes()

    def test_outgoing_flags_sender_and_addresses(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 50, DATE))
        msg = a.build_daily_messages(DATE).messages[0]
        sa = a.active_set("comp-b")
        assert msg.flag == FLAG_SENDER_POSTED
        assert msg.sender_address == sa.own_address
        assert msg.receiver_address == sa.counterparty_address
        assert msg.signer_address == sa.own_address

    def test_incoming_flags_receiver_and_addresses(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.INCOMING, 50, DATE))
        msg = a.build_daily_messages(DATE).messages[0]
        sa = a.active_set("comp-b")
        assert msg.flag == FLAG_RECEIVER_POSTED
        assert msg.sender_address == sa.counterparty_address
        assert msg.receiver_address == sa.own_address
        assert msg.signer_address == sa.own_address

    def test_unconfirmed_relationship_reports_error(self, test_params):
        w = make_wallet(test_params)
        w.stage_transaction(StagedTransaction("acme", Direction.OUTGOING, 10, DATE))
        build = w.build_daily_messages(DATE)
        assert build.messages == ()
        assert build.errors == {"acme": "no active value set"}

    def test_only_requested_date_included(self, test_params):
        a, b = paired_wallets(test_params)
        other = DATE + datetime.timedelta(days=1)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 10, DATE))
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 99, other))
        build = a.build_daily_messages(DATE)
        assert len(build.messages) == 1
        package = a.produce_opening(build.messages[0].message_id())
        assert package.amount == 10

    def test_empty_date_builds_nothing(self, test_params):
        a, b = paired_wallets(test_params)
        build = a.build_daily_messages(DATE)
        assert build.messages == () and build.errors == {}

    def test_amount_commitment_matches_direct_commit(self, test_params):
        # The built commitment must equal commit(total, derived_r) exactly.
        from futureab.commitments import AMOUNT_SLOT, derive_randomness

        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 1234, DATE))
        msg = a.build_daily_messages(DATE).messages[0]
        secret = a.active_set("comp-b").shared_secret
        r = derive_randomness(test_params, secret, DATE, AMOUNT_SLOT)
        assert msg.amount_commitment == commit(test_params, 1234, r)


class TestOpenings:
    def test_opening_reopens_both_commitments(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 75, DATE, "inv-7"))
        msg = a.build_daily_messages(DATE).messages[0]
        package = a.produce_opening(msg.message_id())
        assert package.amount == 75
        assert package.details == ("inv-7",)
        assert verify_opening(msg.amount_commitment, package.amount, package.amount_randomness)
        assert verify_opening(
            msg.detail_commitment,
            details_scalar(test_params, package.details),
            package.detail_randomness,
        )

    def test_opening_survives_rotation(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 75, DATE))
        msg = a.build_daily_messages(DATE).messages[0]
        a.rotate_value_set("comp-b")
        connect(a, b)
        package = a.produce_opening(msg.message_id())
        assert verify_opening(msg.amount_commitment, package.amount, package.amount_randomness)

    def test_unknown_message_rejected(self, test_params):
        with pytest.raises(NotFoundError):
            make_wallet(test_params).produce_opening("0" * 64)

    def test_find_message_id(self, test_params):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 75, DATE))
        msg = a.build_daily_messages(DATE).messages[0]
        found = a.find_message_id(msg.sender_address, msg.receiver_address, DATE)
        assert found == msg.message_id()
        with pytest.raises(NotFoundError):
            a.find_message_id(msg.receiver_address, msg.sender_address, DATE)

    def test_package_wire_roundtrip(self, test_params):
        package = OpeningPackage("ab" * 32, 10, 12345, ("x", "y"), 6789)
        assert OpeningPackage.from_wire(package.to_wire()) == package

    def test_package_wire_rejects_bad_amount(self):
        obj = OpeningPackage("ab" * 32, 10, 1, ("x",), 2).to_wire()
        obj["amount"] = -4
        with pytest.raises(ValidationError):
            OpeningPackage.from_wire(obj)


class TestPersistence:
    def test_roundtrip_preserves_state_and_behaviour(self, test_params, tmp_path):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 42, DATE, "inv"))
        msg = a.build_daily_messages(DATE).messages[0]
        path = str(tmp_path / "a.wallet")
        a.save(path, "hunter2 horse battery")

        loaded = Wallet.load(path, "hunter2 horse battery", params=test_params)
        assert loaded.company_id == a.company_id
        assert [vs.summary() for vs in loaded.value_sets()] == [
            vs.summary() for vs in a.value_sets()
        ]
        assert loaded.journal() == a.journal()
        assert loaded.built_messages() == a.built_messages()
        package = loaded.produce_opening(msg.message_id())
        assert package == a.produce_opening(msg.message_id())

    def test_reloaded_wallet_builds_identical_messages(self, test_params, tmp_path):
        a, b = paired_wallets(test_params)
        a.stage_transaction(StagedTransaction("comp-b", Direction.OUTGOING, 42, DATE))
        path = str(tmp_path / "a.wallet")
        a.save(path, "pw")
        loaded = Wallet.load(path, "pw", params=test_params)
        assert (
            loaded.build_daily_messages(DATE).messages
            == a.build_daily_messages(DATE).messages
        )

    def test_wrong_passphrase_rejected(self, test_params, tmp_path):
        a = make_wallet(test_params)
        path = str(tmp_path / "a.wallet")
        a.save(path, "right")
        with pytest.raises(ValidationError, match="passphrase or corrupted"):
            Wallet.load(path, "wrong", params=test_params)

    def test_corrupted_file_rejected(self, test_params, tmp_path):
        a = make_wallet(test_params)
        path = str(tmp_path / "a.wallet")
        a.save(path, "pw")
        blob = bytearray(open(path, "rb").read())
        blob[-1] ^= 0xFF
        open(path, "wb").write(bytes(blob))
        with pytest.raises(ValidationError):
            Wallet.load(path, "pw", params=test_params)

    def test_wrong_magic_rejected(self, test_params, tmp_path):
        path = str(tmp_path / "junk")
        open(path, "wb").write(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValidationError, match="not a wallet file"):
            Wallet.load(path, "pw", params=test_params)

    def test_profile_mismatch_rejected(self, test_params, prod_params, tmp_path):
        a = make_wallet(test_params)
        path = str(tmp_path / "a.wallet")
        a.save(path, "pw")
        with pytest.raises(ValidationError, match="profile"):
            Wallet.load(path, "pw", params=prod_params)

    def test_pending_outbox_survives_reload(self, test_params, tmp_path):
        a = make_wallet(test_params, counterparties=["acme"])
        path = str(tmp_path / "a.wallet")
        a.save(path, "pw")
        loaded = Wallet.load(path, "pw", params=test_params)
        notices = loaded.drain_outbox()
        assert len(notices) == 1
        assert notices[0].secret is not None
