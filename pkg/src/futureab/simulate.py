"""Seeded end-to-end simulation and throughput benchmarks.

The scenario runner stands up a full node, a population of companies
with synchronized wallets, and a transaction plan with injected faults:
an omitted counter-post leaves a pair Pending, a unilaterally inflated
amount turns it into a Risk, and everything else verifies.  Because the
fault plan is bookkept exactly, the final matcher counts have a known
right answer, and with a fixed seed the whole run, ledger tip hash
included, is reproducible bit for bit.

Benchmarks time the three hot phases (value-set setup, daily message
encryption and signing, matcher verification) against fixed reference
figures from earlier published measurements of the same protocol.
"""

from __future__ import annotations

import json
import platform
import random
import sys
import time
from dataclasses import dataclass, field
from datetime import date as Date
from datetime import datetime, timedelta, timezone
from typing import Optional

from .errors import ValidationError
from .groups import setup_group
from .matcher import Matcher
from .service import NodeService, sign_request
from .signatures import keygen
from .wallet import Direction, StagedTransaction, Wallet

# Reference timings (seconds) the harness compares against; measured on
# 2015-era commodity hardware by the protocol's original evaluation.
REFERENCE_SETUP_MEAN_S = 0.096
REFERENCE_ENCRYPT_MEAN_S = 0.021
REFERENCE_VERIFY_TOTAL_S_10K = 60.0
# A second published set quotes faster figures; both are order-of-magnitude
# yardsticks only, since absolute numbers are hardware-bound.
REFERENCE_FAST_ENCRYPT_MEAN_S = 0.012
REFERENCE_FAST_VERIFY_MEAN_S = 0.001

_EPOCH = datetime(2020, 1, 1, tzinfo=timezone.utc)


class LogicalClock:
    """Deterministic strictly increasing clock for seeded runs."""

    def __init__(self) -> None:
        self._tick = 0

    def now(self) -> datetime:
        self._tick += 1
        return _EPOCH + timedelta(seconds=self._tick)

    def seconds(self) -> int:
        self._tick += 1
        return self._tick


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully seeded description of one simulation run."""

    n_companies: int = 10
    counterparties_per_company: int = 3
    n_transactions: int = 200
    mismatch_rate: float = 0.05
    omission_rate: float = 0.03
    seed: int = 1
    date_start: Date = Date(2020, 1, 1)
    n_days: int = 5
    group: str = "test"

    def validate(self) -> None:
        if self.n_companies < 2:
            raise ValidationError("need at least two companies")
        if not 0 < self.counterparties_per_company <= self.n_companies - 1:
            raise ValidationError(
                "counterparties_per_company must be in [1, n_companies - 1]"
            )
        if self.n_transactions < 0:
            raise ValidationError("n_transactions must be non-negative")
        for name in ("mismatch_rate", "omission_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.mismatch_rate + self.omission_rate > 1.0:
            raise ValidationError("mismatch and omission rates sum past 1")
        if self.n_days < 1:
            raise ValidationError("n_days must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        kwargs = dict(raw)
        if "date_start" in kwargs:
            kwargs["date_start"] = Date.fromisoformat(kwargs["date_start"])
        try:
            config = cls(**kwargs)
        except TypeError as exc:
            raise ValidationError(f"bad scenario config: {exc}") from None
        config.validate()
        return config

    def to_wire(self) -> dict:
        return {
            "n_companies": self.n_companies,
            "counterparties_per_company": self.counterparties_per_company,
            "n_transactions": self.n_transactions,
            "mismatch_rate": self.mismatch_rate,
            "omission_rate": self.omission_rate,
            "seed": self.seed,
            "date_start": self.date_start.isoformat(),
            "n_days": self.n_days,
            "group": self.group,
        }


@dataclass(frozen=True)
class FaultPlan:
    """Exactly which pair keys were sabotaged, and how."""

    n_keys: int
    mismatched: tuple[tuple[str, str, str], ...]
    omitted: tuple[tuple[str, str, str], ...]

    @property
    def expected_counts(self) -> dict[str, int]:
        return {
            "verified": self.n_keys - len(self.mismatched) - len(self.omitted),
            "risk": len(self.mismatched),
            "pending": len(self.omitted),
        }


@dataclass(frozen=True)
class ScenarioReport:
    config: ScenarioConfig
    counts: dict[str, int]
    expected: dict[str, int]
    accounting_ok: bool
    tip_hash: str
    chain_height: int
    ledgered_records: int
    elapsed_seconds: float

    def to_wire(self) -> dict:
        return {
            "config": self.config.to_wire(),
            "counts": self.counts,
            "expected": self.expected,
            "accounting_ok": self.accounting_ok,
            "tip_hash": self.tip_hash,
            "chain_height": self.chain_height,
            "ledgered_records": self.ledgered_records,
            "elapsed_seconds": self.elapsed_seconds,
        }


@dataclass(frozen=True)
class BenchReport:
    phase: str
    group: str
    n: int
    total_seconds: float
    mean_seconds: float
    reference_mean_seconds: Optional[float]
    machine: str
    extra: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {
            "phase": self.phase,
            "group": self.group,
            "n": self.n,
            "total_seconds": self.total_seconds,
            "mean_seconds": self.mean_seconds,
            "reference_mean_seconds": self.reference_mean_seconds,
            "machine": self.machine,
            "extra": self.extra,
        }


def _machine_descriptor() -> str:
    return f"{platform.platform()} / {platform.processor() or 'unknown cpu'} / python {platform.python_version()}"


# -- scenario -----------------------------------------------------------------


def run_scenario(config: ScenarioConfig) -> ScenarioReport:
    """Run the full pipeline and reconcile counts with the fault plan."""
    config.validate()
    started = time.perf_counter()
    rng = random.Random(config.seed)
    params = setup_group(config.group)
    clock = LogicalClock()

    operator_key = keygen(params, rng)
    committee_key = keygen(params, rng)
    service = NodeService(
        params,
        operator_key,
        committee_public=committee_key.public,
        clock=clock.now,
        ledger_clock=clock.seconds,
    )

    company_ids = [f"comp-{i:04d}" for i in range(config.n_companies)]
    account_keys = {cid: keygen(params, rng) for cid in company_ids}
    for cid in company_ids:
        response = service.handle(
            {
                "endpoint": "request-access",
                "company_id": cid,
                "params": {
                    "profile": {
                        "public_key": params.encode_element(
                            account_keys[cid].public
                        ).hex(),
                        "role": "company",
                    }
                },
            }
        )
        assert response["ok"], response
        response = service.handle(
            sign_request(
                committee_key,
                "grant-access",
                "committee",
                {"target": cid, "status": "granted"},
            )
        )
        assert response["ok"], response

    wallets = {
        cid: Wallet(cid, params, rng=rng, clock=clock.now) for cid in company_ids
    }

    relationships = _pick_relationships(rng, company_ids, config.counterparties_per_company)
    for low, high in relationships:
        wallets[low].open_relationship(high)
    _deliver_notices(wallets)
    _deliver_notices(wallets)

    for cid in company_ids:
        for vs in wallets[cid].value_sets():
            if vs.status.value != "active":
                continue
            response = service.handle(
                sign_request(
                    account_keys[cid],
                    "register-address",
                    cid,
                    {
                        "address": vs.own_address,
                        "public_key": vs.signing_key.public_bytes().hex(),
                    },
                )
            )
            assert response["ok"], response

    plan_txs = _plan_transactions(rng, relationships, config)
    fault_plan = _plan_faults(rng, plan_txs, config)
    _stage_with_faults(wallets, plan_txs, fault_plan)

    dates = [config.date_start + timedelta(days=i) for i in range(config.n_days)]
    for date in dates:
        for cid in company_ids:
            build = wallets[cid].build_daily_messages(date)
            assert not build.errors, build.errors
            for message in build.messages:
                response = service.handle(
                    sign_request(
                        account_keys[cid],
                        "post-message",
                        cid,
                        {"message": message.to_wire()},
                    )
                )
                assert response["ok"], response

    ledgered = 0
    while True:
        receipt = service.finalize_verified(batch_size=500)
        if receipt.record_count == 0:
            break
        ledgered += receipt.record_count

    counts = service.matcher.counts()
    observed = {
        "verified": counts["verified"],
        "risk": counts["risk"],
        "pending": counts["pending"],
    }
    expected = fault_plan.expected_counts
    service.close()
    return ScenarioReport(
        config=config,
        counts=observed,
        expected=expected,
        accounting_ok=observed == expected,
        tip_hash=service.ledger.tip().block_hash.hex(),
        chain_height=service.ledger.height(),
        ledgered_records=ledgered,
        elapsed_seconds=time.perf_counter() - started,
    )


def _pick_relationships(
    rng: random.Random, company_ids: list[str], per_company: int
) -> list[tuple[str, str]]:
    """Unordered relationship pairs; the lower id initiates the handshake."""
    pairs: set[tuple[str, str]] = set()
    for cid in company_ids:
        others = [o for o in company_ids if o != cid]
        for other in rng.sample(others, per_company):
            pairs.add((min(cid, other), max(cid, other)))
    return sorted(pairs)


def _deliver_notices(wallets: dict[str, Wallet]) -> None:
    for cid in sorted(wallets):
        for notice in wallets[cid].drain_outbox():
            wallets[notice.to_company].receive_counterparty_values(
                notice.from_company, notice.address, notice.secret
            )


@dataclass(frozen=True)
class _PlannedTx:
    index: int
    payer: str
    payee: str
    amount: int
    date: Date
    details: str

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.payer, self.payee, self.date.isoformat())


def _plan_transactions(
    rng: random.Random, relationships: list[tuple[str, str]], config: ScenarioConfig
) -> list[_PlannedTx]:
    txs = []
    for i in range(config.n_transactions):
        low, high = relationships[rng.randrange(len(relationships))]
        payer, payee = (low, high) if rng.random() < 0.5 else (high, low)
        txs.append(
            _PlannedTx(
                index=i,
                payer=payer,
                payee=payee,
                amount=rng.randrange(100, 1_000_000),
                date=config.date_start + timedelta(days=rng.randrange(config.n_days)),
                details=f"inv-{i:06d}",
            )
        )
    return txs


def _plan_faults(
    rng: random.Random, txs: list[_PlannedTx], config: ScenarioConfig
) -> FaultPlan:
    keys = sorted({tx.key for tx in txs})
    n_mismatch = round(config.mismatch_rate * len(keys))
    n_omitted = round(config.omission_rate * len(keys))
    sabotaged = rng.sample(keys, n_mismatch + n_omitted)
    return FaultPlan(
        n_keys=len(keys),
        mismatched=tuple(sorted(sabotaged[:n_mismatch])),
        omitted=tuple(sorted(sabotaged[n_mismatch:])),
    )


def _stage_with_faults(
    wallets: dict[str, Wallet], txs: list[_PlannedTx], plan: FaultPlan
) -> None:
    """Stage both sides of every transaction, applying the fault plan.

    A mismatched key has one side's first entry inflated; an omitted key
    drops the payee side entirely so only the payer's post appears.
    """
    mismatched = set(plan.mismatched)
    omitted = set(plan.omitted)
    inflated: set[tuple[str, str, str]] = set()
    for tx in txs:
        payer_amount = tx.amount
        if tx.key in mismatched and tx.key not in inflated:
            payer_amount = tx.amount + 1 + (tx.index % 997)
            inflated.add(tx.key)
        wallets[tx.payer].stage_transaction(
            StagedTransaction(tx.payee, Direction.OUTGOING, payer_amount, tx.date, tx.details)
        )
        if tx.key in omitted:
            continue
        wallets[tx.payee].stage_transaction(
            StagedTransaction(tx.payer, Direction.INCOMING, tx.amount, tx.date, tx.details)
        )


# -- benchmarks ---------------------------------------------------------------


def bench_setup(n: int, group: str = "production", seed: int = 1) -> BenchReport:
    """Mean wall-clock seconds to create one counterparty value set."""
    if n < 1:
        raise ValidationError("n must be positive")
    params = setup_group(group)
    rng = random.Random(seed)
    wallet = Wallet("bench-owner", params, rng=rng)
    started = time.perf_counter()
    for i in range(n):
        wallet.open_relationship(f"cp-{i:06d}")
    total = time.perf_counter() - started
    return BenchReport(
        phase="setup",
        group=group,
        n=n,
        total_seconds=total,
        mean_seconds=total / n,
        reference_mean_seconds=REFERENCE_SETUP_MEAN_S,
        machine=_machine_descriptor(),
        extra={"value_sets": n},
    )


def _paired_wallets(params, rng) -> tuple[Wallet, Wallet]:
    a = Wallet("bench-a", params, rng=rng)
    b = Wallet("bench-b", params, rng=rng)
    a.open_relationship("bench-b")
    for notice in a.drain_outbox():
        b.receive_counterparty_values(notice.from_company, notice.address, notice.secret)
    for notice in b.drain_outbox():
        a.receive_counterparty_values(notice.from_company, notice.address)
    return a, b


def bench_encrypt(n: int, group: str = "production", seed: int = 1) -> BenchReport:
    """Mean seconds to commit and sign one transaction's daily message."""
    if n < 0:
        raise ValidationError("n must be non-negative")
    params = setup_group(group)
    rng = random.Random(seed)
    machine = _machine_descriptor()
    if n == 0:
        return BenchReport(
            phase="encrypt",
            group=group,
            n=0,
            total_seconds=0.0,
            mean_seconds=0.0,
            reference_mean_seconds=REFERENCE_ENCRYPT_MEAN_S,
            machine=machine,
        )
    wallet, _ = _paired_wallets(params, rng)
    dates = [Date(2020, 1, 1) + timedelta(days=i) for i in range(n)]
    for i, date in enumerate(dates):
        wallet.stage_transaction(
            StagedTransaction(
                "bench-b", Direction.OUTGOING, rng.randrange(100, 1_000_000), date, f"inv-{i}"
            )
        )
    built = 0
    started = time.perf_counter()
    for date in dates:
        built += len(wallet.build_daily_messages(date).messages)
    total = time.perf_counter() - started
    assert built == n
    return BenchReport(
        phase="encrypt",
        group=group,
        n=n,
        total_seconds=total,
        mean_seconds=total / n,
        reference_mean_seconds=REFERENCE_ENCRYPT_MEAN_S,
        machine=machine,
        extra={"fast_reference_mean_seconds": REFERENCE_FAST_ENCRYPT_MEAN_S},
    )


def bench_verify(n: int, group: str = "production", seed: int = 1) -> BenchReport:
    """Total seconds for the matcher to ingest and pair n transactions."""
    if n < 1:
        raise ValidationError("n must be positive")
    params = setup_group(group)
    rng = random.Random(seed)
    wallet_a, wallet_b = _paired_wallets(params, rng)
    registry: dict[str, int] = {}
    for wallet in (wallet_a, wallet_b):
        for vs in wallet.value_sets():
            registry[vs.own_address] = vs.signing_key.public
    dates = [Date(2020, 1, 1) + timedelta(days=i) for i in range(n)]
    messages = []
    for i, date in enumerate(dates):
        amount = rng.randrange(100, 1_000_000)
        wallet_a.stage_transaction(
            StagedTransaction("bench-b", Direction.OUTGOING, amount, date, f"inv-{i}")
        )
        wallet_b.stage_transaction(
            StagedTransaction("bench-a", Direction.INCOMING, amount, date, f"inv-{i}")
        )
        messages.extend(wallet_a.build_daily_messages(date).messages)
        messages.extend(wallet_b.build_daily_messages(date).messages)
    matcher = Matcher(
        params,
        known_address=registry.__contains__,
        resolve_key=registry.get,
        is_auditor=lambda _cid: False,
    )
    started = time.perf_counter()
    for message in messages:
        matcher.ingest(message)
    total = time.perf_counter() - started
    counts = matcher.counts()
    assert counts["verified"] == n, counts
    return BenchReport(
        phase="verify",
        group=group,
        n=n,
        total_seconds=total,
        mean_seconds=total / n,
        reference_mean_seconds=REFERENCE_VERIFY_TOTAL_S_10K / 10_000,
        machine=_machine_descriptor(),
        extra={
            "messages_ingested": len(messages),
            "reference_total_s_per_10k": REFERENCE_VERIFY_TOTAL_S_10K,
            "fast_reference_mean_seconds": REFERENCE_FAST_VERIFY_MEAN_S,
        },
    )


def print_report(report, stream=None) -> None:
    stream = stream or sys.stdout
    json.dump(report.to_wire(), stream, indent=2, sort_keys=True)
    stream.write("\n")
