"""Command-line entry points for simulation, benchmarks, and serving."""

from __future__ import annotations

import json
import sys

import click

from .errors import ProtocolError
from .simulate import (
    ScenarioConfig,
    bench_encrypt,
    bench_setup,
    bench_verify,
    print_report,
    run_scenario,
)


@click.group()
def main() -> None:
    """Collaborative transaction-auditing node tools."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--companies", type=int, default=10, show_default=True)
@click.option("--counterparties", type=int, default=3, show_default=True)
@click.option("--transactions", type=int, default=200, show_default=True)
@click.option("--mismatch-rate", type=float, default=0.05, show_default=True)
@click.option("--omission-rate", type=float, default=0.03, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--days", type=int, default=5, show_default=True)
@click.option(
    "--group", type=click.Choice(["test", "production"]), default="test", show_default=True
)
@click.option("--out", type=click.Path(dir_okay=False), help="Also write the report as JSON.")
def simulate(
    config_path, companies, counterparties, transactions, mismatch_rate,
    omission_rate, seed, days, group, out,
) -> None:
    """Run a seeded scenario and reconcile counts with the fault plan."""
    try:
        if config_path:
            with open(config_path) as fh:
                config = ScenarioConfig.from_dict(json.load(fh))
        else:
            config = ScenarioConfig(
                n_companies=companies,
                counterparties_per_company=counterparties,
                n_transactions=transactions,
                mismatch_rate=mismatch_rate,
                omission_rate=omission_rate,
                seed=seed,
                n_days=days,
                group=group,
            )
            config.validate()
        report = run_scenario(config)
    except ProtocolError as exc:
        raise click.ClickException(str(exc))
    print_report(report)
    if out:
        with open(out, "w") as fh:
            json.dump(report.to_wire(), fh, indent=2, sort_keys=True)
    if not report.accounting_ok:
        click.echo("state counts diverge from the fault plan", err=True)
        sys.exit(1)


@main.group()
def bench() -> None:
    """Throughput benchmarks for the three hot phases."""


def _bench_options(fn):
    fn = click.option("--n", type=int, required=True)(fn)
    fn = click.option("--seed", type=int, default=1, show_default=True)(fn)
    fn = click.option(
        "--group",
        type=click.Choice(["test", "production"]),
        default="production",
        show_default=True,
    )(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False))(fn)
    return fn


def _run_bench(runner, n, seed, group, out) -> None:
    try:
        report = runner(n, group=group, seed=seed)
    except ProtocolError as exc:
        raise click.ClickException(str(exc))
    print_report(report)
    if out:
        with open(out, "w") as fh:
            json.dump(report.to_wire(), fh, indent=2, sort_keys=True)


@bench.command()
@_bench_options
def setup(n, seed, group, out) -> None:
    """Time value-set creation."""
    _run_bench(bench_setup, n, seed, group, out)


@bench.command()
@_bench_options
def encrypt(n, seed, group, out) -> None:
    """Time daily-message commitment and signing."""
    _run_bench(bench_encrypt, n, seed, group, out)


@bench.command()
@_bench_options
def verify(n, seed, group, out) -> None:
    """Time matcher ingestion and pairing."""
    _run_bench(bench_verify, n, seed, group, out)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8799, show_default=True)
@click.option(
    "--group", type=click.Choice(["test", "production"]), default="production", show_default=True
)
@click.option("--committee-key-out", type=click.Path(dir_okay=False),
              help="Write the generated committee signing key here.")
def serve(host, port, group, committee_key_out) -> None:
    """Serve the node API over HTTP (requires the http extra)."""
    try:
        import uvicorn
    except ImportError:
        raise click.ClickException("install the http extra: pip install 'futureab[http]'")
    from .groups import setup_group
    from .http_api import create_app
    from .service import NodeService
    from .signatures import keygen

    params = setup_group(group)
    operator_key = keygen(params)
    committee_key = keygen(params)
    service = NodeService(params, operator_key, committee_public=committee_key.public)
    if committee_key_out:
        with open(committee_key_out, "w") as fh:
            json.dump({"company_id": "committee", "private_key": hex(committee_key.private)}, fh)
        click.echo(f"committee key written to {committee_key_out}")
    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
