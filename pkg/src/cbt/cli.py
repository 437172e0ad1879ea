"""Command-line interface: ad-hoc simulations, the canned experiment
scenarios, the live cluster runner, and the control service.

Fault specs for ``cbt sim --fault`` (repeatable):

    crash:C.N@TICK[:start|mid]      kill node C.N at TICK
    crash-on-send:C.N:k=commit,txn=1   kill C.N after it sends a match
    restart:C.N@TICK                bring node C.N back
    drop:k=vote-yes,tc=0[:count=1][:skip=0]
    delay:k=commit,tc=2:+50[:count=N]

Match fields: k (kind), txn, fc (from chain), tc (to chain).
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .config import ClusterConfig, ProtocolKind, ProtocolMode, load_config
from .errors import CBTError
from .harness import SCENARIOS, render_report
from .livenet import LiveCluster
from .metrics import MetricsCollector
from .sim import (
    CrashNode,
    CrashOnSend,
    DelayMessage,
    DropMessage,
    FaultSchedule,
    MsgMatch,
    RestartNode,
    Workload,
    sim_run,
    trace_to_jsonl,
)


def _parse_match(text: str) -> MsgMatch:
    fields: dict = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = {"k": "kind", "fc": "from_chain", "tc": "to_chain"}.get(key, key)
        if key == "kind":
            fields[key] = value
        else:
            fields[key] = int(value)
    return MsgMatch(**fields)


def parse_fault(spec: str):
    """Parse one --fault spec; see module docstring for the grammar."""
    head, _, rest = spec.partition(":")
    try:
        if head == "crash":
            where, _, pos = rest.partition(":")
            node, _, tick = where.partition("@")
            chain, node_id = node.split(".")
            return CrashNode(int(chain), int(node_id), int(tick), pos or "start")
        if head == "restart":
            node, _, tick = rest.partition("@")
            chain, node_id = node.split(".")
            return RestartNode(int(chain), int(node_id), int(tick))
        if head == "crash-on-send":
            node, _, match = rest.partition(":")
            chain, node_id = node.split(".")
            return CrashOnSend(int(chain), int(node_id), _parse_match(match))
        if head == "drop":
            parts = rest.split(":")
            kwargs = {}
            for extra in parts[1:]:
                key, _, value = extra.partition("=")
                kwargs[key] = int(value)
            return DropMessage(_parse_match(parts[0]), **kwargs)
        if head == "delay":
            parts = rest.split(":")
            ticks = None
            kwargs = {}
            for extra in parts[1:]:
                if extra.startswith("+"):
                    ticks = int(extra[1:])
                else:
                    key, _, value = extra.partition("=")
                    kwargs[key] = int(value)
            if ticks is None:
                raise ValueError("delay needs a :+TICKS part")
            return DelayMessage(_parse_match(parts[0]), ticks, **kwargs)
    except (ValueError, KeyError) as exc:
        raise click.BadParameter(f"bad fault spec {spec!r}: {exc}") from exc
    raise click.BadParameter(f"unknown fault type {head!r}")


@click.group()
def main() -> None:
    """Cross-chain commit protocol tools."""


@main.command()
@click.option("--protocol", type=click.Choice(["cbt", "2pc", "hub"]), default="cbt")
@click.option("--chains", type=int, default=3)
@click.option("--nodes-per-chain", type=int, default=2)
@click.option("--txns", type=int, default=1)
@click.option("--mode", type=click.Choice(["safe", "paper"]), default="safe")
@click.option("--seed", type=int, default=0)
@click.option("--fault", "faults", multiple=True, help="fault spec; repeatable")
@click.option("--coordinator", type=click.Choice(["fixed", "round-robin"]), default="fixed")
@click.option("--budget", type=int, default=10_000)
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="write the full trace as JSON lines")
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
def sim(protocol, chains, nodes_per_chain, txns, mode, seed, faults, coordinator,
        budget, trace_path, as_json) -> None:
    """Run one simulation and report its metrics."""
    cfg = ClusterConfig(
        chains=chains,
        nodes_per_chain=nodes_per_chain,
        protocol=ProtocolKind(protocol),
        mode=ProtocolMode(mode),
        seed=seed,
    )
    workload = Workload(txns=txns, coordinator=coordinator)
    schedule = FaultSchedule([parse_fault(f) for f in faults], seed=seed)
    collector = MetricsCollector()
    try:
        result = sim_run(cfg, workload, schedule, budget=budget,
                         keep_trace=trace_path is not None, sink=collector.on_event)
    except CBTError as exc:
        raise click.ClickException(str(exc)) from exc
    metrics = collector.finish(result.outcome)
    if trace_path:
        Path(trace_path).write_bytes(trace_to_jsonl(result.trace))
    payload = {
        "config": cfg.to_obj(),
        "workload": workload.to_obj(),
        "faults": schedule.to_obj(),
        "outcome": result.outcome,
        "ticks": result.ticks,
        "metrics": metrics.to_obj(),
    }
    if as_json:
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(f"outcome: {result.outcome} after {result.ticks} ticks")
        for key, value in metrics.to_obj().items():
            click.echo(f"  {key}: {value}")


@main.command()
@click.argument("name", type=click.Choice(sorted(SCENARIOS)))
@click.option("--seed", type=int, default=0)
@click.option("--out", type=click.Path(), default="reports",
              help="directory for archives and report records")
@click.option("--json", "as_json", is_flag=True)
def scenario(name, seed, out, as_json) -> None:
    """Run a canned experiment scenario and print its report."""
    kwargs = {"seed": seed}
    if name == "modelcheck":
        kwargs["out_dir"] = out
    report = SCENARIOS[name](**kwargs)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = report.to_records()
    (out_dir / f"{name}.jsonl").write_text("\n".join(records) + "\n")
    if as_json:
        click.echo(json.dumps(report.to_obj(), sort_keys=True))
    else:
        click.echo(render_report(report))
        click.echo(f"records written to {out_dir / (name + '.jsonl')}")


@main.group()
def live() -> None:
    """Socket-backed cluster commands."""


@live.command("start")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--txns", type=int, default=0, help="submit this many transactions, then report")
@click.option("--wait", type=float, default=15.0, help="seconds to wait for decisions")
def live_start(config_path, txns, wait) -> None:
    """Start a live cluster from a JSON config file.

    With --txns N the command submits N transactions, waits for them to
    decide everywhere, prints per-node states, and shuts down; otherwise it
    runs until interrupted.
    """
    cfg = load_config(config_path)
    cluster = LiveCluster(cfg)
    cluster.start()
    click.echo(f"cluster up: {cfg.chains} chains x {cfg.nodes_per_chain} nodes")
    try:
        if txns:
            submitted = cluster.submit_txns(txns)
            ok = cluster.wait_decided(submitted, timeout=wait)
            click.echo(f"decided={ok}")
            click.echo(json.dumps(cluster.snapshot(), sort_keys=True, indent=1))
        else:
            click.echo("running; Ctrl-C to stop")
            while True:
                import time as _time

                _time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        cluster.stop()


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8008)
def serve(host, port) -> None:
    """Run the operator control service (HTTP + event stream)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
