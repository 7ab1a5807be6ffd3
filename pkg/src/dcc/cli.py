"""Command-line entry point: ``dcc run|replay|verify|nash|report``.

Exit status is 0 on success, 1 when an input fails validation and 2 when a
log fails its audit or replay. ``DCC_LOG_LEVEL`` sets log verbosity only.
"""

from __future__ import annotations

import logging
import os
import sys

import click

from dcc import econ
from dcc.errors import ConfigInvalid, CorruptLog, IoFailure, ParseError, UnknownKind
from dcc.eventlog import read_events, replay, verify
from dcc.reports import KINDS, to_csv

log = logging.getLogger("dcc")

EXIT_INVALID = 1
EXIT_AUDIT = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _events(path: str) -> list[dict]:
    try:
        return read_events(path)
    except CorruptLog as exc:
        _fail(EXIT_AUDIT, str(exc))
    except OSError as exc:
        _fail(EXIT_INVALID, f"cannot read {path}: {exc}")


@click.group()
def main():
    """Three-token ecosystem simulator and log tooling."""
    logging.basicConfig(level=os.environ.get("DCC_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
def run(config, out_dir):
    """Simulate a scenario; writes events.jsonl and report.json."""
    from dcc.sim.engine import run as run_scenario

    try:
        report = run_scenario(config, out_dir)
    except ConfigInvalid as exc:
        _fail(EXIT_INVALID, f"invalid config: {exc}")
    except IoFailure as exc:
        _fail(EXIT_INVALID, str(exc))
    log.info("wrote %d events to %s", report["events"], out_dir)
    click.echo(report["final_state_hash"])


@main.command("replay")
@click.argument("log_path", metavar="LOG", type=click.Path(dir_okay=False))
def replay_cmd(log_path):
    """Re-execute a log and print its final state hash."""
    events = _events(log_path)
    try:
        click.echo(replay(events))
    except CorruptLog as exc:
        _fail(EXIT_AUDIT, str(exc))


@main.command("verify")
@click.argument("log_path", metavar="LOG", type=click.Path(dir_okay=False))
@click.option("--replay", "deep", is_flag=True, help="Also re-execute the log.")
def verify_cmd(log_path, deep):
    """Audit a log: conservation, elections, settlements, credit."""
    events = _events(log_path)
    try:
        report = verify(events, deep=deep)
    except CorruptLog as exc:
        _fail(EXIT_AUDIT, str(exc))
    for v in report.violations:
        click.echo(str(v))
    click.echo(f"{report.events} events, {len(report.violations)} violations, final {report.final_hash}")
    if not report.ok:
        sys.exit(EXIT_AUDIT)


@main.command()
@click.argument("matrix", type=click.Path(dir_okay=False))
def nash(matrix):
    """Pure Nash equilibria, Pareto set and deviation witnesses of a payoff file."""
    try:
        with open(matrix, encoding="utf-8") as fh:
            game = econ.parse_matrix(fh.read())
    except ParseError as exc:
        _fail(EXIT_INVALID, str(exc))
    except OSError as exc:
        _fail(EXIT_INVALID, f"cannot read {matrix}: {exc}")
    label = econ.profile_label
    click.echo("nash: " + " ".join(label(p) for p in econ.find_pure_nash(game)))
    click.echo("pareto: " + " ".join(label(p) for p in econ.pareto_set(game)))
    for p in econ.PROFILES:
        dev = econ.profitable_deviation(game, p)
        if dev is None:
            click.echo(f"{label(p)}: no profitable deviation")
        else:
            click.echo(f"{label(p)}: {dev.player} -> {label(dev.to)} gains {dev.gain}")


@main.command()
@click.argument("log_path", metavar="LOG", type=click.Path(dir_okay=False))
@click.option("--kind", required=True, help=f"One of {', '.join(KINDS)}.")
def report(log_path, kind):
    """Export a CSV series computed from a log."""
    if kind not in KINDS:
        _fail(EXIT_INVALID, str(UnknownKind(f"unknown report kind {kind!r}; expected one of {', '.join(KINDS)}")))
    events = _events(log_path)
    click.echo(to_csv(events, kind), nl=False)


if __name__ == "__main__":
    main()
