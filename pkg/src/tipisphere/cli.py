"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import baseline, harness
from .errors import ConfigError
from .metrics import read_jsonl
from .session import normalize_condition


def _fail_config(message: str):
    click.echo(f"config error: {message}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Intrinsically motivated sphere-robot sessions and reports."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None,
              help="TOML or JSON session config; defaults apply when omitted.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--condition", type=str, default=None, help="ada or rea.")
@click.option("--duration", type=int, default=None, help="Override duration_steps.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for the JSON Lines log.")
def run_cmd(config_path, seed, condition, duration, out_dir):
    """Run one batch session and print its exit summary."""
    try:
        doc = harness.load_config_file(config_path) if config_path else {}
        if seed is not None:
            doc["seed"] = seed
        if condition is not None:
            doc["condition"] = normalize_condition(condition)
        if duration is not None:
            doc["duration_steps"] = duration
        cfg, schedule = harness.config_from_dict(doc)
        out_path = None
        if out_dir is not None:
            out_path = Path(out_dir)
            out_path.mkdir(parents=True, exist_ok=True)
            out_path = out_path / f"{cfg.condition}_seed{cfg.seed:04d}.jsonl"
        log = harness.run_session(cfg, schedule=schedule, out_path=out_path)
    except (ConfigError, FileNotFoundError) as exc:
        _fail_config(str(exc))
    if log.abort is not None:
        click.echo(f"session aborted at t={log.abort['t']}: {log.abort['reason']}", err=True)
        sys.exit(3)
    from .metrics import summarize_log

    row = summarize_log(log)
    click.echo(
        f"condition={row['condition']} seed={row['seed']} steps={row['steps']} "
        f"mean_tipi={row['mean_tipi']:.4f} occupancy_entropy={row['occupancy_entropy']:.4f} "
        f"rms_xi={row['rms_xi']:.4f}"
    )
    if out_path is not None:
        click.echo(f"log written to {out_path}")


@main.command("pre-adapt")
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--steps", type=int, default=50000, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def pre_adapt_cmd(seed, steps, out_path):
    """Self-organize on an empty table and freeze the weights to a file."""
    try:
        fp = baseline.pre_adapt(seed=seed, steps=steps)
    except ConfigError as exc:
        _fail_config(str(exc))
    baseline.save_frozen(out_path, fp)
    click.echo(f"frozen params written to {out_path} (digest {fp.digest[:12]}...)")


@main.command("compare")
@click.option("--in", "in_dir", type=click.Path(exists=True), required=True,
              help="Directory of JSON Lines logs.")
@click.option("--out", "out_csv", type=click.Path(), required=True,
              help="Per-log summary CSV; medians go to <out>.medians.csv.")
@click.option("--tipi-window", type=int, default=2000, show_default=True)
@click.option("--grid", type=int, default=20, show_default=True)
def compare_cmd(in_dir, out_csv, tipi_window, grid):
    """Summarize a directory of logs into a condition comparison."""
    paths = sorted(Path(in_dir).glob("*.jsonl"))
    if not paths:
        _fail_config(f"no .jsonl logs found in {in_dir}")
    try:
        logs = [read_jsonl(p) for p in paths]
        report = harness.compare(logs, tipi_window=tipi_window, grid=grid)
    except ConfigError as exc:
        _fail_config(str(exc))
    report.write_csv(out_csv)
    report.write_medians_csv(str(out_csv) + ".medians.csv")
    click.echo(report.to_table())


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=False), default=None)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for live session logs (written on reset/shutdown).")
def serve_cmd(config_path, host, port, out_dir):
    """Serve one live interactive session over WebSocket."""
    try:
        doc = harness.load_config_file(config_path) if config_path else {}
        cfg, schedule = harness.config_from_dict(doc)
        events = harness.load_schedule_events(schedule if schedule != "default" else "none", cfg)
        from .session import schedule_to_timeline

        timeline = schedule_to_timeline(events, cfg) if events else None
    except (ConfigError, FileNotFoundError) as exc:
        _fail_config(str(exc))
    from .service import serve

    try:
        serve(cfg, host=host, port=port, timeline=timeline, out_dir=out_dir)
    except OSError as exc:
        click.echo(f"startup error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
