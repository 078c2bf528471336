"""
Coprime EMVS-MIMO coarray estimator: CLI entry point
-----------------------------------------------------
Run: python main.py <command> [--config FILE] [--seed N] [--out PATH]

Commands:
    simulate          write one snapshot matrix (.npy) and a scene summary (.json)
    estimate          run one trial and print paired estimates against truth
    sweep-snr         RMSE versus SNR
    sweep-snapshots   RMSE versus snapshot count
    sweep-k           RMSE versus number of targets
    bias              bias of two closely spaced targets (sweep=snr_db or snapshots)
    scatter           per-trial estimates of the 13-target scene
    crb               Cramer-Rao bound versus SNR or snapshots

Results go to the output/ folder unless --out is given.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from coarray.cp_decomposition import kruskal_max_targets
from coarray.emvs_model import ANGLE_FIELDS, generate_snapshots, noise_variance
from coarray.errors import CoarrayError, ConfigError
from coarray.geometry import coarray_aperture, difference_coarray
from harness.config import load_config
from harness.report_writer import default_path, save_frame, save_json, save_snapshots, sidecar_path
from harness.runner import run_crb_sweep, run_sweep
from harness.scenarios import SWEEPS
from harness.trial_executor import run_trial

load_dotenv()
console = Console()
err_console = Console(stderr=True)

EXIT_CODES = {"config": 2, "io": 3, "identifiability": 4}

SWEEP_COMMANDS = ("sweep-snr", "sweep-snapshots", "sweep-k", "bias", "scatter")


def setup_logging(verbose: bool):
    level = "DEBUG" if verbose else os.getenv("COARRAY_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
    )


def fail(error: CoarrayError):
    """Red message for people, one JSON line for scripts, category exit code."""
    err_console.print("[bold red]Error: {}[/bold red]".format(error))
    print(json.dumps(error.to_dict()), file=sys.stderr)
    sys.exit(EXIT_CODES.get(error.category, 1))


def show_welcome(command: str, cfg):
    console.print()
    console.print(Panel.fit(
        "[bold cyan]Coprime EMVS-MIMO Coarray Estimator[/bold cyan]\n"
        "[dim]{}[/dim]".format(SWEEPS.get(command, {}).get("description", command)),
        border_style="cyan",
    ))
    table = Table(title="Scene", show_header=True, header_style="bold")
    table.add_column("Setting", style="cyan")
    table.add_column("Value")
    table.add_row("Transmit (M1, M2)", "({}, {})".format(cfg.m1, cfg.m2))
    table.add_row("Receive (N1, N2)", "({}, {})".format(cfg.n1, cfg.n2))
    table.add_row("Targets K", str(cfg.k) + (" [dim]({})[/dim]".format(cfg.scene_name) if cfg.scene_name else ""))
    table.add_row("SNR / snapshots", "{:g} dB / {}".format(cfg.snr_db, cfg.snapshots))
    if cfg.sweep != "none":
        table.add_row("Sweep", "{} over {}".format(cfg.sweep, ", ".join("{:g}".format(v) for v in cfg.sweep_values)))
    table.add_row("Trials / seed", "{} / {}".format(cfg.trials, cfg.seed))
    console.print(table)
    console.print()


# --- Commands ---

def cmd_simulate(cfg, out):
    scene = cfg.scene()
    y = generate_snapshots(scene)
    out = out or default_path("snapshots", ".npy")
    path = save_snapshots(y.y, out)

    tx, rx = coarray_aperture(scene.transmit), coarray_aperture(scene.receive)
    m_tilde = difference_coarray(scene.transmit).size
    n_tilde = difference_coarray(scene.receive).size
    limits = kruskal_max_targets(m_tilde, n_tilde)
    summary = {
        "shape": list(y.y.shape),
        "transmit_positions": list(scene.transmit.positions),
        "receive_positions": list(scene.receive.positions),
        "transmit_aperture": tx._asdict(),
        "receive_aperture": rx._asdict(),
        "k": scene.k,
        "k_max": limits.k_max,
        "k_kruskal": limits.k_kruskal,
        "noise_variance": noise_variance(scene),
        "seed": scene.rng_seed,
        "targets_deg": {name: list(np.degrees(row)) for name, row in zip(ANGLE_FIELDS, scene.parameter_matrix())},
    }
    json_path = save_json(summary, sidecar_path(path, ".json"))

    table = Table(title="Apertures", show_header=True, header_style="bold")
    table.add_column("Side", style="cyan")
    table.add_column("Physical")
    table.add_column("Contiguous")
    table.add_column("Unique lags")
    table.add_row("transmit", *(str(v) for v in tx))
    table.add_row("receive", *(str(v) for v in rx))
    console.print(table)
    console.print("Identifiable targets: up to [bold]{}[/bold]".format(limits.k_max))
    console.print("[green]Wrote[/green] {} and {}".format(path, json_path))


def cmd_estimate(cfg, out):
    record = run_trial(cfg, 0)
    if record["truth"] is None:
        raise_from_record(record)

    table = Table(title="Paired estimates (degrees)", show_header=True, header_style="bold")
    table.add_column("k", style="cyan")
    for name in ANGLE_FIELDS:
        table.add_column(name, justify="right")
    truth = np.degrees(record["truth"])
    est = np.degrees(record["estimates"]) if record["estimates"] is not None else None
    rows = []
    for k in range(truth.shape[1]):
        table.add_row("{} true".format(k), *("{:.3f}".format(v) for v in truth[:, k]))
        if est is not None:
            table.add_row("{} est".format(k), *("{:.3f}".format(v) for v in est[:, k]))
            rows.append({"target": k, **{"true_" + n: truth[i, k] for i, n in enumerate(ANGLE_FIELDS)},
                         **{"est_" + n: est[i, k] for i, n in enumerate(ANGLE_FIELDS)}})
    console.print(table)
    console.print("TALS fit {:.3e} after {} iterations".format(record["fit"], record["iterations"]))

    if out and rows:
        console.print("[green]Wrote[/green] {}".format(save_frame(pd.DataFrame(rows), out)))
    if not record["ok"]:
        raise_from_record(record)


def raise_from_record(record: dict):
    err = CoarrayError(record["error"])
    err.category = record["category"] or "error"
    fail(err)


def render_events(events):
    """Print sweep progress; returns the final report."""
    for event_type, data in events:
        if event_type == "status":
            console.print("[dim]{}[/dim]".format(data))

        elif event_type == "point_start":
            label = "" if data["value"] is None else " {} = {:g}".format(data["axis"], data["value"])
            console.print("[bold yellow]Point {}{}[/bold yellow]".format(data["index"] + 1, label))

        elif event_type == "trial_done":
            if not data["ok"]:
                console.print("  [red]trial {} failed ({})[/red]".format(data["trial"], data["category"]))

        elif event_type == "point_done":
            if "rmse_angle" in data:
                console.print("  [green]done[/green] RMSE angle {:.4f}°, polarization {:.4f}°, failures {}/{}".format(
                    data["rmse_angle"], data["rmse_polarization"], data["failures"], data["trials"]))
            else:
                console.print("  [green]done[/green] CRB angle {:.4g}°, polarization {:.4g}°".format(
                    data["crb_angle"], data["crb_polarization"]))

        elif event_type == "complete":
            return data

        elif event_type == "error":
            fail(data)


def show_report(report):
    frame = report.summary_frame()
    table = Table(title="Summary", show_header=True, header_style="bold")
    cols = [c for c in frame.columns if not c.startswith("bias_") or c in ("bias_angle", "bias_polarization")]
    for col in cols:
        table.add_column(col, justify="right")
    for _, row in frame[cols].iterrows():
        table.add_row(*("{:.4g}".format(v) if isinstance(v, float) else str(v) for v in row))
    console.print(table)
    if report.elapsed_s:
        console.print("[dim]{:.1f} s wall clock[/dim]".format(report.elapsed_s))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Coprime EMVS-MIMO coarray tensor estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = ("simulate", "estimate") + SWEEP_COMMANDS + ("crb",)
    for name in commands:
        p = sub.add_parser(name, help=SWEEPS.get(name, {}).get("description"))
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--out", help="output path")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
        p.add_argument("--workers", type=int, help="parallel trial workers")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--verbose", "-v", action="store_true", help="debug logging")
        if name in SWEEP_COMMANDS:
            p.add_argument("--trial-csv", action="store_true", help="also write per-trial rows")
    return parser


def parse_overrides(args) -> dict:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            fail(ConfigError("--set expects KEY=VALUE, got {!r}".format(item)))
        overrides[key.strip()] = value.strip()
    overrides.update({"seed": args.seed, "trials": args.trials, "workers": args.workers})
    return overrides


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    experiment = args.command if args.command in SWEEPS else None
    try:
        cfg = load_config(args.config, experiment=experiment, overrides=parse_overrides(args))
    except CoarrayError as e:
        fail(e)

    show_welcome(args.command, cfg)

    try:
        if args.command == "simulate":
            cmd_simulate(cfg, args.out)
        elif args.command == "estimate":
            cmd_estimate(cfg, args.out)
        elif args.command == "crb":
            report = render_events(run_crb_sweep(cfg, args.out or default_path("crb")))
            show_report(report)
        else:
            out = args.out or default_path(args.command.replace("-", "_"))
            with_trials = args.trial_csv or args.command == "scatter"
            report = render_events(run_sweep(cfg, out, with_trials=with_trials))
            show_report(report)
    except CoarrayError as e:
        fail(e)


if __name__ == "__main__":
    main()
