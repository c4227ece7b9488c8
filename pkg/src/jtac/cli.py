"""Command-line front end: ``jtac run <config>`` and ``jtac table1``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .channel import ChannelGeometry, c_from_geometry, c_table_relation
from .errors import ConfigError
from .report import emit_csv, emit_svg_plot
from .sweep import load_config, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TABLE1_DISTANCE = 21.91
TABLE1 = ((0.1, 4800.0), (1.0, 480.0), (2.0, 240.0), (3.0, 160.0), (4.0, 120.0), (5.0, 96.0))
TABLE1_NOTE = (
    "note: the tabulated c values follow c = d^2/D; the channel model defines "
    "c = d^2/(2D), which is half as large. The library uses d^2/(2D) by default; "
    "configs select the table relation with c_relation = table."
)


def table1_rows(d=TABLE1_DISTANCE):
    """``(c_table, D, d^2/D, d^2/(2D), relative error of d^2/D)`` per reference pair."""
    rows = []
    for c, D in TABLE1:
        geom = ChannelGeometry(d, D)
        c_tab = c_table_relation(geom)
        rows.append((c, D, c_tab, c_from_geometry(geom), abs(c_tab - c) / c))
    return rows


def cmd_table1(args) -> int:
    print(f"d = {TABLE1_DISTANCE} um")
    print(f"{'c (table)':>10} {'D (um^2/s)':>11} {'d^2/D':>10} {'d^2/(2D)':>10} {'rel.err':>9}")
    for c, D, c_tab, c_text, err in table1_rows():
        print(f"{c:>10g} {D:>11g} {c_tab:>10.5f} {c_text:>10.5f} {err:>9.2e}")
    print(TABLE1_NOTE)
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out if args.out is not None else cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    units = "nats" if args.nats else "bits"
    rows = run_sweep(cfg)
    cols = cfg.rate_columns
    written = []
    if "csv" in cfg.formats:
        written.append(emit_csv(rows, out_dir / f"{cfg.name}.csv", cols, units))
    if "svg" in cfg.formats and len(rows) >= 2:
        style = {"title": cfg.title or cfg.name, "x_key": cfg.plot_x}
        written.append(emit_svg_plot(rows, style, out_dir / f"{cfg.name}.svg", cols, units))
    for p in written:
        print(p)
    failures = [r for r in rows if "error:" in r.status]
    for r in rows:
        if r.status != "ok":
            print(f"{r.sweep_var}={r.sweep_value:g}: {r.status}", file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jtac", description="JTAC channel capacity bounds and sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep config and write CSV/SVG")
    run.add_argument("config", help="path to an INI experiment config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--nats", action="store_true", help="report rates in nats instead of bits")
    run.set_defaults(func=cmd_run)
    t1 = sub.add_parser("table1", help="print the (c, D) geometry mapping")
    t1.set_defaults(func=cmd_table1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
