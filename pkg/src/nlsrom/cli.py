"""Command line entry point ``nlsrom``.

Examples::

    nlsrom fom run example1 --set time.T=1.0
    nlsrom rom build example1
    nlsrom rom run example1 --set rom.variant=pod_dmd
    nlsrom sweep example1 --modes 1 2 4 8 15
    nlsrom bench example1 --repeat 3

``<config>`` is a path to an INI file or a preset name.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments
from .config import RunConfig
from .errors import ConvergenceError, NlsromError


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if args.set:
        cfg = cfg.override(args.set)
    if args.out:
        cfg = cfg.replace(output={"directory": args.out})
    return cfg


def _add_common(p):
    p.add_argument("config", help="INI file or preset name (example1, example2)")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a configuration entry (repeatable)")
    p.add_argument("--out", help="output directory (overrides [output] directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlsrom", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fom = sub.add_parser("fom", help="full-order model").add_subparsers(dest="action", required=True)
    _add_common(fom.add_parser("run", help="integrate and store snapshots"))

    rom = sub.add_parser("rom", help="reduced-order model").add_subparsers(dest="action", required=True)
    _add_common(rom.add_parser("build", help="offline stage: basis and reducer"))
    _add_common(rom.add_parser("run", help="online stage: reduced integration"))

    sw = sub.add_parser("sweep", help="error versus number of DEIM/DMD modes")
    _add_common(sw)
    sw.add_argument("--modes", type=int, nargs="*", default=[], metavar="M")
    sw.add_argument("--reducers", nargs="+", default=["deim", "dmd"], choices=["deim", "dmd"])

    b = sub.add_parser("bench", help="time FOM and reduced online loops")
    _add_common(b)
    b.add_argument("--repeat", type=int, default=1, help="report the median of this many runs")

    dump = sub.add_parser("config", help="print a configuration as INI")
    dump.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "config":
            print(RunConfig.load(args.config).to_ini(), end="")
            return 0
        cfg = _config(args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "fom":
            res = experiments.run_fom(cfg)
            tr = res.trajectory
            print(f"fom: {len(tr.times) - 1} steps in {tr.wall_time:.3f} s, "
                  f"max |dN| = {tr.mass_drift.max():.3e}, max |dE| = {tr.energy_drift.max():.3e}")
        elif args.command == "rom" and args.action == "build":
            model = experiments.build_rom_offline(cfg)
            print(f"rom build: variant {model.variant}, k = {model.basis.k}, "
                  f"m = {model.meta['m_used']}, energy fraction {model.meta['energy_fraction']:.10f}")
        elif args.command == "rom":
            res = experiments.run_rom_online(cfg)
            err = "n/a" if res.l2l2_vs_fom is None else f"{res.l2l2_vs_fom:.3e}"
            print(f"rom run: {cfg.rom.variant} online {res.trajectory.wall_time:.3f} s, "
                  f"L2-L2 error vs FOM {err}")
        elif args.command == "sweep":
            rows = experiments.sweep_modes(cfg, args.modes, tuple(args.reducers))
            print(f"sweep: {len(rows)} rows written to {cfg.out_dir / 'sweep.csv'}")
        elif args.command == "bench":
            print(json.dumps(experiments.bench(cfg, args.repeat), indent=1))
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NlsromError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
