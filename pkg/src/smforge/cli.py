"""Command-line entry point.

    smforge <engine> --config FILE --out DIR [--corners] [--seed N]
    smforge report DIR

Exit codes: 0 success, 1 engine failure, 2 config error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ENGINES, ConfigError, load_config
from .runner import ArtifactError, emit_report, run

EXIT_OK = 0
EXIT_ENGINE = 1
EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smforge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for eng in ENGINES:
        sp = sub.add_parser(eng, help=f"run the {eng} engine")
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--corners", action="store_true",
                        help="add the 2^n corner points to the base set")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("-v", "--verbose", action="store_true")
    rp = sub.add_parser("report", help="summarize an artifact directory")
    rp.add_argument("directory")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    if args.command == "report":
        try:
            sys.stdout.write(emit_report(args.directory))
        except (ArtifactError, OSError, ValueError, KeyError) as exc:
            print(f"smforge: {exc}", file=sys.stderr)
            return EXIT_ENGINE
        return EXIT_OK

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"smforge: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.engine is not None and cfg.engine != args.command:
        print(f"smforge: config selects engine {cfg.engine!r}, command line says "
              f"{args.command!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        art = run(cfg, args.out, args.command, args.corners, args.seed)
    except FileExistsError as exc:
        print(f"smforge: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any engine failure maps to exit 1
        print(f"smforge: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    print(art.summary_line())
    return EXIT_OK if art.success else EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
