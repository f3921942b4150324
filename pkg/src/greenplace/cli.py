"""``greenplace`` command line.

Exit status is 0 on success, 1 for a domain outcome (validation errors found,
no eligible placement, explain selector matching nothing) and 2 for usage,
I/O, syntax or validation failures of the input itself.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import report
from .engine import check_placement
from .facts import (
    FactFile,
    FactSyntaxError,
    KeyNotFound,
    ValidationFailed,
    apply_overlay,
    assemble,
    build_kb,
    parse_file,
    parse_overlay,
)
from .model import PRESETS, Constants, GreenplaceError, Placement, UnknownApplication, errors_only
from .ranking import RankKey, compare, rank

OK, DOMAIN, FAILURE = 0, 1, 2
PRESET_ENV = "GREENPLACE_PRESET"


class UsageError(GreenplaceError):
    pass


class Outcome(GreenplaceError):
    """A domain result reported with exit status 1."""


def _add_common(p: argparse.ArgumentParser, app: bool = True) -> None:
    p.add_argument("files", nargs="+", help="fact files, concatenated in order")
    if app:
        p.add_argument("--app", required=True, help="application name")
        p.add_argument("--rank", default="carbon,cost,energy", type=_rank_key,
                       help="criteria priority, e.g. cost,energy,carbon or k,e,c")
        p.add_argument("--format", choices=("table", "json"), default="table")
    g = p.add_argument_group("constants")
    g.add_argument("--preset", default=None, choices=sorted(PRESETS),
                   help=f"constants preset (default: ${PRESET_ENV} or 'default')")
    g.add_argument("--hw-th", type=int, help="hardware headroom threshold, units")
    g.add_argument("--bw-th", type=float, help="bandwidth headroom threshold, Mbit/s")
    g.add_argument("--kwh-per-mb", type=float, help="network energy per MB, kWh")
    g.add_argument("--gci", type=float, help="global carbon intensity, kgCO2/kWh")


def _rank_key(text: str) -> RankKey:
    try:
        return RankKey.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greenplace",
        description="Carbon-, energy- and cost-aware placement of Cloud-IoT applications.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check fact files and print diagnostics")
    _add_common(p, app=False)

    p = sub.add_parser("place", help="rank every eligible placement")
    _add_common(p)

    p = sub.add_parser("explain", help="break down the footprint of one placement")
    _add_common(p)
    sel = p.add_mutually_exclusive_group(required=True)
    sel.add_argument("--rank-id", type=int, help="1-based rank under --rank")
    sel.add_argument("--assign", help="explicit placement: service=node,...")

    p = sub.add_parser("whatif", help="compare rankings before and after an overlay")
    _add_common(p)
    p.add_argument("--overlay", required=True, help="overlay file (+ add, ! replace, - remove)")
    return parser


def constants_from_args(args) -> Constants:
    preset = args.preset or os.environ.get(PRESET_ENV) or "default"
    if preset not in PRESETS:
        raise UsageError(f"unknown preset {preset!r} (choose from {', '.join(sorted(PRESETS))})")
    return PRESETS[preset].replace(
        hw_threshold=args.hw_th, bw_threshold=args.bw_th,
        kwh_per_mb=args.kwh_per_mb, avg_gci=args.gci,
    )


def _read(paths) -> FactFile:
    return FactFile.concat(parse_file(p) for p in paths)


def load_kb(paths, constants: Constants):
    return build_kb(_read(paths), constants=constants)


def _parse_assign(text: str, services) -> Placement:
    mapping = {}
    for part in text.split(","):
        service, sep, node = part.partition("=")
        if not sep or not service.strip() or not node.strip():
            raise UsageError(f"bad assignment {part!r}; expected service=node")
        mapping[service.strip()] = node.strip()
    missing = [s for s in services if s not in mapping]
    extra = sorted(set(mapping) - set(services))
    if missing or extra:
        raise UsageError(f"assignment must cover exactly the services {', '.join(services)}")
    return Placement.from_mapping(services, mapping)


def cmd_validate(args, out) -> int:
    _, diags = assemble(_read(args.files), constants_from_args(args))
    for d in diags:
        print(d, file=out)
    return DOMAIN if errors_only(diags) else OK


def cmd_place(args, out) -> int:
    kb = load_kb(args.files, constants_from_args(args))
    ranked = rank(kb, args.app, args.rank)
    if args.format == "json":
        out.write(report.dumps(report.ranking_doc(kb, args.app, ranked)))
    elif ranked:
        out.write(report.ranking_table(ranked))
    if not ranked:
        raise Outcome("no eligible placement")
    return OK


def cmd_explain(args, out) -> int:
    kb = load_kb(args.files, constants_from_args(args))
    ranked = rank(kb, args.app, args.rank)
    if args.rank_id is not None:
        if not 1 <= args.rank_id <= len(ranked):
            raise Outcome(f"no placement with rank {args.rank_id} ({len(ranked)} eligible)")
        chosen = ranked[args.rank_id - 1]
    else:
        placement = _parse_assign(args.assign, kb.application(args.app).services)
        chosen = report.find_ranked(ranked, placement)
        if chosen is None or not check_placement(kb, args.app, placement):
            raise Outcome(f"placement {placement} is not eligible")
    if args.format == "json":
        out.write(report.dumps(report.explain_doc(kb, args.app, chosen)))
    else:
        out.write(report.explain_text(kb, chosen))
    return OK


def cmd_whatif(args, out) -> int:
    kb = load_kb(args.files, constants_from_args(args))
    kb.application(args.app)
    with open(args.overlay, "rb") as fh:
        overlay = parse_overlay(fh.read(), source=args.overlay)
    changed = apply_overlay(kb, overlay)
    cmp = compare(kb, changed, args.app, args.rank)
    if args.format == "json":
        out.write(report.dumps(report.comparison_doc(changed, cmp)))
    else:
        out.write(report.comparison_text(cmp))
    return OK


COMMANDS = {"validate": cmd_validate, "place": cmd_place,
            "explain": cmd_explain, "whatif": cmd_whatif}


def main(argv: Optional[List[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code in (0, None) else FAILURE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except Outcome as exc:
        print(f"greenplace: {exc}", file=err)
        return DOMAIN
    except ValidationFailed as exc:
        for d in exc.diagnostics:
            print(d, file=err)
        return FAILURE
    except UnknownApplication as exc:
        print(f"greenplace: {exc}", file=err)
        return FAILURE
    except (FactSyntaxError, KeyNotFound, UsageError) as exc:
        print(f"greenplace: {exc}", file=err)
        return FAILURE
    except OSError as exc:
        print(f"greenplace: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=err)
        return FAILURE
    except Exception as exc:  # noqa: BLE001 - exit codes are limited to 0/1/2
        print(f"greenplace: internal error: {exc!r}", file=err)
        return FAILURE


def run() -> None:
    sys.exit(main())
