"""``reduxon`` command-line tool.

One subcommand per experiment kind.  Configurations are JSON files parsed
strictly; results are written atomically as a JSON envelope
``{kind, version, config_hash, result}`` or as CSV.

Exit codes: 0 success, 1 usage error or malformed configuration,
2 validation failure or invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import tempfile
from typing import Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .acceptance import CriterionResult, format_line
from .experiments import KINDS, SCHEMAS, run
from .hilbert import ReduxonError
from .serialize import SchemaError, dumps

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reduxon", description="Quantum-state reduction experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), help="output format (default json)")
        p.add_argument("--trials", type=int, help="trial count (bounds-suite) or run count (ensemble)")
        p.add_argument("--dim", type=int, help="single Hilbert-space dimension for bounds-suite")
    return parser


def _line_of(text: str, key) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(str(key)), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _describe(err: ValidationError, text: str) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        named = [p for p in e["loc"] if isinstance(p, str)]
        line = _line_of(text, named[-1]) if named and text else None
        where = f" (line {line})" if line else ""
        lines.append(f"field '{loc}'{where}: {e['msg']}")
    return "\n".join(lines)


def load_config(kind: str, path: Optional[str], args: argparse.Namespace):
    text = ""
    data: dict = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    if data.get("kind") not in (None, kind):
        raise UsageError(f"config kind {data['kind']!r} does not match subcommand {kind!r}")
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    if args.format is not None:
        data["format"] = args.format
    if args.trials is not None:
        if kind == "bounds-suite":
            data["trials"] = args.trials
        elif kind == "ensemble":
            data["M"] = args.trials
        else:
            raise UsageError(f"--trials does not apply to {kind}")
    if args.dim is not None:
        if kind != "bounds-suite":
            raise UsageError(f"--dim does not apply to {kind}")
        data["dims"] = [args.dim]
    try:
        return SCHEMAS[kind].model_validate(data)
    except ValidationError as exc:
        raise UsageError("invalid configuration:\n" + _describe(exc, text)) from exc


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".reduxon-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = os.environ.get("REDUXON_THREADS")
        if threads is not None and not (threads.isdigit() and int(threads) >= 1):
            raise UsageError(f"REDUXON_THREADS must be a positive integer, got {threads!r}")
        cfg = load_config(args.kind, args.config, args)
        envelope, rows, ok = run(args.kind, cfg)
    except (UsageError, SchemaError) as exc:
        print(f"reduxon {args.kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReduxonError as exc:
        print(f"reduxon {args.kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.kind == "accept":
        for c in envelope["result"]["criteria"]:
            print(format_line(CriterionResult(**c)))
    text = dumps(envelope) if cfg.format == "json" else to_csv(rows)
    if cfg.out:
        try:
            write_atomic(cfg.out, text)
        except OSError as exc:
            print(f"reduxon {args.kind}: cannot write output: {exc}", file=sys.stderr)
            return EXIT_USAGE
    elif args.kind != "accept":
        sys.stdout.write(text)
    if not ok:
        print(f"reduxon {args.kind}: validation failed", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
