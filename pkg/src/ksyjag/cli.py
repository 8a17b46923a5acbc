"""Command-line surface: validate, parse, dump-form.

Exit codes: 0 success, 1 usage, 2 schema error, 3 parse/data error,
4 I/O error. Diagnostics go to stderr; stdout carries only the requested
artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DataError, ExprEvalError, LayoutError, SchemaError
from .interp import LayoutPlan, compile_layout, parse_data
from .ksy import ValidatedSchema, parse_schema, validate_schema
from .layout import form_to_json, write_bundle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_DATA = 3
EXIT_IO = 4


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is taken by schema errors here
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="ksyjag",
        description="Parse binary files into nested data from KSY format descriptions.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--ksy", required=True, help="path to the format description")
        p.add_argument(
            "--naming", choices=("mangled", "plain"), default="mangled",
            help="field naming mode (default: mangled)",
        )

    p_validate = sub.add_parser("validate", help="check a format description, print its plan")
    add_common(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_parse = sub.add_parser("parse", help="parse a raw data file against a format")
    add_common(p_parse)
    p_parse.add_argument("--data", required=True, help="path to the raw binary input")
    p_parse.add_argument(
        "--format", choices=("json", "buffers"), default="json", dest="format",
        help="output artifact (default: json)",
    )
    p_parse.add_argument("--out", help="output file (json) or directory (buffers)")
    p_parse.set_defaults(func=cmd_parse)

    p_dump = sub.add_parser("dump-form", help="emit only the layout form as JSON")
    add_common(p_dump)
    p_dump.add_argument("--out", help="output file (default: stdout)")
    p_dump.set_defaults(func=cmd_dump_form)

    return parser


def _load_plan(ksy_path: str, naming: str) -> tuple[ValidatedSchema, LayoutPlan]:
    try:
        text = Path(ksy_path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"format description is not UTF-8: {exc}") from None
    validated = validate_schema(parse_schema(text))
    return validated, compile_layout(validated, naming)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(args: argparse.Namespace) -> int:
    validated, plan = _load_plan(args.ksy, args.naming)
    print(f"OK {validated.meta.id}: {plan.node_count} layout nodes")
    sys.stdout.write(form_to_json(plan.form))
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    if args.format == "buffers" and not args.out:
        print("ksyjag parse: error: --format buffers requires --out", file=sys.stderr)
        return EXIT_USAGE
    validated, plan = _load_plan(args.ksy, args.naming)
    raw = Path(args.data).read_bytes()
    filled = parse_data(plan, validated, raw)
    if args.format == "json":
        nested = filled.to_nested()
        _emit(json.dumps(nested, ensure_ascii=False, indent=2) + "\n", args.out)
    else:
        write_bundle(filled, args.out)
        print(f"wrote bundle to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_dump_form(args: argparse.Namespace) -> int:
    _, plan = _load_plan(args.ksy, args.naming)
    _emit(form_to_json(plan.form), args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (DataError, ExprEvalError, LayoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
