"""Operator command line.

Subcommands: check, rules validate, evaluate, explain, admissible, serve.
Exit codes are a stable contract: 0 success/compliant, 1 runtime error,
2 validation failure, 3 non-compliant/violating, 4 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .dpdp import (
    RELAXATION_LEVELS,
    builtin,
    compliance_verdict,
    render_verdict_text,
)
from .engine import blame, check_admissibility, derive_fixpoint
from .extraction import ExtractorConfig, FixtureExtractor, RemoteExtractor, extract
from .metrics import compute_metrics, load_annotations, render_table, to_records
from .rules import RuleError, parse_rule_pack
from .schema import Assignment, SchemaError, load_schema
from .service import (
    AnalysisService,
    AnalyzeRequest,
    CACHE_DIR_ENV,
    DEFAULT_TTL_S,
    DiskCacheStore,
    build_response,
    make_http_server,
    render_response_json,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_NON_COMPLIANT = 3
EXIT_USAGE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text("utf-8")


def _make_extractor(selection: str, policy_id: str | None = None,
                    endpoint: str | None = None, model: str | None = None):
    if selection.startswith("fixture:"):
        return FixtureExtractor(selection[len("fixture:"):], policy_id=policy_id)
    if selection == "remote":
        endpoint = endpoint or os.environ.get("APLIANCE_ENDPOINT", "")
        if not endpoint:
            raise UsageError("remote extractor needs --endpoint or APLIANCE_ENDPOINT")
        model = model or os.environ.get("APLIANCE_MODEL") or ExtractorConfig(endpoint).model
        return RemoteExtractor(ExtractorConfig(endpoint, model=model))
    raise UsageError(f"unknown extractor {selection!r} (use remote or fixture:<path>)")


def load_assignment_file(text: str) -> Assignment:
    """Parse `name = value` lines; # starts a comment."""
    bindings = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, value = line.partition("=")
        if not sep or not name.strip() or not value.strip():
            raise ValueError(f"line {lineno}: expected '<attribute> = <value>'")
        bindings[name.strip()] = value.strip()
    return Assignment(bindings)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    policy_text = _read_input(args.file)
    policy_id = None if args.file == "-" else Path(args.file).stem
    extractor = _make_extractor(args.extractor, policy_id, args.endpoint, args.model)
    schema, pack = builtin()
    result = extract(extractor, schema, policy_text)
    relaxations = RELAXATION_LEVELS[args.relax]
    verdict = compliance_verdict(result.to_assignment(), relaxations)
    if args.output == "machine":
        body = build_response(result, verdict, cached=False)
        sys.stdout.buffer.write(render_response_json(body))
        sys.stdout.buffer.write(b"\n")
    else:
        sys.stdout.write(render_verdict_text(verdict))
        for warning in result.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK if verdict.compliant else EXIT_NON_COMPLIANT


def cmd_rules_validate(args) -> int:
    try:
        schema = load_schema(_read_input(args.schema))
        pack = parse_rule_pack(_read_input(args.pack), schema)
    except (SchemaError, RuleError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"{len(pack.rules)} rules OK")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    schema, _ = builtin()
    gt = load_annotations(_read_input(args.gt), schema)
    pred = load_annotations(_read_input(args.pred), schema)
    overall = compute_metrics(gt, pred, "overall", schema)
    per_policy = compute_metrics(gt, pred, "per_policy", schema)
    per_attribute = compute_metrics(gt, pred, "per_attribute", schema)
    if args.output == "machine":
        print(json.dumps({
            "overall": to_records([overall]),
            "per_policy": to_records(per_policy),
            "per_attribute": to_records(per_attribute),
        }, indent=2))
    else:
        print(render_table([overall], "Overall"))
        print(render_table(per_policy, "Per policy"))
        print(render_table(per_attribute, "Per attribute"))
    return EXIT_OK


def cmd_explain(args) -> int:
    schema, pack = builtin()
    given = load_assignment_file(_read_input(args.file))
    complete = dict(given.bindings)
    for attr in schema.attributes:
        if attr.kind != "derived" and attr.name not in complete:
            # unbound attributes are evaluated at false-equivalents for the trace
            complete[attr.name] = "false" if "false" in attr.domain else attr.domain[-1]
    enriched = derive_fixpoint(schema, pack, Assignment(complete))
    blame_set = blame(schema, pack, enriched, args.goal)
    if not blame_set:
        print(f"goal holds: {args.goal}")
        return EXIT_OK
    print(f"goal fails: {args.goal}")
    for number, entry in enumerate(blame_set.entries, start=1):
        path = " -> ".join(entry.rule_path) if entry.rule_path else "-"
        print(f"{number}. {entry.attribute}: expected {entry.expected}, "
              f"actual {entry.actual} (rules: {path})")
    return EXIT_NON_COMPLIANT


def cmd_admissible(args) -> int:
    schema, pack = builtin()
    given = load_assignment_file(_read_input(args.file))
    result = check_admissibility(schema, pack, given, limit=args.limit)
    print(f"{result.status} after {result.scenarios_checked} scenario(s)")
    if result.witness is not None:
        for name in sorted(result.witness.bindings):
            print(f"witness: {name} = {result.witness.bindings[name]}")
        return EXIT_NON_COMPLIANT
    return EXIT_OK


def cmd_serve(args) -> int:
    extractor = _make_extractor(args.extractor, None, args.endpoint, args.model)
    cache_dir = args.cache_dir or os.environ.get(CACHE_DIR_ENV) or ".apliance-cache"
    store = DiskCacheStore(cache_dir)
    service = AnalysisService(extractor, store, ttl_s=args.ttl)
    host, _, port = args.listen.rpartition(":")
    server = make_http_server(service, host or "127.0.0.1", int(port), args.token)
    actual = server.server_address
    print(f"listening on {actual[0]}:{actual[1]} (cache: {cache_dir}, ttl: {args.ttl:g}s)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="apliance", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="check one policy text for compliance")
    check.add_argument("file", help="policy text file, or - for stdin")
    check.add_argument("--extractor", default="remote",
                       help="remote or fixture:<path> (default: remote)")
    check.add_argument("--relax", choices=sorted(RELAXATION_LEVELS), default="L0")
    check.add_argument("--output", choices=["text", "machine"], default="text")
    check.add_argument("--endpoint", default=None, help="remote extractor URL")
    check.add_argument("--model", default=None, help="remote extractor model name")
    check.set_defaults(func=cmd_check)

    rules = sub.add_parser("rules", help="rule pack utilities")
    rules_sub = rules.add_subparsers(dest="rules_command", required=True)
    validate = rules_sub.add_parser("validate", help="validate a pack against a schema")
    validate.add_argument("pack")
    validate.add_argument("schema")
    validate.set_defaults(func=cmd_rules_validate)

    evaluate = sub.add_parser("evaluate", help="score predictions against ground truth")
    evaluate.add_argument("--gt", required=True)
    evaluate.add_argument("--pred", required=True)
    evaluate.add_argument("--output", choices=["text", "machine"], default="text")
    evaluate.set_defaults(func=cmd_evaluate)

    explain = sub.add_parser("explain", help="blame a failed goal for an assignment")
    explain.add_argument("file", help="assignment file (name = value lines)")
    explain.add_argument("--goal", required=True,
                         help="'permit <action>' or '<attribute>=<value>'")
    explain.set_defaults(func=cmd_explain)

    admissible = sub.add_parser(
        "admissible", help="enumerate unknowns and report admissible/violating"
    )
    admissible.add_argument("file", help="assignment file (name = value lines)")
    admissible.add_argument("--limit", type=int, default=20,
                            help="max free attributes to enumerate")
    admissible.set_defaults(func=cmd_admissible)

    serve = sub.add_parser("serve", help="run the analysis HTTP service")
    serve.add_argument("--listen", default="127.0.0.1:8200")
    serve.add_argument("--cache-dir", default=None)
    serve.add_argument("--ttl", type=float, default=DEFAULT_TTL_S)
    serve.add_argument("--extractor", default="remote")
    serve.add_argument("--endpoint", default=None, help="remote extractor URL")
    serve.add_argument("--model", default=None, help="remote extractor model name")
    serve.add_argument("--token", default=None,
                       help="optional shared token required in X-Apliance-Token")
    serve.set_defaults(func=cmd_serve)

    return parser


def run(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
