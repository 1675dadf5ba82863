"""Command-line entry point.

Usage examples::

    eqshares validate election.pb
    eqshares run election.pb --rule mes --completion add1u
    eqshares compare election.pb --a mes+add1 --b greedy --output csv --out panels/
    eqshares corpus pabulib/ --criteria np,rba,pbs --format joint --reference aarau.pb
    eqshares pairwise comparisons.csv --election aarau.pb
    eqshares convert messy.pb --out clean.pb

Rule settings may also come from a JSON file given with ``--config``;
command-line flags override it. Exit codes: 0 success, 1 invalid input
(parse, validation or bad arguments), 2 I/O failure, 3 internal invariant
breach.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, harness, metrics
from .core import ValidationError, money, validate
from .pabulib import PbParseError, PbWriteError, read_pb, serialize_pb
from .rules import COMPLETIONS, RULES, UTILITIES, RuleConfig

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

CRITERIA_ALIASES = {
    "np": "num_projects_Q4",
    "rba": "relative_budget_allocation_Q1",
    "pbs": "project_budget_share_Q1",
}

# settings a config file may carry, with their defaults
DEFAULTS = {
    "rule": "mes",
    "completion": "none",
    "add1_increment": "1",
    "utility": "points",
    "tiebreak": "score,cost,id",
    "validation": "strict",
    "a": "mes+add1u",
    "b": "greedy",
    "criteria": "np,rba,pbs",
    "format": "approval,cumulative,joint",
    "mode": "count",
    "workers": 1,
    "district_key": "district",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _add_rule_options(p, with_rule=True):
    if with_rule:
        p.add_argument("--rule", choices=RULES)
        p.add_argument("--completion", choices=COMPLETIONS)
    p.add_argument("--add1-increment", dest="add1_increment", metavar="N",
                   help="per-voter endowment step for Add1, in major currency units (default 1)")
    p.add_argument("--utility", choices=UTILITIES)
    p.add_argument("--tiebreak", metavar="SPEC", help="comma list of score,cost,id,votes; '-' reverses")


def _add_output_options(p):
    p.add_argument("--output", choices=("json", "csv"), default="json")
    p.add_argument("--out", metavar="PATH", help="file for JSON, directory for CSV (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eqshares", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="FILE", help="JSON file with default settings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a file against its ballot rules")
    p.add_argument("file")
    p.add_argument("--lenient", action="store_true", help="report problems but do not fail")

    p = sub.add_parser("run", help="run one rule")
    p.add_argument("file")
    _add_rule_options(p)
    p.add_argument("--lenient", action="store_true", help="drop invalid ballots instead of failing")
    _add_output_options(p)

    p = sub.add_parser("compare", help="run two rules on the same election")
    p.add_argument("file")
    p.add_argument("--a", metavar="LABEL", help="first rule, e.g. mes+add1u (default)")
    p.add_argument("--b", metavar="LABEL", help="second rule, e.g. greedy (default)")
    _add_rule_options(p, with_rule=False)
    p.add_argument("--district-key", dest="district_key", help="project column holding the district")
    p.add_argument("--lenient", action="store_true")
    _add_output_options(p)

    p = sub.add_parser("corpus", help="analyse a directory of elections")
    p.add_argument("directory")
    p.add_argument("--criteria", metavar="LIST",
                   help="comma list of np,rba,pbs (or full names); 'none' disables matching")
    p.add_argument("--format", metavar="LIST", help="comma list of approval,cumulative,joint")
    p.add_argument("--a", metavar="LABEL")
    p.add_argument("--b", metavar="LABEL")
    _add_rule_options(p, with_rule=False)
    p.add_argument("--reference", metavar="FILE", help="election whose curve is compared with the corpus")
    p.add_argument("--mode", choices=metrics.MODES, help="representation measure (default count)")
    p.add_argument("--workers", type=int, metavar="N")
    _add_output_options(p)

    p = sub.add_parser("pairwise", help="rank projects by pairwise wins")
    p.add_argument("file", help="CSV with columns project_a,project_b,winner")
    p.add_argument("--election", metavar="FILE", help="election file used to add project names")
    _add_output_options(p)

    p = sub.add_parser("convert", help="parse and rewrite a file in canonical form")
    p.add_argument("file")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--lenient", action="store_true", help="drop invalid ballots while converting")
    return parser


def _settings(args) -> dict:
    merged = dict(DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "lenient", False):
        merged["validation"] = "lenient"
    return merged


def _rule_options(s) -> dict:
    return {
        "add1_increment": money(str(s["add1_increment"])),
        "utility": s["utility"],
        "tiebreak": s["tiebreak"],
    }


def _list(value) -> list[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def _criteria(value) -> tuple[str, ...]:
    items = _list(value)
    if items in (["none"], []):
        return ()
    if items == ["all"]:
        items = list(CRITERIA_ALIASES)
    return metrics.parse_criteria([CRITERIA_ALIASES.get(i, i) for i in items])


def _emit(args, payload, tables) -> None:
    if args.output == "json":
        text = harness.dumps(payload) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    elif args.out:
        for path in harness.write_tables(tables, args.out):
            print(path)
    else:
        sys.stdout.write(harness.tables_to_text(tables))


def _cmd_validate(args, s) -> int:
    election = read_pb(args.file, s["validation"])
    report = validate(election.instance, election.profile, "lenient", election.voter_lines)
    problems = list(election.diagnostics) + list(report.violations)
    for v in problems:
        print(f"{args.file}: {v}")
    status = "ok" if not problems else f"{len(problems)} problem(s)"
    print(f"{args.file}: {len(election.instance.projects)} projects, {len(election.profile)} ballots, {status}")
    if problems and s["validation"] == "strict":
        return EXIT_INVALID
    return EXIT_OK


def _cmd_run(args, s) -> int:
    config = RuleConfig(rule=s["rule"], completion=s["completion"] if s["rule"] == "mes" else "none",
                        **_rule_options(s))
    run = harness.run_election(args.file, config, s["validation"])
    payload = {"file": args.file, "config": config, "allocation": run.allocation, "metrics": run.metrics,
               "diagnostics": [str(d) for d in run.diagnostics]}
    _emit(args, payload, harness.run_tables(run))
    return EXIT_OK


def _cmd_compare(args, s) -> int:
    opts = _rule_options(s)
    cfg_a = harness.parse_rule_label(s["a"], **opts)
    cfg_b = harness.parse_rule_label(s["b"], **opts)
    report = harness.compare(args.file, cfg_a, cfg_b, s["validation"], s["district_key"])
    _emit(args, {"file": args.file, "report": report}, harness.comparison_tables(report))
    return EXIT_OK


def _cmd_corpus(args, s) -> int:
    opts = _rule_options(s)
    configs = [harness.parse_rule_label(s["a"], **opts), harness.parse_rule_label(s["b"], **opts)]
    formats = _list(s["format"])
    bad = set(formats) - set(harness.FORMATS)
    if bad:
        raise UsageError(f"unknown ballot format(s) {sorted(bad)}")
    report = harness.corpus_analyze(args.directory, _criteria(s["criteria"]), configs, formats,
                                    reference=args.reference, mode=s["mode"], workers=int(s["workers"]),
                                    validation="lenient")
    _emit(args, report, harness.corpus_tables(report))
    return EXIT_OK


def _cmd_pairwise(args, s) -> int:
    ranking = metrics.pairwise_win_ranking(harness.read_pairwise(args.file))
    names = {}
    if args.election:
        election = read_pb(args.election, "lenient")
        names = {p.id: p.name for p in election.instance.projects}
    rows = [{"rank": r, "project_id": pid, "name": names.get(pid, ""), "wins": w} for pid, w, r in ranking]
    table = [["rank", "project_id", "name", "wins"]] + [[r["rank"], r["project_id"], r["name"], r["wins"]]
                                                        for r in rows]
    _emit(args, {"file": args.file, "ranking": rows}, {"pairwise_ranking": table})
    return EXIT_OK


def _cmd_convert(args, s) -> int:
    election = harness.load_election(args.file, s["validation"])
    text = serialize_pb(election.instance, election.profile)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return EXIT_OK


COMMANDS = {
    "validate": _cmd_validate,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "corpus": _cmd_corpus,
    "pairwise": _cmd_pairwise,
    "convert": _cmd_convert,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except (PbParseError, ValidationError, PbWriteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, ValidationError):
            for v in exc.report.violations[:20]:
                print(f"  {getattr(args, 'file', '')}: {v}", file=sys.stderr)
        return EXIT_INVALID
    except harness.InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
