"""Command-line front end: ``chr run | explore | check | corpus``.

Exit codes: 0 final state (or confluent), 1 failed state (or a non-joinable
pair), 2 fuel exhausted (or an undecided pair), 3 usage, parse or runtime
error.  ``CHR_FUEL`` overrides the default fuel of every command.
"""

from __future__ import annotations

import argparse
import logging
import os
import shlex
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from .canonical import answer
from .confluence import CONFLUENT, DEFAULT_CHECK_FUEL, NON_JOINABLE, check_confluence
from .omega_r_p import DEFAULT_ENGINE_FUEL, run_priority, run_refined
from .omega_t import (
    DEFAULT_EXPLORE_FUEL,
    DEFAULT_RUN_FUEL,
    FAILED,
    FINAL,
    OUT_OF_FUEL,
    Strategy,
    explore_all,
    format_trace,
    run,
)
from .syntax import CHRError, ParseError, Program, parse_program, parse_query

EXIT_OK, EXIT_FAILED, EXIT_FUEL, EXIT_ERROR = 0, 1, 2, 3

_STATUS_EXIT = {FINAL: EXIT_OK, FAILED: EXIT_FAILED, OUT_OF_FUEL: EXIT_FUEL}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means out of fuel here
        raise UsageError(message)


def corpus_dir() -> Path:
    return Path(str(resources.files("chrkit") / "corpus"))


def corpus_names() -> list[str]:
    return sorted(p.stem for p in corpus_dir().glob("*.chr"))


def resolve_program(path: str) -> Path:
    """A readable path as given, else the bundled program with the same base name."""
    p = Path(path)
    if p.is_file():
        return p
    name = p.name if p.suffix == ".chr" else f"{p.name}.chr"
    bundled = corpus_dir() / name
    if bundled.is_file():
        return bundled
    raise UsageError(f"cannot read program {path}")


def load_program(path: str) -> tuple[Path, Program]:
    p = resolve_program(path)
    text = p.read_text(encoding="utf-8")
    try:
        return p, parse_program(text)
    except ParseError as e:
        raise UsageError(_located(str(p), e)) from None


def _located(where: str, e: ParseError) -> str:
    pos = f"{e.line}:{e.col}:" if e.line else ""
    return f"parse error: {where}:{pos} {e.message}"


def _fuel(args: argparse.Namespace, default: int) -> int:
    if args.fuel is not None:
        return args.fuel
    env = os.environ.get("CHR_FUEL")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"CHR_FUEL must be an integer, got {env!r}") from None
    return default


def _query(args: argparse.Namespace):
    try:
        return parse_query(args.query or "")
    except ParseError as e:
        raise UsageError(_located("query", e)) from None


def _print_answer(state, out, ids: bool) -> None:
    store_text, lines = answer(state, state.query_vars, ids=ids)
    print(store_text, file=out)
    for line in lines:
        print(line, file=out)


def cmd_run(args: argparse.Namespace, out) -> int:
    _, program = load_program(args.program)
    goal = _query(args)
    sem = args.semantics
    if sem == "t":
        strategy = Strategy.random(args.seed) if args.seed is not None else Strategy.first()
        res = run(program, goal, strategy, _fuel(args, DEFAULT_RUN_FUEL), occurs_check=args.occurs_check)
    elif sem == "r":
        res = run_refined(program, goal, _fuel(args, DEFAULT_ENGINE_FUEL), occurs_check=args.occurs_check)
    else:
        if not program.has_priorities and args.default_priority is None:
            raise UsageError("no rule has a priority; pass --default-priority to run under -s p")
        res = run_priority(
            program,
            goal,
            _fuel(args, DEFAULT_ENGINE_FUEL),
            default_priority=1 if args.default_priority is None else args.default_priority,
            occurs_check=args.occurs_check,
        )
    if args.trace:
        for line in format_trace(res.trace, res.state.query_vars):
            print(line, file=out)
    if res.state.error:
        print(f"error: {res.state.error}", file=sys.stderr)
        return EXIT_ERROR
    if res.status == OUT_OF_FUEL:
        print(f"out of fuel after {res.steps} transitions", file=sys.stderr)
    _print_answer(res.state, out, ids=not args.no_ids)
    return _STATUS_EXIT[res.status]


def cmd_explore(args: argparse.Namespace, out) -> int:
    _, program = load_program(args.program)
    goal = _query(args)
    ex = explore_all(program, goal, _fuel(args, DEFAULT_EXPLORE_FUEL), occurs_check=args.occurs_check)
    for text in ex.texts:
        print(text, file=out)
    if ex.truncated:
        print("TRUNCATED", file=out)
        return EXIT_FUEL
    return EXIT_OK


def cmd_check(args: argparse.Namespace, out) -> int:
    _, program = load_program(args.program)
    report = check_confluence(program, _fuel(args, DEFAULT_CHECK_FUEL))
    for line in report.lines():
        print(line, file=out)
    if report.verdict == CONFLUENT:
        return EXIT_OK
    return EXIT_FAILED if report.verdict == NON_JOINABLE else EXIT_FUEL


def demos(path: Path) -> list[list[str]]:
    """Argument lists from the ``% demo:`` lines of a corpus program."""
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line.startswith("% demo:"):
            argv = shlex.split(line[len("% demo:") :])
            out.append([argv[0], path.name] + argv[1:])
    return out


def cmd_corpus(args: argparse.Namespace, out) -> int:
    names = args.names or corpus_names()
    worst = EXIT_OK
    for name in names:
        path = resolve_program(name)
        if args.show:
            print(path.read_text(encoding="utf-8"), end="", file=out)
            continue
        for argv in demos(path):
            print(f"== chr {shlex.join(argv)}", file=out)
            code = main(argv, out=out)
            print(f"-- exit {code}", file=out)
            worst = max(worst, code)
    return EXIT_OK if args.show else (EXIT_ERROR if worst == EXIT_ERROR else EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chr", description="Constraint Handling Rules interpreter.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, query: bool = True) -> None:
        p.add_argument("program", help="CHR program file, or the name of a bundled program")
        if query:
            p.add_argument("--query", "-q", default="", help="goal, e.g. 'leq(A,B), leq(B,A)'")
            p.add_argument("--occurs-check", action="store_true", help="unify with the occurs check")
        p.add_argument("--fuel", type=int, default=None, help="step budget (default from CHR_FUEL or built in)")

    p = sub.add_parser("run", help="run a query to a final state")
    common(p)
    p.add_argument("--semantics", "-s", choices=("t", "r", "p"), default="r")
    p.add_argument("--seed", type=int, default=None, help="random transition choice under -s t")
    p.add_argument("--trace", action="store_true", help="print the derivation before the answer")
    p.add_argument("--no-ids", action="store_true", help="omit #id suffixes")
    p.add_argument("--default-priority", type=int, default=None, help="priority of unprioritized rules under -s p")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="print every final state reachable under -s t")
    common(p)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("check", help="confluence check via critical pairs")
    common(p, query=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("corpus", help="run the demos of the bundled programs")
    p.add_argument("names", nargs="*", help=f"programs to run (default all: {', '.join(corpus_names())})")
    p.add_argument("--show", action="store_true", help="print program text instead of running it")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Sequence[str] | None = None, *, out=None) -> int:
    out = out or sys.stdout
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as e:
        print(f"chr: {e}", file=sys.stderr)
    except CHRError as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
