"""Command-line interface.

Exit status: 0 on success, 1 on a refactoring or equivalence failure,
2 on usage or parse errors. Results go to stdout, diagnostics to stderr.
The input project directory is never modified.
"""

from __future__ import annotations

import argparse
import sys

from . import corpus
from .evaluator import EvalError, Evaluator, VOutput, default_entries, observe_entries, show_value
from .lang import FunDecl, Var
from .names import alpha_eq_project
from .parse import ParseError, parse_project
from .refactorings import RefactorError
from .render import write_project
from .resolver import ResolveError, resolve_project
from .script import COMMANDS, RefactorStep, ScriptSyntaxError, parse_script, run_script

USAGE_EXIT = 2
FAIL_EXIT = 1


def _entries_arg(text: str | None, project) -> tuple[str, ...]:
    if text:
        return tuple(n for n in text.split(",") if n)
    return tuple(default_entries(project))


def _cmd_apply(args) -> int:
    with open(args.script, encoding="utf-8") as fh:
        script = parse_script(fh.read(), name=args.script)
    project = parse_project(args.project)
    resolve_project(project)
    entries = _entries_arg(args.entries, project) if args.checked else ()
    out, log = run_script(
        project, script, checked=args.checked, entries=entries, snapshot_dir=args.snapshots
    )
    print(log.summary())
    write_project(out, args.out)
    if not log.ok:
        print("script failed; the project as of the last successful step was written", file=sys.stderr)
        return FAIL_EXIT
    return 0


def _cmd_op(args) -> int:
    tokens = args.tokens
    if len(tokens) < 2:
        print("op needs a command and a project directory", file=sys.stderr)
        return USAGE_EXIT
    command, cmd_args, project_dir = tokens[0], tokens[1:-1], tokens[-1]
    if command not in COMMANDS:
        print(f"unknown operation {command!r}", file=sys.stderr)
        return USAGE_EXIT
    arity = COMMANDS[command][0]
    if len(cmd_args) != arity:
        print(f"{command} takes {arity} argument(s), got {len(cmd_args)}", file=sys.stderr)
        return USAGE_EXIT
    project = parse_project(project_dir)
    resolve_project(project)
    step = RefactorStep(command, tuple(cmd_args), 1)
    out = COMMANDS[command][1](project, step)
    write_project(out, args.out)
    print(f"applied {command} {' '.join(cmd_args)}")
    return 0


def _cmd_alpha_eq(args) -> int:
    a = parse_project(args.dir_a)
    b = parse_project(args.dir_b)
    if alpha_eq_project(a, b):
        print("alpha-equivalent")
        return 0
    print("NOT alpha-equivalent")
    return FAIL_EXIT


def _cmd_obs_eq(args) -> int:
    a = parse_project(args.dir_a)
    b = parse_project(args.dir_b)
    entries = _entries_arg(args.entries, a)
    obs_a = observe_entries(a, entries)
    obs_b = observe_entries(b, entries)
    same = True
    for entry in entries:
        mark = "==" if obs_a[entry] == obs_b[entry] else "!="
        if obs_a[entry] != obs_b[entry]:
            same = False
        print(f"{entry}: {obs_a[entry]!r} {mark} {obs_b[entry]!r}")
    if same:
        print("observationally equivalent")
        return 0
    print("NOT observationally equivalent")
    return FAIL_EXIT


def _cmd_eval(args) -> int:
    project = parse_project(args.project)
    resolve_project(project)
    entry = args.entry
    if "." in entry:
        module, name = entry.split(".", 1)
    else:
        module, name = None, entry
    if module is None:
        module = "Client" if "Client" in project.modules else None
        if module is None or not isinstance(project.modules[module].decl(name), FunDecl):
            hits = [
                m for m in project.module_names()
                if isinstance(project.modules[m].decl(name), FunDecl)
            ]
            if len(hits) != 1:
                print(f"cannot locate a unique binding {name}", file=sys.stderr)
                return FAIL_EXIT
            module = hits[0]
    ev = Evaluator(project)
    value = ev.deep(ev.eval_expr(Var(name), {}, module))
    print(value.text if isinstance(value, VOutput) else show_value(value))
    return 0


def _cmd_render(args) -> int:
    project = parse_project(args.project)
    write_project(project, args.out)
    print(f"rendered {len(project.modules)} module(s) to {args.out}")
    return 0


def _cmd_corpus(args) -> int:
    if args.action != "extract":
        print("corpus supports: extract <name> --out <dir>", file=sys.stderr)
        return USAGE_EXIT
    try:
        corpus.extract(args.name, args.out)
    except KeyError as exc:
        print(str(exc.args[0]), file=sys.stderr)
        return USAGE_EXIT
    print(f"extracted {args.name} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewshift",
        description="Transform a program between its function-centered and "
        "constructor-centered architecture views.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("apply", help="run a transformation script on a project")
    p.add_argument("script")
    p.add_argument("project")
    p.add_argument("--out", required=True)
    p.add_argument("--checked", action="store_true",
                   help="verify observational equivalence with the origin after every step")
    p.add_argument("--entries", help="comma-separated entry names (default: Client's r*)")
    p.add_argument("--snapshots", help="directory for per-step project snapshots")
    p.set_defaults(fn=_cmd_apply)

    p = sub.add_parser("op", help="apply a single operation: op <command> <args...> <project>")
    p.add_argument("tokens", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_op)

    p = sub.add_parser("alpha-eq", help="project alpha-equivalence verdict")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.set_defaults(fn=_cmd_alpha_eq)

    p = sub.add_parser("obs-eq", help="observational equivalence verdict")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--entries")
    p.set_defaults(fn=_cmd_obs_eq)

    p = sub.add_parser("eval", help="evaluate a zero-argument entry")
    p.add_argument("project")
    p.add_argument("entry")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("render", help="reformat a project canonically")
    p.add_argument("project")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_render)

    p = sub.add_parser("corpus", help="materialize a shipped fixture")
    p.add_argument("action", choices=["extract"])
    p.add_argument("name")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_corpus)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_EXIT if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ParseError, ScriptSyntaxError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (RefactorError, ResolveError, EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAIL_EXIT


if __name__ == "__main__":
    sys.exit(main())
