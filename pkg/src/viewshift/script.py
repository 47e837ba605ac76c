"""Transformation scripts: a flat, line-oriented command sequence.

One command per line, whitespace-separated positional arguments, `#` starts
a comment. Unknown commands and wrong arities are rejected at parse time;
execution is fail-fast and returns the project as of the last successful
step together with a run log.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import refactorings as ops
from .evaluator import EvalError, default_entries, observe_entries
from .lang import Project
from .refactorings import RefactorError
from .render import write_project
from .resolver import ResolveError, resolve_project


class ScriptSyntaxError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass(frozen=True)
class RefactorStep:
    command: str
    args: tuple[str, ...]
    source_line: int

    def __str__(self) -> str:
        return " ".join((self.command,) + self.args)


@dataclass(frozen=True)
class Script:
    name: str
    steps: tuple[RefactorStep, ...]


def _int_arg(step: RefactorStep, index: int) -> int:
    try:
        return int(step.args[index])
    except ValueError:
        raise RefactorError(
            "PreconditionFailed",
            f"argument {index + 1} of {step.command} must be an integer",
        )


# command name -> (arity, handler(project, step) -> project)
COMMANDS: dict[str, tuple[int, Callable[[Project, RefactorStep], Project]]] = {
    "exhibit-function": (4, lambda p, s: ops.exhibit_function(p, *s.args)),
    "new-def-fun-app": (4, lambda p, s: ops.new_def_fun_app(p, s.args[0], _int_arg(s, 1), s.args[2], s.args[3])),
    "generalise": (8, lambda p, s: ops.generalise(p, s.args[0], s.args[1], s.args[2], s.args[3], _int_arg(s, 4), s.args[5], s.args[6], s.args[7])),
    "generalise-ident": (4, lambda p, s: ops.generalise_ident(p, *s.args)),
    "lift-def": (3, lambda p, s: ops.lift_to_top(p, *s.args)),
    "rename-top-level": (3, lambda p, s: ops.rename_top_level(p, *s.args)),
    "move-def": (3, lambda p, s: ops.move_def(p, *s.args)),
    "unfold-instance": (3, lambda p, s: ops.unfold_instance(p, *s.args)),
    "fold-def": (2, lambda p, s: ops.fold_top_level(p, *s.args)),
    "generative-fold": (3, lambda p, s: ops.generative_fold(p, s.args[0], _int_arg(s, 1), s.args[2])),
    "remove-def": (2, lambda p, s: ops.remove_def(p, *s.args)),
    "remove-local-def": (3, lambda p, s: ops.remove_local_def(p, *s.args)),
    "clean-imports": (1, lambda p, s: ops.clean_imports(p, *s.args)),
    "rm-from-exports": (2, lambda p, s: ops.rm_from_exports(p, *s.args)),
    "simplify-case-pattern": (2, lambda p, s: ops.simplify_case_pattern(p, *s.args)),
    "case-to-eq": (2, lambda p, s: ops.case_to_eq(p, s.args[0], s.args[1], 1)),
    "case-to-eq2": (2, lambda p, s: ops.case_to_eq(p, s.args[0], s.args[1], 2)),
    "duplicate-into-comment": (2, lambda p, s: ops.duplicate_into_comment(p, *s.args)),
    "rm-comment-before": (2, lambda p, s: ops.rm_comment_before(p, *s.args)),
    "unify-alpha": (3, lambda p, s: ops.unify_alpha_equivalent(p, *s.args)),
}


def parse_script(text: str, name: str = "script") -> Script:
    steps = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        command, args = tokens[0], tuple(tokens[1:])
        if command not in COMMANDS:
            raise ScriptSyntaxError(f"unknown command {command!r}", lineno)
        arity = COMMANDS[command][0]
        if len(args) != arity:
            raise ScriptSyntaxError(
                f"{command} takes {arity} argument(s), got {len(args)}", lineno
            )
        steps.append(RefactorStep(command, args, lineno))
    return Script(name, tuple(steps))


@dataclass
class StepRecord:
    index: int
    command: str
    args: tuple[str, ...]
    outcome: str  # "applied" | "failed"
    error: Optional[str] = None
    equivalence: Optional[str] = None  # "pass" | "fail" | None
    elapsed: float = 0.0


@dataclass
class RunLog:
    script: str
    records: list[StepRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(
            r.outcome == "applied" and r.equivalence in (None, "pass")
            for r in self.records
        )

    def summary(self) -> str:
        lines = []
        for r in self.records:
            status = r.outcome
            if r.equivalence is not None:
                status += f", equivalence {r.equivalence}"
            head = f"step {r.index:3d}  {r.command} {' '.join(r.args)}"
            lines.append(f"{head:<64} [{status}]")
            if r.error:
                lines.append(f"         {r.error}")
        applied = sum(1 for r in self.records if r.outcome == "applied")
        lines.append(f"{applied}/{len(self.records)} step(s) applied")
        return "\n".join(lines)


def run_script(
    project: Project,
    script: Script,
    checked: bool = False,
    entries: tuple[str, ...] = (),
    snapshot_dir: Optional[str] = None,
) -> tuple[Project, RunLog]:
    """Apply the script's steps in order, fail-fast.

    With checked=True the current project is compared observationally with
    the origin after every step; a disagreement aborts the run. With a
    snapshot directory, every intermediate project is rendered to disk.
    """
    resolve_project(project)
    origin = project
    log = RunLog(script.name)
    if checked and not entries:
        entries = tuple(default_entries(project))
    if snapshot_dir is not None:
        write_project(project, f"{snapshot_dir}/step_000")
    for i, step in enumerate(script.steps, start=1):
        t0 = time.perf_counter()
        record = StepRecord(i, step.command, step.args, "applied")
        try:
            project = COMMANDS[step.command][1](project, step)
        except RefactorError as exc:
            record.outcome = "failed"
            record.error = str(exc)
            record.elapsed = time.perf_counter() - t0
            log.records.append(record)
            return project, log
        if checked:
            try:
                same = observe_entries(origin, entries) == observe_entries(project, entries)
            except (EvalError, ResolveError) as exc:
                same = False
                record.error = str(exc)
            record.equivalence = "pass" if same else "fail"
        record.elapsed = time.perf_counter() - t0
        log.records.append(record)
        if snapshot_dir is not None:
            write_project(project, f"{snapshot_dir}/step_{i:03d}")
        if record.equivalence == "fail":
            return project, log
    return project, log
