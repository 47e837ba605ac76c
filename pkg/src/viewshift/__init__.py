"""viewshift: mechanical conversion between a function-centered and a
constructor-centered architecture of the same program, built from
precondition-checked, behavior-preserving refactoring operations and
verified by an evaluator oracle and alpha-equivalence against goldens."""

from .corpus import FIXTURE_NAMES, Fixture, load_fixture
from .evaluator import (
    EvalError, Evaluator, VCon, VInt, VOutput, VStr, VTuple, Value,
    evaluate, observational_eq, observe_entries,
)
from .lang import Expr, ModuleDef, Pattern, Project, TopDecl
from .names import alpha_eq_decl, alpha_eq_project, free_vars, fresh_name, substitute
from .parse import ParseError, parse_decl, parse_expr, parse_module, parse_project
from .refactorings import RefactorError
from .render import render_decl, render_expr, render_module, render_project, write_project
from .resolver import ResolveError, find_application, occurrences_of, resolve_project, unused_imports
from .script import RunLog, Script, ScriptSyntaxError, parse_script, run_script

__version__ = "0.1.0"

__all__ = [
    "EvalError", "Evaluator", "FIXTURE_NAMES", "Fixture", "Expr", "ModuleDef",
    "ParseError", "Pattern", "Project", "RefactorError", "ResolveError",
    "RunLog", "Script", "ScriptSyntaxError", "TopDecl", "VCon", "VInt",
    "VOutput", "VStr", "VTuple", "Value", "alpha_eq_decl", "alpha_eq_project",
    "evaluate", "find_application", "free_vars", "fresh_name", "load_fixture",
    "observational_eq", "observe_entries", "occurrences_of", "parse_decl",
    "parse_expr", "parse_module", "parse_project", "parse_script",
    "render_decl", "render_expr", "render_module", "render_project",
    "resolve_project", "run_script", "substitute", "unused_imports",
    "write_project",
]
