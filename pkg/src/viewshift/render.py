"""Canonical rendering of the object language.

The layout is deterministic: one blank line between top-level declarations,
where-blocks at 4/8 spaces, case branches 4 spaces past their line start,
minimal parentheses, data declarations on one line. Rendering twice is a
fixed point and parse(render(ast)) is the identity.
"""

from __future__ import annotations

import os

from .lang import (
    App, Builtin, Case, ConApp, DataDecl, Expr, FunDecl, INFIX_OPS, Infix,
    IntLit, Let, ModuleDef, PCon, PInt, PTuple, PVar, PWild, Pattern, Project,
    StrLit, TopDecl, Tuple, Var, app_spine,
)

_PREC_ATOM = 11
_PREC_APP = 10
_PREC_BLOCK = 1  # case / let


def _prec(e: Expr) -> int:
    match e:
        case App(_, _):
            return _PREC_APP
        case ConApp(_, args) if args:
            return _PREC_APP
        case Infix(op, _, _):
            return INFIX_OPS[op][0]
        case Case(_, _) | Let(_, _):
            return _PREC_BLOCK
        case _:
            return _PREC_ATOM


def render_expr(e: Expr, ctx: int = 0, indent: int = 0) -> str:
    text = _render(e, indent)
    if _prec(e) < ctx:
        return f"({text})"
    return text


def _render(e: Expr, indent: int) -> str:
    match e:
        case Var(name, qualifier):
            return f"{qualifier}.{name}" if qualifier else name
        case Builtin(name):
            return name
        case IntLit(value):
            return str(value)
        case StrLit(value):
            out = value.replace("\\", "\\\\").replace('"', '\\"')
            out = out.replace("\n", "\\n").replace("\t", "\\t")
            return f'"{out}"'
        case ConApp(name, args):
            if not args:
                return name
            parts = [name] + [render_expr(a, _PREC_ATOM, indent) for a in args]
            return " ".join(parts)
        case App(_, _):
            head, args = app_spine(e)
            parts = [render_expr(head, _PREC_APP, indent)]
            parts += [render_expr(a, _PREC_ATOM, indent) for a in args]
            return " ".join(parts)
        case Infix(op, lhs, rhs):
            prec, assoc = INFIX_OPS[op]
            lctx = prec if assoc == "left" else prec + 1
            rctx = prec + 1 if assoc == "left" else prec
            return f"{render_expr(lhs, lctx, indent)} {op} {render_expr(rhs, rctx, indent)}"
        case Tuple(items):
            return "(" + ", ".join(render_expr(i, 0, indent) for i in items) + ")"
        case Case(scrutinee, branches):
            head = f"case {render_expr(scrutinee, _PREC_BLOCK + 1, indent)} of"
            pad = " " * (indent + 4)
            lines = [head]
            for b in branches:
                body = render_expr(b.body, 0, indent + 4)
                lines.append(f"{pad}{render_pattern(b.pattern)} -> {body}")
            return "\n".join(lines)
        case Let(bindings, body):
            binds = "; ".join(f"{b.name} = {render_expr(b.rhs, 0, indent)}" for b in bindings)
            return f"let {binds} in {render_expr(body, 0, indent)}"
    raise TypeError(f"cannot render {e!r}")


def render_pattern(p: Pattern, atom: bool = False) -> str:
    match p:
        case PVar(name):
            return name
        case PInt(value):
            return str(value)
        case PWild():
            return "_"
        case PTuple(items):
            return "(" + ", ".join(render_pattern(i) for i in items) + ")"
        case PCon(name, args, tupled):
            if not args:
                return name
            if tupled:
                inner = ", ".join(render_pattern(a) for a in args)
                return f"{name} ({inner})"
            parts = [name] + [render_pattern(a, atom=True) for a in args]
            text = " ".join(parts)
            return f"({text})" if atom else text
    raise TypeError(f"cannot render pattern {p!r}")


def _render_equation_pattern(p: Pattern) -> str:
    # Equation-level patterns are atoms: constructor patterns get parentheses.
    match p:
        case PCon(_, args, _) if args:
            return f"({render_pattern(p)})"
        case _:
            return render_pattern(p)


def render_decl(d: TopDecl, with_comment: bool = True) -> str:
    lines: list[str] = []
    if with_comment and d.comment is not None:  # type: ignore[union-attr]
        for c in d.comment.lines:  # type: ignore[union-attr]
            lines.append(f"-- {c}".rstrip())
    if isinstance(d, DataDecl):
        cons = []
        for c in d.constructors:
            if not c.arg_types:
                cons.append(c.name)
            elif c.tupled:
                cons.append(f"{c.name} ({', '.join(c.arg_types)})")
            else:
                cons.append(f"{c.name} {' '.join(c.arg_types)}")
        lines.append(f"data {d.name} = {' | '.join(cons)}")
        return "\n".join(lines)
    assert isinstance(d, FunDecl)
    for eq in d.equations:
        head = d.name
        if eq.patterns:
            head += " " + " ".join(_render_equation_pattern(p) for p in eq.patterns)
        lines.append(f"{head} = {render_expr(eq.rhs, 0, 0)}")
        if eq.locals:
            lines.append("    where")
            for loc in eq.locals:
                sig = loc.name
                if loc.params:
                    sig += " " + " ".join(loc.params)
                lines.append(f"        {sig} = {render_expr(loc.rhs, 0, 8)}")
    return "\n".join(lines)


def render_module(mod: ModuleDef) -> str:
    if mod.exports is None:
        header = f"module {mod.name} where"
    else:
        header = f"module {mod.name} ({', '.join(mod.exports)}) where"
    chunks = [header]
    if mod.imports:
        chunks.append("\n".join(f"import {m}" for m in mod.imports))
    for d in mod.decls:
        chunks.append(render_decl(d))
    return "\n\n".join(chunks) + "\n"


def render_project(project: Project) -> dict[str, str]:
    """Map <ModuleName>.mfn to canonical file text."""
    return {
        f"{name}.mfn": render_module(project.modules[name])
        for name in project.module_names()
    }


def write_project(project: Project, directory: str):
    os.makedirs(directory, exist_ok=True)
    for fname, text in render_project(project).items():
        with open(os.path.join(directory, fname), "w", encoding="utf-8") as fh:
            fh.write(text)
