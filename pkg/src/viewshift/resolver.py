"""Name resolution across a project.

Scoping rules: pattern variables, where-locals and let/case binders shadow
everything; at the top level a module sees its own declarations and the
exports of its imports as one scope, and a name visible from more than one
origin is ambiguous and must be qualified (this is what forces the
Client.eval / ConstMod.eval qualifications the transformations produce).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .lang import (
    Case, ConApp, ConstructorDef, DataDecl, Expr, FunDecl, ModuleDef, PCon,
    PTuple, Pattern, Project, Var, decl_name, decl_expr_roots,
    walk_expr_scoped,
)


class ResolveError(Exception):
    def __init__(self, kind: str, module: str, name: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.module = module
        self.name = name


def _err(kind: str, module: str, name: str, message: str) -> ResolveError:
    return ResolveError(kind, module, name, message)


@dataclass(frozen=True)
class DefRef:
    module: str
    name: str
    kind: str  # "fun" | "type" | "con"


@dataclass(frozen=True)
class OccRef:
    """Position-free address of an occurrence: declaration plus child path."""
    module: str
    decl: str
    path: tuple[int, ...]


@dataclass
class SymbolTable:
    # per module: unqualified top-scope name -> list of DefRef candidates
    scopes: dict[str, dict[str, list[DefRef]]] = field(default_factory=dict)
    # per module: constructor name -> (DefRef, ConstructorDef)
    constructors: dict[str, dict[str, list[tuple[DefRef, ConstructorDef]]]] = field(default_factory=dict)

    def lookup(self, module: str, name: str) -> list[DefRef]:
        return self.scopes.get(module, {}).get(name, [])


def module_exports(mod: ModuleDef) -> set[str]:
    """Names the module makes visible to importers.

    Without an explicit export list everything is exported; exporting a data
    type name also exports its constructors.
    """
    if mod.exports is None:
        names: set[str] = set()
        for d in mod.decls:
            names.add(decl_name(d))
            if isinstance(d, DataDecl):
                names.update(c.name for c in d.constructors)
        return names
    names = set(mod.exports)
    for d in mod.decls:
        if isinstance(d, DataDecl) and d.name in mod.exports:
            names.update(c.name for c in d.constructors)
    return names


def build_symbol_table(project: Project) -> SymbolTable:
    table = SymbolTable()
    for mname, mod in project.modules.items():
        for imp in mod.imports:
            if imp not in project.modules:
                raise _err("UnresolvedName", mname, imp, f"module {mname} imports unknown module {imp}")
        seen: set[str] = set()
        for d in mod.decls:
            n = decl_name(d)
            if n in seen:
                raise _err("DuplicateDefinition", mname, n, f"{n} defined twice in module {mname}")
            seen.add(n)
            if isinstance(d, DataDecl):
                for c in d.constructors:
                    if c.name in seen:
                        raise _err(
                            "DuplicateDefinition", mname, c.name,
                            f"{c.name} defined twice in module {mname}",
                        )
                    seen.add(c.name)
    for mname, mod in project.modules.items():
        scope: dict[str, list[DefRef]] = {}
        cons: dict[str, list[tuple[DefRef, ConstructorDef]]] = {}

        def add(name: str, ref: DefRef, condef: Optional[ConstructorDef] = None):
            scope.setdefault(name, [])
            if ref not in scope[name]:
                scope[name].append(ref)
            if condef is not None:
                cons.setdefault(name, [])
                if (ref, condef) not in cons[name]:
                    cons[name].append((ref, condef))

        def add_module(src: ModuleDef, visible: Optional[set[str]]):
            for d in src.decls:
                n = decl_name(d)
                if isinstance(d, DataDecl):
                    if visible is None or n in visible:
                        add(n, DefRef(src.name, n, "type"))
                    for c in d.constructors:
                        if visible is None or c.name in visible:
                            add(c.name, DefRef(src.name, c.name, "con"), c)
                else:
                    if visible is None or n in visible:
                        add(n, DefRef(src.name, n, "fun"))

        add_module(mod, None)
        for imp in mod.imports:
            imported = project.modules[imp]
            add_module(imported, module_exports(imported))
        table.scopes[mname] = scope
        table.constructors[mname] = cons
    return table


def resolve_var(
    table: SymbolTable, project: Project, module: str, bound: frozenset[str], v: Var
) -> Optional[DefRef]:
    """Resolve one occurrence; None means locally bound. Raises on failure."""
    if v.qualifier is not None:
        target = project.modules.get(v.qualifier)
        if target is None:
            raise _err("UnresolvedName", module, v.name, f"unknown module {v.qualifier} in {v.qualifier}.{v.name}")
        if v.qualifier != module:
            mod = project.modules[module]
            if v.qualifier not in mod.imports:
                raise _err(
                    "UnresolvedName", module, v.name,
                    f"{module} does not import {v.qualifier} (needed by {v.qualifier}.{v.name})",
                )
            if v.name not in module_exports(target):
                raise _err(
                    "UnresolvedName", module, v.name,
                    f"{v.qualifier} does not export {v.name}",
                )
        elif target.decl(v.name) is None:
            raise _err("UnresolvedName", module, v.name, f"{module} does not define {v.name}")
        return DefRef(v.qualifier, v.name, "fun")
    if v.name in bound:
        return None
    candidates = table.lookup(module, v.name)
    if not candidates:
        raise _err("UnresolvedName", module, v.name, f"cannot resolve {v.name} in module {module}")
    if len(candidates) > 1:
        origins = ", ".join(c.module for c in candidates)
        raise _err(
            "AmbiguousName", module, v.name,
            f"{v.name} is ambiguous in module {module} (from {origins})",
        )
    return candidates[0]


def _resolve_constructor(
    table: SymbolTable, module: str, name: str
) -> tuple[DefRef, ConstructorDef]:
    candidates = table.constructors.get(module, {}).get(name, [])
    if not candidates:
        raise _err("UnresolvedName", module, name, f"unknown constructor {name} in module {module}")
    if len(candidates) > 1:
        raise _err("AmbiguousName", module, name, f"constructor {name} is ambiguous in module {module}")
    return candidates[0]


def _check_pattern(table: SymbolTable, module: str, p: Pattern):
    match p:
        case PCon(name, args, tupled):
            _, condef = _resolve_constructor(table, module, name)
            if condef.tupled != tupled:
                shape = "tupled" if condef.tupled else "curried"
                raise _err(
                    "UnresolvedName", module, name,
                    f"constructor {name} takes {shape} arguments",
                )
            expected = len(condef.arg_types)
            if len(args) != expected:
                raise _err(
                    "UnresolvedName", module, name,
                    f"constructor {name} expects {expected} argument pattern(s), got {len(args)}",
                )
            for sub in args:
                _check_pattern(table, module, sub)
        case PTuple(items):
            for sub in items:
                _check_pattern(table, module, sub)
        case _:
            pass


def _check_expr(table: SymbolTable, project: Project, module: str, root: Expr, bound: frozenset[str]):
    for _, e, scope in walk_expr_scoped(root, bound):
        match e:
            case Var(_, _):
                resolve_var(table, project, module, scope, e)
            case ConApp(name, args):
                _, condef = _resolve_constructor(table, module, name)
                if len(args) != condef.value_arity:
                    raise _err(
                        "UnresolvedName", module, name,
                        f"constructor {name} must be applied to {condef.value_arity} argument(s)",
                    )
            case Case(_, branches):
                for b in branches:
                    _check_pattern(table, module, b.pattern)
            case _:
                pass


def resolve_project(project: Project) -> SymbolTable:
    """Validate every occurrence in the project; raises ResolveError."""
    table = build_symbol_table(project)
    for mname, mod in project.modules.items():
        for d in mod.decls:
            if isinstance(d, DataDecl):
                continue
            assert isinstance(d, FunDecl)
            arity = d.arity
            for eq in d.equations:
                if len(eq.patterns) != arity:
                    raise _err(
                        "DuplicateDefinition", mname, d.name,
                        f"equations of {d.name} have different arities",
                    )
                for p in eq.patterns:
                    _check_pattern(table, mname, p)
            for _, _, root, bound in decl_expr_roots(d):
                _check_expr(table, project, mname, root, bound)
    return table


# --- occurrence queries ---

def iter_var_occurrences(
    project: Project, module: str
) -> Iterator[tuple[str, tuple[int, ...], Var, frozenset[str]]]:
    """Yield (decl name, path, var, bound names) in document order."""
    mod = project.modules[module]
    for d in mod.decls:
        for ei, slot, root, bound in decl_expr_roots(d):
            for sub, e, scope in walk_expr_scoped(root, bound):
                if isinstance(e, Var):
                    yield decl_name(d), (ei, slot) + sub, e, scope


def occurrences_of(project: Project, module: str, name: str) -> list[OccRef]:
    """Every occurrence referring to the top-level definition, recursive ones
    included; document order per module, modules in name order."""
    table = build_symbol_table(project)
    mod = project.modules.get(module)
    if mod is None or mod.decl(name) is None:
        raise _err("UnresolvedName", module, name, f"no top-level {name} in module {module}")
    target = (module, name)
    out: list[OccRef] = []
    for mname in project.module_names():
        for dname, path, v, scope in iter_var_occurrences(project, mname):
            if v.name != name:
                continue
            ref = resolve_var(table, project, mname, scope, v)
            if ref is not None and (ref.module, ref.name) == target:
                out.append(OccRef(mname, dname, path))
    return out


def find_application(project: Project, module: str, fn: str, arg_count: int) -> OccRef:
    """First application (document order) of fn to exactly arg_count arguments."""
    from .lang import App, app_spine

    if arg_count < 1:
        raise _err("NoSuchApplication", module, fn, "an application has at least one argument")
    table = build_symbol_table(project)
    mod = project.modules.get(module)
    if mod is None:
        raise _err("UnresolvedName", module, fn, f"no module {module}")
    fn_target = None
    refs = table.lookup(module, fn)
    if len(refs) == 1:
        fn_target = (refs[0].module, refs[0].name)
    for d in mod.decls:
        for ei, slot, root, bound in decl_expr_roots(d):
            nodes: dict[tuple[int, ...], Expr] = {}
            for sub, e, scope in walk_expr_scoped(root, bound):
                nodes[sub] = e
                if not isinstance(e, App):
                    continue
                # Only maximal application spines count: skip the fn child
                # of an enclosing application.
                if sub and sub[-1] == 0 and isinstance(nodes.get(sub[:-1]), App):
                    continue
                head, args = app_spine(e)
                if len(args) != arg_count or not isinstance(head, Var) or head.name != fn:
                    continue
                try:
                    ref = resolve_var(table, project, module, scope, head)
                except ResolveError:
                    continue
                if ref is None:
                    continue  # a local binding, not the queried definition
                if fn_target is not None and (ref.module, ref.name) != fn_target:
                    continue
                return OccRef(module, decl_name(d), (ei, slot) + sub)
    raise _err(
        "NoSuchApplication", module, fn,
        f"no application of {fn} to {arg_count} argument(s) in module {module}",
    )


def unused_imports(project: Project, module: str) -> list[str]:
    """Imports from which no identifier (qualified or not) is referenced."""
    table = build_symbol_table(project)
    mod = project.modules[module]
    used: set[str] = set()
    for _, _, v, scope in iter_var_occurrences(project, module):
        ref = resolve_var(table, project, module, scope, v)
        if ref is not None and ref.module != module:
            used.add(ref.module)
    # constructors and type names used in expressions, patterns, data decls
    def use_con(name: str):
        cands = table.constructors.get(module, {}).get(name, [])
        if len(cands) == 1 and cands[0][0].module != module:
            used.add(cands[0][0].module)

    def scan_pattern(p: Pattern):
        match p:
            case PCon(name, args, _):
                use_con(name)
                for sub in args:
                    scan_pattern(sub)
            case PTuple(items):
                for sub in items:
                    scan_pattern(sub)
            case _:
                pass

    for d in mod.decls:
        if isinstance(d, DataDecl):
            for c in d.constructors:
                for tname in c.arg_types:
                    refs = [r for r in table.lookup(module, tname) if r.kind == "type"]
                    if len(refs) == 1 and refs[0].module != module:
                        used.add(refs[0].module)
            continue
        assert isinstance(d, FunDecl)
        for eq in d.equations:
            for p in eq.patterns:
                scan_pattern(p)
        for _, _, root, bound in decl_expr_roots(d):
            for _, e, _ in walk_expr_scoped(root, bound):
                match e:
                    case ConApp(name, _):
                        use_con(name)
                    case Case(_, branches):
                        for b in branches:
                            scan_pattern(b.pattern)
                    case _:
                        pass
    return [imp for imp in mod.imports if imp not in used]


def deref(project: Project, ref: OccRef) -> Expr:
    """Fetch the expression node an OccRef addresses in the current project."""
    from .lang import decl_expr_at

    mod = project.modules[ref.module]
    d = mod.decl(ref.decl)
    if d is None:
        raise _err("UnresolvedName", ref.module, ref.decl, f"no declaration {ref.decl}")
    return decl_expr_at(d, ref.path)
