"""The refactoring operation catalog.

Every operation is a pure Project -> Project function. Preconditions are
checked up front and raise RefactorError without touching the input; after a
successful rewrite the project is re-resolved and its qualifiers minimized,
so each operation's output is a well-formed canonical project.

Operations address their targets by names (function, constructor, module),
never by source positions.
"""

from __future__ import annotations

from dataclasses import replace

from .lang import (
    App, Case, CaseBranch, CommentBlock, DataDecl, Equation, Expr, FunDecl,
    Let, LetBinding, LocalDef, ModuleDef, PCon, PTuple, PVar, Pattern,
    Project, TopDecl, Tuple, Var, app_spine, decl_expr_at, decl_expr_roots,
    decl_name, equation_bound_names, make_app, pattern_vars,
    replace_decl_expr_at, walk_expr_scoped, with_module,
)
from .names import (
    alpha_eq_decl, all_names, decl_free_vars, free_vars, fresh_name,
    substitute, substitute_many,
)
from .parse import ParseError, parse_decl
from .render import render_decl
from .resolver import (
    OccRef, ResolveError, build_symbol_table, find_application,
    iter_var_occurrences, module_exports, occurrences_of, resolve_var,
    resolve_project, unused_imports,
)
from .rewrite import (
    InstanceMatcher, fold_instances_in_expr, minimize_qualifiers,
    requalify_name, retarget_name, rewrite_vars,
)

KINDS = ("NameClash", "NotFound", "NotApplicable", "StillUsed", "PreconditionFailed")


class RefactorError(Exception):
    """Raised when a precondition fails; the input project is left untouched."""

    def __init__(self, kind: str, message: str):
        assert kind in KINDS
        super().__init__(f"{kind}: {message}")
        self.kind = kind
        self.message = message


def _not_found(message: str) -> RefactorError:
    return RefactorError("NotFound", message)


def _module(project: Project, m: str) -> ModuleDef:
    mod = project.modules.get(m)
    if mod is None:
        raise _not_found(f"no module named {m}")
    return mod


def _fun_decl(mod: ModuleDef, f: str) -> tuple[int, FunDecl]:
    for i, d in enumerate(mod.decls):
        if decl_name(d) == f:
            if not isinstance(d, FunDecl):
                raise RefactorError("NotApplicable", f"{f} in {mod.name} is a data declaration")
            return i, d
    raise _not_found(f"no top-level {f} in module {mod.name}")


def with_decl_at(mod: ModuleDef, index: int, d: TopDecl) -> ModuleDef:
    decls = list(mod.decls)
    decls[index] = d
    return replace(mod, decls=tuple(decls))


def _top_scope(project: Project, m: str) -> set[str]:
    """Names visible at the top level of m: own declarations plus imports."""
    mod = _module(project, m)
    names: set[str] = set()
    for d in mod.decls:
        names.add(decl_name(d))
        if isinstance(d, DataDecl):
            names.update(c.name for c in d.constructors)
    for imp in mod.imports:
        imported = project.modules.get(imp)
        if imported is not None:
            names |= module_exports(imported)
    return names


def _decl_all_names(d: FunDecl) -> set[str]:
    """Every identifier textually present in the declaration."""
    out: set[str] = {d.name}
    for eq in d.equations:
        for p in eq.patterns:
            out.update(pattern_vars(p))
        out |= all_names(eq.rhs)
        for loc in eq.locals:
            out.add(loc.name)
            out.update(loc.params)
            out |= all_names(loc.rhs)
    return out


def _finish(project: Project) -> Project:
    """Post-operation pipeline: validate resolution, canonicalize qualifiers."""
    resolve_project(project)
    out = minimize_qualifiers(project)
    resolve_project(out)
    return out


def _equation_scope_names(mod_scope: set[str], eq: Equation) -> set[str]:
    return mod_scope | equation_bound_names(eq)


def _con_equation(d: FunDecl, c: str) -> tuple[int, Equation]:
    """The equation whose first constructor pattern is c."""
    for i, eq in enumerate(d.equations):
        for p in eq.patterns:
            if isinstance(p, PCon):
                if p.name == c:
                    return i, eq
                break
    raise _not_found(f"{d.name} has no equation matching constructor {c}")


# ---------------------------------------------------------------------------
# introduce new definitions

def exhibit_function(project: Project, f: str, c: str, n: str, m: str) -> Project:
    """Turn the RHS of f's equation for constructor c into a where-local n."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    ei, eq = _con_equation(d, c)
    if n in _equation_scope_names(_top_scope(project, m), eq):
        raise RefactorError("NameClash", f"{n} is already bound in the scope of {f}'s equation")
    new_eq = replace(eq, rhs=Var(n), locals=eq.locals + (LocalDef(n, (), eq.rhs),))
    eqs = list(d.equations)
    eqs[ei] = new_eq
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=tuple(eqs))))
    return _finish(project)


def new_def_fun_app(project: Project, f: str, arg_count: int, fp: str, m: str) -> Project:
    """Name the first application of f to arg_count arguments as a where-local fp."""
    if arg_count < 1:
        raise RefactorError("NotApplicable", "an application has at least one argument")
    mod = _module(project, m)
    try:
        occ = find_application(project, m, f, arg_count)
    except ResolveError as exc:
        raise _not_found(str(exc))
    di, d = _fun_decl(mod, occ.decl)
    ei = occ.path[0]
    eq = d.equations[ei]
    if fp in _equation_scope_names(_top_scope(project, m), eq):
        raise RefactorError("NameClash", f"{fp} is already bound around the application of {f}")
    app_expr = decl_expr_at(d, occ.path)
    d2 = replace_decl_expr_at(d, occ.path, Var(fp))
    eq2 = d2.equations[ei]
    eq2 = replace(eq2, locals=eq2.locals + (LocalDef(fp, (), app_expr),))
    eqs = list(d2.equations)
    eqs[ei] = eq2
    project = with_module(project, with_decl_at(mod, di, replace(d2, equations=tuple(eqs))))
    return _finish(project)


# ---------------------------------------------------------------------------
# generalisation

def _replace_exact(root: Expr, target: Expr, replacement: Expr, guard: set[str]) -> tuple[Expr, int]:
    """Replace occurrences of target (structurally) where none of the guard
    names is shadowed by an enclosing binder; returns (expr, count)."""
    count = 0

    def go(e: Expr, bound: frozenset[str]) -> Expr:
        nonlocal count
        if e == target and not (guard & bound):
            count += 1
            return replacement
        match e:
            case Case(scrutinee, branches):
                return Case(
                    go(scrutinee, bound),
                    tuple(
                        CaseBranch(b.pattern, go(b.body, bound | set(pattern_vars(b.pattern))))
                        for b in branches
                    ),
                )
            case Let(bindings, body):
                inner = bound | {b.name for b in bindings}
                return Let(
                    tuple(LetBinding(b.name, go(b.rhs, inner)) for b in bindings),
                    go(body, inner),
                )
            case _:
                from .lang import expr_children, with_expr_children
                kids = expr_children(e)
                if not kids:
                    return e
                return with_expr_children(e, tuple(go(k, bound) for k in kids))

    return go(root, frozenset()), count


def generalise(
    project: Project,
    f: str,
    c: str,
    fp: str,
    m: str,
    arg_index: int,
    x: str,
    curry_flag: str,
    mode: str,
) -> Project:
    """Abstract, inside local fp of f's equation for c, either the n-th
    constructor-pattern variable (OtherType) or the application of f to it
    (RecType) into a new leading parameter x, passing the abstracted
    expression at fp's use sites."""
    if mode not in ("OtherType", "RecType"):
        raise RefactorError("PreconditionFailed", f"unknown generalise mode {mode}")
    if curry_flag not in ("curried", "tupled"):
        raise RefactorError("PreconditionFailed", f"unknown curry flag {curry_flag}")
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    ei, eq = _con_equation(d, c)
    li = next((i for i, loc in enumerate(eq.locals) if loc.name == fp), None)
    if li is None:
        raise _not_found(f"{f}'s equation for {c} has no local {fp}")
    loc = eq.locals[li]
    pat = next(p for p in eq.patterns if isinstance(p, PCon) and p.name == c)
    # curry_flag only governs argument counting; sub-patterns are stored
    # uniformly, so both flags count the same way here.
    if not (1 <= arg_index <= len(pat.args)):
        raise _not_found(f"constructor {c} has no argument {arg_index}")
    sub = pat.args[arg_index - 1]
    if not isinstance(sub, PVar):
        raise _not_found(f"argument {arg_index} of {c} is not a plain variable")
    v = sub.name
    target: Expr = Var(v) if mode == "OtherType" else App(Var(f), Var(v))
    guard = {v} if mode == "OtherType" else {v, f}

    new_body, found = _replace_exact(loc.rhs, target, Var(x), guard)
    if not found:
        what = v if mode == "OtherType" else f"{f} {v}"
        raise RefactorError("NotApplicable", f"{what} does not occur in the body of {fp}")
    if x in all_names(loc.rhs) or x in loc.params or x in equation_bound_names(eq):
        raise RefactorError("NameClash", f"{x} is already in scope in {fp}")

    new_local = LocalDef(fp, (x,) + loc.params, new_body)
    locs = list(eq.locals)
    locs[li] = new_local

    # Every use of fp inside the equation now passes the target first.
    def add_arg(var: Var, bound: frozenset[str]) -> Expr:
        if var.name == fp and var.qualifier is None and fp not in bound:
            return App(var, target)
        return var

    new_rhs = rewrite_vars(eq.rhs, frozenset(), add_arg)
    new_locals = []
    for i, other in enumerate(locs):
        if i == li:
            new_locals.append(other)
        else:
            new_locals.append(replace(other, rhs=rewrite_vars(other.rhs, frozenset(), add_arg)))
    new_eq = replace(eq, rhs=new_rhs, locals=tuple(new_locals))
    eqs = list(d.equations)
    eqs[ei] = new_eq
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=tuple(eqs))))
    return _finish(project)


def _find_enclosing_local(mod: ModuleDef, name: str):
    """Locate a unique where-local called name among the module's declarations."""
    hits = []
    for di, d in enumerate(mod.decls):
        if not isinstance(d, FunDecl):
            continue
        for ei, eq in enumerate(d.equations):
            for li, loc in enumerate(eq.locals):
                if loc.name == name:
                    hits.append((di, ei, li))
    if not hits:
        return None
    if len(hits) > 1:
        raise _not_found(f"{name} names more than one local definition in {mod.name}")
    return hits[0]


def generalise_ident(project: Project, f: str, m: str, v: str, x: str) -> Project:
    """Abstract the free identifier v of f's body into a new first parameter x.

    Recursive call sites pass x; call sites in m pass v directly; call sites
    in other modules receive a fresh `<f>_gen*` top-level binding `= v` added
    to m (at most one per call), matching the observed eval_gen behavior.
    f may also name a where-local, in which case its use sites within the
    enclosing declaration pass v directly.
    """
    mod = _module(project, m)
    top = mod.decl(f)
    if isinstance(top, FunDecl):
        return _generalise_ident_top(project, f, m, v, x)
    if top is not None:
        raise RefactorError("NotApplicable", f"{f} in {m} is a data declaration")
    hit = _find_enclosing_local(mod, f)
    if hit is None:
        raise _not_found(f"no definition of {f} in module {m}")
    return _generalise_ident_local(project, m, v, x, *hit)


def _generalise_ident_top(project: Project, f: str, m: str, v: str, x: str) -> Project:
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if v not in decl_free_vars(d):
        raise _not_found(f"{v} is not free in the body of {f}")
    if v not in _top_scope(project, m):
        raise _not_found(f"{v} does not resolve at the top level of {m}")
    if x in _decl_all_names(d) or x == v:
        raise RefactorError("NameClash", f"{x} is already used inside {f}")

    # f's own equations: occurrences of v become x, recursive calls gain x,
    # and x heads every parameter list.
    def fix_own(var: Var, bound: frozenset[str]) -> Expr:
        if var.qualifier is None and var.name == v and v not in bound:
            return Var(x)
        if var.name == f and f not in bound and var.qualifier in (None, m):
            return App(Var(f, var.qualifier), Var(x))
        return var

    new_eqs = []
    for eq in d.equations:
        new_locals = tuple(
            replace(loc, rhs=rewrite_vars(loc.rhs, frozenset(loc.params), fix_own))
            for loc in eq.locals
        )
        new_eqs.append(
            Equation((PVar(x),) + eq.patterns, rewrite_vars(eq.rhs, frozenset(), fix_own), new_locals)
        )
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=tuple(new_eqs))))

    # External call sites, grouped by module.
    table = build_symbol_table(project)
    external: list[OccRef] = []
    for mname in project.module_names():
        for dname, path, var, bound in iter_var_occurrences(project, mname):
            if mname == m and dname == f:
                continue
            if var.name != f:
                continue
            ref = resolve_var(table, project, mname, bound, var)
            if ref is not None and (ref.module, ref.name) == (m, f):
                external.append(OccRef(mname, dname, path))

    aux_name = None
    if any(o.module != m for o in external):
        avoid = set()
        for modx in project.modules.values():
            for dd in modx.decls:
                avoid.add(decl_name(dd))
                if isinstance(dd, FunDecl):
                    avoid |= _decl_all_names(dd)
                else:
                    avoid.update(c.name for c in dd.constructors)
        aux_name = fresh_name(f, avoid | {x, v})
        mod2 = project.modules[m]
        aux = FunDecl(aux_name, (Equation((), Var(v)),))
        exports = mod2.exports
        if exports is not None:
            exports = exports + (aux_name,)
        project = with_module(project, replace(mod2, decls=mod2.decls + (aux,), exports=exports))

    for occ in external:
        modx = project.modules[occ.module]
        dx_i, dx = _fun_decl(modx, occ.decl)
        old_var = decl_expr_at(dx, occ.path)
        assert isinstance(old_var, Var)
        arg = Var(v) if occ.module == m else Var(aux_name)
        new_dx = replace_decl_expr_at(dx, occ.path, App(old_var, arg))
        project = with_module(project, with_decl_at(modx, dx_i, new_dx))
    return _finish(project)


def _generalise_ident_local(
    project: Project, m: str, v: str, x: str, di: int, ei: int, li: int
) -> Project:
    mod = _module(project, m)
    d = mod.decls[di]
    assert isinstance(d, FunDecl)
    eq = d.equations[ei]
    loc = eq.locals[li]
    f = loc.name
    if v not in free_vars(loc.rhs) - set(loc.params):
        raise _not_found(f"{v} is not free in the body of {f}")
    if x in _decl_all_names(d) or x == v:
        raise RefactorError("NameClash", f"{x} is already used inside {d.name}")

    new_body = substitute(loc.rhs, v, Var(x))
    locs = list(eq.locals)
    locs[li] = LocalDef(f, (x,) + loc.params, new_body)

    def fix_use(var: Var, bound: frozenset[str]) -> Expr:
        if var.qualifier is None and var.name == f and f not in bound:
            return App(var, Var(v))
        return var

    new_rhs = rewrite_vars(eq.rhs, frozenset(), fix_use)
    new_locals = []
    for i, other in enumerate(locs):
        if i == li:
            new_locals.append(other)
            continue
        new_locals.append(replace(other, rhs=rewrite_vars(other.rhs, frozenset(), fix_use)))
    new_eq = replace(eq, rhs=new_rhs, locals=tuple(new_locals))
    eqs = list(d.equations)
    eqs[ei] = new_eq
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=tuple(eqs))))
    return _finish(project)


# ---------------------------------------------------------------------------
# lambda lifting

def lift_to_top(project: Project, f: str, d_name: str, m: str) -> Project:
    """Promote the where-local d of f to a top-level declaration of m,
    prepending any enclosing-equation variables it captures as parameters."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    hits = [
        (ei, li)
        for ei, eq in enumerate(d.equations)
        for li, loc in enumerate(eq.locals)
        if loc.name == d_name
    ]
    if not hits:
        raise _not_found(f"{f} has no local definition {d_name}")
    if len(hits) > 1:
        raise _not_found(f"{d_name} is defined in more than one equation of {f}")
    ei, li = hits[0]
    eq = d.equations[ei]
    loc = eq.locals[li]
    if d_name in _top_scope(project, m):
        raise RefactorError("NameClash", f"{d_name} is already bound at the top level of {m}")

    sibling_names = {other.name for other in eq.locals} - {d_name}
    frees = free_vars(loc.rhs) - set(loc.params) - {d_name}
    if frees & sibling_names:
        raise RefactorError(
            "NotApplicable",
            f"{d_name} references sibling locals {sorted(frees & sibling_names)}",
        )
    pattern_order = _pattern_var_order(eq.patterns)
    captured = [v for v in pattern_order if v in frees]

    new_params = tuple(captured) + loc.params
    lifted = FunDecl(d_name, (Equation(tuple(PVar(p) for p in new_params), loc.rhs),))

    remaining = tuple(l for i, l in enumerate(eq.locals) if i != li)

    if captured:
        def fix_use(var: Var, bound: frozenset[str]) -> Expr:
            if var.qualifier is None and var.name == d_name and d_name not in bound:
                return make_app(var, [Var(cv) for cv in captured])
            return var

        new_rhs = rewrite_vars(eq.rhs, frozenset(), fix_use)
        remaining = tuple(
            replace(l, rhs=rewrite_vars(l.rhs, frozenset(), fix_use)) for l in remaining
        )
    else:
        new_rhs = eq.rhs

    new_eq = replace(eq, rhs=new_rhs, locals=remaining)
    eqs = list(d.equations)
    eqs[ei] = new_eq
    decls = list(mod.decls)
    decls[di] = replace(d, equations=tuple(eqs))
    decls.insert(di + 1, lifted)
    project = with_module(project, replace(mod, decls=tuple(decls)))
    return _finish(project)


def _pattern_var_order(patterns: tuple[Pattern, ...]) -> list[str]:
    out: list[str] = []
    for p in patterns:
        out.extend(pattern_vars(p))
    return out


# ---------------------------------------------------------------------------
# rename / move

def rename_top_level(project: Project, f: str, m: str, fp: str) -> Project:
    """Rename a top-level definition, updating all occurrences and exports;
    occurrences that would become ambiguous are qualified."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if f == fp:
        return project
    if fp in _top_scope(project, m):
        raise RefactorError("NameClash", f"{fp} is already bound in the scope of module {m}")
    project = requalify_name(project, fp)
    project = retarget_name(project, (m, f), (m, fp))
    mod = project.modules[m]
    di, d = _fun_decl(mod, f)
    decls = list(mod.decls)
    decls[di] = replace(d, name=fp)
    exports = mod.exports
    if exports is not None:
        exports = tuple(fp if n == f else n for n in exports)
    project = with_module(project, replace(mod, decls=tuple(decls), exports=exports))
    return _finish(project)


def _import_graph(project: Project) -> dict[str, set[str]]:
    return {m: set(mod.imports) for m, mod in project.modules.items()}


def _has_cycle(graph: dict[str, set[str]]) -> bool:
    state: dict[str, int] = {}

    def visit(node: str) -> bool:
        if state.get(node) == 1:
            return True
        if state.get(node) == 2:
            return False
        state[node] = 1
        for nxt in graph.get(node, ()):
            if visit(nxt):
                return True
        state[node] = 2
        return False

    return any(visit(n) for n in list(graph))


def _pattern_cons(p: Pattern) -> list[str]:
    match p:
        case PCon(name, args, _):
            out = [name]
            for sub in args:
                out.extend(_pattern_cons(sub))
            return out
        case PTuple(items):
            out = []
            for sub in items:
                out.extend(_pattern_cons(sub))
            return out
        case _:
            return []


def move_def(project: Project, f: str, m: str, mp: str) -> Project:
    """Move the top-level definition of f from m to mp (created if absent);
    importers are rewired and newly ambiguous references are qualified."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if m == mp:
        raise RefactorError("NotApplicable", f"{f} is already in {m}")
    dest = project.modules.get(mp)
    if dest is not None and dest.decl(f) is not None:
        raise RefactorError("NameClash", f"{mp} already defines {f}")
    created_dest = dest is None
    if created_dest:
        project = with_module(project, ModuleDef(mp, None, (), ()))

    table = build_symbol_table(project)

    # Modules the moved body depends on.
    needed: set[str] = set()

    def need_con(name: str):
        cands = table.constructors.get(m, {}).get(name, [])
        if len(cands) == 1:
            needed.add(cands[0][0].module)

    for eq in d.equations:
        for p in eq.patterns:
            for pc in _pattern_cons(p):
                need_con(pc)
        base = frozenset(equation_bound_names(eq))
        roots = [(eq.rhs, base)] + [
            (loc.rhs, base | frozenset(loc.params)) for loc in eq.locals
        ]
        for root, bound in roots:
            for _, e, scope in walk_expr_scoped(root, bound):
                if isinstance(e, Var):
                    if e.qualifier is None and (e.name in scope or e.name == f):
                        continue
                    ref = resolve_var(table, project, m, scope, e)
                    if ref is not None and (ref.module, ref.name) != (m, f):
                        needed.add(ref.module)
                elif isinstance(e, Case):
                    for b in e.branches:
                        for pc in _pattern_cons(b.pattern):
                            need_con(pc)
                else:
                    from .lang import ConApp
                    if isinstance(e, ConApp):
                        need_con(e.name)
    needed.discard(mp)

    # Modules that reference f.
    referencing: set[str] = set()
    for mname in project.module_names():
        for dname, path, var, bound in iter_var_occurrences(project, mname):
            if mname == m and dname == f:
                continue
            if var.name != f:
                continue
            ref = resolve_var(table, project, mname, bound, var)
            if ref is not None and (ref.module, ref.name) == (m, f):
                referencing.add(mname)
    referencing.discard(mp)

    graph = _import_graph(project)
    graph[mp] = set(graph.get(mp, set())) | needed
    for r in referencing:
        graph[r] = graph[r] | {mp}
    if _has_cycle(graph):
        raise RefactorError(
            "PreconditionFailed", f"moving {f} from {m} to {mp} would create an import cycle"
        )

    project = requalify_name(project, f)

    mod = project.modules[m]
    di, d = _fun_decl(mod, f)
    decls = tuple(dd for i, dd in enumerate(mod.decls) if i != di)
    exports = mod.exports
    if exports is not None:
        exports = tuple(n for n in exports if n != f)
    project = with_module(project, replace(mod, decls=decls, exports=exports))

    dest = project.modules[mp]
    new_imports = dest.imports + tuple(sorted(needed - set(dest.imports)))
    dest_exports = dest.exports
    if dest_exports is not None and referencing and f not in dest_exports:
        dest_exports = dest_exports + (f,)
    project = with_module(
        project,
        replace(dest, imports=new_imports, decls=dest.decls + (d,), exports=dest_exports),
    )

    for r in sorted(referencing):
        rm = project.modules[r]
        if mp not in rm.imports:
            project = with_module(project, replace(rm, imports=rm.imports + (mp,)))

    project = retarget_name(project, (m, f), (mp, f))
    return _finish(project)


# ---------------------------------------------------------------------------
# unfold / fold

def _qualified_equations(
    project: Project, def_module: str, equations: tuple[Equation, ...], site_module: str
) -> tuple[tuple[Equation, ...], set[str]]:
    """Qualify the free references of a definition's equations by their home
    modules so the bodies stay correct when inlined elsewhere. Returns the
    rewritten equations and the set of modules the site must import."""
    if def_module == site_module:
        return equations, set()
    table = build_symbol_table(project)
    needed: set[str] = set()

    def qualify(var: Var, bound: frozenset[str]) -> Expr:
        if var.qualifier is not None:
            needed.add(var.qualifier)
            return var
        if var.name in bound:
            return var
        refs = table.lookup(def_module, var.name)
        if len(refs) == 1:
            needed.add(refs[0].module)
            return Var(var.name, qualifier=refs[0].module)
        return var

    new_eqs = []
    for eq in equations:
        base = frozenset(_pattern_var_order(eq.patterns)) | {l.name for l in eq.locals}
        new_locals = tuple(
            replace(loc, rhs=rewrite_vars(loc.rhs, base | frozenset(loc.params), qualify))
            for loc in eq.locals
        )
        new_eqs.append(replace(eq, rhs=rewrite_vars(eq.rhs, base, qualify), locals=new_locals))
    return tuple(new_eqs), {n for n in needed if n != site_module}


def _case_of_equations(equations: tuple[Equation, ...], args: list[Expr]) -> Expr:
    arity = len(equations[0].patterns)
    scrutinee = args[0] if arity == 1 else Tuple(tuple(args))
    branches = []
    for eq in equations:
        pattern = eq.patterns[0] if arity == 1 else PTuple(eq.patterns)
        branches.append(CaseBranch(pattern, eq.rhs))
    return Case(scrutinee, tuple(branches))


def _inline_definition(
    project: Project,
    m: str,
    def_module: str,
    equations: tuple[Equation, ...],
    args: list[Expr],
    what: str,
) -> tuple[Project, Expr]:
    """Build the unfolded expression for a definition applied to args."""
    if any(eq.locals for eq in equations):
        raise RefactorError("NotApplicable", f"{what} has where-locals and cannot be unfolded")
    arity = len(equations[0].patterns)
    if len(args) < arity:
        raise RefactorError(
            "NotApplicable",
            f"{what} takes {arity} argument(s) but is applied to {len(args)} here",
        )
    equations, needed = _qualified_equations(project, def_module, equations, m)
    for imp in sorted(needed):
        modx = project.modules[m]
        if imp != m and imp not in modx.imports:
            project = with_module(project, replace(modx, imports=modx.imports + (imp,)))
    used, rest = args[:arity], args[arity:]
    if len(equations) == 1 and all(isinstance(p, PVar) for p in equations[0].patterns):
        eq = equations[0]
        mapping = {p.name: a for p, a in zip(eq.patterns, used)}  # type: ignore[union-attr]
        body = substitute_many(eq.rhs, mapping) if mapping else eq.rhs
        new_expr: Expr = make_app(body, rest) if rest else body
    else:
        new_expr = _case_of_equations(equations, used)
        if rest:
            new_expr = make_app(new_expr, rest)
    return project, new_expr


def unfold_instance(project: Project, d_token: str, f: str, m: str) -> Project:
    """Replace the first occurrence of d in f's body by its definition,
    beta-reducing when possible; a multi-equation definition unfolds to a
    case over the tuple of its arguments."""
    mod = _module(project, m)
    di, fd = _fun_decl(mod, f)

    qualifier = None
    name = d_token
    if "." in d_token:
        qualifier, name = d_token.split(".", 1)

    # A where-local of f takes priority for unqualified names.
    local_hit = None
    if qualifier is None:
        for ei, eq in enumerate(fd.equations):
            for li, loc in enumerate(eq.locals):
                if loc.name == name:
                    local_hit = (ei, li)
    table = build_symbol_table(project)
    if local_hit is None:
        try:
            ref = resolve_var(table, project, m, frozenset(), Var(name, qualifier))
        except ResolveError as exc:
            raise _not_found(str(exc))
        assert ref is not None
        td = project.modules[ref.module].decl(ref.name)
        if not isinstance(td, FunDecl):
            raise _not_found(f"{d_token} does not name a function definition")
        def_module, equations = ref.module, td.equations
        target = (ref.module, ref.name)
    else:
        ei0, li0 = local_hit
        loc = fd.equations[ei0].locals[li0]
        def_module = m
        equations = (Equation(tuple(PVar(p) for p in loc.params), loc.rhs),)
        target = None

    # First occurrence in document order, skipping the local's own body.
    occ_path = None
    for ei, slot, root, bound in decl_expr_roots(fd):
        if occ_path is not None:
            break
        if local_hit is not None and (ei, slot) == (local_hit[0], local_hit[1] + 1):
            continue
        for sub, e, scope in walk_expr_scoped(root, bound):
            if not (isinstance(e, Var) and e.name == name):
                continue
            if qualifier is not None:
                if e.qualifier != qualifier:
                    continue
            elif local_hit is not None:
                if e.qualifier is not None or ei != local_hit[0]:
                    continue
            else:
                ref2 = resolve_var(table, project, m, scope, e)
                if ref2 is None or (ref2.module, ref2.name) != target:
                    continue
            occ_path = (ei, slot) + sub
            break
    if occ_path is None:
        raise _not_found(f"no occurrence of {d_token} in the body of {f}")

    # Expand to the maximal application spine around the occurrence.
    spine_path = occ_path
    while len(spine_path) > 2:
        parent = decl_expr_at(fd, spine_path[:-1])
        if isinstance(parent, App) and spine_path[-1] == 0:
            spine_path = spine_path[:-1]
        else:
            break
    spine = decl_expr_at(fd, spine_path)
    _, args = app_spine(spine)

    project, new_expr = _inline_definition(project, m, def_module, equations, args, d_token)
    mod = project.modules[m]
    di, fd = _fun_decl(mod, f)
    project = with_module(project, with_decl_at(mod, di, replace_decl_expr_at(fd, spine_path, new_expr)))
    return _finish(project)


def fold_top_level(project: Project, f: str, m: str) -> Project:
    """Replace every instance of f's RHS (outside f itself) by a call to f."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if len(d.equations) != 1:
        raise RefactorError("NotApplicable", f"{f} must have a single equation to fold")
    eq = d.equations[0]
    if eq.locals:
        raise RefactorError("NotApplicable", f"{f} has where-locals and cannot be folded")
    if not all(isinstance(p, PVar) for p in eq.patterns):
        raise RefactorError("NotApplicable", f"{f}'s parameters must be plain variables")
    params = tuple(p.name for p in eq.patterns)  # type: ignore[union-attr]

    table = build_symbol_table(project)
    matcher = InstanceMatcher(table, project, params, m, frozenset())
    total = 0
    mods = {}
    exported = f in module_exports(mod)
    for mname, modx in project.modules.items():
        visible = mname == m or (exported and m in modx.imports)
        if not visible:
            mods[mname] = modx
            continue

        def make_call(sigma: dict[str, Expr]) -> Expr:
            return make_app(Var(f, qualifier=m), [sigma[p] for p in params])

        new_decls = []
        for dd in modx.decls:
            if (mname == m and decl_name(dd) == f) or not isinstance(dd, FunDecl):
                new_decls.append(dd)
                continue
            new_eqs = []
            for deq in dd.equations:
                base = frozenset(equation_bound_names(deq))
                new_rhs, n1 = fold_instances_in_expr(
                    matcher, eq.rhs, params, make_call, deq.rhs, mname, base
                )
                total += n1
                new_locals = []
                for loc in deq.locals:
                    new_lrhs, n2 = fold_instances_in_expr(
                        matcher, eq.rhs, params, make_call, loc.rhs,
                        mname, base | frozenset(loc.params),
                    )
                    total += n2
                    new_locals.append(replace(loc, rhs=new_lrhs))
                new_eqs.append(replace(deq, rhs=new_rhs, locals=tuple(new_locals)))
            new_decls.append(replace(dd, equations=tuple(new_eqs)))
        mods[mname] = replace(modx, decls=tuple(new_decls))
    if not total:
        raise RefactorError("NotApplicable", f"no instance of {f}'s body found to fold")
    return _finish(Project(mods))


def generative_fold(project: Project, f: str, arg_count: int, m: str) -> Project:
    """Burstall-Darlington derivation: in the first declaration of m that
    carries a single-equation comment copy and applies f to arg_count
    arguments, unfold that application, beta-reduce the variable-only tuple
    positions, then fold instances of the commented body back into calls of
    the commented name, producing a recursive definition."""
    if arg_count < 1:
        raise RefactorError("NotApplicable", "an application has at least one argument")
    mod = _module(project, m)

    target = None
    for di, d in enumerate(mod.decls):
        if not isinstance(d, FunDecl) or d.comment is None:
            continue
        try:
            spec = parse_decl(d.comment.text())
        except ParseError:
            continue
        if not isinstance(spec, FunDecl) or len(spec.equations) != 1:
            continue
        app_path = _find_app_in_decl(project, m, d, f, arg_count)
        if app_path is None:
            continue
        target = (di, d, spec, app_path)
        break
    if target is None:
        raise _not_found(
            f"no commented declaration in {m} applies {f} to {arg_count} argument(s)"
        )
    di, d, spec, app_path = target
    spec_eq = spec.equations[0]
    if spec_eq.locals or not all(isinstance(p, PVar) for p in spec_eq.patterns):
        raise RefactorError(
            "NotApplicable", "the commented definition must be a plain single equation"
        )
    spec_params = tuple(p.name for p in spec_eq.patterns)  # type: ignore[union-attr]

    # Unfold the targeted application, then drop variable-only case positions.
    spine_path = app_path
    spine = decl_expr_at(d, spine_path)
    head, args = app_spine(spine)
    assert isinstance(head, Var)
    table = build_symbol_table(project)
    scope_bound = frozenset(equation_bound_names(d.equations[app_path[0]]))
    ref = resolve_var(table, project, m, scope_bound if head.qualifier is None else frozenset(), head)
    if ref is None:
        raise RefactorError("NotApplicable", f"{f} is locally bound at the targeted application")
    td = project.modules[ref.module].decl(ref.name)
    if not isinstance(td, FunDecl):
        raise _not_found(f"{f} does not name a function definition")
    project2, new_expr = _inline_definition(project, m, ref.module, td.equations, args, f)
    mod2 = project2.modules[m]
    di2, d2 = _fun_decl(mod2, d.name)
    d2 = replace_decl_expr_at(d2, spine_path, new_expr)
    d2 = _simplify_variable_positions(d2)
    project2 = with_module(project2, with_decl_at(mod2, di2, d2))

    # Fold phase against the commented body.
    table2 = build_symbol_table(project2)
    matcher = InstanceMatcher(table2, project2, spec_params, m, frozenset())

    def make_call(sigma: dict[str, Expr]) -> Expr:
        return make_app(Var(spec.name, qualifier=m), [sigma[p] for p in spec_params])

    total = 0
    new_eqs = []
    for deq in d2.equations:
        base = frozenset(equation_bound_names(deq))
        new_rhs, n1 = fold_instances_in_expr(
            matcher, spec_eq.rhs, spec_params, make_call, deq.rhs, m, base
        )
        total += n1
        new_locals = []
        for loc in deq.locals:
            new_lrhs, n2 = fold_instances_in_expr(
                matcher, spec_eq.rhs, spec_params, make_call, loc.rhs,
                m, base | frozenset(loc.params),
            )
            total += n2
            new_locals.append(replace(loc, rhs=new_lrhs))
        new_eqs.append(replace(deq, rhs=new_rhs, locals=tuple(new_locals)))
    if not total:
        raise RefactorError("NotApplicable", "nothing foldable after unfolding")
    mod2 = project2.modules[m]
    di2, _ = _fun_decl(mod2, d.name)
    project2 = with_module(
        project2, with_decl_at(mod2, di2, replace(d2, equations=tuple(new_eqs)))
    )
    return _finish(project2)


def _find_app_in_decl(project: Project, m: str, d: FunDecl, f: str, arg_count: int):
    table = build_symbol_table(project)
    for ei, slot, root, bound in decl_expr_roots(d):
        nodes: dict[tuple[int, ...], Expr] = {}
        for sub, e, scope in walk_expr_scoped(root, bound):
            nodes[sub] = e
            if not isinstance(e, App):
                continue
            if sub and sub[-1] == 0 and isinstance(nodes.get(sub[:-1]), App):
                continue
            head, args = app_spine(e)
            if len(args) != arg_count or not isinstance(head, Var) or head.name != f:
                continue
            try:
                ref = resolve_var(table, project, m, scope, head)
            except ResolveError:
                continue
            if ref is None:
                continue
            return (ei, slot) + sub
    return None


def _simplify_variable_positions(d: FunDecl) -> FunDecl:
    """Beta-reduce tuple-case positions matched by a plain variable in every
    branch, substituting the scrutinee component into the branch bodies."""

    def simplify(e: Case) -> Expr:
        if not isinstance(e.scrutinee, Tuple):
            return e
        width = len(e.scrutinee.items)
        if not all(
            isinstance(b.pattern, PTuple) and len(b.pattern.items) == width
            for b in e.branches
        ):
            return e
        keep = [
            j for j in range(width)
            if not all(isinstance(b.pattern.items[j], PVar) for b in e.branches)  # type: ignore[union-attr]
        ]
        if len(keep) == width:
            return e
        new_branches = []
        for b in e.branches:
            assert isinstance(b.pattern, PTuple)
            mapping = {
                b.pattern.items[j].name: e.scrutinee.items[j]  # type: ignore[union-attr]
                for j in range(width)
                if j not in keep
            }
            body = substitute_many(b.body, mapping)
            if not keep:
                return body  # nothing left to scrutinise; the first branch wins
            kept_patterns = tuple(b.pattern.items[j] for j in keep)
            pat = kept_patterns[0] if len(keep) == 1 else PTuple(kept_patterns)
            new_branches.append(CaseBranch(pat, body))
        scrut: Expr = (
            e.scrutinee.items[keep[0]] if len(keep) == 1
            else Tuple(tuple(e.scrutinee.items[j] for j in keep))
        )
        return Case(scrut, tuple(new_branches))

    from .lang import map_decl_exprs
    out = map_decl_exprs(d, lambda root: _map_top_case(root, simplify))
    assert isinstance(out, FunDecl)
    return out


def _map_top_case(e: Expr, fn) -> Expr:
    """Apply fn to the outermost case of an expression, looking through lets."""
    if isinstance(e, Let):
        return Let(e.bindings, _map_top_case(e.body, fn))
    if isinstance(e, Case):
        return fn(e)
    return e


# ---------------------------------------------------------------------------
# removal and hygiene

def remove_def(project: Project, f: str, m: str) -> Project:
    """Delete a top-level definition that is used nowhere else."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    occ = [o for o in occurrences_of(project, m, f) if not (o.module == m and o.decl == f)]
    if occ:
        first = occ[0]
        raise RefactorError("StillUsed", f"{f} is still used in {first.module}.{first.decl}")
    decls = tuple(dd for i, dd in enumerate(mod.decls) if i != di)
    exports = mod.exports
    if exports is not None:
        exports = tuple(n for n in exports if n != f)
    project = with_module(project, replace(mod, decls=decls, exports=exports))
    return _finish(project)


def remove_local_def(project: Project, d_name: str, f: str, m: str) -> Project:
    """Delete an unused where-local of f."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    hits = [
        (ei, li)
        for ei, eq in enumerate(d.equations)
        for li, loc in enumerate(eq.locals)
        if loc.name == d_name
    ]
    if not hits:
        raise _not_found(f"{f} has no local definition {d_name}")
    ei, li = hits[0]
    eq = d.equations[ei]
    used = d_name in free_vars(eq.rhs)
    for i, loc in enumerate(eq.locals):
        if i != li and d_name in free_vars(loc.rhs) - set(loc.params):
            used = True
    if used:
        raise RefactorError("StillUsed", f"{d_name} is still used inside {f}")
    locs = tuple(l for i, l in enumerate(eq.locals) if i != li)
    eqs = list(d.equations)
    eqs[ei] = replace(eq, locals=locs)
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=tuple(eqs))))
    return _finish(project)


def clean_imports(project: Project, m: str) -> Project:
    """Drop imports from which nothing is referenced."""
    mod = _module(project, m)
    unused = set(unused_imports(project, m))
    if not unused:
        return project
    project = with_module(
        project, replace(mod, imports=tuple(i for i in mod.imports if i not in unused))
    )
    return _finish(project)


def rm_from_exports(project: Project, f: str, m: str) -> Project:
    """Remove f from m's explicit export list; f must not be used elsewhere."""
    mod = _module(project, m)
    if mod.exports is None or f not in mod.exports:
        raise _not_found(f"{m} does not explicitly export {f}")
    occ = [o for o in occurrences_of(project, m, f) if o.module != m]
    if occ:
        raise RefactorError("StillUsed", f"{f} is used in module {occ[0].module}")
    project = with_module(
        project, replace(mod, exports=tuple(n for n in mod.exports if n != f))
    )
    return _finish(project)


# ---------------------------------------------------------------------------
# case simplification

def simplify_case_pattern(project: Project, f: str, m: str) -> Project:
    """Extract a common-variable tuple position of f's top-level case into a
    let binding around the narrowed case."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if len(d.equations) != 1:
        raise RefactorError("NotApplicable", f"{f} must have a single equation")
    eq = d.equations[0]

    def rewrite(case: Case) -> Expr:
        if not isinstance(case.scrutinee, Tuple):
            raise RefactorError("NotApplicable", "the case scrutinee is not a tuple")
        width = len(case.scrutinee.items)
        if not all(
            isinstance(b.pattern, PTuple) and len(b.pattern.items) == width
            for b in case.branches
        ):
            raise RefactorError("NotApplicable", "branch patterns are not matching tuples")
        for j in range(width):
            names = set()
            for b in case.branches:
                item = b.pattern.items[j]  # type: ignore[union-attr]
                names.add(item.name if isinstance(item, PVar) else None)
            if len(names) != 1 or None in names:
                continue
            y = names.pop()
            component = case.scrutinee.items[j]
            others = [case.scrutinee.items[k] for k in range(width) if k != j]
            # The let binding is recursive and scopes over the narrowed case:
            # y free in any component (its own included) would be captured.
            if any(y in free_vars(o) for o in others) or y in free_vars(component):
                continue
            kept = [k for k in range(width) if k != j]
            if not kept:
                return Let((LetBinding(y, component),), case.branches[0].body)
            new_branches = []
            for b in case.branches:
                assert isinstance(b.pattern, PTuple)
                pats = tuple(b.pattern.items[k] for k in kept)
                pat = pats[0] if len(kept) == 1 else PTuple(pats)
                new_branches.append(CaseBranch(pat, b.body))
            scrut = (
                case.scrutinee.items[kept[0]] if len(kept) == 1
                else Tuple(tuple(case.scrutinee.items[k] for k in kept))
            )
            return Let((LetBinding(y, component),), Case(scrut, tuple(new_branches)))
        raise RefactorError(
            "NotApplicable", "no position holds the same variable in every branch"
        )

    seen = []

    def on_case(case: Case) -> Expr:
        seen.append(case)
        return rewrite(case)

    new_rhs = _map_top_case(eq.rhs, on_case)
    if not seen:
        raise RefactorError("NotApplicable", f"the body of {f} is not a case expression")
    eqs = (replace(eq, rhs=new_rhs),)
    project = with_module(project, with_decl_at(mod, di, replace(d, equations=eqs)))
    return _finish(project)


def case_to_eq(project: Project, f: str, m: str, matched_arity: int) -> Project:
    """Turn `f x = case x of ...` (or the two-parameter pair form) into one
    equation per branch."""
    if matched_arity not in (1, 2):
        raise RefactorError("NotApplicable", "case-to-eq handles one or two parameters")
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if len(d.equations) != 1:
        raise RefactorError("NotApplicable", f"{f} must have a single equation")
    eq = d.equations[0]
    if eq.locals:
        raise RefactorError("NotApplicable", f"{f} has where-locals")
    if len(eq.patterns) != matched_arity or not all(isinstance(p, PVar) for p in eq.patterns):
        raise RefactorError(
            "NotApplicable", f"{f} must take exactly {matched_arity} plain parameter(s)"
        )
    params = [p.name for p in eq.patterns]  # type: ignore[union-attr]
    if not isinstance(eq.rhs, Case):
        raise RefactorError("NotApplicable", f"the body of {f} is not a case expression")
    case = eq.rhs
    if matched_arity == 1:
        if case.scrutinee != Var(params[0]):
            raise RefactorError("NotApplicable", "the scrutinee is not the parameter variable")
    elif case.scrutinee != Tuple((Var(params[0]), Var(params[1]))):
        raise RefactorError(
            "NotApplicable", "the scrutinee is not the tuple of the two parameters"
        )
    new_eqs = []
    for b in case.branches:
        if matched_arity == 1:
            pats: tuple[Pattern, ...] = (b.pattern,)
        else:
            if not isinstance(b.pattern, PTuple) or len(b.pattern.items) != 2:
                raise RefactorError("NotApplicable", "branch patterns must be pairs")
            pats = b.pattern.items
        bound = set(pattern_vars(b.pattern))
        leaked = (set(params) & free_vars(b.body)) - bound
        if leaked:
            raise RefactorError(
                "NotApplicable",
                f"branch body references the scrutinised parameter(s) {sorted(leaked)}",
            )
        new_eqs.append(Equation(pats, b.body))
    project = with_module(
        project, with_decl_at(mod, di, replace(d, equations=tuple(new_eqs)))
    )
    return _finish(project)


# ---------------------------------------------------------------------------
# comments

def duplicate_into_comment(project: Project, f: str, m: str) -> Project:
    """Attach a canonical copy of f's declaration as its comment block."""
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    text = render_decl(d, with_comment=False)
    comment = CommentBlock(tuple(text.split("\n")))
    project = with_module(project, with_decl_at(mod, di, replace(d, comment=comment)))
    return _finish(project)


def rm_comment_before(project: Project, f: str, m: str) -> Project:
    mod = _module(project, m)
    di, d = _fun_decl(mod, f)
    if d.comment is None:
        raise _not_found(f"{f} has no attached comment")
    project = with_module(project, with_decl_at(mod, di, replace(d, comment=None)))
    return _finish(project)


# ---------------------------------------------------------------------------
# deduplication

def unify_alpha_equivalent(project: Project, keep: str, drop: str, m: str) -> Project:
    """Replace the alpha-equivalent definition drop by keep and delete it."""
    if keep == drop:
        raise _not_found("cannot unify a definition with itself")
    mod = _module(project, m)
    _fun_decl(mod, keep)
    di, drop_d = _fun_decl(mod, drop)
    _, keep_d = _fun_decl(mod, keep)
    if not alpha_eq_decl(keep_d, drop_d):
        raise RefactorError(
            "PreconditionFailed", f"{keep} and {drop} are not alpha-equivalent"
        )
    project = retarget_name(project, (m, drop), (m, keep))
    mod = project.modules[m]
    di, _ = _fun_decl(mod, drop)
    decls = tuple(dd for i, dd in enumerate(mod.decls) if i != di)
    exports = mod.exports
    if exports is not None:
        exports = tuple(n for n in exports if n != drop)
    project = with_module(project, replace(mod, decls=decls, exports=exports))
    return _finish(project)
