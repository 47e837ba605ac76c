"""Shared rewriting machinery for the refactoring catalog.

Qualification discipline: operations first re-qualify occurrences whose
resolution is about to become ambiguous, then perform the structural change
with fully qualified references, and finally minimize qualifiers project-wide
(a qualifier is kept only where the unqualified name would not resolve
uniquely to the same definition). This reproduces the qualified forms the
transformations display (Client.eval, ConstMod.eval, ...) without ever
guessing an occurrence's intent.
"""

from __future__ import annotations

from dataclasses import replace

from .lang import (
    App, Case, CaseBranch, Expr, FunDecl, Let, LetBinding, Project, TopDecl,
    Var, equation_bound_names, expr_children, pattern_vars,
    with_expr_children,
)
from .resolver import SymbolTable, build_symbol_table


def rewrite_vars(root: Expr, bound: frozenset[str], fn) -> Expr:
    """Rewrite every Var occurrence; fn(var, bound_names) -> Expr."""
    match root:
        case Var(_, _):
            return fn(root, bound)
        case Case(scrutinee, branches):
            new_scrut = rewrite_vars(scrutinee, bound, fn)
            new_branches = tuple(
                CaseBranch(
                    b.pattern,
                    rewrite_vars(b.body, bound | set(pattern_vars(b.pattern)), fn),
                )
                for b in branches
            )
            return Case(new_scrut, new_branches)
        case Let(bindings, body):
            inner = bound | {b.name for b in bindings}
            new_bindings = tuple(
                LetBinding(b.name, rewrite_vars(b.rhs, inner, fn)) for b in bindings
            )
            return Let(new_bindings, rewrite_vars(body, inner, fn))
        case _:
            kids = expr_children(root)
            if not kids:
                return root
            return with_expr_children(
                root, tuple(rewrite_vars(k, bound, fn) for k in kids)
            )


def rewrite_decl_vars(d: TopDecl, fn) -> TopDecl:
    """Apply rewrite_vars to every expression root of a declaration."""
    if not isinstance(d, FunDecl):
        return d
    new_eqs = []
    for eq in d.equations:
        base = frozenset(equation_bound_names(eq))
        new_locals = tuple(
            replace(loc, rhs=rewrite_vars(loc.rhs, base | frozenset(loc.params), fn))
            for loc in eq.locals
        )
        new_eqs.append(replace(eq, rhs=rewrite_vars(eq.rhs, base, fn), locals=new_locals))
    return replace(d, equations=tuple(new_eqs))


def rewrite_project_vars(project: Project, fn) -> Project:
    """fn(module_name, var, bound) -> Expr, applied to every occurrence."""
    mods = {}
    for mname, mod in project.modules.items():
        mods[mname] = replace(
            mod,
            decls=tuple(
                rewrite_decl_vars(d, lambda v, b, _m=mname: fn(_m, v, b))
                for d in mod.decls
            ),
        )
    return Project(mods)


def requalify_name(project: Project, name: str) -> Project:
    """Pin down every free occurrence of name with an explicit qualifier."""
    table = build_symbol_table(project)

    def fix(mname: str, v: Var, bound: frozenset[str]) -> Expr:
        if v.name != name or v.qualifier is not None or v.name in bound:
            return v
        refs = table.lookup(mname, name)
        if len(refs) == 1:
            return Var(name, qualifier=refs[0].module)
        return v

    return rewrite_project_vars(project, fix)


def minimize_qualifiers(project: Project) -> Project:
    """Drop qualifiers wherever the bare name resolves uniquely to the target."""
    table = build_symbol_table(project)

    def fix(mname: str, v: Var, bound: frozenset[str]) -> Expr:
        if v.qualifier is None or v.name in bound:
            return v
        refs = table.lookup(mname, v.name)
        if len(refs) == 1 and refs[0].module == v.qualifier:
            return Var(v.name)
        return v

    return rewrite_project_vars(project, fix)


def retarget_name(
    project: Project, old: tuple[str, str], new: tuple[str, str]
) -> Project:
    """Repoint every occurrence of a top-level definition to a new (module,
    name), emitting fully qualified references; minimize afterwards."""
    table = build_symbol_table(project)
    old_mod, old_name = old
    new_mod, new_name = new

    def fix(mname: str, v: Var, bound: frozenset[str]) -> Expr:
        if v.name != old_name:
            return v
        if v.qualifier is None:
            if v.name in bound:
                return v
            refs = table.lookup(mname, v.name)
            if len(refs) != 1 or (refs[0].module, refs[0].name) != old:
                return v
        elif v.qualifier != old_mod:
            return v
        return Var(new_name, qualifier=new_mod)

    return rewrite_project_vars(project, fix)


# --- second-order instance matching (fold, generative fold) ---

class InstanceMatcher:
    """Match expressions against a template whose parameters stand for
    arbitrary expressions; every other name must denote the same definition
    on both sides (binders correspond positionally)."""

    def __init__(
        self,
        table: SymbolTable,
        project: Project,
        params: tuple[str, ...],
        template_module: str,
        template_bound: frozenset[str],
    ):
        self.table = table
        self.project = project
        self.params = set(params)
        self.template_module = template_module
        self.template_bound = template_bound

    def _target(self, module: str, v: Var, local_map: dict[str, int], outer: frozenset[str]):
        if v.qualifier is None and v.name in local_map:
            return ("match-local", local_map[v.name])
        if v.qualifier is None and v.name in outer:
            return ("enclosing", v.name)
        if v.qualifier is not None:
            return ("global", v.qualifier, v.name)
        refs = self.table.lookup(module, v.name)
        if len(refs) != 1:
            return ("unresolved", v.name)
        return ("global", refs[0].module, refs[0].name)

    def match(
        self,
        template: Expr,
        candidate: Expr,
        site_module: str,
        site_bound: frozenset[str],
        sigma: dict[str, Expr],
    ) -> bool:
        return self._match(
            template, candidate, {}, {}, 0, site_module, site_bound, sigma, set()
        )

    def _match(self, t, c, tmap, cmap, depth, site_module, site_bound, sigma, inner_names):
        from .lang import (
            Builtin, ConApp, Infix, IntLit, StrLit, Tuple as TupleE,
        )
        from .names import free_vars

        if isinstance(t, Var) and t.qualifier is None and t.name in self.params and t.name not in tmap:
            if t.name in sigma:
                return sigma[t.name] == c
            # The bound expression escapes the matched subtree: it must not
            # capture names bound inside the match.
            if free_vars(c) & inner_names:
                return False
            sigma[t.name] = c
            return True
        match t, c:
            case Var(_, _), Var(_, _):
                tt = self._target(self.template_module, t, tmap, self.template_bound)
                ct = self._target(site_module, c, cmap, site_bound)
                if tt[0] == "match-local" or ct[0] == "match-local":
                    return tt == ct
                return tt == ct and tt[0] != "unresolved"
            case IntLit(a), IntLit(b):
                return a == b
            case StrLit(a), StrLit(b):
                return a == b
            case Builtin(a), Builtin(b):
                return a == b
            case ConApp(n1, a1), ConApp(n2, a2):
                return n1 == n2 and len(a1) == len(a2) and all(
                    self._match(x, y, tmap, cmap, depth, site_module, site_bound, sigma, inner_names)
                    for x, y in zip(a1, a2)
                )
            case App(f1, x1), App(f2, x2):
                return self._match(f1, f2, tmap, cmap, depth, site_module, site_bound, sigma, inner_names) and \
                    self._match(x1, x2, tmap, cmap, depth, site_module, site_bound, sigma, inner_names)
            case Infix(o1, l1, r1), Infix(o2, l2, r2):
                return o1 == o2 and \
                    self._match(l1, l2, tmap, cmap, depth, site_module, site_bound, sigma, inner_names) and \
                    self._match(r1, r2, tmap, cmap, depth, site_module, site_bound, sigma, inner_names)
            case TupleE(i1), TupleE(i2):
                return len(i1) == len(i2) and all(
                    self._match(x, y, tmap, cmap, depth, site_module, site_bound, sigma, inner_names)
                    for x, y in zip(i1, i2)
                )
            case Case(s1, b1), Case(s2, b2):
                from .names import _alpha_pattern  # structural pattern match
                if len(b1) != len(b2):
                    return False
                if not self._match(s1, s2, tmap, cmap, depth, site_module, site_bound, sigma, inner_names):
                    return False
                for x, y in zip(b1, b2):
                    if not _alpha_pattern(x.pattern, y.pattern):
                        return False
                    tm, cm, d = dict(tmap), dict(cmap), depth
                    inn = set(inner_names)
                    for tv, cv in zip(pattern_vars(x.pattern), pattern_vars(y.pattern)):
                        tm[tv] = d
                        cm[cv] = d
                        inn.add(cv)
                        d += 1
                    if not self._match(x.body, y.body, tm, cm, d, site_module, site_bound, sigma, inn):
                        return False
                return True
            case Let(bs1, bod1), Let(bs2, bod2):
                if len(bs1) != len(bs2):
                    return False
                tm, cm, d = dict(tmap), dict(cmap), depth
                inn = set(inner_names)
                for x, y in zip(bs1, bs2):
                    tm[x.name] = d
                    cm[y.name] = d
                    inn.add(y.name)
                    d += 1
                for x, y in zip(bs1, bs2):
                    if not self._match(x.rhs, y.rhs, tm, cm, d, site_module, site_bound, sigma, inn):
                        return False
                return self._match(bod1, bod2, tm, cm, d, site_module, site_bound, sigma, inn)
            case _:
                return False


def fold_instances_in_expr(
    matcher: InstanceMatcher,
    template: Expr,
    param_order: tuple[str, ...],
    make_call,
    root: Expr,
    site_module: str,
    site_bound: frozenset[str],
) -> tuple[Expr, int]:
    """Bottom-up replacement of template instances by make_call(sigma)."""
    count = 0

    def go(e: Expr, bound: frozenset[str]) -> Expr:
        nonlocal count
        match e:
            case Case(scrutinee, branches):
                new_scrut = go(scrutinee, bound)
                new_branches = tuple(
                    CaseBranch(b.pattern, go(b.body, bound | set(pattern_vars(b.pattern))))
                    for b in branches
                )
                e = Case(new_scrut, new_branches)
            case Let(bindings, body):
                inner = bound | {b.name for b in bindings}
                e = Let(
                    tuple(LetBinding(b.name, go(b.rhs, inner)) for b in bindings),
                    go(body, inner),
                )
            case _:
                kids = expr_children(e)
                if kids:
                    e = with_expr_children(e, tuple(go(k, bound) for k in kids))
        sigma: dict[str, Expr] = {}
        if matcher.match(template, e, site_module, bound, sigma):
            if set(sigma) == set(param_order):
                count += 1
                return make_call(sigma)
        return e

    return go(root, site_bound), count
