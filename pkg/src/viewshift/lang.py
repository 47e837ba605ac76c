"""AST for the object language: a small functional language with modules.

The language has exactly the constructs needed by the transformation corpus:
module headers with optional export lists, imports, data declarations,
function equations with where-locals, case/let/tuples, integer and string
literals, the infix operators + * ++, and the builtins show and print.
Declarations may carry an attached line-comment block.

All nodes are frozen dataclasses; every transformation builds new trees.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator, Optional

BUILTINS = ("show", "print")
KEYWORDS = ("module", "where", "import", "data", "case", "of", "let", "in")

INFIX_OPS = {
    # op -> (precedence, associativity)
    "++": (5, "right"),
    "+": (6, "left"),
    "*": (7, "left"),
}


# --- expressions ---

class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str
    qualifier: Optional[str] = None


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class Builtin(Expr):
    name: str  # "show" | "print"


@dataclass(frozen=True)
class ConApp(Expr):
    """Saturated constructor application; a tupled constructor takes one Tuple arg."""
    name: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Infix(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Tuple(Expr):
    items: tuple[Expr, ...]  # arity >= 2


@dataclass(frozen=True)
class CaseBranch:
    pattern: "Pattern"
    body: Expr


@dataclass(frozen=True)
class Case(Expr):
    scrutinee: Expr
    branches: tuple[CaseBranch, ...]


@dataclass(frozen=True)
class LetBinding:
    name: str
    rhs: Expr


@dataclass(frozen=True)
class Let(Expr):
    bindings: tuple[LetBinding, ...]
    body: Expr


# --- patterns ---

class Pattern:
    pass


@dataclass(frozen=True)
class PVar(Pattern):
    name: str


@dataclass(frozen=True)
class PInt(Pattern):
    value: int


@dataclass(frozen=True)
class PWild(Pattern):
    pass


@dataclass(frozen=True)
class PCon(Pattern):
    """Constructor pattern; `tupled` records `Add (e1, e2)` vs curried `Const i`."""
    name: str
    args: tuple[Pattern, ...] = ()
    tupled: bool = False


@dataclass(frozen=True)
class PTuple(Pattern):
    items: tuple[Pattern, ...]


# --- declarations and modules ---

@dataclass(frozen=True)
class CommentBlock:
    lines: tuple[str, ...]

    def text(self) -> str:
        return "\n".join(self.lines)


@dataclass(frozen=True)
class ConstructorDef:
    name: str
    arg_types: tuple[str, ...] = ()
    tupled: bool = False

    @property
    def value_arity(self) -> int:
        """Number of syntactic arguments a saturated application takes."""
        return 1 if self.tupled else len(self.arg_types)


@dataclass(frozen=True)
class LocalDef:
    name: str
    params: tuple[str, ...]
    rhs: Expr


@dataclass(frozen=True)
class Equation:
    patterns: tuple[Pattern, ...]
    rhs: Expr
    locals: tuple[LocalDef, ...] = ()


class TopDecl:
    pass


@dataclass(frozen=True)
class DataDecl(TopDecl):
    name: str
    constructors: tuple[ConstructorDef, ...]
    comment: Optional[CommentBlock] = None


@dataclass(frozen=True)
class FunDecl(TopDecl):
    """A function or value binding; a value is a single zero-pattern equation."""
    name: str
    equations: tuple[Equation, ...]
    comment: Optional[CommentBlock] = None

    @property
    def arity(self) -> int:
        return len(self.equations[0].patterns)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    exports: Optional[tuple[str, ...]]  # None means everything is exported
    imports: tuple[str, ...]
    decls: tuple[TopDecl, ...]

    def decl(self, name: str) -> Optional[TopDecl]:
        for d in self.decls:
            if decl_name(d) == name:
                return d
        return None


@dataclass(frozen=True)
class Project:
    modules: dict[str, ModuleDef]

    def module_names(self) -> list[str]:
        return sorted(self.modules)


def decl_name(d: TopDecl) -> str:
    return d.name  # type: ignore[union-attr]


def with_module(project: Project, mod: ModuleDef) -> Project:
    mods = dict(project.modules)
    mods[mod.name] = mod
    return Project(mods)


def with_decl(mod: ModuleDef, index: int, d: TopDecl) -> ModuleDef:
    decls = list(mod.decls)
    decls[index] = d
    return replace(mod, decls=tuple(decls))


# --- structural helpers ---

def expr_children(e: Expr) -> tuple[Expr, ...]:
    match e:
        case ConApp(_, args):
            return args
        case App(fn, arg):
            return (fn, arg)
        case Infix(_, lhs, rhs):
            return (lhs, rhs)
        case Tuple(items):
            return items
        case Case(scrutinee, branches):
            return (scrutinee,) + tuple(b.body for b in branches)
        case Let(bindings, body):
            return tuple(b.rhs for b in bindings) + (body,)
        case _:
            return ()


def with_expr_children(e: Expr, kids: tuple[Expr, ...]) -> Expr:
    match e:
        case ConApp(name, _):
            return ConApp(name, kids)
        case App(_, _):
            return App(kids[0], kids[1])
        case Infix(op, _, _):
            return Infix(op, kids[0], kids[1])
        case Tuple(_):
            return Tuple(kids)
        case Case(_, branches):
            new_branches = tuple(
                CaseBranch(b.pattern, body) for b, body in zip(branches, kids[1:])
            )
            return Case(kids[0], new_branches)
        case Let(bindings, _):
            n = len(bindings)
            new_bindings = tuple(
                LetBinding(b.name, rhs) for b, rhs in zip(bindings, kids[:n])
            )
            return Let(new_bindings, kids[n])
        case _:
            return e


def map_expr(e: Expr, fn) -> Expr:
    """Bottom-up rewrite: fn is applied to every node after its children."""
    kids = expr_children(e)
    if kids:
        new_kids = tuple(map_expr(k, fn) for k in kids)
        if new_kids != kids:
            e = with_expr_children(e, new_kids)
    return fn(e)


def pattern_vars(p: Pattern) -> tuple[str, ...]:
    match p:
        case PVar(name):
            return (name,)
        case PCon(_, args, _) | PTuple(args):
            out: tuple[str, ...] = ()
            for sub in args:
                out += pattern_vars(sub)
            return out
        case _:
            return ()


def equation_bound_names(eq: Equation) -> set[str]:
    bound: set[str] = set()
    for p in eq.patterns:
        bound.update(pattern_vars(p))
    bound.update(loc.name for loc in eq.locals)
    return bound


def walk_expr(e: Expr, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Expr]]:
    """Pre-order walk yielding (path, node); paths index expr_children."""
    yield path, e
    for i, kid in enumerate(expr_children(e)):
        yield from walk_expr(kid, path + (i,))


def walk_expr_scoped(
    e: Expr, bound: frozenset[str], path: tuple[int, ...] = ()
) -> Iterator[tuple[tuple[int, ...], Expr, frozenset[str]]]:
    """Like walk_expr but tracks names bound by enclosing case/let binders."""
    yield path, e, bound
    match e:
        case Case(scrutinee, branches):
            yield from walk_expr_scoped(scrutinee, bound, path + (0,))
            for i, b in enumerate(branches):
                inner = bound | set(pattern_vars(b.pattern))
                yield from walk_expr_scoped(b.body, inner, path + (i + 1,))
        case Let(bindings, body):
            inner = bound | {b.name for b in bindings}
            for i, b in enumerate(bindings):
                yield from walk_expr_scoped(b.rhs, inner, path + (i,))
            yield from walk_expr_scoped(body, inner, path + (len(bindings),))
        case _:
            for i, kid in enumerate(expr_children(e)):
                yield from walk_expr_scoped(kid, bound, path + (i,))


def expr_at(e: Expr, path: tuple[int, ...]) -> Expr:
    for i in path:
        e = expr_children(e)[i]
    return e


def replace_expr_at(e: Expr, path: tuple[int, ...], new: Expr) -> Expr:
    if not path:
        return new
    kids = list(expr_children(e))
    kids[path[0]] = replace_expr_at(kids[path[0]], path[1:], new)
    return with_expr_children(e, tuple(kids))


# Declaration-level paths: (equation index, slot, *expr path) where slot 0 is
# the equation RHS and slot k+1 is the rhs of the k-th where-local.

def decl_expr_roots(d: TopDecl) -> Iterator[tuple[int, int, Expr, frozenset[str]]]:
    """Yield (equation index, slot, root expr, names bound at the root)."""
    if not isinstance(d, FunDecl):
        return
    for ei, eq in enumerate(d.equations):
        base = frozenset(equation_bound_names(eq))
        yield ei, 0, eq.rhs, base
        for li, loc in enumerate(eq.locals):
            yield ei, li + 1, loc.rhs, base | frozenset(loc.params)


def decl_expr_at(d: TopDecl, path: tuple[int, ...]) -> Expr:
    ei, slot = path[0], path[1]
    eq = d.equations[ei]  # type: ignore[union-attr]
    root = eq.rhs if slot == 0 else eq.locals[slot - 1].rhs
    return expr_at(root, path[2:])


def replace_decl_expr_at(d: FunDecl, path: tuple[int, ...], new: Expr) -> FunDecl:
    ei, slot = path[0], path[1]
    eq = d.equations[ei]
    if slot == 0:
        eq2 = replace(eq, rhs=replace_expr_at(eq.rhs, path[2:], new))
    else:
        loc = eq.locals[slot - 1]
        loc2 = replace(loc, rhs=replace_expr_at(loc.rhs, path[2:], new))
        locs = list(eq.locals)
        locs[slot - 1] = loc2
        eq2 = replace(eq, locals=tuple(locs))
    eqs = list(d.equations)
    eqs[ei] = eq2
    return replace(d, equations=tuple(eqs))


def map_decl_exprs(d: TopDecl, fn) -> TopDecl:
    """Apply an Expr -> Expr rewrite to every expression root of a declaration."""
    if not isinstance(d, FunDecl):
        return d
    new_eqs = []
    for eq in d.equations:
        new_locals = tuple(replace(loc, rhs=fn(loc.rhs)) for loc in eq.locals)
        new_eqs.append(replace(eq, rhs=fn(eq.rhs), locals=new_locals))
    return replace(d, equations=tuple(new_eqs))


def app_spine(e: Expr) -> tuple[Expr, list[Expr]]:
    """Decompose left-nested applications into (head, args)."""
    args: list[Expr] = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    args.reverse()
    return e, args


def make_app(head: Expr, args: list[Expr]) -> Expr:
    for a in args:
        head = App(head, a)
    return head
