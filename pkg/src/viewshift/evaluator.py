"""Call-by-need interpreter for the object language.

Top-level bindings of the whole project form one mutually recursive heap of
thunks (the let-rec layer); each thunk is forced at most once and memoized.
`print` wraps its text in an output value rather than performing IO, so an
observation is a pure, comparable result.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lang import (
    App, Builtin, Case, ConApp, Equation, Expr, FunDecl, Infix, IntLit, Let,
    LocalDef, PCon, PInt, PTuple, PVar, PWild, Pattern, Project, StrLit,
    Tuple, Var,
)
from .resolver import SymbolTable, build_symbol_table, resolve_var, ResolveError

DEFAULT_BUDGET = 10**6


class EvalError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


# --- public (deeply forced) values ---

class Value:
    pass


@dataclass(frozen=True)
class VInt(Value):
    value: int


@dataclass(frozen=True)
class VStr(Value):
    value: str


@dataclass(frozen=True)
class VCon(Value):
    name: str
    args: tuple[Value, ...]


@dataclass(frozen=True)
class VTuple(Value):
    items: tuple[Value, ...]


@dataclass(frozen=True)
class VOutput(Value):
    text: str


@dataclass(frozen=True)
class VClosure(Value):
    """A partially applied function; opaque under deep forcing."""
    name: str
    missing: int


def show_value(v: Value) -> str:
    match v:
        case VInt(n):
            return str(n)
        case VStr(s):
            out = s.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{out}"'
        case VOutput(text):
            return text
        case VCon(name, args):
            if not args:
                return name
            parts = [name]
            for a in args:
                s = show_value(a)
                if isinstance(a, VCon) and a.args:
                    s = f"({s})"
                parts.append(s)
            return " ".join(parts)
        case VTuple(items):
            return "(" + ", ".join(show_value(i) for i in items) + ")"
        case VClosure(name, _):
            return f"<{name}>"
    raise TypeError(v)


# --- machine internals ---

class _Cell:
    __slots__ = ("thunk", "value", "forcing")

    def __init__(self, thunk=None, value=None):
        self.thunk = thunk  # (expr, env, module) | None
        self.value = value  # whnf value | None
        self.forcing = False


@dataclass
class _Closure:
    """Function value: equations plus captured environment, args cells so far."""
    name: str
    module: str
    equations: tuple[Equation, ...]
    env: dict
    args: tuple[_Cell, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.equations[0].patterns)


@dataclass
class _WCon:
    name: str
    args: tuple[_Cell, ...]


@dataclass
class _WTuple:
    items: tuple[_Cell, ...]


@dataclass
class EvalStats:
    steps: int = 0
    forcings: int = 0  # thunks entered (memoized afterwards)


class Evaluator:
    def __init__(self, project: Project, budget: int = DEFAULT_BUDGET):
        self.project = project
        self.budget = budget
        self.stats = EvalStats()
        self.table: SymbolTable = build_symbol_table(project)
        self.globals: dict[tuple[str, str], _Cell] = {}
        self._install_globals()

    def _install_globals(self):
        for mname, mod in self.project.modules.items():
            for d in mod.decls:
                if not isinstance(d, FunDecl):
                    continue
                if d.arity > 0:
                    cell = _Cell(value=_Closure(d.name, mname, d.equations, {}))
                else:
                    eq = d.equations[0]
                    cell = _Cell(thunk=(eq, {}, mname))
                self.globals[(mname, d.name)] = cell

    # -- helpers --

    def _tick(self):
        self.stats.steps += 1
        if self.stats.steps > self.budget:
            raise EvalError("StepBudgetExceeded", f"reduction budget of {self.budget} steps exceeded")

    def _lookup(self, module: str, env: dict, v: Var) -> _Cell:
        if v.qualifier is None and v.name in env:
            return env[v.name]
        ref = resolve_var(self.table, self.project, module, frozenset(env), v)
        if ref is None:  # bound but missing from env: a compiler bug
            raise EvalError("UnresolvedName", f"unbound variable {v.name}")
        cell = self.globals.get((ref.module, ref.name))
        if cell is None:
            raise EvalError("UnresolvedName", f"{ref.module}.{ref.name} is not a value binding")
        return cell

    def force(self, cell: _Cell):
        if cell.value is not None:
            return cell.value
        if cell.forcing:
            raise EvalError("CyclicEvaluation", "value depends on itself")
        cell.forcing = True
        self.stats.forcings += 1
        payload, env, module = cell.thunk
        if isinstance(payload, Equation):
            value = self._eval_equation_body(payload, env, module)
        else:
            value = self.eval_expr(payload, env, module)
        cell.value = value
        cell.thunk = None
        cell.forcing = False
        return value

    def _eval_equation_body(self, eq: Equation, env: dict, module: str):
        return self.eval_expr(eq.rhs, self._bind_locals(eq.locals, env, module), module)

    def _bind_locals(self, locals_: tuple[LocalDef, ...], env: dict, module: str) -> dict:
        if not locals_:
            return env
        new_env = dict(env)
        for loc in locals_:
            if loc.params:
                eq = Equation(tuple(PVar(p) for p in loc.params), loc.rhs)
                new_env[loc.name] = _Cell(value=_Closure(loc.name, module, (eq,), new_env))
            else:
                new_env[loc.name] = _Cell(thunk=(loc.rhs, new_env, module))
        return new_env

    # -- evaluation to weak head normal form --
    #
    # Tail positions (case/let bodies, saturated function entry) loop rather
    # than recurse, so runaway recursion meets the step budget instead of the
    # host stack.

    def eval_expr(self, e: Expr, env: dict, module: str):
        while True:
            self._tick()
            match e:
                case Var(_, _):
                    return self.force(self._lookup(module, env, e))
                case IntLit(n):
                    return VInt(n)
                case StrLit(s):
                    return VStr(s)
                case Builtin(name):
                    return _Builtin(name)
                case ConApp(name, args):
                    return _WCon(name, tuple(_Cell(thunk=(a, env, module)) for a in args))
                case Tuple(items):
                    return _WTuple(tuple(_Cell(thunk=(i, env, module)) for i in items))
                case Infix(op, lhs, rhs):
                    return self._eval_infix(op, lhs, rhs, env, module)
                case App(_, _):
                    from .lang import app_spine
                    head, args = app_spine(e)
                    fn = self.eval_expr(head, env, module)
                    cells = [_Cell(thunk=(a, env, module)) for a in args]
                    result = self._apply(fn, cells, module)
                    if isinstance(result, _Tail):
                        e, env, module = result.expr, result.env, result.module
                        continue
                    return result
                case Case(scrutinee, branches):
                    cell = _Cell(thunk=(scrutinee, env, module))
                    matched = None
                    for b in branches:
                        bindings: dict = {}
                        if self._match(b.pattern, cell, bindings):
                            matched = (b, bindings)
                            break
                    if matched is None:
                        raise EvalError(
                            "PatternMatchFailure", f"no case branch matches in module {module}"
                        )
                    b, bindings = matched
                    env = dict(env)
                    env.update(bindings)
                    e = b.body
                    continue
                case Let(bindings, body):
                    env = dict(env)
                    for b in bindings:
                        env[b.name] = _Cell()
                    for b in bindings:
                        env[b.name].thunk = (b.rhs, env, module)
                    e = body
                    continue
            raise EvalError("EvalError", f"cannot evaluate {e!r}")

    def _eval_infix(self, op: str, lhs: Expr, rhs: Expr, env: dict, module: str):
        a = self.eval_expr(lhs, env, module)
        b = self.eval_expr(rhs, env, module)
        if op == "++":
            if isinstance(a, VStr) and isinstance(b, VStr):
                return VStr(a.value + b.value)
            raise EvalError("EvalError", "++ expects text on both sides")
        if isinstance(a, VInt) and isinstance(b, VInt):
            return VInt(a.value + b.value if op == "+" else a.value * b.value)
        raise EvalError("EvalError", f"{op} expects integers on both sides")

    def _apply(self, fn, cells: list[_Cell], module: str):
        """Apply cells to fn; returns a value or a _Tail for the caller's loop."""
        while cells:
            self._tick()
            if isinstance(fn, _Builtin):
                fn = self._apply_builtin(fn.name, cells.pop(0))
                continue
            if not isinstance(fn, _Closure):
                raise EvalError("EvalError", "applied a non-function value")
            take = fn.arity - len(fn.args)
            new_args = fn.args + tuple(cells[:take])
            cells = cells[take:]
            if len(new_args) < fn.arity:
                return _Closure(fn.name, fn.module, fn.equations, fn.env, new_args)
            clo = _Closure(fn.name, fn.module, fn.equations, fn.env, new_args)
            eq, env = self._select_equation(clo)
            if cells:
                fn = self.eval_expr(eq.rhs, env, clo.module)
            else:
                return _Tail(eq.rhs, env, clo.module)
        return fn

    def _apply_builtin(self, name: str, cell: _Cell):
        v = self.force(cell)
        if name == "show":
            if isinstance(v, VInt):
                return VStr(str(v.value))
            raise EvalError("EvalError", "show expects an integer")
        assert name == "print"
        if isinstance(v, VStr):
            return VOutput(v.value)
        raise EvalError("EvalError", "print expects text")

    def _select_equation(self, clo: _Closure):
        """Match the closure's arguments; returns (equation, ready env)."""
        for eq in clo.equations:
            bindings: dict = {}
            ok = True
            for p, cell in zip(eq.patterns, clo.args):
                if not self._match(p, cell, bindings):
                    ok = False
                    break
            if not ok:
                continue
            env = dict(clo.env)
            env.update(bindings)
            return eq, self._bind_locals(eq.locals, env, clo.module)
        raise EvalError(
            "PatternMatchFailure", f"no equation of {clo.name} matches its arguments"
        )

    def _match(self, p: Pattern, cell: _Cell, bindings: dict) -> bool:
        match p:
            case PWild():
                return True
            case PVar(name):
                bindings[name] = cell
                return True
            case PInt(n):
                v = self.force(cell)
                return isinstance(v, VInt) and v.value == n
            case PTuple(items):
                v = self.force(cell)
                if not isinstance(v, _WTuple) or len(v.items) != len(items):
                    return False
                return all(self._match(q, c, bindings) for q, c in zip(items, v.items))
            case PCon(name, args, tupled):
                v = self.force(cell)
                if not isinstance(v, _WCon) or v.name != name:
                    return False
                if tupled:
                    if len(v.args) != 1:
                        return False
                    inner = self.force(v.args[0])
                    if not isinstance(inner, _WTuple) or len(inner.items) != len(args):
                        return False
                    return all(
                        self._match(q, c, bindings) for q, c in zip(args, inner.items)
                    )
                if len(v.args) != len(args):
                    return False
                return all(self._match(q, c, bindings) for q, c in zip(args, v.args))
        raise EvalError("EvalError", f"bad pattern {p!r}")

    # -- deep forcing to public values --

    def deep(self, v) -> Value:
        self._tick()
        if isinstance(v, (VInt, VStr, VOutput)):
            return v
        if isinstance(v, _WCon):
            return VCon(v.name, tuple(self.deep(self.force(c)) for c in v.args))
        if isinstance(v, _WTuple):
            return VTuple(tuple(self.deep(self.force(c)) for c in v.items))
        if isinstance(v, _Closure):
            return VClosure(v.name, v.arity - len(v.args))
        if isinstance(v, _Builtin):
            return VClosure(v.name, 1)
        raise EvalError("EvalError", f"cannot observe {v!r}")


@dataclass
class _Builtin:
    name: str


@dataclass
class _Tail:
    """A saturated call's body, to be continued in the evaluation loop."""
    expr: Expr
    env: dict
    module: str


def evaluate(project: Project, module: str, expr: Expr, budget: int = DEFAULT_BUDGET) -> Value:
    """Evaluate an expression in the scope of a module, deeply forced."""
    ev = Evaluator(project, budget)
    return ev.deep(ev.eval_expr(expr, {}, module))


def _entry_module(project: Project, entry: str) -> str:
    hits = []
    for mname in project.module_names():
        d = project.modules[mname].decl(entry)
        if isinstance(d, FunDecl) and d.arity == 0:
            hits.append(mname)
    if not hits:
        raise EvalError("UnresolvedName", f"no zero-argument binding {entry} in the project")
    if len(hits) > 1:
        raise EvalError("UnresolvedName", f"entry {entry} is defined in several modules: {hits}")
    return hits[0]


def observe_entries(
    project: Project, entries: list[str] | tuple[str, ...], budget: int = DEFAULT_BUDGET
) -> dict[str, str]:
    """Force each zero-argument entry; printed text for outputs, shown form otherwise."""
    out: dict[str, str] = {}
    for entry in entries:
        mname = _entry_module(project, entry)
        ev = Evaluator(project, budget)
        value = ev.deep(ev.eval_expr(Var(entry), {}, mname))
        out[entry] = value.text if isinstance(value, VOutput) else show_value(value)
    return out


def observational_eq(
    project_a: Project,
    project_b: Project,
    entries: list[str] | tuple[str, ...],
    budget: int = DEFAULT_BUDGET,
) -> bool:
    """True iff both projects produce identical observation text per entry."""
    try:
        obs_a = observe_entries(project_a, entries, budget)
    except (EvalError, ResolveError) as exc:
        raise EvalError("EvalError", f"first project: {exc}") from exc
    try:
        obs_b = observe_entries(project_b, entries, budget)
    except (EvalError, ResolveError) as exc:
        raise EvalError("EvalError", f"second project: {exc}") from exc
    return obs_a == obs_b


def default_entries(project: Project, module: str = "Client") -> list[str]:
    """Zero-argument bindings of the Client module whose names start with r."""
    mod = project.modules.get(module)
    if mod is None:
        return []
    out = []
    for d in mod.decls:
        if isinstance(d, FunDecl) and d.arity == 0 and d.name.startswith("r"):
            out.append(d.name)
    return out
