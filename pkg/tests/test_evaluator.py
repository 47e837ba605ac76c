import pytest

from viewshift.evaluator import (
    EvalError, Evaluator, VCon, VInt, VStr, VTuple, default_entries,
    evaluate, observational_eq, observe_entries, show_value,
)
from viewshift.lang import Project
from viewshift.parse import parse_expr, parse_module
from viewshift.reference import evaluate_by_name, observe_entries_by_name

ENTRIES = ("r1", "r2", "r3", "r4")
EXPECTED = {"r1": "1+2", "r2": "3", "r3": "1+2+3", "r4": "6"}


def _project(*sources):
    mods = {}
    for src in sources:
        mod = parse_module(src)
        mods[mod.name] = mod
    return Project(mods)


def test_eval_e1(pfun):
    assert evaluate(pfun, "Client", parse_expr("eval e1")) == VInt(3)


def test_eval_arithmetic(pfun):
    assert evaluate(pfun, "Client", parse_expr("1 + 2")) == VInt(3)
    assert evaluate(pfun, "Client", parse_expr("2 * 3")) == VInt(6)


def test_eval_tostring(pfun):
    assert evaluate(pfun, "Client", parse_expr("toString e1")) == VStr("1+2")


def test_eval_constructor_value(pfun):
    v = evaluate(pfun, "Client", parse_expr("e1"))
    assert v == VCon("Add", (VTuple((VCon("Const", (VInt(1),)), VCon("Const", (VInt(2),)))),))
    assert show_value(v) == "Add (Const 1, Const 2)"


def test_observe_entries(pfun, pdata):
    assert observe_entries(pfun, ENTRIES) == EXPECTED
    assert observe_entries(pdata, ENTRIES) == EXPECTED


def test_observe_empty_print():
    p = _project('module Client where\nentry = print ""')
    assert observe_entries(p, ["entry"]) == {"entry": ""}


def test_observational_eq(pfun, pdata):
    assert observational_eq(pfun, pdata, ENTRIES)
    assert observational_eq(pfun, pfun, ENTRIES)


def test_mutant_killed(pfun):
    src = (
        "module EvalMod where\n\nimport Expr\n\n"
        "eval (Const i) = i + 1\n"
        "eval (Add (e1, e2)) = eval e1 + eval e2\n"
    )
    mutant = Project(dict(pfun.modules) | {"EvalMod": parse_module(src)})
    assert not observational_eq(pfun, mutant, ENTRIES)
    assert observe_entries(mutant, ["r2"]) == {"r2": "5"}


def test_determinism(pfun):
    assert observe_entries(pfun, ENTRIES) == observe_entries(pfun, ENTRIES)


def test_pattern_match_failure():
    p = _project(
        "module M where\ndata T = K Int | L Int\nf (K i) = i\nentry = print (show (f (L 1)))"
    )
    with pytest.raises(EvalError) as exc:
        observe_entries(p, ["entry"])
    assert exc.value.kind == "PatternMatchFailure"


def test_step_budget():
    p = _project("module M where\nloop x = loop x\nentry = print (show (loop 1))")
    with pytest.raises(EvalError) as exc:
        observe_entries(p, ["entry"], budget=10_000)
    assert exc.value.kind == "StepBudgetExceeded"


def test_cyclic_value_detected():
    p = _project("module M where\nloop = loop + 1\nentry = print (show loop)")
    with pytest.raises(EvalError) as exc:
        observe_entries(p, ["entry"], budget=10_000)
    assert exc.value.kind == "CyclicEvaluation"


def test_sharing_forces_thunk_once(pfun):
    shared = Evaluator(pfun)
    shared.deep(shared.eval_expr(parse_expr("let x = eval e2 in x + x"), {}, "Client"))
    unshared = Evaluator(pfun)
    unshared.deep(unshared.eval_expr(parse_expr("eval e2 + eval e2"), {}, "Client"))
    assert shared.stats.forcings < unshared.stats.forcings


def test_memoization_counter_is_one(pfun):
    # the shared thunk is entered exactly once: using x twice costs the same
    # number of thunk entries as using it once
    twice = Evaluator(pfun)
    assert twice.deep(twice.eval_expr(parse_expr("let x = eval e2 in x + x"), {}, "Client")) == VInt(12)
    once = Evaluator(pfun)
    assert once.deep(once.eval_expr(parse_expr("let x = eval e2 in x"), {}, "Client")) == VInt(6)
    assert twice.stats.forcings == once.stats.forcings


def test_first_matching_equation_wins():
    p = _project(
        "module M where\nf 0 = 10\nf x = 20\nentry = print (show (f 0))"
    )
    assert observe_entries(p, ["entry"]) == {"entry": "10"}


def test_let_rec_top_level():
    # mutually recursive top-level bindings through let-rec cells
    p = _project(
        "module M where\n"
        "data N = Z | S N\n"
        "even (Z) = 1\neven (S n) = odd n\n"
        "odd (Z) = 0\nodd (S n) = even n\n"
        "entry = print (show (even (S (S Z))))"
    )
    assert observe_entries(p, ["entry"]) == {"entry": "1"}


def test_call_by_name_agrees_on_corpus(pfun, pdata):
    assert observe_entries_by_name(pfun, ENTRIES) == EXPECTED
    assert observe_entries_by_name(pdata, ENTRIES) == EXPECTED


def test_call_by_name_recomputes(pfun):
    v = evaluate_by_name(pfun, "Client", parse_expr("let x = eval e2 in x + x"))
    assert v == VInt(12)


def test_show_errors():
    p = _project('module M where\nentry = print (show "oops")')
    with pytest.raises(EvalError):
        observe_entries(p, ["entry"])


def test_print_requires_text():
    p = _project("module M where\nentry = print 5")
    with pytest.raises(EvalError):
        observe_entries(p, ["entry"])


def test_observational_eq_tags_offending_project(pfun):
    broken = _project("module Client where\nr1 = print (show missing)")
    broken = Project(dict(pfun.modules) | {"Client": broken.modules["Client"]})
    with pytest.raises(EvalError) as exc:
        observational_eq(pfun, broken, ("r1",))
    assert "second project" in str(exc.value)


def test_default_entries(pfun):
    assert default_entries(pfun) == ["r1", "r2", "r3", "r4"]


def test_laziness_skips_unused_error():
    # call-by-need must not force an argument the function ignores
    p = _project(
        "module M where\nconst2 x y = x\nboom = boom\nentry = print (show (const2 7 boom))"
    )
    assert observe_entries(p, ["entry"], budget=10_000) == {"entry": "7"}
