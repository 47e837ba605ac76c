import pytest

from viewshift.names import alpha_eq_project
from viewshift.parse import parse_project
from viewshift.script import (
    RefactorStep, Script, ScriptSyntaxError, parse_script, run_script,
)

ENTRIES = ("r1", "r2", "r3", "r4")


def test_parse_script_single_line():
    s = parse_script("rename-top-level eval EvalMod fold1")
    assert s.steps == (RefactorStep("rename-top-level", ("eval", "EvalMod", "fold1"), 1),)


def test_parse_script_empty():
    assert parse_script("").steps == ()
    assert parse_script("# only a comment\n\n").steps == ()


def test_parse_script_arity_error():
    with pytest.raises(ScriptSyntaxError) as exc:
        parse_script("rename-top-level eval")
    assert exc.value.line == 1


def test_parse_script_unknown_command():
    with pytest.raises(ScriptSyntaxError):
        parse_script("explode-everything now")


def test_parse_script_comments_and_blanks():
    text = "# header\n\nclean-imports Client  # trailing\n"
    s = parse_script(text)
    assert len(s.steps) == 1
    assert s.steps[0].source_line == 3


def test_empty_script_is_identity(pfun):
    out, log = run_script(pfun, Script("empty", ()))
    assert out == pfun
    assert log.ok and log.records == []


def test_fail_fast_partial_result(pfun):
    text = (
        "exhibit-function eval Const evalConst EvalMod\n"
        "exhibit-function eval Add evalAdd EvalMod\n"
        "rename-top-level eval EvalMod Const\n"  # clashes with the imported constructor
    )
    script = parse_script(text)
    out, log = run_script(pfun, script)
    assert not log.ok
    assert [r.outcome for r in log.records] == ["applied", "applied", "failed"]
    assert "NameClash" in log.records[-1].error
    # the returned project reflects the last successful step
    d = out.modules["EvalMod"].decl("eval")
    assert d.equations[0].locals[0].name == "evalConst"
    assert "NameClash" in log.summary()


def test_composition(pfun, forward_script):
    k = 10
    s1 = Script("a", forward_script.steps[:k])
    s2 = Script("b", forward_script.steps[k:])
    via_parts, log1 = run_script(pfun, s1)
    assert log1.ok
    via_parts, log2 = run_script(via_parts, s2)
    assert log2.ok
    whole, log = run_script(pfun, forward_script)
    assert log.ok
    assert via_parts == whole


def test_replay_determinism(pfun, forward_script):
    out1, log1 = run_script(pfun, forward_script)
    out2, log2 = run_script(pfun, forward_script)
    assert out1 == out2
    assert [r.command for r in log1.records] == [r.command for r in log2.records]


def test_checked_mode_catches_behavior_change(pfun):
    # removing r4 changes the observations, so a checked run must abort
    script = parse_script("remove-def r4 Client")
    out, log = run_script(pfun, script, checked=True, entries=ENTRIES)
    assert not log.ok
    assert log.records[-1].equivalence == "fail"


def test_checked_mode_passes_for_forward(pfun, forward_script):
    out, log = run_script(pfun, forward_script, checked=True, entries=ENTRIES)
    assert log.ok
    assert all(r.equivalence == "pass" for r in log.records)


def test_snapshots_written(tmp_path, pfun):
    script = parse_script(
        "exhibit-function eval Const evalConst EvalMod\n"
        "exhibit-function eval Add evalAdd EvalMod\n"
    )
    out, log = run_script(pfun, script, snapshot_dir=str(tmp_path))
    assert (tmp_path / "step_000" / "EvalMod.mfn").exists()
    assert (tmp_path / "step_002" / "EvalMod.mfn").exists()
    snap = parse_project(str(tmp_path / "step_002"))
    assert alpha_eq_project(snap, out)


def test_default_entries_used_in_checked_runs(pfun):
    script = parse_script("clean-imports Client")
    out, log = run_script(pfun, script, checked=True)
    assert log.ok
