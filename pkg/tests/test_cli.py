import os

import pytest

from viewshift.cli import main


@pytest.fixture
def dirs(tmp_path):
    pfun_dir = tmp_path / "pfun"
    pdata_dir = tmp_path / "pdata"
    scripts = tmp_path / "scripts"
    assert main(["corpus", "extract", "pfun", "--out", str(pfun_dir)]) == 0
    assert main(["corpus", "extract", "pdata", "--out", str(pdata_dir)]) == 0
    assert main(["corpus", "extract", "forward-script", "--out", str(scripts)]) == 0
    assert main(["corpus", "extract", "reverse-script", "--out", str(scripts)]) == 0
    return tmp_path


def _dir_bytes(path):
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_apply_then_alpha_eq(dirs, capsys):
    build = dirs / "build"
    code = main([
        "apply", str(dirs / "scripts" / "forward.vs"), str(dirs / "pfun"),
        "--out", str(build), "--checked", "--entries", "r1,r2,r3,r4",
    ])
    assert code == 0
    assert main(["alpha-eq", str(build), str(dirs / "pdata")]) == 0
    out = capsys.readouterr().out
    assert "alpha-equivalent" in out


def test_apply_never_modifies_input(dirs):
    before = _dir_bytes(dirs / "pfun")
    main([
        "apply", str(dirs / "scripts" / "forward.vs"), str(dirs / "pfun"),
        "--out", str(dirs / "b2"),
    ])
    assert _dir_bytes(dirs / "pfun") == before


def test_apply_wrong_view_fails_with_explanation(dirs, capsys):
    code = main([
        "apply", str(dirs / "scripts" / "forward.vs"), str(dirs / "pdata"),
        "--out", str(dirs / "b3"),
    ])
    assert code == 1
    out = capsys.readouterr()
    assert "NotFound" in out.out  # the failing precondition is named


def test_obs_eq(dirs, capsys):
    code = main([
        "obs-eq", str(dirs / "pfun"), str(dirs / "pdata"),
        "--entries", "r1,r2,r3,r4",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("==") == 4


def test_obs_eq_default_entries(dirs):
    assert main(["obs-eq", str(dirs / "pfun"), str(dirs / "pdata")]) == 0


def test_eval_entry(dirs, capsys):
    assert main(["eval", str(dirs / "pfun"), "r2"]) == 0
    assert capsys.readouterr().out.strip() == "3"
    assert main(["eval", str(dirs / "pfun"), "Client.r3"]) == 0
    assert capsys.readouterr().out.strip() == "1+2+3"


def test_render_fixed_point(dirs):
    r1 = dirs / "r1"
    r2 = dirs / "r2"
    assert main(["render", str(dirs / "pfun"), "--out", str(r1)]) == 0
    assert main(["render", str(r1), "--out", str(r2)]) == 0
    assert _dir_bytes(r1) == _dir_bytes(r2)


def test_single_op(dirs, capsys):
    out = dirs / "op_out"
    code = main([
        "op", "rename-top-level", "eval", "EvalMod", "fold1",
        str(dirs / "pfun"), "--out", str(out),
    ])
    assert code == 0
    with open(out / "EvalMod.mfn") as fh:
        assert "fold1" in fh.read()


def test_op_failure_exit_code(dirs, capsys):
    code = main([
        "op", "remove-def", "eval", "EvalMod", str(dirs / "pfun"),
        "--out", str(dirs / "op_fail"),
    ])
    assert code == 1
    assert "StillUsed" in capsys.readouterr().err


def test_usage_errors(dirs, capsys):
    assert main(["corpus", "extract", "nosuch", "--out", str(dirs / "x")]) == 2
    assert main(["frobnicate"]) == 2
    # script syntax error
    bad = dirs / "bad.vs"
    bad.write_text("rename-top-level eval\n")
    assert main(["apply", str(bad), str(dirs / "pfun"), "--out", str(dirs / "y")]) == 2


def test_alpha_eq_differs(dirs):
    assert main(["alpha-eq", str(dirs / "pfun"), str(dirs / "pdata")]) == 1


def test_extract_step_states(dirs):
    out = dirs / "steps"
    assert main(["corpus", "extract", "step-states", "--out", str(out)]) == 0
    assert (out / "step04" / "EvalMod.mfn").exists()
    assert (out / "step11" / "Client.mfn").exists()
