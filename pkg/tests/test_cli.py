import json
import os
import textwrap

import numpy as np
import pytest

from grushin_mvf.cli import ConfigError, compile_expression, load_config, main, run

HERE = os.path.dirname(__file__)
CONFIGS = os.path.join(HERE, "..", "configs")


def write(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return str(path)


BASE = """
[run]
seed = 3
suites = {suites}
out = {out}

[params]
n = 2
alpha = 1.0

[surface]
kind = {kind}
domain = ball
radius = 1.0
{extra}
"""


def config(tmp_path, suites="", kind="flat", extra=""):
    return write(tmp_path, BASE.format(suites=suites, out=tmp_path / "out", kind=kind,
                                       extra=extra))


def test_expression_compiler():
    f = compile_expression("1 + x1 / (1 + x1**2 + x2**2) - sin(pi * x2)", 2)
    x = np.array([[0.5, 0.25], [-1.0, 0.0]])
    np.testing.assert_allclose(f([x[:, 0], x[:, 1]]), 1 + x[:, 0] / (1 + np.sum(x * x, axis=1))
                               - np.sin(np.pi * x[:, 1]))
    for bad in ("__import__('os')", "x3", "x1 ** x2", "open('f')", "x1.real", "[x1]"):
        with pytest.raises(ConfigError):
            compile_expression(bad, 2)


def test_empty_suite_gives_meta_only(tmp_path, capsys):
    assert run(config(tmp_path)) == 0
    with open(tmp_path / "out" / "report.json") as fh:
        report = json.load(fh)
    assert set(report) == {"meta"}
    assert report["meta"]["seed"] == 3


def test_identities_suite(tmp_path):
    path = config(tmp_path, kind="monomial", extra="terms = x1*x2: 1.0")
    assert main(["run", "--config", path, "--suite", "identities"]) == 0
    with open(tmp_path / "out" / "report.json") as fh:
        report = json.load(fh)
    assert len(report["identities"]) == 12
    assert all(r["passed"] and r["max_err"] <= 1e-8 for r in report["identities"])


def test_profile_suite_writes_one_row_per_radius(tmp_path):
    path = config(tmp_path, "profile", extra="\n[profile]\nr_grid = 0.1, 0.2, 0.3, 0.4, 0.5\n")
    assert run(path) == 0
    lines = (tmp_path / "out" / "profile.csv").read_text().splitlines()
    assert lines[0] == "r,c_r,C,M_f_r,f0,verdict,err_est"
    assert len(lines) == 6
    with open(tmp_path / "out" / "report.json") as fh:
        assert json.load(fh)["C"] == pytest.approx(3 / (2 * np.pi), rel=1e-8)


def test_radius_outside_domain_exits_2(tmp_path, capsys):
    path = config(tmp_path, "profile", extra="\n[profile]\nr_grid = 0.5, 1.5\n")
    assert run(path) == 2
    assert "configuration error" in capsys.readouterr().err


@pytest.mark.parametrize("extra,kind", [
    ("", "helix"),
    ("\n[field]\nkind = nonsense\n", "flat"),
    ("\n[mvf]\nmode = sideways\n", "flat"),
])
def test_bad_configs_exit_2(tmp_path, extra, kind):
    assert run(config(tmp_path, "mvf", kind=kind, extra=extra)) == 2


def test_missing_file_exits_2(tmp_path):
    assert run(str(tmp_path / "absent.cfg")) == 2


def test_failing_expectation_exits_1(tmp_path, capsys):
    path = config(tmp_path, "qsigma", kind="radial-power",
                  extra="c = 1.0\nm = 4\n\n[qsigma]\nradii = 0.05, 0.1, 0.2\nexpect = harmonic\n")
    assert run(path) == 1
    assert "FAILED qsigma classified superharmonic" in capsys.readouterr().out


def test_mvf_suite_with_radial_field(tmp_path):
    extra = ("\n[field]\nkind = radial\nk = 2\n\n[mvf]\nmode = subharmonic\n"
             "r_grid = 0.1, 0.3, 0.5\ntol = 1e-6\n")
    assert run(config(tmp_path, "mvf", extra=extra)) == 0
    with open(tmp_path / "out" / "report.json") as fh:
        report = json.load(fh)
    for row in report["mvf"]:
        assert row["verdict"] == "sub"
        assert row["M"] == pytest.approx(0.6 * row["r"] ** 2, rel=1e-6)


def test_shipped_configs_parse():
    for name in sorted(os.listdir(CONFIGS)):
        cfg = load_config(os.path.join(CONFIGS, name))
        assert cfg.suites


def test_repeated_runs_are_byte_identical(tmp_path, monkeypatch):
    extra = ("\n[profile]\nr_grid = 0.1, 0.2\n\n[field]\nkind = expression\nexpr = x1 + x2**2\n"
             "\n[mvf]\nr_grid = 0.1, 0.2\nmode = subharmonic\n")
    path = config(tmp_path, "identities, qsigma, profile, mvf", kind="radial-power",
                  extra="c = 1.0\nm = 4\n" + extra)
    outputs = []
    for i, workers in enumerate(("1", "1", "3")):
        monkeypatch.setenv("GRUSHIN_MVF_WORKERS", workers)
        out = tmp_path / f"run{i}"
        run(path, out=str(out))
        outputs.append({f: (out / f).read_bytes() for f in sorted(os.listdir(out))})
    assert outputs[0] == outputs[1] == outputs[2]
    assert set(outputs[0]) == {"report.json", "profile.csv"}
