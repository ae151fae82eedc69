import argparse
import json
from pathlib import Path

import numpy as np
import pytest

from stiefel_newton.cli import dumps, main, parse_problem_spec, render_pretty, run, spec_from_dict
from stiefel_newton.errors import BadWeights, DimensionError, ParseError, ValidationFailure

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
BROCKETT = {"problem": "brockett", "matrices": {"A": {"diag": [1, 2, 3, 4]}, "N": {"diag": [1, 2]}}}


def _args(**kw):
    base = dict(seed=None, tol=None, max_iters=None, pure_newton=False, trace=False)
    base.update(kw)
    return argparse.Namespace(**base)


def _write(tmp_path, doc, name="spec.json"):
    path = tmp_path / name
    path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return path


def _strip_timing(text):
    doc = json.loads(text)
    doc.pop("timing", None)
    return json.dumps(doc, sort_keys=True)


def test_parse_brockett_spec():
    spec = parse_problem_spec(PROBLEMS / "brockett_st42.json")
    assert spec.problem == "brockett"
    assert np.array_equal(spec.matrices["A"], np.diag([1.0, 2, 3, 4]))
    assert np.array_equal(spec.matrices["N"], np.diag([1.0, 2]))
    assert spec.options.max_iters == 100 and spec.output["classify"] is True


def test_missing_matrix_names_it(tmp_path):
    path = _write(tmp_path, {"problem": "procrustes", "matrices": {"A": [[1, 0], [0, 1]]}})
    with pytest.raises(DimensionError, match="B"):
        parse_problem_spec(path)


def test_unordered_weights(tmp_path):
    doc = {"problem": "brockett", "matrices": {"A": {"diag": [1, 2, 3, 4]}, "N": {"diag": [2, 1]}}}
    with pytest.raises(BadWeights):
        parse_problem_spec(_write(tmp_path, doc))


def test_parse_error_has_line(tmp_path):
    path = _write(tmp_path, '{\n  "problem": "brockett",\n  "matrices": [1, 2,\n}')
    with pytest.raises(ParseError, match="line 4"):
        parse_problem_spec(path)


def test_parse_missing_file(tmp_path):
    with pytest.raises(ParseError):
        parse_problem_spec(tmp_path / "absent.json")


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"problem": "nope"}, "problem"),
        ({**BROCKETT, "initial": {"random": -1}}, "initial.random"),
        ({**BROCKETT, "initial": {"guess": 1}}, "initial"),
        ({**BROCKETT, "options": {"bogus": 1}}, "options"),
        ({**BROCKETT, "options": {"grad_tol": -1}}, "options"),
        ({"problem": "brockett", "matrices": {"A": {"trace": 1}, "N": [[1]]}}, "matrices.A"),
        ({"problem": "custom-expression", "matrices": {}, "expression": {"value": "0"}}, "expression"),
    ],
)
def test_spec_field_errors(doc, field):
    with pytest.raises(ParseError, match=field):
        spec_from_dict(doc)


def test_census_index_requires_brockett():
    doc = {"problem": "procrustes", "matrices": {"A": np.eye(3).tolist(), "B": np.eye(3)[:, :2].tolist()}}
    with pytest.raises(ParseError, match="census_index"):
        spec_from_dict({**doc, "initial": {"census_index": 0}})


def test_enumerate_table():
    code, rep = run("enumerate", spec_from_dict(BROCKETT), _args())
    assert code == 0
    rows = rep["result"]["points"]
    assert rep["result"]["count"] == len(rows) == 48
    values = [round(r["value"]) for r in rows]
    assert values == sorted(values)
    assert {v: values.count(v) for v in set(values)} == {4: 4, 5: 8, 6: 4, 7: 8, 8: 8, 9: 4, 10: 8, 11: 4}
    assert rows[0]["columns"] == [2, 1] and rows[0]["kind"] == "LocalMinimum"
    assert rows[-1]["columns"] == [3, 4] and rows[-1]["kind"] == "LocalMaximum"


def test_enumerate_rejects_other_problems():
    code, rep = run("enumerate", parse_problem_spec(PROBLEMS / "procrustes_8x3.json"), _args())
    assert code == 2 and rep["error"]["type"] == "ParseError"


def test_solve_lands_on_census_row():
    code, rep = run("solve", spec_from_dict(BROCKETT), _args(seed=7))
    res = rep["result"]
    assert code == 0 and res["status"] == "Converged"
    assert res["nearest_census"]["distance"] <= 1e-6
    assert res["value"] == pytest.approx(res["nearest_census"]["value"], abs=1e-8)
    assert res["classification"]["kind"] in {"LocalMinimum", "LocalMaximum", "Saddle"}
    assert rep["resolved"]["options"]["grad_tol"] == 1e-10


def test_solve_trace_gated():
    spec = spec_from_dict(BROCKETT)
    assert "trace" not in run("solve", spec, _args())[1]
    _, rep = run("solve", spec, _args(trace=True))
    assert rep["trace"][-1]["step"] == "final"


def test_solve_nonconvergence_exit_code():
    code, rep = run("solve", spec_from_dict(BROCKETT), _args(max_iters=1, seed=3))
    assert code == 1 and rep["result"]["status"] == "MaxIters"


def test_classify_saddle_e4_e2():
    code, rep = run("classify", parse_problem_spec(PROBLEMS / "brockett_e4_e2.json"), _args())
    assert code == 0
    assert rep["result"]["classification"]["kind"] == "Saddle"
    assert rep["result"]["value"] == pytest.approx(8.0, abs=1e-12)


def test_classify_census_index():
    code, rep = run("classify", spec_from_dict({**BROCKETT, "initial": {"census_index": 47}}), _args())
    assert code == 0 and rep["result"]["classification"]["kind"] == "LocalMaximum"


def test_classify_noncritical_is_input_error():
    code, rep = run("classify", spec_from_dict(BROCKETT), _args())
    assert code == 2 and rep["error"]["type"] == "NotCritical" and rep["error"]["hint"]


def test_initial_matrix_not_orthonormal():
    spec = spec_from_dict({**BROCKETT, "initial": {"matrix": [[1, 0], [0, 2], [0, 0], [0, 0]]}})
    code, rep = run("classify", spec, _args())
    assert code == 2 and rep["error"]["type"] == "ConstraintViolation"


@pytest.mark.parametrize("name", ["brockett_e4_e2.json", "procrustes_8x3.json", "kron_quadratic.json"])
def test_check_passes(name):
    code, rep = run("check", parse_problem_spec(PROBLEMS / name), _args())
    failed = [c["quantity"] for c in rep["result"]["checks"] if not c["passed"]]
    assert code == 0 and rep["result"]["passed"], failed


def test_check_includes_riemannian_at_critical_point():
    _, rep = run("check", parse_problem_spec(PROBLEMS / "brockett_e4_e2.json"), _args())
    names = [c["quantity"] for c in rep["result"]["checks"]]
    assert sum("Riemannian Hessian" in q for q in names) == 5


def test_custom_expression_solves():
    code, rep = run("solve", parse_problem_spec(PROBLEMS / "kron_quadratic.json"), _args())
    assert code == 0 and rep["result"]["criticality"]["embedded_grad_norm"] <= 1e-10


def test_custom_expression_has_no_builtins():
    doc = {
        "problem": "custom-expression",
        "matrices": {},
        "expression": {"value": "__import__('os')", "gradient": "U", "shape": [3, 2]},
    }
    with pytest.raises(ParseError, match="__import__"):
        spec_from_dict(doc)


def test_custom_expression_wrong_gradient():
    doc = {
        "problem": "custom-expression",
        "matrices": {},
        "expression": {"value": "sum(U * U)", "gradient": "U", "shape": [3, 2]},
    }
    with pytest.raises(ValidationFailure, match="gradient"):
        spec_from_dict(doc)


def test_report_round_trip():
    _, rep = run("solve", spec_from_dict(BROCKETT), _args(trace=True))
    back = json.loads(dumps(rep, indent=2))
    assert np.array_equal(np.array(back["result"]["point"]), np.array(rep["result"]["point"]))
    assert back["result"]["value"] == rep["result"]["value"]
    assert [r["cost"] for r in back["trace"]] == [r["cost"] for r in rep["trace"]]


def test_dumps_formatting():
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(2.0) == "2.0"
    assert dumps(float("nan")) == "null"
    assert dumps({"a": [1, True, None]}) == '{"a": [1, true, null]}'


def test_main_deterministic(capsys):
    argv = ["solve", "--spec", str(PROBLEMS / "brockett_st42.json"), "--seed", "5", "--trace"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert _strip_timing(first) == _strip_timing(second)
    assert first.count('"timing"') == 1


def test_main_pretty(capsys):
    assert main(["enumerate", "--spec", str(PROBLEMS / "brockett_st42.json"), "--pretty"]) == 0
    out = capsys.readouterr().out
    assert "48 critical points" in out and "LocalMinimum" in out


def test_main_pretty_error(capsys):
    assert main(["classify", "--spec", str(PROBLEMS / "brockett_st42.json"), "--pretty"]) == 2
    out = capsys.readouterr().out
    assert "NotCritical" in out and "hint:" in out


def test_main_parse_error(tmp_path, capsys):
    assert main(["solve", "--spec", str(_write(tmp_path, "{"))]) == 2
    assert "ParseError" in capsys.readouterr().err


def test_main_negative_seed(capsys):
    assert main(["solve", "--spec", str(PROBLEMS / "brockett_st42.json"), "--seed", "-1"]) == 2


def test_render_pretty_solve():
    _, rep = run("solve", spec_from_dict(BROCKETT), _args(trace=True))
    text = render_pretty(rep)
    assert "status: Converged" in text and "nearest census point" in text and "k=  0" in text
