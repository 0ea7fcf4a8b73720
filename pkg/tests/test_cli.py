import json
import math

import pytest

from gwave.cli import main, render_json, run, strip_timestamp
from gwave.scenario import ParseError, ScenarioError, ValidationError, load_scenario, parse_scenario

from conftest import GOLDEN, SCENARIOS

FIXTURES = ["delta", "delta-squared", "heaviside", "plane-wave-1d", "rotating-wave-2d", "smooth-gaussian"]

MINIMAL = """
[scenario]
dimension = {d}
[grid]
k_min = 4
k_max = 12
[family]
kind = smooth
f = exp(-x1^2)
[points]
p = {point}
[directions]
a = {direction}
"""


def scenario_text(d=1, point="0", direction="1"):
    return MINIMAL.format(d=d, point=point, direction=direction)


# --- loading ----------------------------------------------------------------------

def test_all_fixtures_load():
    for name in FIXTURES:
        sc = load_scenario(SCENARIOS / f"{name}.ini")
        assert sc.points and sc.directions


def test_delta_fixture_shape():
    sc = load_scenario(SCENARIOS / "delta.ini")
    assert len(sc.points) == 2 and len(sc.directions) == 2


def test_direction_normalized():
    text = scenario_text(2, "(0, 0)", "(1,1)").replace("exp(-x1^2)", "exp(-x1^2-x2^2)")
    sc = parse_scenario(text)
    v = sc.directions[0].at(0.01)
    assert v == pytest.approx([1 / math.sqrt(2)] * 2, abs=1e-12)


def test_log_point_accepted():
    sc = parse_scenario(scenario_text(point="1/log(eps)"))
    assert sc.points[0].at(0.01)[0] < 0


def test_malformed_expression_is_parse_error_with_line():
    with pytest.raises(ParseError) as e:
        parse_scenario(scenario_text(point="eps^"))
    assert e.value.line == 11


@pytest.mark.parametrize("patch, field", [
    (("kind = smooth", "kind = spline"), "family.kind"),
    (("a = 1", "a = 1, 2"), "directions.a"),
    (("dimension = 1", "dimension = 3"), "scenario.dimension"),
    (("p = 0", "p = x1"), "points.p"),
    (("a = 1", "a = 0"), "directions.a"),
])
def test_validation_errors(patch, field):
    with pytest.raises(ValidationError) as e:
        parse_scenario(scenario_text().replace(*patch))
    assert e.value.field == field


def test_unknown_expectation_target():
    with pytest.raises(ValidationError):
        parse_scenario(scenario_text() + "[expect]\nq/a = Regular\n")


def test_duplicate_key_is_parse_error():
    with pytest.raises(ParseError):
        parse_scenario(scenario_text() + "[points]\n")


def test_missing_file():
    with pytest.raises(ScenarioError):
        load_scenario("/nonexistent/x.ini")


# --- exit codes ---------------------------------------------------------------------

def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["bogus"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["wavefront"])
    assert e.value.code == 2
    assert main(["wavefront", "--scenario", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text(scenario_text(point="eps^"))
    assert main(["wavefront", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 11" in capsys.readouterr().err


def test_unwritable_output_exit_2(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code = main(["wavefront", "--scenario", str(SCENARIOS / "smooth-gaussian.ini"), "--out", str(blocker / "sub")])
    assert code == 2


def test_wrong_expectation_exit_1(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(load_text("delta").replace("half/plus = Regular", "half/plus = Singular"))
    assert main(["wavefront", "--scenario", str(p), "--out", str(tmp_path)]) == 1


def test_inconclusive_exit_3(tmp_path):
    # eps^5.6 * delta: orders 1..5 pass, m = 6 fails by 0.4 < the Singular margin
    p = tmp_path / "s.ini"
    text = load_text("delta").replace("center = 0\n", "center = 0\nscale = eps^5.6\n", 1)
    p.write_text(text.split("[expect]")[0])
    assert main(["wavefront", "--scenario", str(p), "--out", str(tmp_path)]) == 3
    doc = json.loads((tmp_path / "delta-wavefront.json").read_text())
    assert doc["results"][0]["verdict"] == "Inconclusive"


def test_eps_floor_trims_grid():
    sc = load_scenario(SCENARIOS / "delta.ini", eps_floor=2.0**-20)
    assert sc.grid.values.min() >= 2.0**-20


def test_selftest_exit_0(tmp_path):
    assert main(["selftest", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "selftest-selftest.json").read_text())
    assert all(r["passed"] for r in doc["results"])


def load_text(name):
    return (SCENARIOS / f"{name}.ini").read_text()


# --- reports, determinism and golden files ---------------------------------------------

def test_outputs_written(tmp_path):
    assert main(["wavefront", "--scenario", str(SCENARIOS / "delta.ini"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "delta-wavefront.json").read_text())
    rep = doc["results"][0]["report"]
    assert {"subject", "mode", "rows", "verdict", "diagnostics"} <= rep.keys()
    header = (tmp_path / "delta-wavefront-curves.csv").read_text().splitlines()[0]
    assert header == "report,m,eps,sup,fitted_exponent"


def test_deterministic_json():
    sc = load_scenario(SCENARIOS / "heaviside.ini")
    a = render_json(strip_timestamp(run(sc, "wavefront")[1]))
    b = render_json(strip_timestamp(run(load_scenario(SCENARIOS / "heaviside.ini", threads=4), "wavefront")[1]))
    assert a == b


def _close(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and a.keys() == b.keys(), path
        for k in a:
            _close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _close(x, y, f"{path}[{i}]")
    elif isinstance(a, float) and isinstance(b, float):
        assert b == pytest.approx(a, rel=1e-6, abs=1e-12), path
    else:
        assert a == b, path


GOLDEN_CASES = [(f, "wavefront") for f in FIXTURES] + [("rotating-wave-2d", "consistency")]


@pytest.mark.parametrize("fixture, command", GOLDEN_CASES, ids=[f"{f}-{c}" for f, c in GOLDEN_CASES])
def test_golden(fixture, command, regen_golden):
    code, doc = run(load_scenario(SCENARIOS / f"{fixture}.ini", threads=4), command)
    assert code == 0
    got = json.loads(render_json(strip_timestamp(doc)))
    path = GOLDEN / f"{fixture}-{command}.json"
    if regen_golden:
        GOLDEN.mkdir(exist_ok=True)
        path.write_text(render_json(got))
        pytest.skip("golden file regenerated")
    assert path.exists(), "golden file missing; run pytest --regen-golden"
    _close(json.loads(path.read_text()), got)


def test_consistency_localization_row():
    _, doc = run(load_scenario(SCENARIOS / "rotating-wave-2d.ini", threads=4), "consistency")
    res = doc["results"][0]
    assert res["consistent"] is True
    loc = {r["direction"]: r["verdict"] for r in res["localization"]}
    assert loc["xi0"] == "Regular" and loc["theta_eps"] == "Singular"
