import csv
import io
import json
from fractions import Fraction

import numpy as np
import pytest

from cdspace import MetricMeasureSpace, ProbMeasure, grid_space, path_space
from cdspace import io as cio
from cdspace.cli import main
from cdspace.errors import InvalidMeasure, InvalidSpace


def write(path, obj):
    path.write_text(cio.dumps(obj), encoding="utf-8")
    return str(path)


@pytest.fixture
def files(tmp_path):
    sp = path_space(17)
    x = np.linspace(0, 1, 17)
    left = {str(i): 1 for i in range(17) if x[i] <= 0.25}
    right = {str(i): 1 for i in range(17) if x[i] >= 0.75}
    mu0 = cio.measure_to_dict(ProbMeasure(sp, [sp.m[i] if str(i) in left else 0 for i in range(17)] / sum(
        sp.m[i] for i in range(17) if str(i) in left)))
    mu1 = cio.measure_to_dict(ProbMeasure(sp, [sp.m[i] if str(i) in right else 0 for i in range(17)] / sum(
        sp.m[i] for i in range(17) if str(i) in right)))
    return {
        "space": write(tmp_path / "space.json", cio.space_to_dict(sp)),
        "mu0": write(tmp_path / "mu0.json", mu0),
        "mu1": write(tmp_path / "mu1.json", mu1),
        "d0": write(tmp_path / "d0.json", {"weights": {"0": 1}}),
        "d1": write(tmp_path / "d1.json", {"weights": {"4": 1}}),
        "fn": write(tmp_path / "fn.json", {"u": {str(i): float(x[i]) for i in range(17)}}),
        "pairs": write(tmp_path / "pairs.json", {"pairs": [{"mu0": mu0, "mu1": mu1}]}),
        "dir": tmp_path,
    }


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_space_round_trip_graph_and_matrix():
    for sp in (path_space(5), grid_space(2, 3)):
        back = cio.space_from_dict(json.loads(cio.dumps(cio.space_to_dict(sp))))
        assert back.points == sp.points and np.array_equal(back.dist, sp.dist) and np.array_equal(back.m, sp.m)
        assert back.edges == sp.edges
    mat = MetricMeasureSpace(("a", "b"), [[0, 2], [2, 0]], [1, 3])
    back = cio.space_from_dict(json.loads(cio.dumps(cio.space_to_dict(mat))))
    assert np.array_equal(back.dist, mat.dist) and not back.is_graph


def test_rational_space_stays_exact():
    data = {"vertices": [{"id": "a", "m": "1/3"}, {"id": "b", "m": 1}, {"id": "c", "m": "2/3"}],
            "edges": [{"u": "a", "v": "b", "length": "1/3"}, {"u": "b", "v": "c", "length": "1/3"}]}
    sp = cio.space_from_dict(data)
    assert sp.m_exact[0] == Fraction(1, 3) and sp.dist_exact[0, 2] == Fraction(2, 3)
    assert cio.space_to_dict(sp) == {**data, "vertices": [{"id": "a", "m": "1/3"}, {"id": "b", "m": 1.0},
                                                          {"id": "c", "m": "2/3"}]}
    mu0 = cio.measure_from_dict(sp, {"weights": {"a": "1"}})
    mu1 = cio.measure_from_dict(sp, {"weights": {"c": "1"}})
    from cdspace import w2_squared
    assert w2_squared(mu0, mu1) == Fraction(4, 9)
    assert mu0.density()[0] == 3


def test_bad_space_files():
    with pytest.raises(InvalidSpace):
        cio.space_from_dict({"nodes": []})
    with pytest.raises(InvalidSpace):
        cio.space_from_dict({"points": ["a"], "distance_matrix": [[0]], "measure": [1, 2]})
    with pytest.raises(InvalidSpace):
        cio.space_from_dict({"vertices": [{"id": "a"}]})


def test_measure_formats():
    sp = path_space(3)
    mu = cio.measure_from_dict(sp, {"weights": {"0": "1/3", "2": "2/3"}})
    assert mu.exact and mu.weights[2] == Fraction(2, 3)
    assert cio.measure_to_dict(mu) == {"weights": {"0": "1/3", "2": "2/3"}}
    fl = cio.measure_from_dict(sp, {"weights": {"1": 0.5, "2": 0.5}})
    assert not fl.exact
    with pytest.raises(InvalidMeasure):
        cio.measure_from_dict(sp, {"weights": {"0": "1/2", "1": 0.5}})
    with pytest.raises(InvalidMeasure):
        cio.measure_from_dict(sp, {"w": {}})
    with pytest.raises(KeyError):
        cio.measure_from_dict(sp, {"weights": {"9": 1}})


def test_function_file():
    sp = path_space(3)
    u, g = cio.function_from_dict(sp, {"u": {"0": 1, "2": "1/2"}})
    assert u.tolist() == [1, 0, 0.5] and g is None
    _, g = cio.function_from_dict(sp, {"u": {}, "g": {"1": 2}})
    assert g.tolist() == [0, 2, 0]


def test_constants_command(capsys):
    code, out = run(capsys, "constants", "--K", "0", "--N", "2", "--D", "1")
    rep = json.loads(out)
    assert code == 0
    assert (rep["C"], rep["P"], rep["doubling"], rep["main_constant"]) == (1, 1, 4, 32)
    code, out = run(capsys, "constants", "--K", "-1", "--N", "2", "--D", "1", "--t", "0.5")
    assert json.loads(out)["beta"] == pytest.approx(0.886819, abs=1e-6)


def test_w2_dirac(capsys, files):
    code, out = run(capsys, "w2", "--space", files["space"], "--mu0", files["d0"], "--mu1", files["d1"])
    assert code == 0 and json.loads(out)["w2"] == pytest.approx(0.25)


def test_geodesic_csv(capsys, files):
    code, out = run(capsys, "geodesic", "--space", files["space"], "--mu0", files["mu0"], "--mu1", files["mu1"],
                    "--depth", "3", "--format", "csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["t", "point_id", "rho", "m_weight"]
    times = sorted({float(r["t"]) for r in rows})
    assert len(times) == 9
    sup = {t: max(float(r["rho"]) for r in rows if float(r["t"]) == t) for t in times}
    assert max(sup.values()) <= 1.25 * max(sup[0.0], sup[1.0])


def test_checks_and_exit_codes(capsys, files):
    code, out = run(capsys, "check-cd", "--space", files["space"], "--pairs", files["pairs"], "--depth", "2")
    assert code == 0 and json.loads(out)["certified"]
    code, out = run(capsys, "check-mcp", "--space", files["space"], "--x", "0", "--N", "2", "--depth", "2")
    assert code == 0 and json.loads(out)["passed"]
    code, out = run(capsys, "check-poincare", "--space", files["space"], "--function", files["fn"], "--center", "8",
                    "--radius", "0.3", "--N", "2", "--mode", "averaged-main")
    assert code == 0 and json.loads(out)["outcome"] == "holds"
    code, out = run(capsys, "interpolate", "--space", files["space"], "--mu0", files["mu0"], "--mu1", files["mu1"])
    assert code == 0 and json.loads(out)["excess"] <= 1e-7
    # an unreachable threshold leaves positive excess, which is a failed margin
    code, out = run(capsys, "interpolate", "--space", files["space"], "--mu0", files["d0"], "--mu1", files["d1"],
                    "--threshold", "1")
    assert code == 1 and json.loads(out)["excess"] > 0


def test_sweep_and_validate(capsys, files, tmp_path):
    code, out = run(capsys, "sweep-threshold", "--space", files["space"], "--mu0", files["mu0"], "--mu1", files["mu1"],
                    "--steps", "3")
    rep = json.loads(out)
    assert code == 0 and len(rep["sweep"]) == 3
    assert rep["sweep"][0]["excess"] >= rep["sweep"][-1]["excess"]
    code, out = run(capsys, "validate", "--space", files["space"])
    assert code == 0 and json.loads(out)["points"] == 17
    bad = write(tmp_path / "bad.json", {"points": ["a", "b", "c"], "measure": [1, 1, 1],
                                        "distance_matrix": [[0, 1, 3], [1, 0, 1], [3, 1, 0]]})
    code, out = run(capsys, "validate", "--space", bad)
    assert code == 1 and json.loads(out)["violations"][0]["kind"] == "triangle"


def test_errors_and_usage(capsys, files):
    code, out = run(capsys, "w2", "--space", "missing.json", "--mu0", files["d0"], "--mu1", files["d1"])
    assert code == 1 and json.loads(out)["error"] == "FileNotFoundError"
    code, out = run(capsys, "check-cd", "--space", files["space"])
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["w2", "--space", files["space"]])
    assert exc.value.code == 2
    code, _ = run(capsys, "constants", "--N", "1")
    assert code == 2


def test_out_file_and_determinism(capsys, files):
    out1 = files["dir"] / "a.json"
    out2 = files["dir"] / "b.json"
    argv = ["geodesic", "--space", files["space"], "--mu0", files["mu0"], "--mu1", files["mu1"], "--depth", "2"]
    assert main(argv + ["--out", str(out1)]) == 0
    # re-ingest the serialized space and run again: byte-identical report
    sp = cio.load_space(files["space"])
    again = write(files["dir"] / "space2.json", cio.space_to_dict(sp))
    argv2 = list(argv)
    argv2[2] = again
    assert main(argv2 + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert capsys.readouterr().out == ""
