"""Command-line interface and result documents."""

import csv
import io
import json

import numpy as np
import pytest

from spectra_pde import PdeProblem, eval2, solve_pde
from spectra_pde import documents as docs
from spectra_pde.cli import main

DIRICHLET_ONE = {e: {"type": "dirichlet", "data": "1"} for e in ("left", "right", "down", "up")}


def problem(**over):
    doc = {"schema": docs.SCHEMA, "operator": "lap(u)", "domain": [-1, 1, -1, 1], "rhs": "0",
           "bc": dict(DIRICHLET_ONE)}
    doc.update(over)
    return doc


@pytest.fixture
def write(tmp_path):
    def _write(doc, name="problem.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
        return str(path)

    return _write


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestSolve:
    def test_constant_solution(self, write, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, _, err = run(["solve", write(problem()), "--out", out], capsys)
        assert code == 0 and "resolved" in err
        doc = json.loads(out.read_text())
        assert doc["schema"] == docs.SCHEMA and doc["X"]["shape"] == [1, 1]
        assert doc["diagnostics"]["splitting_rank"] == 2

        code, text, _ = run(["eval", out, "--grid", "3x4"], capsys)
        rows = read_csv(text)
        assert code == 0 and len(rows) == 12
        assert all(float(r["re"]) == pytest.approx(1.0, abs=1e-13) and float(r["im"]) == 0 for r in rows)

    def test_stdout(self, write, capsys):
        code, text, _ = run(["solve", write(problem())], capsys)
        assert code == 0 and json.loads(text)["kind"] == "pde-solution"

    def test_corner_mismatch_exit_3(self, write, capsys):
        bc = dict(DIRICHLET_ONE, left={"type": "dirichlet", "data": "1 + 0.5*y"})
        code, _, err = run(["solve", write(problem(bc=bc))], capsys)
        assert code == 3 and "compatibility defect" in err
        assert len(err.strip().splitlines()) == 1

    def test_unresolved_exit_2(self, write, capsys):
        doc = problem(operator="lap(u) + 2000*u", rhs="cos(30*x*y)", max_n=17)
        assert run(["solve", write(doc)], capsys)[0] == 2

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.update(oprator=d.pop("operator")),
            lambda d: d.pop("schema"),
            lambda d: d.update(domain=[1, -1, -1, 1]),
            lambda d: d.update(bc={"top": {"type": "dirichlet", "data": "0"}}),
            lambda d: d.update(bc={"left": {"type": "robin", "data": "0"}}),
            lambda d: d.update(operator="lap(u) + "),
            lambda d: d.update(tol="small"),
        ],
        ids=["misspelt-key", "no-schema", "bad-domain", "bad-edge", "bad-bc-type", "parse-error", "bad-tol"],
    )
    def test_schema_errors_exit_4(self, mutate, write, capsys):
        doc = problem()
        mutate(doc)
        assert run(["solve", write(doc)], capsys)[0] == 4

    def test_not_json(self, write, capsys):
        assert run(["solve", write("{not json")], capsys)[0] == 4

    def test_missing_file(self, tmp_path, capsys):
        assert run(["solve", tmp_path / "nope.json"], capsys)[0] == 4

    def test_usage_error(self, capsys):
        assert run(["solve"], capsys)[0] == 4
        assert run([], capsys)[0] == 4

    def test_general_constraint(self, write, tmp_path, capsys):
        bc = {"left": {"type": "dirichlet", "data": "0"},
              "right": {"type": "expr", "expr": "u/5 + diff(u)", "data": "0"},
              "down": [{"type": "dirichlet", "data": "exp(-50*(x-0.2)^2)"}, {"type": "neumann", "data": "0"}]}
        doc = problem(operator="diff(u,y,2) - diff(u,x,2) + 5*u", domain=[-1, 1, 0, 1], bc=bc)
        out = tmp_path / "kg.json"
        assert run(["solve", write(doc), "--out", out], capsys)[0] == 0
        d = json.loads(out.read_text())["diagnostics"]
        assert d["solver_path"] == "k2" and d["subproblems"] == 1


class TestDeterminism:
    def test_identical_payloads(self, write, tmp_path, capsys):
        doc = problem(operator="lap(u) + 10*u", rhs="exp(x)*cos(2*y)")
        src = write(doc)
        outs = [tmp_path / f"r{i}.json" for i in range(2)]
        for o in outs:
            assert run(["solve", src, "--out", o], capsys)[0] == 0
        a, b = (json.loads(o.read_text()) for o in outs)
        assert a["payload_sha256"] == b["payload_sha256"] == docs.payload_hash(a)
        a.pop("timing"), b.pop("timing")
        assert a == b

    def test_hash_covers_payload(self, write, tmp_path, capsys):
        out = tmp_path / "r.json"
        run(["solve", write(problem(rhs="x*y")), "--out", out], capsys)
        doc = json.loads(out.read_text())
        doc["X"]["data"][0][0] = 0.5
        assert docs.payload_hash(doc) != doc["payload_sha256"]


@pytest.fixture(scope="module")
def solution():
    zero = {e: "dirichlet: 0" for e in ("left", "right", "down", "up")}
    return solve_pde(PdeProblem("lap(u) + x*u", domain=(0, 2, -1, 1), bcs=zero, rhs="cos(x*y) + i*x"))


class TestRoundTrip:
    def test_eval_matches_in_memory(self, solution, tmp_path, capsys):
        sol = solution
        path = tmp_path / "r.json"
        path.write_text(docs.dump_document(docs.solution_document(sol, path)))
        u = docs.load_solution(path)
        np.testing.assert_array_equal(u.X, sol.u.X)
        code, text, _ = run(["eval", path, "--grid", "5x7"], capsys)
        rows = read_csv(text)
        xs = np.array([float(r["x"]) for r in rows])
        ys = np.array([float(r["y"]) for r in rows])
        got = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        assert code == 0 and len(rows) == 35
        assert ys[0] == ys[4] and xs[0] != xs[1]  # y-major
        np.testing.assert_array_equal(got, eval2(sol.u, xs, ys))

    def test_sidecar(self, solution, tmp_path):
        sol = solution
        path = tmp_path / "big.json"
        doc = docs.solution_document(sol, path, threshold=4)
        path.write_text(docs.dump_document(doc))
        side = tmp_path / doc["X"]["sidecar"]
        raw = side.read_bytes()
        assert raw[:8] == docs.SIDECAR_MAGIC and len(raw) == 8 + 16 * sol.u.X.size
        assert "data" not in doc["X"]
        np.testing.assert_array_equal(docs.load_solution(path).X, sol.u.X)

    def test_sidecar_bad_magic(self, solution, tmp_path):
        sol = solution
        path = tmp_path / "big.json"
        doc = docs.solution_document(sol, path, threshold=4)
        path.write_text(docs.dump_document(doc))
        side = tmp_path / doc["X"]["sidecar"]
        side.write_bytes(b"XXXXXXXX" + side.read_bytes()[8:])
        with pytest.raises(docs.SchemaError):
            docs.load_solution(path)

    def test_points_and_json(self, solution, tmp_path, capsys):
        sol = solution
        path = tmp_path / "r.json"
        path.write_text(docs.dump_document(docs.solution_document(sol, path)))
        code, text, _ = run(["eval", path, "--points", "0.5,0.25;1.5,-0.5", "--format", "json"], capsys)
        doc = json.loads(text)
        assert code == 0 and doc["points"] == [[0.5, 0.25], [1.5, -0.5]]
        re_, im_ = doc["values"][1]
        assert complex(re_, im_) == complex(sol(1.5, -0.5))

    def test_point_outside(self, solution, tmp_path, capsys):
        sol = solution
        path = tmp_path / "r.json"
        path.write_text(docs.dump_document(docs.solution_document(sol, path)))
        code, _, err = run(["eval", path, "--points", "0.5,0;3,0"], capsys)
        assert code == 2 and "(3.0, 0.0)" in err

    def test_two_by_two(self, solution, tmp_path, capsys):
        sol = solution
        path = tmp_path / "r.json"
        path.write_text(docs.dump_document(docs.solution_document(sol, path)))
        text = run(["eval", path, "--grid", "2x2"], capsys)[1]
        assert len(text.strip().splitlines()) == 1 + 4


class TestRank:
    @pytest.mark.parametrize("op,k", [("lap(u) + 1000*u", 2), ("biharm(u)", 3),
                                      ("lap(u) + (x^2+(y+1)^2)*sin(x*(y+1))^2*u", 9)])
    def test_rank_lines(self, op, k, capsys):
        code, text, _ = run(["rank", "--op", op], capsys)
        assert code == 0 and text.splitlines()[0] == f"splitting rank: {k}"
        assert len(text.splitlines()) == 2 + k

    def test_rank_from_file(self, write, capsys):
        code, text, _ = run(["rank", write(problem(operator="biharm(u)")), "--format", "json"], capsys)
        doc = json.loads(text)
        assert code == 0 and doc["splitting_rank"] == 3 and len(doc["terms"]) == 3

    def test_rank_needs_input(self, capsys):
        assert run(["rank"], capsys)[0] == 4

    def test_zero_operator(self, capsys):
        assert run(["rank", "--op", "0*u"], capsys)[0] == 3


class TestOde:
    def test_constant(self, capsys):
        code, text, err = run(["ode", "--op", "diff(u,x,1)", "--bc", "u(-1)=1", "--rhs", "0"], capsys)
        doc = json.loads(text)
        assert code == 0 and doc["degree"] == 0 and doc["coeffs"] == [[1.0, 0.0]]
        assert "degree 0" in err

    def test_singular_perturbation(self, capsys):
        code, text, _ = run(["ode", "--op", "1e-3*diff(u,x,2) + x*diff(u,x,1) + sin(x)*u",
                             "--bc", "u(-1)=1", "--bc", "u(1)=1", "--format", "csv"], capsys)
        rows = read_csv(text)
        c = np.array([float(r["re"]) for r in rows])
        assert code == 0 and len(rows) > 100
        assert abs(c.sum() - 1) <= 1e-10 and abs(np.sum(c * (-1.0) ** np.arange(c.size)) - 1) <= 1e-10

    def test_missing_bc(self, capsys):
        assert run(["ode", "--op", "diff(u,x,1)"], capsys)[0] == 4

    def test_domain(self, capsys):
        code, text, _ = run(["ode", "--op", "diff(u,x,2)", "--bc", "u(0)=0; u(2)=4", "--rhs", "2",
                             "--domain", "0,2"], capsys)
        doc = json.loads(text)
        c = np.array(doc["coeffs"])[:, 0]
        # x^2 on [0, 2] is 1.5 + 2 T_1 + 0.5 T_2 in the mapped variable
        np.testing.assert_allclose(c, [1.5, 2.0, 0.5], atol=1e-13)
