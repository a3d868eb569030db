import json
from pathlib import Path

import numpy as np
import pytest

from nlasso.cli import eta_grid, main

from oracles import nlasso_cvxpy

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "example_experiment.toml"


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def gen_args(tmp_path, tag="a"):
    return [
        "gen", "--model", "sbm", "--clusters", "2", "--sizes", "6,6", "--pin", "0.7", "--pout", "0.1",
        "--seed", "5", "--out", str(tmp_path / f"{tag}.g.json"), "--partition", str(tmp_path / f"{tag}.p.json"),
        "--signal", "0,1", "--labels", str(tmp_path / f"{tag}.l.json"), "--train-size", "5", "--sigma", "0.1",
    ]


class TestGen:
    def test_deterministic(self, tmp_path):
        assert main(gen_args(tmp_path, "a")) == 0
        assert main(gen_args(tmp_path, "b")) == 0
        for suffix in ("g.json", "p.json", "l.json", "g.json.signal.json"):
            assert (tmp_path / f"a.{suffix}").read_bytes() == (tmp_path / f"b.{suffix}").read_bytes()

    def test_usage_errors(self, tmp_path):
        args = gen_args(tmp_path)
        out = args.index("--out")
        assert main(args[:out] + args[out + 2:]) == 2
        assert main([a if a != "6,6" else "6,6,6" for a in args]) == 2
        assert main([a if a != "0.7" else "1.7" for a in args]) == 2

    def test_exhausted_generator(self, tmp_path):
        args = gen_args(tmp_path)
        args[args.index("--pout") + 1] = "0"
        assert main(args) == 1


class TestSolve:
    def setup_graph(self, tmp_path):
        edges = [[0, 1, 1.0], [1, 2, 2.0], [2, 3, 1.0], [0, 3, 0.5]]
        g = write(tmp_path / "g.json", {"nodes": 4, "edges": edges})
        lab = write(tmp_path / "l.json", {"training_set": [0, 2], "labels": {"0": 1.0, "2": -1.0}})
        return g, lab, edges

    def test_matches_oracle(self, tmp_path):
        g, lab, edges = self.setup_graph(tmp_path)
        out = tmp_path / "s.json"
        code = main(["solve", "--graph", g, "--labels", lab, "--lambda", "0.2", "--max-iters", "200000",
                     "--out", str(out)])
        doc = json.loads(out.read_text())
        assert code == 0 and doc["meta"]["converged"]
        _, opt = nlasso_cvxpy(4, [tuple(e) for e in edges], [0, 2], [1.0, -1.0], 0.2)
        assert abs(doc["objective"] - opt) <= 1e-4 * abs(opt)

    def test_default_tol_recorded(self, tmp_path):
        g, lab, _ = self.setup_graph(tmp_path)
        main(["solve", "--graph", g, "--labels", lab, "--lambda", "0.2", "--out", str(tmp_path / "s.json")])
        assert json.loads((tmp_path / "s.json").read_text())["meta"]["tol"] == 1e-7

    def test_not_converged(self, tmp_path):
        g, lab, _ = self.setup_graph(tmp_path)
        out = tmp_path / "s.json"
        assert main(["solve", "--graph", g, "--labels", lab, "--lambda", "0.2", "--max-iters", "3",
                     "--out", str(out)]) == 3
        assert json.loads(out.read_text())["iters"] == 3

    def test_bad_lambda_and_files(self, tmp_path):
        g, lab, _ = self.setup_graph(tmp_path)
        assert main(["solve", "--graph", g, "--labels", lab, "--lambda", "0", "--out", "x"]) == 2
        assert main(["solve", "--graph", g, "--labels", lab, "--lambda", "-1", "--out", "x"]) == 2
        assert main(["solve", "--graph", str(tmp_path / "none.json"), "--labels", lab, "--lambda", "1",
                     "--out", "x"]) == 1


class TestCertify:
    def files(self, tmp_path):
        g = write(tmp_path / "g.json", {"nodes": 2, "edges": [[0, 1, 1.0]]})
        p = write(tmp_path / "p.json", {"clusters": [[0], [1]]})
        t = write(tmp_path / "t.json", {"training_set": [0, 1]})
        return ["certify", "--graph", g, "--partition", p, "--train", t]

    def test_certified_and_refuted(self, tmp_path):
        base = self.files(tmp_path)
        out = tmp_path / "c.json"
        assert main(base + ["--K", "2", "--L", "1", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["status"] == "certified"
        assert main(base + ["--K", "1.9", "--L", "1", "--out", str(out)]) == 4
        assert json.loads(out.read_text())["status"] == "refuted"

    def test_max_L(self, tmp_path):
        out = tmp_path / "c.json"
        assert main(self.files(tmp_path) + ["--K", "2", "--max-L", "--tol", "1e-9", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["L"] == pytest.approx(1.0, abs=1e-8)

    def test_ncc_block(self, tmp_path):
        out = tmp_path / "c.json"
        main(self.files(tmp_path) + ["--K", "2", "--L", "1", "--ncc-samples", "100", "--out", str(out)])
        assert json.loads(out.read_text())["ncc"]["violated"] is False

    def test_missing_cluster(self, tmp_path):
        base = self.files(tmp_path)
        base[base.index("--train") + 1] = write(tmp_path / "t1.json", {"training_set": [0]})
        assert main(base + ["--K", "2", "--max-L", "--out", str(tmp_path / "c.json")]) == 4

    def test_needs_L_or_max_L(self, tmp_path):
        assert main(self.files(tmp_path) + ["--K", "2", "--out", str(tmp_path / "c.json")]) == 2


class TestExperimentAndReport:
    def test_pipeline(self, tmp_path):
        res = tmp_path / "r.csv"
        assert main(["experiment", "--config", str(CONFIG), "--out", str(res)]) == 0
        rows = res.read_text().splitlines()
        # trials x sigmas x train_sizes x lambdas in the bundled config
        assert len(rows) == 1 + 3 * 2 * 2 * 1
        again = tmp_path / "r2.csv"
        main(["experiment", "--config", str(CONFIG), "--out", str(again), "--n-jobs", "2"])
        assert again.read_bytes() == res.read_bytes()

        bound = tmp_path / "b.csv"
        assert main(["report", "--results", str(res), "--eta-grid", "0.5:2:0.5", "--sigma", "0.5", "--M", "12",
                     "--out", str(bound)]) == 0
        assert len(bound.read_text().splitlines()) == 1 + 4
        meta = json.loads((tmp_path / "b.csv.meta.json").read_text())["meta"]
        assert meta["trials"] == 3 and meta["cell"]["M"] == 12
        # several cells selected
        assert main(["report", "--results", str(res), "--eta-grid", "0.5:2:0.5", "--out", str(bound)]) == 2
        assert main(["report", "--results", str(res), "--eta-grid", "0.5:2:0", "--out", str(bound)]) == 2

    def test_config_error(self, tmp_path):
        bad = tmp_path / "c.toml"
        bad.write_text(CONFIG.read_text().replace("trials = 3", "trials = 0"))
        assert main(["experiment", "--config", str(bad), "--out", str(tmp_path / "r.csv")]) == 1
        assert not (tmp_path / "r.csv").exists()


def test_eta_grid():
    assert np.allclose(eta_grid("0.1:0.5:0.1"), [0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.allclose(eta_grid("1:1:1"), [1.0])
