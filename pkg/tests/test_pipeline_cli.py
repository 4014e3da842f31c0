import json
import os

import numpy as np
import pytest

from grn_forge import cli, errors
from grn_forge.benchmark import generate_dag, random_model, sample_expression
from grn_forge.pipeline import PipelineConfig, load_config, run_pipeline, stable_seed
from grn_forge.structure import load_dag, topological_sort


@pytest.fixture(scope="module")
def chain30():
    truth = generate_dag(30, 1.5, seed=42)
    model = random_model(truth, seed=43)
    data = sample_expression(model, 400, seed=44)
    return truth, model, data


def write_expression(matrix, path):
    with open(path, "w") as fh:
        for g in matrix.gene_ids:
            fh.write(g + "\t" + "\t".join(f"{x:.12g}" for x in matrix.row(g)) + "\n")


class TestConfig:
    def test_load_and_override(self, tmp_path):
        f = tmp_path / "cfg"
        f.write_text("seed = 7\nworkers=2\nmax_learn_size = 20  # comment\n")
        cfg = load_config(f)
        assert cfg.seed == 7 and cfg.workers == 2 and cfg.max_learn_size == 20

    def test_unknown_key(self, tmp_path):
        f = tmp_path / "cfg"
        f.write_text("bogus = 1\n")
        with pytest.raises(errors.ConfigError):
            load_config(f)

    def test_bad_value(self, tmp_path):
        f = tmp_path / "cfg"
        f.write_text("seed = banana\n")
        with pytest.raises(errors.ConfigError):
            load_config(f)

    def test_validation(self):
        with pytest.raises(errors.ConfigError):
            PipelineConfig(restarts=0).validate()
        with pytest.raises(errors.ConfigError):
            PipelineConfig(max_learn_size=2).validate()
        with pytest.raises(errors.ConfigError):
            PipelineConfig(truncate_threshold=-1.0).validate()


class TestStableSeed:
    def test_deterministic_and_distinct(self):
        assert stable_seed(1, "learn", "c0", 0) == stable_seed(1, "learn", "c0", 0)
        assert stable_seed(1, "learn", "c0", 0) != stable_seed(1, "learn", "c0", 1)
        assert stable_seed(1, "learn", "c0", 0) != stable_seed(2, "learn", "c0", 0)


class TestRunPipeline:
    def test_smoke_and_manifest(self, tmp_path, chain30):
        truth, _model, data = chain30
        cfg = PipelineConfig(out_dir=str(tmp_path / "out"), seed=1)
        dag, manifest = run_pipeline(cfg, matrix=data, truth=truth)
        assert topological_sort(dag.nodes, dag.edges) is not None
        assert len(manifest["stages"]) == 6
        assert [s["name"] for s in manifest["stages"]] == [
            "correlate", "partition", "sample", "learn", "resolve", "merge",
        ]
        for name in ("network.tsv", "merge_tree.json", "manifest.json", "metrics.json"):
            assert (tmp_path / "out" / name).exists()

    def test_run_twice_byte_identical(self, tmp_path, chain30):
        _truth, _model, data = chain30
        outs = []
        for i in (1, 2):
            cfg = PipelineConfig(out_dir=str(tmp_path / f"r{i}"), seed=9)
            run_pipeline(cfg, matrix=data)
            outs.append((tmp_path / f"r{i}" / "network.tsv").read_bytes())
        assert outs[0] == outs[1]

    def test_workers_do_not_change_output(self, tmp_path, chain30):
        _truth, _model, data = chain30
        outs = []
        for w in (1, 3):
            cfg = PipelineConfig(out_dir=str(tmp_path / f"w{w}"), seed=5, workers=w)
            run_pipeline(cfg, matrix=data)
            outs.append((tmp_path / f"w{w}" / "network.tsv").read_bytes())
        assert outs[0] == outs[1]

    def test_gene_accounting(self, tmp_path, chain30):
        # every input gene lands in exactly one bucket: network nodes,
        # constant exclusions, or isolated singletons
        _truth, _model, data = chain30
        vals = data.values.copy()
        vals[3] = 1.0  # force one constant gene
        from grn_forge.expression import ExpressionMatrix

        data2 = ExpressionMatrix(data.gene_ids, vals)
        cfg = PipelineConfig(out_dir=str(tmp_path / "acct"), seed=2)
        dag, manifest = run_pipeline(cfg, matrix=data2)
        buckets = (
            set(dag.nodes)
            | set(manifest["constant_genes_excluded"])
            | set(manifest["isolated_singletons"])
        )
        assert buckets == set(data2.gene_ids)
        assert (
            len(dag.nodes)
            + len(manifest["constant_genes_excluded"])
            + len(manifest["isolated_singletons"])
            == len(data2.gene_ids)
        )

    def test_dump_intermediate(self, tmp_path, chain30):
        _truth, _model, data = chain30
        cfg = PipelineConfig(out_dir=str(tmp_path / "dump"), seed=3, dump_intermediate=True)
        run_pipeline(cfg, matrix=data)
        inter = tmp_path / "dump" / "intermediate"
        for name in ("pruned_edges.tsv", "communities.tsv", "subcommunities.tsv"):
            assert (inter / name).exists()

    def test_failure_writes_manifest(self, tmp_path):
        cfg = PipelineConfig(
            input=str(tmp_path / "missing.tsv"), out_dir=str(tmp_path / "fail")
        )
        with pytest.raises(OSError):
            run_pipeline(cfg)
        manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
        assert manifest["failed_stage"] == "correlate" and "error" in manifest


class TestCli:
    def test_run_subcommand(self, tmp_path, chain30):
        truth, _model, data = chain30
        expr_file = tmp_path / "expr.tsv"
        write_expression(data, expr_file)
        out = tmp_path / "cliout"
        rc = cli.main([
            "run", "--input", str(expr_file), "--out", str(out), "--seed", "4",
        ])
        assert rc == 0
        assert (out / "network.tsv").exists()

    def test_stagewise_roundtrip(self, tmp_path, chain30):
        _truth, _model, data = chain30
        expr_file = tmp_path / "expr.tsv"
        write_expression(data, expr_file)
        edges = tmp_path / "edges.tsv"
        comms = tmp_path / "comms.tsv"
        subs = tmp_path / "subs.tsv"
        dagf = tmp_path / "dag.tsv"
        assert cli.main(["correlate", "--input", str(expr_file), "--out", str(edges)]) == 0
        assert cli.main(["partition", "--edges", str(edges), "--out", str(comms)]) == 0
        assert cli.main([
            "sample", "--edges", str(edges), "--communities", str(comms),
            "--out", str(subs), "--seed", "1",
        ]) == 0
        genes = ",".join(data.gene_ids[:5])
        assert cli.main([
            "learn", "--input", str(expr_file), "--genes", genes,
            "--out", str(dagf), "--seed", "1",
        ]) == 0
        dag = load_dag(dagf)
        assert set(dag.nodes) == set(data.gene_ids[:5])

    def test_merge_subcommand(self, tmp_path, chain30):
        _truth, _model, data = chain30
        expr_file = tmp_path / "expr.tsv"
        write_expression(data, expr_file)
        edges = tmp_path / "edges.tsv"
        cli.main(["correlate", "--input", str(expr_file), "--out", str(edges)])
        d1, d2 = tmp_path / "d1.tsv", tmp_path / "d2.tsv"
        g = list(data.gene_ids)
        cli.main(["learn", "--input", str(expr_file), "--genes", ",".join(g[:4]),
                  "--out", str(d1), "--seed", "1"])
        cli.main(["learn", "--input", str(expr_file), "--genes", ",".join(g[2:6]),
                  "--out", str(d2), "--seed", "1"])
        merged = tmp_path / "merged.tsv"
        rc = cli.main(["merge", "--input", str(expr_file), "--edges", str(edges),
                       "--dags", str(d1), str(d2), "--out", str(merged)])
        assert rc == 0 and merged.exists()

    def test_benchmark_and_eval(self, tmp_path):
        bdir = tmp_path / "bench"
        rc = cli.main(["benchmark", "--n", "15", "--avg-degree", "2",
                       "--samples", "200", "--seed", "3", "--out-dir", str(bdir)])
        assert rc == 0
        out = tmp_path / "run"
        rc = cli.main(["run", "--input", str(bdir / "expression.tsv"),
                       "--out", str(out), "--seed", "1",
                       "--truth", str(bdir / "truth.tsv")])
        assert rc == 0
        mfile = tmp_path / "metrics.json"
        rc = cli.main(["eval", "--predicted", str(out / "network.tsv"),
                       "--truth", str(bdir / "truth.tsv"), "--out", str(mfile)])
        assert rc == 0
        metrics = json.loads(mfile.read_text())
        assert set(metrics) >= {"skeleton_f1", "shd"}

    def test_exit_code_config_error(self, tmp_path):
        cfgf = tmp_path / "cfg"
        cfgf.write_text("bogus = 1\n")
        assert cli.main(["run", "--config", str(cfgf)]) == 2
        assert cli.main(["run"]) == 2  # no input at all

    def test_exit_code_input_error(self, tmp_path):
        assert cli.main(["correlate", "--input", str(tmp_path / "nope.tsv"),
                         "--out", str(tmp_path / "o.tsv")]) == 3
