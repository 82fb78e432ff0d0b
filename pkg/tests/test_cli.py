from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import pytest

from fedmol.cli import main


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """generate -> partition -> run, shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "d.tsv"
    shards = root / "shards"
    results = root / "results"
    assert main(["generate", "--scaffolds", "20", "--per-scaffold", "25",
                 "--seed", "7", "-o", str(data)]) == 0
    assert main(["partition", "--input", str(data), "--clients", "5",
                 "--seed", "1", "--out-dir", str(shards)]) == 0
    assert main(["run", "--shards-dir", str(shards), "--method", "fed-kmeans",
                 "--k", "5", "--rounds", "3", "--seed", "1",
                 "--results-dir", str(results)]) == 0
    return root


class TestPipeline:
    def test_results_directory_populated(self, pipeline):
        results = pipeline / "results"
        run_dirs = list(results.glob("d/fed_kmeans/*"))
        assert len(run_dirs) == 1
        files = {p.name for p in run_dirs[0].iterdir()}
        assert "aggregate.csv" in files
        assert "client0.csv" in files and "client4.csv" in files

    def test_partition_produces_readable_client_files(self, pipeline):
        from fedmol.dataset import read_dataset

        files = sorted((pipeline / "shards").glob("d.client*.tsv"))
        assert len(files) == 5
        total = 0
        for f in files:
            manifest, records = read_dataset(f)
            total += len(records)
        assert total == 500

    def test_run_is_idempotent(self, pipeline, tmp_path):
        shards = pipeline / "shards"
        a, b = tmp_path / "ra", tmp_path / "rb"
        for out in (a, b):
            assert main(["run", "--shards-dir", str(shards), "--method", "fed-lsh",
                         "--n-he", "32", "--seed", "5", "--results-dir", str(out)]) == 0
        assert tree_digest(a) == tree_digest(b)

    def test_stdout_never_leaks_molecule_records(self, pipeline, tmp_path, capsys):
        from fedmol.dataset import read_dataset

        shards = pipeline / "shards"
        main(["run", "--shards-dir", str(shards), "--method", "fed-kmeans",
              "--seed", "2", "--results-dir", str(tmp_path / "r")])
        captured = capsys.readouterr()
        _, records = read_dataset(sorted(shards.glob("*.tsv"))[0])
        for rec in records[:20]:
            assert rec.mol_id not in captured.out


class TestErrorHandling:
    def test_missing_input_fails_without_partial_outputs(self, tmp_path, capsys):
        results = tmp_path / "results"
        code = main(["run", "--input", str(tmp_path / "missing.tsv"),
                     "--method", "fed-kmeans", "--results-dir", str(results)])
        captured = capsys.readouterr()
        assert code != 0
        assert captured.err.startswith("error:")
        assert not results.exists()

    def test_bad_grid_value_fails(self, pipeline, tmp_path, capsys):
        code = main(["run", "--shards-dir", str(pipeline / "shards"),
                     "--method", "fed-kmeans", "--k", "7",
                     "--results-dir", str(tmp_path / "r")])
        assert code != 0
        assert "error:" in capsys.readouterr().err

    def test_unknown_subcommand_exits_nonzero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code != 0


class TestProjectReportExplain:
    def test_project_exports_p3_coordinates(self, pipeline, tmp_path):
        out = tmp_path / "coords.csv"
        assert main(["project", "--shards-dir", str(pipeline / "shards"),
                     "--p", "3", "--out", str(out)]) == 0
        with out.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 500
        assert {"client", "mol_id", "scaffold", "pc1", "pc2", "pc3"} <= set(rows[0])

    def test_report_writes_csvs_and_figures(self, pipeline, tmp_path):
        out = tmp_path / "report"
        assert main(["report", "--results-dir", str(pipeline / "results"),
                     "--out-dir", str(out)]) == 0
        assert (out / "metrics_long.csv").exists()
        assert (out / "sficf_vs_kld.csv").exists()
        assert (out / "fig_metrics.png").stat().st_size > 0
        assert (out / "fig_sficf_vs_kld.png").stat().st_size > 0

    def test_explain_writes_tables(self, pipeline, tmp_path):
        run_dir = next((pipeline / "results").glob("d/fed_kmeans/*"))
        out = tmp_path / "explain"
        assert main(["explain", "--shard", str(pipeline / "shards" / "d.client1.tsv"),
                     "--run-dir", str(run_dir), "--trees", "20",
                     "--out-dir", str(out)]) == 0
        for name in ["importance.csv", "xficf.csv", "cluster_stats.csv",
                     "sharing_stats.csv", "overclustering.csv"]:
            assert (out / name).exists()
        with (out / "importance.csv").open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert abs(sum(float(r["importance"]) for r in rows) - 1.0) < 1e-9
        # k-means on scaffold blobs: the scaffold group should dominate
        assert rows[0]["group"] == "scaffold"

    def test_results_dir_env_override(self, pipeline, tmp_path, monkeypatch):
        target = tmp_path / "env_results"
        monkeypatch.setenv("FEDMOL_RESULTS_DIR", str(target))
        assert main(["run", "--shards-dir", str(pipeline / "shards"),
                     "--method", "random", "--k", "5", "--seed", "3"]) == 0
        assert target.exists()
