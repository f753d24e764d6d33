"""CLI behavior: golden end-to-end runs, exit codes, config precedence."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

from cohortmap.cli import main, read_config_file

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

SIDE_CAR_BAD = f"{sys.executable} {FIXTURES / 'sidecar_stub.py'} bad-handshake"


def run_fuse(out_dir: Path) -> int:
    return main(
        [
            "fuse",
            "--config", str(FIXTURES / "e2e.cfg"),
            "--zensus-cells", str(FIXTURES / "zensus_cells.csv"),
            "--osm-bbox", "50.7,5.9,50.9,6.2",
            "--monument-page", str(FIXTURES / "monuments.html"),
            "--cache-dir", str(FIXTURES / "overpass"),
            "--scrape-config", str(FIXTURES / "scrape_config.json"),
            "--geocoder-fixture", str(FIXTURES / "geocoder.json"),
            "--output-dir", str(out_dir),
        ]
    )


def run_folds(dataset: Path, out: Path) -> int:
    return main(
        [
            "folds",
            "--config", str(FIXTURES / "e2e.cfg"),
            "--dataset", str(dataset),
            "--output", str(out),
        ]
    )


def run_infer(out_dir: Path, addresses: Path | None = None) -> int:
    return main(
        [
            "infer",
            "--config", str(FIXTURES / "e2e.cfg"),
            "--addresses", str(addresses or FIXTURES / "addresses.txt"),
            "--backend", "stub",
            "--stub-table", str(FIXTURES / "stub_table.json"),
            "--geocoder-fixture", str(FIXTURES / "geocoder.json"),
            "--tile-cache", str(FIXTURES / "tiles"),
            "--output-dir", str(out_dir),
        ]
    )


def run_report(dataset: Path, out_dir: Path) -> int:
    return main(
        [
            "report",
            "--config", str(FIXTURES / "e2e.cfg"),
            "--dataset", str(dataset),
            "--predictions", str(FIXTURES / "predictions.csv"),
            "--universe", "20",
            "--output-dir", str(out_dir),
        ]
    )


def assert_matches_golden(produced: Path, golden_name: str):
    golden = GOLDEN / golden_name
    assert produced.read_bytes() == golden.read_bytes(), f"{golden_name} drifted"


class TestEndToEndGolden:
    def test_full_chain_matches_golden_files(self, tmp_path):
        out = tmp_path / "run"
        assert run_fuse(out) == 0
        assert run_folds(out / "fused.csv", out / "folds.csv") == 0
        assert run_infer(out) == 0
        assert run_report(out / "fused.csv", out / "reports") == 0
        assert main(["energy", "--dataset", str(out / "fused.csv"),
                     "--output", str(out / "energy.csv")]) == 0

        for name in [
            "fused.csv",
            "fused.geojson",
            "fusion_report.json",
            "folds.csv",
            "decisions.csv",
            "review.csv",
            "energy.csv",
            "reports/cohort_shares.csv",
            "reports/cohort_shares.json",
            "reports/coverage.csv",
            "reports/coverage.json",
            "reports/flag_rates.csv",
            "reports/flag_rates.json",
            "reports/metrics.csv",
            "reports/metrics.json",
        ]:
            assert_matches_golden(out / name, name)

    def test_rerun_is_byte_identical(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            assert run_fuse(out) == 0
            assert run_folds(out / "fused.csv", out / "folds.csv") == 0
        assert (out_a / "fused.csv").read_bytes() == (out_b / "fused.csv").read_bytes()
        assert (out_a / "folds.csv").read_bytes() == (out_b / "folds.csv").read_bytes()

    def test_inputs_not_mutated(self, tmp_path):
        before = {p: p.read_bytes() for p in FIXTURES.rglob("*") if p.is_file()}
        assert run_fuse(tmp_path / "out") == 0
        after = {p: p.read_bytes() for p in FIXTURES.rglob("*") if p.is_file()}
        assert before == after


class TestExitCodes:
    def test_fuse_without_sources_exits_2(self, tmp_path, capsys):
        code = main(["fuse", "--output-dir", str(tmp_path)])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "no-sources"

    def test_fuse_all_agents_failed_exits_2(self, tmp_path, capsys):
        # zensus agent swallows per-cell failures, so break it at cell load
        bad_cells = tmp_path / "cells.csv"
        bad_cells.write_text("grid_id,period_label\nBADID,1919 - 1948\n", encoding="utf-8")
        code = main(
            [
                "fuse",
                "--config", str(FIXTURES / "e2e.cfg"),
                "--zensus-cells", str(bad_cells),
                "--cache-dir", str(tmp_path / "cache"),
                "--output-dir", str(tmp_path / "out"),
            ]
        )
        assert code == 2
        assert json.loads(capsys.readouterr().err)["error"] == "all-agents-failed"

    def test_folds_missing_dataset_exits_3(self, tmp_path, capsys):
        code = run_folds(tmp_path / "nope.csv", tmp_path / "folds.csv")
        assert code == 3
        assert json.loads(capsys.readouterr().err)["error"] == "missing-input"

    def test_folds_k_beyond_distinct_points_exits_4(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_fuse(out) == 0
        code = main(
            [
                "folds",
                "--dataset", str(out / "fused.csv"),
                "--output", str(out / "folds.csv"),
                "--k", "99",
            ]
        )
        assert code == 4
        assert json.loads(capsys.readouterr().err)["error"] == "bad-k"

    def test_infer_handshake_failure_exits_5(self, tmp_path, capsys):
        code = main(
            [
                "infer",
                "--addresses", str(FIXTURES / "addresses.txt"),
                "--backend", "sidecar",
                "--sidecar-cmd", SIDE_CAR_BAD,
                "--geocoder-fixture", str(FIXTURES / "geocoder.json"),
                "--tile-cache", str(FIXTURES / "tiles"),
                "--output-dir", str(tmp_path),
            ]
        )
        assert code == 5
        assert json.loads(capsys.readouterr().err)["error"] == "backend-unavailable"

    def test_report_missing_dataset_exits_3(self, tmp_path):
        assert run_report(tmp_path / "nope.csv", tmp_path) == 3

    def test_energy_missing_dataset_exits_3(self, tmp_path):
        assert main(["energy", "--dataset", str(tmp_path / "n.csv"),
                     "--output", str(tmp_path / "e.csv")]) == 3


class TestInferEdgeCases:
    def test_empty_address_file(self, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("", encoding="utf-8")
        assert run_infer(tmp_path, addresses=empty) == 0
        decisions = (tmp_path / "decisions.csv").read_text(encoding="utf-8")
        assert decisions.splitlines() == [
            "address,status,cohort,p_max,stage,lat,lon,p0,p1,p2,p3,p4"
        ]

    def test_review_file_is_append_only(self, tmp_path):
        assert run_infer(tmp_path) == 0
        first = (tmp_path / "review.csv").read_text(encoding="utf-8").splitlines()
        assert run_infer(tmp_path) == 0
        second = (tmp_path / "review.csv").read_text(encoding="utf-8").splitlines()
        assert second[: len(first)] == first
        assert len(second) == 2 * len(first) - 1  # header not repeated

    def test_tau_sweep_monotone_flags(self, tmp_path):
        flagged_counts = []
        for i, tau in enumerate(["0.4", "0.65", "0.8"]):
            out = tmp_path / f"t{i}"
            code = main(
                [
                    "infer",
                    "--config", str(FIXTURES / "e2e.cfg"),
                    "--addresses", str(FIXTURES / "addresses.txt"),
                    "--backend", "stub",
                    "--stub-table", str(FIXTURES / "stub_table.json"),
                    "--geocoder-fixture", str(FIXTURES / "geocoder.json"),
                    "--tile-cache", str(FIXTURES / "tiles"),
                    "--tau", tau,
                    "--output-dir", str(out),
                ]
            )
            assert code == 0
            rows = (out / "decisions.csv").read_text(encoding="utf-8").splitlines()[1:]
            flagged_counts.append(sum(1 for r in rows if ",flagged," in r))
        assert flagged_counts == sorted(flagged_counts)


class TestConfig:
    def test_key_value_parsing(self, tmp_path):
        config = tmp_path / "c.cfg"
        config.write_text(
            "# comment\n"
            "tau = 0.7\n"
            "folds_k = 4  # trailing comment\n"
            "city_bbox = 1,2,3,4\n"
            "offline = true\n",
            encoding="utf-8",
        )
        values = read_config_file(config)
        assert values == {
            "tau": 0.7,
            "folds_k": 4,
            "city_bbox": "1,2,3,4",
            "offline": True,
        }

    def test_precedence_flag_over_env_over_file(self, tmp_path, monkeypatch):
        config = tmp_path / "c.cfg"
        config.write_text("overpass_url = http://from-file.example\n", encoding="utf-8")

        import argparse

        from cohortmap.cli import build_config

        ns = argparse.Namespace(config=str(config))
        assert build_config(ns).overpass_url == "http://from-file.example"

        monkeypatch.setenv("OVERPASS_URL", "http://from-env.example")
        assert build_config(ns).overpass_url == "http://from-env.example"

        ns_flag = argparse.Namespace(config=str(config), overpass_url="http://from-flag.example")
        assert build_config(ns_flag).overpass_url == "http://from-flag.example"
