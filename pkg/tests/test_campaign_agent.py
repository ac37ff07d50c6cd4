import csv

import pytest

import workers.campaign_agent as campaign_agent
from upir_lab.constructions import fano_plane, pappus
from upir_lab.errors import ParameterError
from upir_lab.incidence import write_cfg
from upir_lab.protocol import Protocol, QueryModel


def _read_csv(path):
    with open(path, newline="") as csv_file:
        return list(csv.DictReader(csv_file))


@pytest.mark.parametrize(
    "text, seeds",
    [("3..5", [3, 4, 5]), ("7", [7]), ("0..0", [0])],
)
def test_parse_seed_range(text, seeds):
    assert campaign_agent.parse_seed_range(text) == seeds


@pytest.mark.parametrize("text", ["5..3", "a..b", "1..", ""])
def test_parse_seed_range_rejects_bad_input(text):
    with pytest.raises(ParameterError):
        campaign_agent.parse_seed_range(text)


def test_run_campaign_writes_per_seed_files_and_summary(tmp_path):
    summaries = campaign_agent.run_campaign(
        fano_plane(), Protocol.UPIR1, 0, [4, 2, 3], tmp_path, workers=1
    )
    assert [summary.seed for summary in summaries] == [2, 3, 4]
    assert all(summary.owner_identified for summary in summaries)

    rows = _read_csv(tmp_path / "summary.csv")
    assert list(rows[0]) == campaign_agent.SUMMARY_HEADER
    assert [row["seed"] for row in rows] == ["2", "3", "4"]
    assert {row["terminal_confusion"] for row in rows} == {"1"}
    assert {row["owner_identified"] for row in rows} == {"1"}

    trajectory = _read_csv(tmp_path / "seed-3.csv")
    assert trajectory[-1]["candidate_count"] == "1"
    assert {row["seed"] for row in trajectory} == {"3"}
    assert not list(tmp_path.glob("*.tmp"))


def test_campaign_summary_does_not_depend_on_pool(tmp_path):
    serial = campaign_agent.run_campaign(
        pappus(), Protocol.UPIR1, 1, [0, 1, 2, 3], tmp_path / "serial", workers=1
    )
    pooled = campaign_agent.run_campaign(
        pappus(), Protocol.UPIR1, 1, [3, 1, 0, 2], tmp_path / "pooled", workers=2
    )
    assert serial == pooled
    assert (tmp_path / "serial" / "summary.csv").read_bytes() == (
        tmp_path / "pooled" / "summary.csv"
    ).read_bytes()
    assert {summary.terminal_confusion for summary in serial} == {3}


def test_run_campaign_requires_seeds(tmp_path):
    with pytest.raises(ParameterError, match="must not be empty"):
        campaign_agent.run_campaign(fano_plane(), Protocol.UPIR1, 0, [], tmp_path, workers=1)


def test_run_simulation_campaign(tmp_path):
    paths = campaign_agent.run_simulation_campaign(
        fano_plane(), Protocol.UPIR2, QueryModel(), [1, 0], tmp_path, steps=5, workers=1
    )
    assert paths == [tmp_path / "trace-0.jsonl", tmp_path / "trace-1.jsonl"]
    assert all(path.read_text().startswith('{"b": 7') for path in paths)


def test_main_runs_campaign(tmp_path):
    cfg = tmp_path / "fano.cfg"
    write_cfg(cfg, fano_plane().structure)
    argv = [
        "--cfg", str(cfg), "--protocol", "upir2", "--owner", "1",
        "--seeds", "0..1", "--output-dir", str(tmp_path / "out"), "--workers", "1",
    ]
    assert campaign_agent.main(argv) == 0
    rows = _read_csv(tmp_path / "out" / "summary.csv")
    assert {row["terminal_confusion"] for row in rows} == {"7"}


def test_main_rejects_bad_arguments(tmp_path):
    argv = [
        "--cfg", str(tmp_path / "missing.cfg"), "--protocol", "upir1", "--owner", "0",
        "--seeds", "0..1", "--output-dir", str(tmp_path),
    ]
    assert campaign_agent.main(argv) == 1
    assert campaign_agent.main(argv + ["--workers", "0"]) != 0


@pytest.mark.parametrize("raw, workers", [("0", None), ("3", 3)])
def test_campaign_workers_from_environment(monkeypatch, raw, workers):
    monkeypatch.setenv("CAMPAIGN_WORKERS", raw)
    assert campaign_agent.campaign_workers() == workers


def test_campaign_workers_default(monkeypatch):
    monkeypatch.delenv("CAMPAIGN_WORKERS", raising=False)
    assert campaign_agent.campaign_workers() is None


@pytest.mark.parametrize(
    "name, value",
    [("CAMPAIGN_WORKERS", "four"), ("CAMPAIGN_WORKERS", "-1"), ("LOG_LEVEL", "CHATTY")],
)
def test_main_rejects_bad_environment(monkeypatch, tmp_path, capsys, name, value):
    monkeypatch.setenv(name, value)
    argv = [
        "--cfg", str(tmp_path / "fano.cfg"), "--protocol", "upir1", "--owner", "0",
        "--seeds", "0..1", "--output-dir", str(tmp_path),
    ]
    assert campaign_agent.main(argv) == 2
    assert name in capsys.readouterr().err
