import pytest

from nsqn import run_registry
from nsqn.config import parse_config

TINY = "task.n_samples = 60\ntask.T = 3\ntask.n_hidden = 3\ntrain.b = 20\ntrain.epochs = 1"


def _busy_record(monkeypatch, csv_path):
    record = run_registry.RunRecord(
        run_id="busy", task="counting", optimizer="asnaq", seed=0, csv_path=str(csv_path),
    )
    monkeypatch.setitem(run_registry._runs, "busy", record)


def test_default_paths_are_unique_per_run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = parse_config(TINY)
    first = run_registry.start_run(cfg)
    second = run_registry.start_run(cfg)
    assert run_registry.wait_for(first, timeout=60) and run_registry.wait_for(second, timeout=60)
    a, b = run_registry.get_run(first), run_registry.get_run(second)
    assert a["csv_path"] != b["csv_path"]
    assert first in a["csv_path"] and second in b["csv_path"]
    assert (tmp_path / a["csv_path"]).exists() and (tmp_path / b["csv_path"]).exists()
    assert a["status"] == b["status"] == "finished"


def test_explicit_path_in_use_is_rejected(tmp_path, monkeypatch):
    out = tmp_path / "shared.csv"
    _busy_record(monkeypatch, out)
    with pytest.raises(run_registry.RunPathConflict, match="busy"):
        run_registry.start_run(parse_config(TINY, [f"out={out}"]))


def test_finished_run_frees_its_path(tmp_path, monkeypatch):
    out = tmp_path / "reuse.csv"
    _busy_record(monkeypatch, out)
    run_registry._runs["busy"].status = "finished"
    run_id = run_registry.start_run(parse_config(TINY, [f"out={out}"]))
    assert run_registry.wait_for(run_id, timeout=60)
    assert run_registry.get_run(run_id)["status"] == "finished"
