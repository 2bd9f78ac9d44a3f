import pytest

pytest.importorskip("prefect")

from flows import analysis_flows  # noqa: E402


def test_tasks_run_on_a_shared_field(params, tmp_path):
    f = analysis_flows.solve_field_task.fn(params)
    rates = analysis_flows.rates_task.fn(f, params, [1, 10])
    roc = analysis_flows.roc_task.fn(f, params, [1, 10])
    assert rates["threshold"].tolist() == [1, 10]
    assert roc.columns.tolist() == ["threshold", "p_true", "p_false"]


def test_record_task_writes_the_manifest(params, tmp_path, monkeypatch):
    from microsense.manifest import RunManifest

    monkeypatch.delenv("MICROSENSE_REGISTRY_URL", raising=False)
    manifest = RunManifest.for_run("report", params)
    assert analysis_flows.record_task.fn(manifest, str(tmp_path)) is None
    assert (tmp_path / "report.manifest.json").exists()


def test_step_manifests_replay_through_the_cli(params, tmp_path):
    from microsense import cli
    from microsense.manifest import load_manifest

    step_p = params.replace(mc_trials=200)
    manifest = analysis_flows.step_manifest("compare", step_p, tmp_path / "compare.csv", 1.25)
    assert manifest.subcommand == "compare"
    assert manifest.duration_s == 1.25
    assert manifest.outputs == ["compare.csv"]
    path = manifest.write(tmp_path)

    replay = tmp_path / "replay"
    assert cli.run(["compare", "--manifest", str(path), "--out", str(replay)]) == 0
    replayed = load_manifest(replay / "compare.manifest.json")
    assert replayed.params.numerics.mc_trials == 200
    assert replayed.options["thresholds"] == "1..15"
