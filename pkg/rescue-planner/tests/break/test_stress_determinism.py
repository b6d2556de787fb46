from rescue_planner.stress_runner import main, run_stress


def test_concurrent_runs_hash_identically(small_scenario, fast_config):
    summary = run_stress(small_scenario, fast_config, runs=4, workers=2)
    assert summary["ok"]
    assert summary["failure_count"] == 0
    assert len(summary["unique_result_hashes"]) == 1


def test_inner_parallelism_does_not_change_result(small_scenario, fast_config):
    serial = run_stress(small_scenario, fast_config, runs=2, workers=1)
    parallel = run_stress(small_scenario, fast_config, runs=2, workers=2, inner_workers=4)
    assert serial["unique_result_hashes"] == parallel["unique_result_hashes"]


def test_stress_cli_summary(tmp_path):
    out = tmp_path / "stress.json"
    code = main(["--runs", "2", "--workers", "2", "--tasks", "0", "--obstacles", "0", "--output", str(out)])
    assert code == 0
    assert out.exists()
