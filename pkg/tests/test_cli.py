import json

import pytest
from click.testing import CliRunner

from lpbf_defects.cli import cli

from conftest import write_pipeline_config


@pytest.fixture
def runner():
    return CliRunner()


def run_stages(runner, config_path, stages):
    for stage in stages:
        result = runner.invoke(cli, [stage, "--config", str(config_path)])
        assert result.exit_code == 0, f"{stage} failed: {result.output}"
        yield result


def test_pipeline_stages_run_in_order(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    stages = ["ingest", "label", "augment", "split", "gen-baseline", "gen-prompt", "eval", "pca"]
    list(run_stages(runner, config_path, stages))
    out = tmp_path / "out"
    for split_name in ("train", "test", "validation"):
        assert (out / "corpus" / f"baseline_{split_name}.jsonl").is_file()
        assert (out / "corpus" / f"prompt_{split_name}.jsonl").is_file()
    assert (out / "index.json").is_file()
    assert (out / "reports" / "eval_test.json").is_file()
    assert (out / "pca" / "projection.csv").is_file()


def test_stage_out_of_order_is_stage_error(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    result = runner.invoke(cli, ["label", "--config", str(config_path)])
    assert result.exit_code == 2
    message = json.loads(result.stderr or result.output)
    assert message["error"] == "StageInputMissing"


def test_config_error_exits_1(tmp_path, runner):
    result = runner.invoke(cli, ["ingest", "--config", str(tmp_path / "none.yaml")])
    assert result.exit_code == 1
    message = json.loads(result.stderr or result.output)
    assert message["error"] == "ConfigInvalid"


def test_unknown_subcommand_prints_usage(runner):
    result = runner.invoke(cli, ["frobnicate"])
    assert result.exit_code != 0
    assert "Usage" in result.output or "No such command" in result.output


def test_parse_baseline_outputs_report(runner):
    result = runner.invoke(
        cli, ["parse", "--baseline", "SS316L [SEP] 200 W [SEP] 500 mm/s [SEP]  [SEP]  [SEP] "]
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["params"]["power"] == 200.0
    assert report["confidence"]["layer_height"] == "missing"


def test_parse_prompt_outputs_report(runner):
    result = runner.invoke(cli, ["parse", "--prompt", "Printing IN718 at 250 W and 800 mm/s"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["params"]["material"] == "IN718"
    assert report["params"]["velocity"] == 800.0


def test_parse_requires_exactly_one_input(runner):
    assert runner.invoke(cli, ["parse"]).exit_code != 0
    assert runner.invoke(cli, ["parse", "--prompt", "x", "--baseline", "y"]).exit_code != 0


def test_predict_prompt_after_pipeline(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    for stage in ("ingest", "label", "augment", "split"):
        assert runner.invoke(cli, [stage, "--config", str(config_path)]).exit_code == 0
    result = runner.invoke(
        cli,
        [
            "predict",
            "--config",
            str(config_path),
            "--prompt",
            "What defects for Ti-6Al-4V at 184.7 W and 687.6 mm/s?",
        ],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert set(payload["labels"]) == {"keyhole", "lack_of_fusion", "balling", "none"}
    assert payload["parsed"]["params"]["power"] == 184.7
    assert (tmp_path / "out" / "index.json").is_file()  # index persisted for reuse


def test_predict_structured_params(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    for stage in ("ingest", "label", "augment", "split"):
        assert runner.invoke(cli, [stage, "--config", str(config_path)]).exit_code == 0
    result = runner.invoke(
        cli,
        [
            "predict",
            "--config",
            str(config_path),
            "--params",
            json.dumps({"material": "SS316L", "power_w": 173.9, "velocity_mm_s": 690.5}),
        ],
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["method"] in ("exact_match", "knn")


def test_predict_unparseable_prompt_is_stage_error(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    for stage in ("ingest", "label", "augment", "split"):
        assert runner.invoke(cli, [stage, "--config", str(config_path)]).exit_code == 0
    result = runner.invoke(cli, ["predict", "--config", str(config_path), "--prompt", "hello"])
    assert result.exit_code == 2


def test_predict_addr_delegates_to_running_service(runner):
    # thin-client path: the CLI posts to a live service instead of loading
    # an index locally
    import socket
    import threading
    import time

    import uvicorn

    from lpbf_defects import DefectLabels, ProcessParameters, build_index, load_lexicon
    from lpbf_defects.core import Record, Split
    from lpbf_defects.service import create_app

    train = [
        Record(
            id=f"t-{i}",
            params=ProcessParameters(material="SS316L", power=100.0 + i, velocity=500.0),
            labels=DefectLabels.from_flags(i % 2 == 0, False, False),
            split=Split.TRAIN,
        )
        for i in range(3)
    ]
    app = create_app(build_index(train), load_lexicon(), k=1)
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 15
        while not server.started and time.time() < deadline:
            time.sleep(0.05)
        assert server.started, "service did not start"
        result = runner.invoke(
            cli,
            [
                "predict",
                "--addr",
                f"127.0.0.1:{port}",
                "--prompt",
                "What happens to SS316L at 101 W and 500 mm/s?",
            ],
        )
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["method"] == "exact_match"
        bad = runner.invoke(cli, ["predict", "--addr", f"127.0.0.1:{port}", "--prompt", "hello"])
        assert bad.exit_code == 2  # service answered 422
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def test_serve_busy_port_is_stage_error(tmp_path, geometry_fixture, runner):
    import socket

    config_path = write_pipeline_config(
        tmp_path, source_path=geometry_fixture, grid={"hatch_values": [0.0], "layer_values": [0.0]}
    )
    for stage in ("ingest", "label", "augment", "split"):
        assert runner.invoke(cli, [stage, "--config", str(config_path)]).exit_code == 0
    blocker = socket.socket()
    try:
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        result = runner.invoke(
            cli, ["serve", "--config", str(config_path), "--addr", f"127.0.0.1:{port}"]
        )
        assert result.exit_code == 2
        assert json.loads(result.stderr or result.output)["error"] == "BindFailure"
    finally:
        blocker.close()


def test_seed_flag_changes_split(tmp_path, geometry_fixture, runner):
    config_path = write_pipeline_config(tmp_path, source_path=geometry_fixture)
    for stage in ("ingest", "label", "augment"):
        assert runner.invoke(cli, [stage, "--config", str(config_path)]).exit_code == 0
    assert runner.invoke(cli, ["split", "--config", str(config_path)]).exit_code == 0
    first = (tmp_path / "out" / "split" / "geometry_main.jsonl").read_bytes()
    assert (
        runner.invoke(cli, ["split", "--config", str(config_path), "--seed", "7"]).exit_code == 0
    )
    second = (tmp_path / "out" / "split" / "geometry_main.jsonl").read_bytes()
    assert first != second
