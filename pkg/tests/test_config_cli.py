import os
import textwrap

import pytest

from distsgd.cli import main
from distsgd.config import (
    CSV_HEADER,
    ConfigError,
    format_csv,
    format_json,
    load_config,
    parse_config,
    serialize_config,
)

VALID = textwrap.dedent(
    """\
    strategy: single
    learners: 1
    objective:
      kind: logistic
      input_dim: 6
    dataset:
      n_samples: 300
    schedule:
      base_lr: 0.1
      peak_lr: 0.1
      warmup_epochs: 0
      anneal_factor: 0.7071067811865476
      anneal_start_epoch: 11
      total_epochs: 16
    epochs: 16
    batch_size: 32
    seed: 7
    """
)


def test_parse_valid_config_defaults():
    cfg = parse_config(VALID)
    assert cfg.run.strategy == "single"
    assert cfg.run.momentum == 0.9
    assert cfg.run.clock == "virtual"
    assert cfg.output_path == "report.csv"
    assert cfg.report_format == "csv"


def test_round_trip_is_lossless():
    cfg = parse_config(VALID)
    text = serialize_config(cfg)
    assert parse_config(text) == cfg
    # Twice more for stability of the canonical form.
    assert serialize_config(parse_config(text)) == text


def test_unknown_keys_rejected_with_line_anchor():
    bad = VALID + "turbo: true\n"
    with pytest.raises(ConfigError, match=r"cfg\.yaml:18: unknown key 'turbo'"):
        parse_config(bad, source="cfg.yaml")
    nested = VALID.replace("  kind: logistic", "  kind: logistic\n  flavor: mild")
    with pytest.raises(ConfigError, match="unknown key 'flavor'"):
        parse_config(nested)


def test_missing_required_key():
    with pytest.raises(ConfigError, match="missing required key 'seed'"):
        parse_config(VALID.replace("seed: 7\n", ""))


def test_type_errors_are_anchored():
    with pytest.raises(ConfigError, match="batch_size must be a int"):
        parse_config(VALID.replace("batch_size: 32", "batch_size: lots"))


def test_semantic_constraint_named_in_error():
    bad = VALID.replace("strategy: single", "strategy: adpsgd").replace(
        "learners: 1", "learners: 3"
    )
    with pytest.raises(ConfigError, match="even learner count"):
        parse_config(bad)


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigError, match="not valid YAML"):
        parse_config("strategy: [unclosed\nlearners: 2\n")


def test_straggler_map_parsing():
    cfg = parse_config(
        VALID.replace("strategy: single", "strategy: adpsgd").replace(
            "learners: 1", "learners: 4"
        )
        + "stragglers: {1: 10.0, 3: 2}\n"
    )
    assert cfg.run.stragglers == {1: 10.0, 3: 2.0}


def test_report_formats(tmp_path):
    cfg = parse_config(VALID)
    from distsgd.metrics import MetricsRecord

    records = [
        MetricsRecord(epoch=1, heldout_loss=0.5, epoch_wall_s=0.25,
                      minibatch_counts=[3, 4], staleness_mean=1.5,
                      staleness_max=3, bytes_exchanged=1024)
    ]
    csv = format_csv(records, "ssgd", 2)
    lines = csv.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert lines[1] == "1,ssgd,2,0.5,0.25,1.5,3,3|4,1024"
    js = format_json(records, "ssgd", 2)
    assert '"lambda": 2' in js and '"minibatch_counts"' in js


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        VALID.replace("epochs: 16", "epochs: 3")
        + f"output:\n  path: {tmp_path}/out.csv\n  format: csv\n"
    )
    return path


def test_cmd_run_writes_report(config_file, tmp_path, capsys):
    assert main(["run", str(config_file)]) == 0
    out = (tmp_path / "out.csv").read_text()
    lines = out.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 3  # header + one row per epoch


def test_cmd_run_reports_are_byte_identical(config_file, tmp_path):
    assert main(["run", str(config_file)]) == 0
    first = (tmp_path / "out.csv").read_bytes()
    assert main(["run", str(config_file)]) == 0
    assert (tmp_path / "out.csv").read_bytes() == first


def test_cmd_run_invalid_config_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(VALID.replace("strategy: single", "strategy: adpsgd").replace(
        "learners: 1", "learners: 3"))
    assert main(["run", str(path)]) == 2
    assert "even learner count" in capsys.readouterr().err


def test_cmd_run_missing_file_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_cmd_run_engine_failure_exit_1(tmp_path, capsys):
    path = tmp_path / "diverge.yaml"
    path.write_text(
        textwrap.dedent(
            """\
            strategy: single
            learners: 1
            objective: {kind: quadratic, input_dim: 5}
            dataset: {n_samples: 200}
            schedule:
              base_lr: 50.0
              peak_lr: 50.0
              warmup_epochs: 0
              anneal_factor: 0.7071067811865476
              anneal_start_epoch: 210
              total_epochs: 220
            epochs: 60
            batch_size: 180
            seed: 4
            momentum: 0.0
            """
        )
        + f"output: {{path: {tmp_path}/x.csv}}\n"
    )
    assert main(["run", str(path)]) == 1
    assert "epoch" in capsys.readouterr().err


def test_cmd_validate(config_file, tmp_path, capsys):
    assert main(["validate", str(config_file)]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("strategy: single\n")
    assert main(["validate", str(bad)]) == 2


def test_cmd_predict_breakeven(capsys):
    assert main(["predict", "breakeven", "--model-mb", "165", "--compute-s", "0.067"]) == 0
    out = capsys.readouterr().out
    assert "breakeven_bytes_per_s" in out
    value = float(out.strip().split("\n")[1].split(",")[2])
    assert abs(value - 4.93e9) < 0.05e9


def test_cmd_predict_breakeven_batch_256(capsys):
    compute = 0.067 * (8.58 / 18.33) * 8
    assert main(["predict", "breakeven", "--model-mb", "165", "--compute-s", str(compute)]) == 0
    value = float(capsys.readouterr().out.strip().split("\n")[1].split(",")[2])
    assert abs(value - 1.33e9) <= 0.05 * 1.33e9


def test_cmd_predict_rejects_nonpositive(capsys):
    assert main(["predict", "breakeven", "--model-mb", "165", "--compute-s", "0"]) == 2


def test_cmd_predict_tables(capsys):
    assert main(["predict", "ssgd", "--time-s1", "1.09", "--time-s2", "1.67",
                 "--factors", "10,100"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("slowdown,epoch_time,model")
    assert main(["predict", "adpsgd", "--base-epoch", "0.87", "--learners", "16",
                 "--factors", "2,100"]) == 0
    out = capsys.readouterr().out
    rows = [line.split(",") for line in out.strip().split("\n")[1:]]
    assert abs(float(rows[0][1]) - 0.89) <= 0.02 * 0.89
    assert abs(float(rows[1][1]) - 0.92) <= 0.02 * 0.92
    assert main(["predict", "speedup", "--serial", "9.4656", "--parallel", "0.87"]) == 0
    assert "10.88" in capsys.readouterr().out


def test_verbose_env_controls_stderr(config_file, capsys, monkeypatch):
    monkeypatch.setenv("DISTSGD_VERBOSE", "1")
    assert main(["run", str(config_file)]) == 0
    assert "running strategy=single" in capsys.readouterr().err
    monkeypatch.setenv("DISTSGD_VERBOSE", "0")
    assert main(["run", str(config_file)]) == 0
    assert "running strategy" not in capsys.readouterr().err


def test_json_report(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        VALID.replace("epochs: 16", "epochs: 2")
        + f"output:\n  path: {tmp_path}/out.json\n  format: json\n"
    )
    assert main(["run", str(path)]) == 0
    import json

    rows = json.loads((tmp_path / "out.json").read_text())
    assert len(rows) == 2
    assert rows[0]["strategy"] == "single"
