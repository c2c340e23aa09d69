import csv

from click.testing import CliRunner

from asyncplnc import cli, harness


def _config(tmp_path, **extra):
    lines = ["n: 64", "code: test-96", "snr_db: [8, 12]", "xi: 0.1", "max_frames: 2",
             "receivers: [proposed, sync]"] + [f"{k}: {v}" for k, v in extra.items()]
    p = tmp_path / "c.yaml"
    p.write_text("\n".join(lines) + "\n")
    return p


class TestRun:
    def test_writes_csv_and_manifest(self, tmp_path):
        out = tmp_path / "r.csv"
        res = CliRunner().invoke(cli.main, ["run", "--config", str(_config(tmp_path)), "--seed", "3",
                                            "--out", str(out)])
        assert res.exit_code == 0, res.output
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 4 and list(rows[0]) == harness.CSV_FIELDS
        assert "seed 3" in (tmp_path / "r.manifest.txt").read_text()

    def test_bad_config_is_a_usage_error(self, tmp_path):
        res = CliRunner().invoke(cli.main, ["run", "--config", str(_config(tmp_path, n=100))])
        assert res.exit_code == 2

    def test_config_and_preset_conflict(self, tmp_path):
        res = CliRunner().invoke(cli.main, ["run", "--config", str(_config(tmp_path)), "--preset", "smoke"])
        assert res.exit_code == 2

    def test_unknown_preset(self):
        assert CliRunner().invoke(cli.main, ["run", "--preset", "nope"]).exit_code == 2


class TestOtherCommands:
    def test_trace(self, tmp_path):
        out = tmp_path / "t.csv"
        res = CliRunner().invoke(cli.main, ["trace", "--config", str(_config(tmp_path)), "--out", str(out)])
        assert res.exit_code == 0, res.output
        rows = list(csv.DictReader(out.open()))
        # 10 blocks x (M + 1) records x 2 terminals
        assert len(rows) == 10 * 3 * 2
        assert list(rows[0]) == cli.TRACE_FIELDS

    def test_counters(self):
        res = CliRunner().invoke(cli.main, ["counters", "--sizes", "16,32"])
        assert res.exit_code == 0
        assert "slope" in res.output

    def test_counters_rejects_bad_size(self):
        assert CliRunner().invoke(cli.main, ["counters", "--sizes", "12"]).exit_code == 2

    def test_presets(self):
        res = CliRunner().invoke(cli.main, ["presets"])
        assert res.exit_code == 0
        for name in ("test-96", "paper-scale", "smoke", "cfo-sweep"):
            assert name in res.output

    def test_every_bundled_experiment_loads(self):
        for path in cli.experiment_presets().values():
            harness.load_config(path)
