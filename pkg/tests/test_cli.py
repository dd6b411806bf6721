"""CLI behaviour: pipelines, datasets, reports, exit codes, config."""

import json
from pathlib import Path

import pytest

from upfmeter.cli import main
from upfmeter.config import ExperimentConfig, load_config_file, parse_duration_ns
from upfmeter.dataset import read_pair_csv, read_pfcp_csv
from upfmeter.errors import (
    EXIT_IO,
    EXIT_OK,
    EXIT_SCHEMA,
    InvalidConfig,
    SchemaError,
)

DATA = Path(__file__).parent / "data"
GOLDEN_TRACE = DATA / "golden_trace.txt"


class TestReplay:
    def test_golden_trace_byte_identical(self, tmp_path):
        rc = main(["replay", str(GOLDEN_TRACE), "--out", str(tmp_path),
                   "--load", "Light"])
        assert rc == EXIT_OK
        assert (tmp_path / "pairs.csv").read_bytes() == \
            (DATA / "golden_pairs.csv").read_bytes()
        assert (tmp_path / "pfcp.csv").read_bytes() == \
            (DATA / "golden_pfcp.csv").read_bytes()
        acc = json.loads((tmp_path / "accounting.json").read_text())
        assert acc["matcher"]["malformed"] == 2
        assert acc["matcher"]["conservation_ok"]

    def test_repeat_runs_identical(self, tmp_path):
        for sub in ("a", "b"):
            main(["replay", str(GOLDEN_TRACE), "--out", str(tmp_path / sub),
                  "--load", "Light"])
        for name in ("pairs.csv", "pfcp.csv", "accounting.json", "stats.json"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_empty_input(self, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        rc = main(["replay", str(empty), "--out", str(tmp_path / "out")])
        assert rc == EXIT_OK
        pairs = (tmp_path / "out" / "pairs.csv").read_text()
        assert pairs == "slice,load,upf,teid,flow_key,t_m1_ns,t_m3_ns,delay_ns\n"
        acc = json.loads((tmp_path / "out" / "accounting.json").read_text())
        assert acc["matcher"]["m1_total"] == 0
        assert acc["matcher"]["match_rate"] == 0.0

    def test_missing_input_io_exit(self, tmp_path, capsys):
        rc = main(["replay", str(tmp_path / "nope.txt"),
                   "--out", str(tmp_path)])
        assert rc == EXIT_IO
        assert "error" in capsys.readouterr().err


class TestSynth:
    def test_lossless_self_check(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path), "--load", "Light",
                   "--duration", "3s", "--seed", "7", "--pfcp-rate", "2"])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "match_rate=1.0000" in out
        assert "self-check pairs" in out and "[ok]" in out

    def test_seeded_runs_identical(self, tmp_path):
        for sub in ("a", "b"):
            main(["synth", "--out", str(tmp_path / sub), "--load", "Medium",
                  "--duration", "2s", "--seed", "11"])
        for name in ("trace.txt", "pairs.csv", "truth_pairs.csv", "pfcp.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_impaired_run_keeps_conservation(self, tmp_path, capsys):
        rc = main(["synth", "--out", str(tmp_path), "--load", "Light",
                   "--duration", "3s", "--seed", "13",
                   "--m3-loss", "0.05", "--reorder-prob", "0.05",
                   "--reorder-jitter", "400us", "--duplicate-prob", "0.02"])
        assert rc == EXIT_OK
        acc = json.loads((tmp_path / "accounting.json").read_text())
        assert acc["matcher"]["conservation_ok"]
        assert "self-check pairs" in capsys.readouterr().out

    def test_divergence_on_impaired_run_is_informational(self, tmp_path, capsys):
        # jitter far beyond the slack: held M3 events orphan before their
        # M1 arrives, so truth pairs go missing; exit stays 0 because the
        # run was impaired on purpose
        rc = main(["synth", "--out", str(tmp_path), "--load", "Light",
                   "--duration", "3s", "--seed", "13",
                   "--reorder-prob", "0.3", "--reorder-jitter", "8ms"])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "divergent" in out
        acc = json.loads((tmp_path / "accounting.json").read_text())
        assert acc["matcher"]["conservation_ok"]

    def test_matcher_flag_overrides(self, tmp_path):
        rc = main(["synth", "--out", str(tmp_path), "--duration", "1s",
                   "--window", "5ms", "--capacity", "64",
                   "--reorder-slack", "200us"])
        assert rc == EXIT_OK


class TestStatsCmd:
    def test_json_summary(self, tmp_path, capsys):
        main(["synth", "--out", str(tmp_path), "--duration", "2s",
              "--seed", "3", "--pfcp-rate", "3"])
        capsys.readouterr()
        rc = main(["stats", str(tmp_path / "pairs.csv"),
                   "--pfcp", str(tmp_path / "pfcp.csv")])
        assert rc == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert "eMBB/Light" in doc["forwarding"]
        assert doc["forwarding"]["eMBB/Light"]["count"] > 0


class TestReport:
    def test_report_and_cdfs(self, tmp_path, capsys):
        main(["synth", "--out", str(tmp_path), "--duration", "2s",
              "--seed", "5", "--pfcp-rate", "5"])
        capsys.readouterr()
        out = tmp_path / "report"
        rc = main(["report", str(tmp_path / "pairs.csv"),
                   "--pfcp", str(tmp_path / "pfcp.csv"), "--out", str(out)])
        assert rc == EXIT_OK
        table = capsys.readouterr().out
        assert "| Slice | Load | N | P50 (µs) | P99 (µs) |" in table
        cdfs = sorted(p.name for p in out.glob("*.csv"))
        assert "forwarding_cdf_eMBB_Light.csv" in cdfs
        pfcp_cdf = out / "pfcp_cdf_Modification_Light.csv"
        assert pfcp_cdf.exists()
        text = pfcp_cdf.read_text()
        assert text.startswith("# budget_ns=2000000\n")
        assert "delay_ns,cum_fraction" in text

    def test_empty_dataset_notes_no_data(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("slice,load,upf,teid,flow_key,t_m1_ns,t_m3_ns,delay_ns\n")
        rc = main(["report", str(pairs), "--out", str(tmp_path / "r")])
        assert rc == EXIT_OK
        assert "no data" in capsys.readouterr().out

    def test_malformed_csv_schema_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,pair,header\n1,2,3,4\n")
        rc = main(["report", str(bad), "--out", str(tmp_path / "r")])
        assert rc == EXIT_SCHEMA
        assert "error" in capsys.readouterr().err

    def test_missing_dataset_io_exit(self, tmp_path):
        rc = main(["report", str(tmp_path / "none.csv"),
                   "--out", str(tmp_path)])
        assert rc == EXIT_IO


class TestDatasetReaders:
    def test_pair_roundtrip(self, tmp_path):
        main(["synth", "--out", str(tmp_path), "--duration", "2s", "--seed", "1"])
        with open(tmp_path / "pairs.csv") as fh:
            rows = list(read_pair_csv(fh))
        assert rows
        assert all(r.delay_ns == r.t_m3_ns - r.t_m1_ns for r in rows)

    def test_pfcp_rejects_bad_class(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "load,msg_class,seq,t_send_ns,t_recv_ns,rtt_ns,retransmitted\n"
            "Light,Bogus,1,1,2,1,0\n")
        with open(path) as fh, pytest.raises(SchemaError):
            list(read_pfcp_csv(fh))

    def test_pair_rejects_bad_field_count(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text(
            "slice,load,upf,teid,flow_key,t_m1_ns,t_m3_ns,delay_ns\n"
            "eMBB,Light,upf1,aa\n")
        with open(path) as fh, pytest.raises(SchemaError):
            list(read_pair_csv(fh))


class TestConfigFile:
    def test_durations(self):
        assert parse_duration_ns("10ms") == 10_000_000
        assert parse_duration_ns("500us") == 500_000
        assert parse_duration_ns("2.5s") == 2_500_000_000
        assert parse_duration_ns("42") == 42_000_000
        assert parse_duration_ns("42", "s") == 42_000_000_000
        with pytest.raises(InvalidConfig):
            parse_duration_ns("ten ms")

    def test_ini_round_trip(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("""
[experiment]
mode = synth
load = Heavy
slices = eMBB,mMTC
seed = 99
duration = 30s

[matcher]
window = 5ms
capacity = 128
reorder_slack = 250us

[impairments]
m3_loss = 0.02
reorder = 0.05
reorder_jitter = 300us

[attach]
probe_object = probes/upf_measure.o
upf1_pid = 1234
upf2_pid = 1235
""")
        cfg = load_config_file(ini)
        assert cfg.load == "Heavy"
        assert [k.value for k in cfg.slices] == ["eMBB", "mMTC"]
        assert cfg.seed == 99
        assert cfg.duration_s == 30.0
        assert cfg.window_ns == 5_000_000
        assert cfg.capacity == 128
        assert cfg.reorder_slack_ns == 250_000
        assert cfg.impairments.m3_loss_prob == 0.02
        assert cfg.impairments.reorder_jitter == 300_000
        assert cfg.attach.upf_pids == {"upf1": 1234, "upf2": 1235}
        mc = cfg.matcher_config()
        assert (mc.window, mc.capacity) == (5_000_000, 128)

    def test_defaults_match_deployment(self):
        cfg = ExperimentConfig()
        assert cfg.window_ns == 10_000_000
        assert cfg.capacity == 500
        assert cfg.duration_s == 600.0

    def test_cli_overrides_config(self, tmp_path, capsys):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nload = Heavy\nseed = 5\n")
        rc = main(["synth", "--config", str(ini), "--out", str(tmp_path / "o"),
                   "--duration", "1s", "--seed", "6"])
        assert rc == EXIT_OK
        # the Heavy label from the config file lands in the dataset
        with open(tmp_path / "o" / "pairs.csv") as fh:
            row = next(read_pair_csv(fh))
        assert row.load == "Heavy"
