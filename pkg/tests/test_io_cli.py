import json
import math

import numpy as np
import pytest

from pqsphoton import cli
from pqsphoton import io as pio
from pqsphoton.errors import ConfigError, RecordParseError
from pqsphoton.experiments import experiment1_config
from pqsphoton.fock import ModelParams
from pqsphoton.record import DetectionRecord
from pqsphoton.simulate import InitialState, Injection, SimConfig, simulate_run


def _record(seed=0, S=400, injection=None):
    cfg = SimConfig(ModelParams(), InitialState.coherent(5.0), S, injection)
    return simulate_run(cfg, np.random.default_rng(seed))


def test_record_round_trip():
    rec = _record(injection=Injection(200, 0.9))
    text = pio.format_record(rec)
    back = pio.parse_record(text)
    assert back == rec
    assert pio.format_record(back) == text


def test_record_round_trip_on_disk(tmp_path):
    rec = _record(seed=4).without_truth()
    pio.write_record(rec, tmp_path / "r.txt")
    assert pio.read_record(tmp_path / "r.txt") == rec


@pytest.mark.parametrize(
    "mutate, line",
    [
        (lambda ls: ls.__setitem__(0, "# something else"), 1),
        (lambda ls: ls.__setitem__(-1, ls[-1].replace(",", ";")), -1),
        (lambda ls: ls.__setitem__(-2, ls[-2].split(",")[0] + ",9,g"), -2),
        (lambda ls: ls.__setitem__(-3, ls[-3] + "x"), -3),
        (lambda ls: ls.__setitem__(-4, "17," + ls[-4].split(",", 1)[1]), -4),
    ],
)
def test_parse_errors_carry_line_numbers(mutate, line):
    lines = pio.format_record(_record(S=20)).splitlines()
    mutate(lines)
    with pytest.raises(RecordParseError) as err:
        pio.parse_record("\n".join(lines) + "\n")
    assert err.value.line == (line if line > 0 else len(lines) + 1 + line)


def test_truncated_record_rejected():
    text = pio.format_record(_record(S=20))
    with pytest.raises(RecordParseError):
        pio.parse_record("\n".join(text.splitlines()[:-3]))


def test_parse_real_accepts_pi_expressions():
    assert pio.parse_real("pi/4") == pytest.approx(math.pi / 4)
    assert pio.parse_real("3*pi/4") == pytest.approx(3 * math.pi / 4)
    assert pio.parse_real("-pi") == pytest.approx(-math.pi)
    assert pio.parse_real("0.25") == 0.25
    with pytest.raises(ValueError):
        pio.parse_real("tau")


def test_config_round_trip():
    cfg = SimConfig(ModelParams(n_thermal=0.05), InitialState.fock(2), 123, Injection(60, 0.8), seed=7)
    assert pio.parse_config(pio.dump_config(cfg)) == cfg


def test_config_defaults_and_calibration():
    cfg = pio.parse_config("phases = 0, pi/4, pi/2, 3*pi/4\ninjection_sample = 10\nn_samples = 20\n")
    assert cfg.model == ModelParams()
    assert 0.85 < cfg.injection.emission_probability < 0.86


@pytest.mark.parametrize(
    "text",
    [
        "n_max = 1",
        "t_sample = 0",
        "t_cavity = -1",
        "fringe_offset = 0.5\nfringe_contrast = 0.6",
        "fringe_offset = -0.5\nfringe_contrast = 0.6",
        "detection_efficiency = 1.5",
        "n_thermal = -0.1",
        "phases = ",
        "initial_state = coherent:15",
        "initial_state = squeezed",
        "n_samples = 100\ninjection_sample = 100",
        "colour = blue",
    ],
)
def test_config_rejections(text):
    with pytest.raises(ConfigError):
        pio.parse_config(text)


def test_config_lists_every_problem():
    with pytest.raises(ConfigError) as err:
        pio.parse_config("n_thermal = -1\ndetection_efficiency = 2\nbogus = 1\n")
    assert len(err.value.problems) == 3


def test_simulate_zero_records_writes_manifest_only(tmp_path):
    out = cli.cmd_simulate(experiment1_config(), tmp_path, 0, 1)
    assert [p.name for p in out] == ["manifest.json"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json"]
    assert json.loads((tmp_path / "manifest.json").read_text())["artifact_paths"] == []


def test_simulate_is_byte_reproducible(tmp_path):
    cfg = SimConfig(ModelParams(), InitialState.coherent(12.0), 500)
    a = cli.cmd_simulate(cfg, tmp_path / "a", 3, 11)
    b = cli.cmd_simulate(cfg, tmp_path / "b", 3, 11)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_simulated_detection_rate(tmp_path):
    paths = cli.cmd_simulate(experiment1_config(), tmp_path, 15, 0)
    counts = np.concatenate([pio.read_record(p).detected_counts for p in paths if p.suffix == ".txt"])
    assert counts.size == 15 * 7000
    assert abs(counts.mean() - 0.28) < 0.01


def test_estimate_empty_record(tmp_path):
    m = ModelParams()
    z = np.zeros(50, int)
    pio.write_record(DetectionRecord(m, np.arange(50) % 4, z, z), tmp_path / "r.txt")
    cli.cmd_estimate(tmp_path / "r.txt", tmp_path / "est.csv")
    data = np.genfromtxt(tmp_path / "est.csv", delimiter=",", names=True)
    fwd = np.array([data[f"P_fwd_{n}"] for n in range(25)]).T
    np.testing.assert_allclose(fwd[0], 0.04, rtol=1e-14)
    for tag in ("fwd", "bwd", "pqs"):
        block = np.array([data[f"P_{tag}_{n}"] for n in range(25)]).T
        np.testing.assert_allclose(block.sum(axis=1), 1, atol=1e-8)


def test_estimate_pqs_has_fewer_map_jumps(tmp_path):
    rec = simulate_run(experiment1_config(), np.random.default_rng(8))
    pio.write_record(rec, tmp_path / "r.txt")
    cli.cmd_estimate(tmp_path / "r.txt", tmp_path / "est.csv")
    data = np.genfromtxt(tmp_path / "est.csv", delimiter=",", names=True)
    jumps = {k: np.count_nonzero(np.abs(np.diff(data[f"map_{k}"])) >= 8) for k in ("fwd", "pqs")}
    assert jumps["pqs"] < jumps["fwd"]


def test_experiment2_cli_sidecar(tmp_path):
    cfg = pio.parse_config("initial_state = thermal\nn_samples = 1201\ninjection_sample = 600\n")
    result, paths = cli.cmd_experiment(2, cfg, tmp_path, n_realizations=300, seed=0)
    side = json.loads((tmp_path / "experiment2.json").read_text())
    assert "jump_time_std_pqs" in side
    assert side["n_runs"] == 300
    p = side["selection_fraction"]
    se = math.sqrt(2962 / 16320 * (1 - 2962 / 16320) / 300)
    assert abs(p - 2962 / 16320) < 4 * se
    header = (tmp_path / "experiment2.csv").read_text().splitlines()[0]
    assert header == "t_seconds,mean_fwd,mean_bwd,mean_pqs,fit_value"


def test_main_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("n_thermal = -1\n")
    assert cli.main(["simulate", "--config", str(bad_cfg), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["estimate", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "e.csv")]) == 2
    (tmp_path / "junk.txt").write_text("hello\n")
    assert cli.main(["estimate", str(tmp_path / "junk.txt"), "--out", str(tmp_path / "e.csv")]) == 1
    good = tmp_path / "good.cfg"
    good.write_text("initial_state = coherent:3\nn_samples = 100\n")
    assert cli.main(["simulate", "--config", str(good), "--out", str(tmp_path / "o"), "--records", "2"]) == 0
    assert cli.main(["estimate", str(tmp_path / "o" / "record_00001.txt"), "--out", str(tmp_path / "e.csv")]) == 0
    err = capsys.readouterr().err
    assert "error" in err
