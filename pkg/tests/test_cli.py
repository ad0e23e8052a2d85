import pytest

from blindcs import io
from blindcs.cli import main


@pytest.fixture
def measured(tmp_path):
    inst = tmp_path / "inst.npz"
    meas = tmp_path / "meas.npz"
    assert main(["synth", "--d", "16", "--m", "6", "--k", "2", "--ell", "10", "--seed", "1", "--out", str(inst)]) == 0
    assert main(["measure", str(inst), "--p-f", "3", "--p-v", "9", "--seed", "2", "--out", str(meas)]) == 0
    return meas


def test_bounds_to_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bounds", "--d", "16", "--m", "6", "--k", "2", "--p", "8,12", "--out", str(out)]) == 0
    assert io.read_csv(out)[0] == "bounds"


def test_pipeline(tmp_path, measured):
    assert main(["group", str(measured), "--out", str(tmp_path / "g.csv")]) == 0
    assert len(io.read_csv(tmp_path / "g.csv")[3]) == 150  # C(6, 2) supports x 10
    assert main(["recover", str(measured), "--check", "--out", str(tmp_path / "rec")]) == 0
    for f in ("recovered.npz", "match.csv", "coefficients.csv"):
        assert (tmp_path / "rec" / f).exists()


def test_dictlearn_complete(tmp_path):
    inst = tmp_path / "i.npz"
    main(["synth", "--d", "10", "--m", "12", "--k", "2", "--n", "600", "--coeff-model", "symmetric", "--out", str(inst)])
    assert main(["dictlearn", str(inst), "--refine-iters", "5", "--out", str(tmp_path / "dl")]) == 0
    assert (tmp_path / "dl" / "dictionary.npz").exists()


def test_exit_one_on_bad_input(tmp_path, capsys):
    assert main(["recover", str(tmp_path / "missing.npz")]) == 1
    assert main(["experiment", "run", "E9"]) == 1
    assert main(["synth", "--d", "4", "--m", "3", "--k", "5", "--n", "2", "--out", str(tmp_path / "x.npz")]) == 1
    with pytest.raises(SystemExit) as e:
        main(["synth", "--d", "four"])
    assert e.value.code == 1
    inst = tmp_path / "i.npz"
    main(["synth", "--d", "8", "--m", "4", "--k", "2", "--n", "5", "--out", str(inst)])
    assert main(["group", str(inst)]) == 1  # no measurements
    capsys.readouterr()


def test_experiment_check_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "e3.toml"
    cfg.write_text('id = "E3"\ntrials = 2\n[grid]\np_v = [9]\n')
    assert main(["experiment", "run", str(cfg), "--out", str(tmp_path / "ok"), "--check"]) == 0
    # an unreachable slope window forces a failing check
    cfg.write_text('id = "E6"\ntrials = 2\n[grid]\nell = [100, 200]\n[checks]\nslope_min = -0.2\nslope_max = -0.1\n')
    assert main(["experiment", "run", str(cfg), "--out", str(tmp_path / "bad"), "--check"]) == 2
    assert main(["experiment", "run", str(cfg), "--out", str(tmp_path / "bad")]) == 0
    assert main(["experiment", "list"]) == 0
    assert "E7" in capsys.readouterr().out
