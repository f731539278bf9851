import shutil
import subprocess
import sys

import numpy as np
import pytest

from monovote.cli import EXIT_FORMAT, EXIT_VALIDATION, build_parser, main
from monovote.kitti_io import read_detections, read_labels

SUBCOMMANDS = ["stats", "fit-prior", "fit-gpd", "fit-head", "infer", "eval", "mce", "synth"]


@pytest.fixture
def corpus(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("seed = 3\nn_frames = 6\nn_objects = 2 4\nocclusion_rate = 0.3\n")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 0
    return tmp_path / "c"


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as ex:
        main([cmd, "--help"])
    assert ex.value.code == 0
    out = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in out


def test_unknown_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as ex:
        main(["mce", "--dets", "a", "--gts", "b", "--bogus"])
    assert ex.value.code == 2


def test_abbreviated_flag_rejected():
    with pytest.raises(SystemExit) as ex:
        main(["synth", "--conf", "x", "--out", "y"])
    assert ex.value.code == 2


def test_eval_on_ground_truth_gives_one(corpus, tmp_path, capsys):
    # labels double as detections once a score column is appended
    dets = tmp_path / "dets"
    dets.mkdir()
    for p in sorted((corpus / "label_2").iterdir()):
        dets.joinpath(p.name).write_text("".join(l + " 1.0\n" for l in p.read_text().splitlines()))
    out = tmp_path / "ap.csv"
    assert main(["eval", "--dets", str(dets), "--gts", str(corpus / "label_2"),
                 "--metric", "bev", "3d", "--regime", "hard", "--ap", "40", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 4
    assert all(r.endswith(",1.000000") for r in rows)


def test_stats_and_fit_prior(corpus, tmp_path, capsys):
    assert main(["fit-prior", "--labels", str(corpus / "label_2"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p").read_text().startswith("Car ")
    assert main(["stats", "--labels", str(corpus / "label_2"), "--calib", str(corpus / "calib"),
                 "--prior", str(tmp_path / "p"), "--threads", "3"]) == 0
    out = capsys.readouterr().out
    assert "bin_low,bin_high,count" in out and "mean_dZ=" in out


def test_fit_gpd_methods_agree(corpus, tmp_path):
    for method in ("mle", "kl"):
        assert main(["fit-gpd", "--offsets", str(corpus / "offsets.csv"), "--method", method,
                     "--out", str(tmp_path / method)]) == 0
    a = np.array((tmp_path / "mle").read_text().split(), float)
    b = np.array((tmp_path / "kl").read_text().split(), float)
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_infer_mean_and_linear(corpus, tmp_path):
    labels, calib = str(corpus / "label_2"), str(corpus / "calib")
    main(["fit-prior", "--labels", labels, "--out", str(tmp_path / "p")])
    main(["fit-gpd", "--offsets", str(corpus / "offsets.csv"), "--out", str(tmp_path / "g")])
    common = ["--calib", calib, "--prior", str(tmp_path / "p"), "--gpd", str(tmp_path / "g"),
              "--aam", str(corpus / "aam")]
    assert main(["fit-head", "--labels", labels, *common, "--out", str(tmp_path / "h")]) == 0
    assert main(["infer", "--boxes2d", labels, *common, "--out", str(tmp_path / "mean")]) == 0
    assert main(["infer", "--boxes2d", labels, *common, "--head", "linear",
                 "--head-params", str(tmp_path / "h"), "--out", str(tmp_path / "lin")]) == 0
    for fid in ("000000", "000003"):
        gts = read_labels(corpus / "label_2" / f"{fid}.txt")
        for sub in ("mean", "lin"):
            dets = read_detections(tmp_path / sub / f"{fid}.txt")
            assert len(dets) == len(gts)
    assert main(["mce", "--dets", str(tmp_path / "mean"), "--gts", labels,
                 "--out", str(tmp_path / "mce.csv"), "--plot", str(tmp_path / "mce.dat")]) == 0
    assert (tmp_path / "mce.csv").read_text().startswith("bin_low,bin_high,mean,std,count")


def test_linear_head_without_params_is_usage_error(corpus, tmp_path):
    (tmp_path / "p").write_text("Car 1.53\n")
    (tmp_path / "g").write_text("0 0 0.01 0.01\n")
    with pytest.raises(SystemExit) as ex:
        main(["infer", "--boxes2d", str(corpus / "label_2"), "--calib", str(corpus / "calib"),
              "--prior", str(tmp_path / "p"), "--gpd", str(tmp_path / "g"), "--head", "linear",
              "--out", str(tmp_path / "o")])
    assert ex.value.code == 2


def test_format_error_names_file_and_line(corpus, tmp_path, capsys):
    bad = tmp_path / "labels"
    shutil.copytree(corpus / "label_2", bad)
    target = bad / "000002.txt"
    lines = target.read_text().splitlines()
    lines.insert(1, "Car 0 0 0 1 2 three 4 1 1 1 0 0 5 0")
    target.write_text("\n".join(lines) + "\n")
    assert main(["fit-prior", "--labels", str(bad), "--out", str(tmp_path / "p")]) == EXIT_FORMAT
    err = capsys.readouterr().err
    assert "000002.txt" in err and "line 2" in err


def test_validation_error_exit_code(corpus, tmp_path, capsys):
    (tmp_path / "g").write_text("0 0 -1 1\n")
    (tmp_path / "p").write_text("Car 1.5\n")
    code = main(["infer", "--boxes2d", str(corpus / "label_2"), "--calib", str(corpus / "calib"),
                 "--prior", str(tmp_path / "p"), "--gpd", str(tmp_path / "g"), "--out", str(tmp_path / "o")])
    assert code == EXIT_VALIDATION
    assert str(tmp_path / "g") in capsys.readouterr().err


def test_missing_file_is_format_error(tmp_path, capsys):
    assert main(["synth", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == EXIT_FORMAT


def test_synth_deterministic_and_threaded(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("seed = 11\nn_frames = 5\njitter_std = 1.0\n")
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["synth", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "4"])
    for sub in ("label_2", "calib", "aam"):
        for p in (tmp_path / "a" / sub).iterdir():
            assert p.read_bytes() == (tmp_path / "b" / sub / p.name).read_bytes()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "monovote", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "synth" in r.stdout
