import json

import numpy as np
import pytest

from mammocad.cli import main
from mammocad.core import read_pgm, write_pgm


@pytest.fixture()
def phantom_pgm(tmp_path):
    """Small mammogram-like phantom: breast, bright lesion, dark band."""
    rng = np.random.default_rng(0)
    img = np.zeros((96, 96))
    img[:, :72] = 0.35 + 0.03 * rng.random((96, 72))
    rr, cc = np.mgrid[0:96, 0:96]
    img[(rr - 48) ** 2 + (cc - 36) ** 2 <= 12 ** 2] = 0.85
    path = tmp_path / "mdb901.pgm"
    path.write_bytes(write_pgm(np.clip(img, 0, 1)))
    return path


def tiny_training_dir(tmp_path, n_per_class=5, size=64):
    rng = np.random.default_rng(1)
    data = tmp_path / "data"
    data.mkdir()
    lines = []
    idx = 1
    for label_code in ("NORM", "CIRC"):
        for _ in range(n_per_class):
            ident = f"mdb{idx:03d}"
            idx += 1
            img = 0.2 + 0.05 * rng.random((size, size))
            if label_code == "CIRC":
                img[20:44, 20:44] += 0.5
                lines.append(f"{ident} G CIRC B 32 32 12")
            else:
                lines.append(f"{ident} D NORM")
            (data / f"{ident}.pgm").write_bytes(write_pgm(np.clip(img, 0, 1)))
    info = tmp_path / "info.txt"
    info.write_text("\n".join(lines) + "\n")
    return data, info


def test_usage_error_exit_code():
    assert main(["no-such-command"]) == 1
    assert main(["segment"]) == 1          # missing required arguments
    assert main([]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "preprocess" in capsys.readouterr().out


def test_runtime_error_exit_code(tmp_path, capsys):
    missing = tmp_path / "missing.pgm"
    assert main(["preprocess", str(missing), "-o", str(tmp_path / "out")]) == 2
    err = capsys.readouterr().err
    assert "preprocess" in err


def test_preprocess_writes_stages(phantom_pgm, tmp_path):
    out = tmp_path / "stages"
    code = main(["preprocess", str(phantom_pgm), "-o", str(out), "--sigma", "10"])
    assert code == 0
    for name in ("denoised.pgm", "enhanced.pgm", "pectoral_removed.pgm", "config.echo"):
        assert (out / name).exists()
    assert "pipeline.sigma = 10.0" in (out / "config.echo").read_text()


def test_segment_writes_artifacts(phantom_pgm, tmp_path, capsys):
    out = tmp_path / "seg"
    code = main(["segment", str(phantom_pgm), "-o", str(out), "--sigma", "5",
                 "--set", "levelset.iterations=30"])
    assert code == 0
    for name in ("mask.pgm", "overlay.ppm", "membership.pgm", "phi.pgm", "config.echo"):
        assert (out / name).exists()
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["mask_area"] > 0
    assert (out / "overlay.ppm").read_bytes().startswith(b"P6")


def test_segment_gt_reports_dice(phantom_pgm, tmp_path, capsys):
    info = tmp_path / "info.txt"
    info.write_text("mdb901 G CIRC B 36 48 12\n")  # matches the phantom lesion
    out = tmp_path / "seg_gt"
    code = main(["segment", str(phantom_pgm), "-o", str(out), "--sigma", "5",
                 "--gt", "--info", str(info),
                 "--set", "levelset.iterations=30"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["dice"] >= 0.8  # lesion recovered, not just file plumbing


def test_segment_gt_requires_info(phantom_pgm, tmp_path):
    assert main(["segment", str(phantom_pgm), "-o", str(tmp_path / "x"), "--gt"]) == 2


def test_segment_verbose_diagnostics(phantom_pgm, tmp_path, capsys):
    out = tmp_path / "seg_v"
    code = main(["segment", str(phantom_pgm), "-o", str(out), "--sigma", "5",
                 "--verbose", "--set", "levelset.iterations=5",
                 "--set", "levelset.early_stop_frac=0"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    diag = [json.loads(l) for l in lines[:-1]]
    assert [d["iter"] for d in diag] == [1, 2, 3, 4, 5]
    assert all("area" in d and "mean_dphi" in d for d in diag)


@pytest.mark.filterwarnings("ignore:dataset has")
def test_train_classify_evaluate_round_trip(tmp_path, capsys):
    data, info = tiny_training_dir(tmp_path)
    model = tmp_path / "model.bin"
    code = main(["train", "--data", str(data), "--info", str(info),
                 "-o", str(model), "--desk", "--epochs", "2", "--seed", "1"])
    assert code == 0
    assert model.exists()
    assert model.with_suffix(".history.jsonl").exists()
    capsys.readouterr()

    image = data / "mdb001.pgm"
    code = main(["classify", "--model", str(model), str(image)])
    assert code == 0
    record = json.loads(capsys.readouterr().out.strip())
    assert record["label"] in ("normal", "abnormal")
    assert 0.0 <= record["p_abnormal"] <= 1.0
    assert abs(record["p_abnormal"] + record["p_normal"] - 1.0) < 1e-12

    report_path = tmp_path / "report.json"
    code = main(["evaluate", "--model", str(model), "--data", str(data),
                 "--info", str(info), "--seed", "1", "-o", str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert set(report) == {"accuracy", "sensitivity", "specificity", "precision",
                           "recall", "f_measure", "g_mean", "auc"}


@pytest.mark.filterwarnings("ignore:dataset has")
def test_evaluate_deterministic(tmp_path, capsys):
    data, info = tiny_training_dir(tmp_path, n_per_class=4)
    model = tmp_path / "model.bin"
    assert main(["train", "--data", str(data), "--info", str(info),
                 "-o", str(model), "--desk", "--epochs", "1", "--seed", "2"]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--data", str(data),
                 "--info", str(info), "--seed", "2"]) == 0
    first = capsys.readouterr().out
    assert main(["evaluate", "--model", str(model), "--data", str(data),
                 "--info", str(info), "--seed", "2"]) == 0
    second = capsys.readouterr().out
    assert first == second


def test_segment_idempotent(phantom_pgm, tmp_path):
    out = tmp_path / "seg_twice"
    args = ["segment", str(phantom_pgm), "-o", str(out), "--sigma", "5",
            "--set", "levelset.iterations=10"]
    assert main(args) == 0
    first = (out / "mask.pgm").read_bytes()
    assert main(args) == 0
    assert (out / "mask.pgm").read_bytes() == first
