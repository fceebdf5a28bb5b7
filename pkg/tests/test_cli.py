import csv
import json
from pathlib import Path

import numpy as np
import pytest

from drawnet import gdt
from drawnet.cli import main, parse_runconfig
from drawnet.errors import ConfigError


def write_config(path: Path, **overrides) -> Path:
    base = {
        "dimension": 2,
        "features": "xyalpv",
        "image_size": 32,
        "voxel_resolution": 16,
        "epochs": 2,
        "batch_size": 4,
        "val_fraction": 0.25,
        "test_fraction": 0.25,
        "seed": 3,
        "n_pd": 4,
        "n_hc": 4,
        "augment": "",
    }
    base.update(overrides)
    lines = ["# run config"] + [f"{k} = {v}" for k, v in base.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_parse_runconfig_types(tmp_path):
    cfg_path = write_config(tmp_path / "run.cfg", lr="5e-5")
    cfg = parse_runconfig(cfg_path)
    assert cfg.dimension == 2
    assert cfg.lr == 5e-5
    assert cfg.image_size == 32


def test_unknown_key_rejected(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("dimension = 2\nbogus_key = 1\n")
    with pytest.raises(ConfigError):
        parse_runconfig(cfg_path)
    assert main(["ingest", "--config", str(cfg_path)]) == 2


def test_duplicate_and_malformed_keys(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("dimension = 2\ndimension = 3\n")
    with pytest.raises(ConfigError):
        parse_runconfig(cfg_path)
    cfg_path.write_text("dimension\n")
    with pytest.raises(ConfigError):
        parse_runconfig(cfg_path)
    cfg_path.write_text("dimension = nine\n")
    with pytest.raises(ConfigError):
        parse_runconfig(cfg_path)


def test_full_pipeline_smoke(tmp_path, capsys):
    data_dir = tmp_path / "cohort"
    cfg_path = write_config(tmp_path / "run.cfg")

    assert main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    manifest = data_dir / "manifest.tsv"
    assert manifest.is_file()
    assert len(list((data_dir / "records").glob("*.csv"))) == 8

    cfg_path = write_config(tmp_path / "run.cfg", manifest=manifest)
    assert main(["ingest", "--config", str(cfg_path)]) == 0
    assert "records=8 PD=4 HC=4" in capsys.readouterr().out

    enc_dir = tmp_path / "encoded"
    assert main(["encode", "--config", str(cfg_path), "--out", str(enc_dir)]) == 0
    index = (enc_dir / "index.tsv").read_text().splitlines()
    assert len(index) == 8
    first_file = index[0].split("\t")[0]
    arr = gdt.read(enc_dir / first_file)
    assert arr.shape == (3, 32, 32)

    aug_dir = tmp_path / "augmented"
    aug_cfg = write_config(tmp_path / "aug.cfg", manifest=manifest,
                           augment="flip", multiplicity=2)
    assert main(["augment", "--config", str(aug_cfg), "--out", str(aug_dir)]) == 0
    assert len((aug_dir / "index.tsv").read_text().splitlines()) == 24  # 8 * (1+2)

    run_dir = tmp_path / "run1"
    assert main(["train", "--config", str(cfg_path), "--out", str(run_dir)]) == 0
    for name in ("history.csv", "metrics.csv", "test_index.tsv", "run.json",
                 "checkpoint/network.json"):
        assert (run_dir / name).is_file(), name
    history = (run_dir / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
    assert len(history) == 3

    capsys.readouterr()
    assert main(["evaluate", "--config", str(cfg_path), "--run", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "accuracy=" in out

    report_path = tmp_path / "report.csv"
    curves_dir = tmp_path / "curves"
    assert main(["report", "--out", str(report_path), "--curves", str(curves_dir),
                 str(run_dir), str(tmp_path / "ghost")]) == 0
    rows = list(csv.reader(report_path.open()))
    assert rows[0] == ["dim", "features", "precision", "sensitivity",
                       "specificity", "accuracy", "f1"]
    assert len(rows) == 2
    assert rows[1][0] == "2" and rows[1][1] == "xyalpv"
    err = capsys.readouterr().err
    assert "ghost" in err
    collected = list(curves_dir.glob("*.curves.csv"))
    assert len(collected) == 1
    assert collected[0].read_bytes() == (run_dir / "history.csv").read_bytes()


def test_train_rerun_is_byte_identical(tmp_path):
    data_dir = tmp_path / "cohort"
    cfg_path = write_config(tmp_path / "run.cfg")
    assert main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    cfg_path = write_config(tmp_path / "run.cfg", manifest=data_dir / "manifest.tsv",
                            dimension=1)
    run_a, run_b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", str(cfg_path), "--out", str(run_a)]) == 0
    assert main(["train", "--config", str(cfg_path), "--out", str(run_b)]) == 0
    for name in ("history.csv", "metrics.csv", "run.json"):
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes()


def test_encode_3d_without_velocity_rejected(tmp_path, capsys):
    data_dir = tmp_path / "cohort"
    cfg_path = write_config(tmp_path / "run.cfg")
    assert main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    bad_cfg = write_config(tmp_path / "bad.cfg", manifest=data_dir / "manifest.tsv",
                           dimension=3, features="xyalp")
    code = main(["encode", "--config", str(bad_cfg), "--out", str(tmp_path / "enc3")])
    assert code == 2
    out = capsys.readouterr().out
    assert "error-class=PlanInvalidForDimension" in out


def test_divergence_maps_to_exit_4(tmp_path, capsys):
    data_dir = tmp_path / "cohort"
    cfg_path = write_config(tmp_path / "run.cfg")
    assert main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    cfg_path = write_config(tmp_path / "run.cfg", manifest=data_dir / "manifest.tsv",
                            dimension=1, lr="1e30", epochs=60)
    with np.errstate(over="ignore", invalid="ignore"):
        code = main(["train", "--config", str(cfg_path), "--out", str(tmp_path / "run")])
    assert code == 4
    assert "error-class=NumericDivergence" in capsys.readouterr().out


def test_missing_manifest_is_data_error(tmp_path, capsys):
    cfg_path = write_config(tmp_path / "run.cfg", manifest=tmp_path / "nope.tsv")
    assert main(["ingest", "--config", str(cfg_path)]) == 3
    assert "error-class=" in capsys.readouterr().out


def test_report_ablation_grid(tmp_path):
    # the full ablation layout: four 1D cells, four 2D cells, two 3D cells
    from drawnet.ingest import FeatureSet
    from drawnet.trainer import Metrics, metrics_csv_row, write_metrics_csv

    cells = [(1, f) for f in ("xy", "xyv", "xyalp", "xyalpv")]
    cells += [(2, f) for f in ("xy", "xyv", "xyalp", "xyalpv")]
    cells += [(3, f) for f in ("xyv", "xyalpv")]
    run_dirs = []
    for i, (dim, letters) in enumerate(cells):
        run_dir = tmp_path / f"run{i}"
        run_dir.mkdir()
        metrics = Metrics(accuracy=0.5 + i / 100, precision=0.5, sensitivity=0.5,
                          specificity=0.5, f1=0.5)
        write_metrics_csv(
            run_dir / "metrics.csv",
            [metrics_csv_row(dim, FeatureSet.from_letters(letters), metrics)],
        )
        run_dirs.append(str(run_dir))
    out = tmp_path / "grid.csv"
    assert main(["report", "--out", str(out), *run_dirs]) == 0
    rows = list(csv.reader(out.open()))
    assert len(rows) == 11  # header + 10 ablation cells
    assert [(int(r[0]), r[1]) for r in rows[1:]] == cells


def test_cli_forty_plus_forty_artifacts(tmp_path):
    # synth -> encode(dim 2) -> train -> evaluate at cohort scale
    data_dir = tmp_path / "cohort"
    cfg_path = write_config(tmp_path / "run.cfg", n_pd=40, n_hc=40,
                            test_fraction=0.2, image_size=64, epochs=2, batch_size=8)
    assert main(["synth", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    cfg_path = write_config(tmp_path / "run.cfg", n_pd=40, n_hc=40,
                            test_fraction=0.2, image_size=64, epochs=2, batch_size=8,
                            manifest=data_dir / "manifest.tsv")
    enc_dir = tmp_path / "enc"
    assert main(["encode", "--config", str(cfg_path), "--out", str(enc_dir)]) == 0
    assert len((enc_dir / "index.tsv").read_text().splitlines()) == 80
    run_dir = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(run_dir)]) == 0
    assert main(["evaluate", "--config", str(cfg_path), "--run", str(run_dir)]) == 0
    for name in ("history.csv", "metrics.csv", "test_index.tsv",
                 "checkpoint/network.json", "run.json"):
        assert (run_dir / name).is_file(), name
    info = json.loads((run_dir / "run.json").read_text())
    assert info["test_records"] == 16


def test_synth_deterministic(tmp_path):
    cfg_path = write_config(tmp_path / "run.cfg")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--config", str(cfg_path), "--out", str(a)]) == 0
    assert main(["synth", "--config", str(cfg_path), "--out", str(b)]) == 0
    assert (a / "manifest.tsv").read_bytes() == (b / "manifest.tsv").read_bytes()
    for rec in (a / "records").iterdir():
        assert rec.read_bytes() == (b / "records" / rec.name).read_bytes()
