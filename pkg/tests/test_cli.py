import json
import subprocess
import sys

import numpy as np
import pytest

from stmp import (
    build_from_patches,
    coded_exposure_operator,
    load_dictionary,
    load_pgm,
    load_tensor,
    load_tree,
    random_exposure_mask,
    save_dictionary,
    save_pgm,
    save_tensor,
    simulate_coded_exposure,
    validate_tree,
)
from stmp.cli import main


def _write_image(path, seed, shape=(48, 48)):
    rng = np.random.default_rng(seed)
    xs = np.linspace(0.0, 1.0, shape[0], dtype=np.float32)
    ys = np.linspace(0.0, 1.0, shape[1], dtype=np.float32)
    smooth = np.outer(np.sin(xs * 5.0), np.cos(ys * 3.0)) * 0.4 + 0.5
    img = np.clip(smooth + rng.random(shape) * 0.05, 0.0, 1.0).astype(np.float32)
    save_pgm(img, path)
    return img


def test_version_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "stmp", "--version"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "stmp" in proc.stdout


def test_build_dict_and_tree(tmp_path, capsys):
    img1 = tmp_path / "a.pgm"
    img2 = tmp_path / "b.pgm"
    _write_image(img1, 1)
    _write_image(img2, 2)
    dict_path = tmp_path / "d.dict"
    rc = main(
        [
            "build-dict",
            "--images", str(img1), str(img2),
            "--patch", "8,8",
            "--stride", "4,4",
            "--atoms", "150",
            "--seed", "3",
            "--out", str(dict_path),
        ]
    )
    assert rc == 0
    assert "n=64 m=150" in capsys.readouterr().out
    d = load_dictionary(dict_path)
    manifest = json.loads((tmp_path / "d.dict.manifest.json").read_text())
    assert manifest["command"] == "build-dict"
    assert manifest["parameters"]["atoms"] == 150

    tree_path = tmp_path / "d.tree"
    rc = main(
        ["build-tree", "--dict", str(dict_path), "--branching", "10,5",
         "--seed", "4", "--out", str(tree_path)]
    )
    assert rc == 0
    tree = load_tree(tree_path)
    report = validate_tree(tree, d)
    assert report.ok, report.violation


def test_build_dict_deterministic(tmp_path):
    img = tmp_path / "a.pgm"
    _write_image(img, 5)
    args = ["build-dict", "--images", str(img), "--patch", "6,6",
            "--stride", "3,3", "--atoms", "40", "--seed", "8"]
    out1 = tmp_path / "one.dict"
    out2 = tmp_path / "two.dict"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_build_dict_insufficient_data(tmp_path, capsys):
    img = tmp_path / "a.pgm"
    _write_image(img, 6, shape=(16, 16))
    rc = main(
        ["build-dict", "--images", str(img), "--patch", "8,8", "--stride", "8,8",
         "--atoms", "500", "--out", str(tmp_path / "d.dict")]
    )
    assert rc == 1
    assert "insufficient" in capsys.readouterr().err.lower()


def test_build_dict_missing_file(tmp_path, capsys):
    rc = main(
        ["build-dict", "--images", str(tmp_path / "nope.pgm"), "--patch", "4,4",
         "--stride", "2,2", "--atoms", "10", "--out", str(tmp_path / "d.dict")]
    )
    assert rc == 1


def test_build_tree_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["build-tree", "--dict", "x", "--branching", "0,10", "--out", "y"])
    assert err.value.code == 2


def test_run_denoise_paired_selectors(tmp_path):
    img_path = tmp_path / "in.pgm"
    _write_image(img_path, 7, shape=(40, 40))
    dict_path = tmp_path / "d.dict"
    assert main(
        ["build-dict", "--images", str(img_path), "--patch", "8,8", "--stride", "2,2",
         "--atoms", "250", "--seed", "1", "--out", str(dict_path)]
    ) == 0
    report_path = tmp_path / "report.csv"
    common = [
        "run", "--task", "denoise", "--in", str(img_path), "--dict", str(dict_path),
        "--patch", "8,8", "--stride", "4,4", "--k", "4", "--seed", "2",
        "--reference", str(img_path), "--report", str(report_path),
    ]
    out_exact = tmp_path / "exact.pgm"
    out_tree = tmp_path / "tree.pgm"
    assert main(common + ["--selector", "exact", "--out", str(out_exact)]) == 0
    assert main(
        common
        + ["--selector", "stmp", "--alpha", "0.2", "--branching", "30,5",
           "--out", str(out_tree)]
    ) == 0
    lines = report_path.read_text().strip().splitlines()
    assert lines[0] == (
        "task, m, n, K, alpha, selector, psnr_db, snr_db, inner_products, patches, seconds"
    )
    assert len(lines) == 3
    exact_fields = [f.strip() for f in lines[1].split(",")]
    tree_fields = [f.strip() for f in lines[2].split(",")]
    assert exact_fields[5] == "exact" and tree_fields[5] == "stmp"
    assert int(tree_fields[8]) < int(exact_fields[8])
    manifest = json.loads((tmp_path / "exact.pgm.manifest.json").read_text())
    assert "threads" not in manifest["parameters"]
    assert load_pgm(out_exact).shape == (40, 40)


def test_run_alpha_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["run", "--task", "denoise", "--alpha", "0"])
    assert err.value.code == 2


def test_run_stmp_needs_tree_or_branching(tmp_path):
    img_path = tmp_path / "in.pgm"
    _write_image(img_path, 8, shape=(16, 16))
    dict_path = tmp_path / "d.dict"
    assert main(
        ["build-dict", "--images", str(img_path), "--patch", "4,4", "--stride", "2,2",
         "--atoms", "30", "--out", str(dict_path)]
    ) == 0
    with pytest.raises(SystemExit) as err:
        main(
            ["run", "--task", "denoise", "--in", str(img_path), "--dict", str(dict_path),
             "--patch", "4,4", "--stride", "2,2", "--k", "2", "--out", str(tmp_path / "o.pgm")]
        )
    assert err.value.code == 2


def test_run_superres_shape(tmp_path):
    img_path = tmp_path / "hi.pgm"
    _write_image(img_path, 9, shape=(64, 64))
    dict_path = tmp_path / "d.dict"
    assert main(
        ["build-dict", "--images", str(img_path), "--patch", "16,16", "--stride", "4,4",
         "--atoms", "120", "--seed", "1", "--out", str(dict_path)]
    ) == 0
    low_path = tmp_path / "low.tnsr"
    save_tensor(np.random.default_rng(10).random((32, 32)).astype(np.float32), low_path)
    out_path = tmp_path / "up.tnsr"
    rc = main(
        ["run", "--task", "superres", "--in", str(low_path), "--dict", str(dict_path),
         "--patch", "16,16", "--stride", "2,2", "--k", "3", "--factor", "4",
         "--selector", "exact", "--out", str(out_path)]
    )
    assert rc == 0
    assert load_tensor(out_path).shape == (128, 128)


def test_run_csrecover_generated_mask(tmp_path):
    rng = np.random.default_rng(11)
    video = rng.random((8, 8, 6)).astype(np.float32)
    mask = random_exposure_mask((4, 4), 3, 2, seed=12)
    measured = simulate_coded_exposure(video, coded_exposure_operator(mask))
    meas_path = tmp_path / "meas.tnsr"
    save_tensor(measured, meas_path)

    patches = rng.standard_normal((80, 48)).astype(np.float32)
    d = build_from_patches(patches, 60, seed=13)
    dict_path = tmp_path / "d.dict"
    save_dictionary(d, dict_path)

    out_path = tmp_path / "video.tnsr"
    rc = main(
        ["run", "--task", "csrecover", "--in", str(meas_path), "--dict", str(dict_path),
         "--patch", "4,4,3", "--k", "3", "--mask-open", "2", "--seed", "12",
         "--selector", "exact", "--out", str(out_path)]
    )
    assert rc == 0
    assert load_tensor(out_path).shape == (8, 8, 6)


def test_run_maskrecover_views(tmp_path):
    rng = np.random.default_rng(14)
    field = rng.random((4, 4, 5, 5)).astype(np.float32)
    in_path = tmp_path / "field.tnsr"
    save_tensor(field, in_path)
    patches = rng.standard_normal((120, 400)).astype(np.float32)
    d = build_from_patches(patches, 80, seed=15)
    dict_path = tmp_path / "d.dict"
    save_dictionary(d, dict_path)
    out_path = tmp_path / "full.tnsr"
    rc = main(
        ["run", "--task", "maskrecover", "--in", str(in_path), "--dict", str(dict_path),
         "--patch", "4,4,5,5", "--stride", "4,4,5,5", "--k", "5",
         "--views", "0,2;4,0;4,4", "--selector", "exact", "--out", str(out_path)]
    )
    assert rc == 0
    assert load_tensor(out_path).shape == (4, 4, 5, 5)


def test_run_maskrecover_needs_one_mask_source(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(
            ["run", "--task", "maskrecover", "--in", "x", "--dict", "y",
             "--patch", "4,4", "--stride", "4,4", "--k", "2", "--out", "z"]
        )
    assert err.value.code == 2


def test_benchmark_sweep(tmp_path):
    out_path = tmp_path / "bench.csv"
    rc = main(
        ["benchmark", "--dict-sizes", "200,400", "--dim", "8", "--branching", "10,5",
         "--alpha", "0.5,1", "--queries", "20", "--seed", "3", "--out", str(out_path)]
    )
    assert rc == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "m, alpha, exact_ip, stmp_ip, stmp_centroid_ip, agreement"
    assert len(lines) == 5
    for line in lines[1:]:
        fields = [f.strip() for f in line.split(",")]
        assert fields[0] in {"200", "400"}
        if fields[1] == "1":
            assert float(fields[5]) == 1.0
        assert float(fields[2]) == float(fields[0])  # exact scans every atom


def test_config_file_merge(tmp_path):
    img = tmp_path / "a.pgm"
    _write_image(img, 16)
    config = {
        "images": [str(img)],
        "patch": "6,6",
        "stride": [3, 3],
        "atoms": 20,
        "out": str(tmp_path / "from_config.dict"),
    }
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps(config))
    assert main(["build-dict", "--config", str(config_path)]) == 0
    d = load_dictionary(tmp_path / "from_config.dict")
    assert d.m == 20

    # explicit flag wins over the config value
    assert main(
        ["build-dict", "--config", str(config_path), "--atoms", "25",
         "--out", str(tmp_path / "override.dict")]
    ) == 0
    assert load_dictionary(tmp_path / "override.dict").m == 25


def test_config_unknown_key(tmp_path):
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({"atom": 10}))
    with pytest.raises(SystemExit) as err:
        main(["build-dict", "--config", str(config_path)])
    assert err.value.code == 2
