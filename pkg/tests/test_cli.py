import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from kronreg.cli import main
from kronreg.errors import ConfigError
from kronreg.experiment import (
    CANONICAL_LABELS,
    CSV_HEADER,
    ExperimentConfig,
    load_config,
    parse_regularizer,
    read_csv,
    render,
    run,
)
from kronreg.pgm import read_pgm
from kronreg.regmat import Side, StencilKind
from kronreg.tikhonov import SolveReport


def small_config(tmp_path, **overrides):
    doc = {
        "problem": "shaw2d",
        "n": 12,
        "noise_levels": [1e-2, 1e-3],
        "seeds": [1, 2],
        "regularizers": ["Lt1xLt1", "P2Lt2xP1Lt1"],
        "k_max": 144,
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("label", CANONICAL_LABELS)
def test_label_round_trip(label):
    assert parse_regularizer(label).label == label


def test_label_factor_convention():
    spec = parse_regularizer("P2Lt2xLt1P1")
    assert spec.factor2 == (StencilKind.L2, Side.LEFT)
    assert spec.factor1 == (StencilKind.L1, Side.RIGHT)
    assert parse_regularizer([["L1", "Right"], ["L2", "Left"]]) == spec
    assert parse_regularizer({"factor1": ["L1", "Right"], "factor2": ["L2", "Left"]}) == spec


@pytest.mark.parametrize(
    "bad", ["Lt3xLt1", "P1Lt2xLt1", "Lt1", "Lt1xLt1xLt1", [["L1", "Up"], ["L1", "None"]], [["L1Square", "None"], ["L1", "None"]], 5]
)
def test_bad_regularizers(bad):
    with pytest.raises(ConfigError):
        parse_regularizer(bad)


@pytest.mark.parametrize(
    "override,field",
    [
        ({"seeds": []}, "seeds"),
        ({"noise_levels": []}, "noise_levels"),
        ({"regularizers": []}, "regularizers"),
        ({"eta": 0.9}, "eta"),
        ({"n": 11}, "n"),
        ({"problem": "deblur"}, "problem"),
        ({"mu_bracket": [1.0, 1e-3]}, "mu_bracket"),
        ({"k_max": 0}, "k_max"),
        ({"image_kind": "checker"}, "image_kind"),
        ({"seeds": [1.5]}, "seeds[0]"),
        ({"regularizers": ["Lt1xLt1", "Lt1xLt1"]}, "regularizers"),
        ({"sedes": [1]}, "sedes"),
        ({"shaw_variant": "other"}, "shaw_variant"),
        ({"problem": "blur", "shaw_variant": "displayed"}, "shaw_variant"),
    ],
)
def test_config_errors_name_the_field(tmp_path, override, field):
    path = small_config(tmp_path, **override)
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        load_config(path)


def test_missing_fields(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"problem": "blur"}))
    with pytest.raises(ConfigError, match="missing"):
        load_config(path)


def test_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_all_regularizers_shortcut(tmp_path):
    cfg = load_config(small_config(tmp_path, regularizers="all"))
    assert [r.label for r in cfg.regularizers] == list(CANONICAL_LABELS)


def test_run_writes_outputs(tmp_path):
    cfg = load_config(small_config(tmp_path))
    rows = run(cfg)
    assert len(rows) == 2 * 2 * 2
    out = tmp_path / "out"
    with open(out / "results.csv", newline="") as fh:
        records = list(csv.reader(fh))
    assert tuple(records[0]) == CSV_HEADER
    assert len(records) == 1 + len(rows)
    # canonical ordering: regularizer, then noise level, then seed
    assert [r[0] for r in records[1:5]] == ["Lt1xLt1"] * 4
    assert [(r[1], r[2]) for r in records[1:5]] == [("0.01", "1"), ("0.01", "2"), ("0.001", "1"), ("0.001", "2")]
    assert len(list((out / "runs").glob("*.pgm"))) == len(rows)
    assert len(list((out / "instances").glob("*.pgm"))) == 2 * 4
    for row in rows:
        if row.converged:
            # report.target is eta * eps
            assert row.discrepancy_residual <= row.report.target * (1 + 1e-6)
    parsed = read_csv(out / "results.csv")
    assert [p.k for p in parsed] == [r.k for r in rows]


def test_rows_follow_canonical_order_regardless_of_config_order(tmp_path):
    cfg = load_config(
        small_config(tmp_path, regularizers=["Lt2xLt2", "Lt1xLt1"], noise_levels=[1e-2], seeds=[1])
    )
    assert [r.regularizer_label for r in run(cfg)] == ["Lt1xLt1", "Lt2xLt2"]


def test_custom_problem(tmp_path):
    rng = np.random.default_rng(0)
    n = 8
    k = rng.standard_normal((n, n)) + n * np.eye(n)
    npz = tmp_path / "custom.npz"
    np.savez(npz, k1=k, k2=k.T, x_true=rng.random((n, n)))
    cfg = load_config(small_config(tmp_path, problem="custom", n=n, custom_npz=str(npz), seeds=[3]))
    rows = run(cfg)
    assert len(rows) == 4
    assert all(r.converged for r in rows)


def test_custom_requires_npz(tmp_path):
    with pytest.raises(ConfigError, match="custom_npz"):
        load_config(small_config(tmp_path, problem="custom"))


def test_render_constant_report(tmp_path):
    report = SolveReport(np.full((5, 3), 2.0), 1.0, 1, 0.0, True)
    render(report, tmp_path / "c.pgm")
    assert np.all(read_pgm(tmp_path / "c.pgm") == 128)


def test_render_rejects_vector(tmp_path):
    report = SolveReport(np.ones(4), 1.0, 1, 0.0, True)
    with pytest.raises(ValueError):
        render(report, tmp_path / "v.pgm")


def test_cli_run_render_and_exit_codes(tmp_path, capsys):
    path = small_config(tmp_path, noise_levels=[1e-2], seeds=[1])
    assert main(["run", "--config", str(path), "-q"]) == 0
    out = tmp_path / "out"
    assert main(["render", "--input", str(out / "results.csv"), "--out", str(tmp_path / "img")]) == 0
    assert len(list((tmp_path / "img").glob("*.pgm"))) == 2
    npz = next((out / "reports").glob("*.npz"))
    assert main(["render", "--input", str(npz), "--out", str(tmp_path / "one")]) == 0
    assert (tmp_path / "one" / f"{npz.stem}.pgm").exists()

    starved = small_config(tmp_path, noise_levels=[1e-3], seeds=[1], k_max=1)
    assert main(["run", "--config", str(starved), "-q"]) == 2

    broken = small_config(tmp_path, seeds=[])
    assert main(["run", "--config", str(broken)]) == 1
    assert "seeds" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1


def test_selfcheck_passes(capsys):
    assert main(["selfcheck"]) == 0
    assert capsys.readouterr().out.count("PASS") == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "kronreg", "--help"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert "selfcheck" in proc.stdout


def test_config_dataclass_validates_directly(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig("shaw2d", 12, [1e-3], [1], [], str(tmp_path))


def test_shaw_variant_flag(tmp_path):
    base = {"noise_levels": [1e-2], "seeds": [1], "regularizers": ["Lt1xLt1"]}
    canon = run(load_config(small_config(tmp_path, **base)))
    shown = run(load_config(small_config(tmp_path, shaw_variant="displayed", **base)))
    assert canon[0].relative_error != shown[0].relative_error
