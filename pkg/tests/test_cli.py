"""Command-line pipeline: files, exit codes, determinism and config files."""

import numpy as np
import pytest

from sodbt.cli import main, read_config
from sodbt.evaluation import load_plot_data
from sodbt.model import SecondOrderSystem, load_model_with_provenance, save_model
from sodbt.quadrature import offset_rule_pair


@pytest.fixture
def small(tmp_path):
    """Small chain model and its samples."""
    m = tmp_path / "c.som"
    s = tmp_path / "c.sos"
    assert main(["gen-model", "--n", "10", "--alpha", "0.05", "--beta", "0.05", "--seed", "7",
                 "--stiffness", "100", "-o", str(m)]) == 0
    assert main(["sample", str(m), "--nu", "60", "-o", str(s)]) == 0
    return m, s


def test_gen_model_loadable(tmp_path, capsys):
    out = tmp_path / "chain50.som"
    assert main(["gen-model", "--n", "50", "--alpha", "0.05", "--beta", "0.05", "--seed", "7", "-o", str(out)]) == 0
    sys_, _ = load_model_with_provenance(out)
    assert sys_.n == 50 and sys_.damping == (0.05, 0.05)
    text = capsys.readouterr().out
    assert "n=50" in text and "stable=yes" in text


def test_gen_model_deterministic(tmp_path):
    a, b = tmp_path / "a.som", tmp_path / "b.som"
    for f in (a, b):
        main(["gen-model", "--n", "12", "--alpha", "0.1", "--seed", "3", "-o", str(f)])
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("flag,value", [("--alpha", "-1"), ("--beta", "-0.5"), ("--n", "0"), ("--jitter", "1.5")])
def test_gen_model_validation(tmp_path, capsys, flag, value):
    argv = ["gen-model", "--n", "5", "-o", str(tmp_path / "x.som")]
    if flag == "--n":
        argv[2] = value
    else:
        argv += [flag, value]
    assert main(argv) == 2
    assert flag in capsys.readouterr().err


def test_sample_deterministic(small, tmp_path):
    m, s = small
    again = tmp_path / "again.sos"
    main(["sample", str(m), "--nu", "60", "-o", str(again)])
    assert again.read_bytes() == s.read_bytes()


def test_sample_missing_model(tmp_path):
    assert main(["sample", str(tmp_path / "nope.som"), "-o", str(tmp_path / "x.sos")]) == 2


@pytest.mark.parametrize("extra", [["--lo", "0"], ["--hi", "1e-3"], ["--nu", "1"]])
def test_sample_validation(small, tmp_path, extra):
    m, _ = small
    assert main(["sample", str(m), *extra, "-o", str(tmp_path / "x.sos")]) == 2


def test_sample_singular_exit_three(tmp_path):
    _, q = offset_rule_pair(1e-2, 1e4, 4)
    w = q.positive_nodes[1]
    s = SecondOrderSystem(np.eye(1), np.zeros((1, 1)), np.array([[w * w]]), np.ones((1, 1)), np.ones((1, 1)),
                          damping=(0.0, 0.0))
    path = tmp_path / "res.som"
    save_model(s, path)
    assert main(["sample", str(path), "--nu", "4", "-o", str(tmp_path / "x.sos")]) == 3


def test_reduce_all_methods(small, tmp_path, capsys):
    m, s = small
    for method, src in (("bt", m), ("data-bt", s), ("krydata-bt", s)):
        out = tmp_path / f"{method}.som"
        assert main(["reduce", "--method", method, str(src), "-r", "4", "-m", "8", "-o", str(out)]) == 0
        red, prov = load_model_with_provenance(out)
        assert red.n == 4
    assert "singular values near r" in capsys.readouterr().out


def test_reduce_bt_needs_model(small, capsys):
    _, s = small
    assert main(["reduce", "--method", "bt", str(s), "-r", "3", "-o", "unused.som"]) == 2
    assert "intrusive method needs a model" in capsys.readouterr().err


def test_reduce_data_needs_samples(small):
    m, _ = small
    assert main(["reduce", "--method", "data-bt", str(m), "-r", "3", "-o", "unused.som"]) == 2


def test_reduce_rank_failure_exit_four(small, tmp_path, capsys):
    _, s = small
    assert main(["reduce", "--method", "data-bt", str(s), "-r", "500", "-o", str(tmp_path / "x.som")]) == 4
    assert "RankDeficient" in capsys.readouterr().err


def test_reduce_bad_order(small, tmp_path):
    _, s = small
    assert main(["reduce", "--method", "data-bt", str(s), "-r", "0", "-o", str(tmp_path / "x.som")]) == 2


def test_compare_table_and_files(small, tmp_path, capsys):
    m, s = small
    reds = []
    for method, src in (("bt", m), ("data-bt", s), ("krydata-bt", s)):
        out = tmp_path / f"{method}.som"
        main(["reduce", "--method", method, str(src), "-r", "4", "-m", "8", "-o", str(out)])
        reds.append(str(out))
    capsys.readouterr()
    prefix = str(tmp_path / "cmp")
    assert main(["compare", str(m), *reds, "--count", "300", "--steps", "400", "--b", "5",
                 "--prefix", prefix]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["model", "r", "hinf_rel", "h2_rel"]
    rows = lines[1:4]
    assert [r.split()[0] for r in rows] == ["BT-SOPD(r=4)", "Data-BT-SOPD(r=4)", "KryData-BT-SOPD(r=4)"]
    assert all(float(r.split()[2]) < 1 for r in rows)
    assert "exp-sine a=1 b=5" in lines[4]
    names, data = load_plot_data(prefix + "_time.dat")
    assert names == ["time", "y_full", "y_0", "y_1", "y_2"] and data.shape == (401, 5)
    names, _ = load_plot_data(prefix + "_bode_2.dat")
    assert names[0] == "freq"


def test_compare_validation(small):
    m, _ = small
    assert main(["compare", str(m), str(m), "--t-end", "0"]) == 2


def test_config_file_flags_win(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# chain\nn = 6\nalpha = 0.2  # damping\nseed = 4\n")
    a = tmp_path / "a.som"
    assert main(["--config", str(cfg), "gen-model", "-o", str(a)]) == 0
    sys_, _ = load_model_with_provenance(a)
    assert sys_.n == 6 and sys_.damping[0] == 0.2
    b = tmp_path / "b.som"
    assert main(["--config", str(cfg), "gen-model", "--alpha", "0.3", "-o", str(b)]) == 0
    assert load_model_with_provenance(b)[0].damping[0] == 0.3


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["--config", str(cfg), "gen-model", "--n", "3", "-o", str(tmp_path / "x.som")]) == 2
    cfg.write_text("n = three\n")
    assert main(["--config", str(cfg), "gen-model", "-o", str(tmp_path / "x.som")]) == 2
    assert main(["--config", str(tmp_path / "none.cfg"), "gen-model", "-o", "x.som"]) == 2
    cfg.write_text("just words\n")
    with pytest.raises(Exception):
        read_config(cfg)


def test_help_per_command(capsys):
    for cmd in ("gen-model", "sample", "reduce", "compare"):
        assert main([cmd, "--help"]) == 0
        assert "usage" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "sodbt", "gen-model", "--n", "3", "-o", str(tmp_path / "x.som")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "n=3" in res.stdout
