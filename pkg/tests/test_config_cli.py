import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from idsubdiff import cli
from idsubdiff.config import config_from_dict, dump_config, load_config, loads_config
from idsubdiff.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """
[law]
family = "stable"
alpha = 0.7

[coefficients]
F = "0"
sigma = "0"
E = "0"

[grid]
delta = 1e-3
t_max = 1.0
obs_times = [0.5, 1.0]

[ensemble]
n_paths = 50
seed = 1
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- config ------------------------------------------------------------------

@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = load_config(path)
    again = loads_config(dump_config(cfg))
    assert again == cfg


def test_round_trip_all_law_and_noise_kinds():
    text = BASE.replace('family = "stable"\nalpha = 0.7',
                        'family = "distributed"\nmixture = [[0.25, 0.4], [0.75, 0.9]]')
    text += '\n[noise]\nkind = "compound_poisson"\nrate = 2.0\njump_law = "two_point"\np = 0.3\n'
    text = text.replace('E = "0"', 'E = "1 + t"')
    cfg = loads_config(text)
    assert loads_config(dump_config(cfg)) == cfg
    tempered = loads_config(BASE.replace('family = "stable"\nalpha = 0.7',
                                         'family = "tempered"\nalpha = 0.4\nlambda = 2.0'))
    assert loads_config(dump_config(tempered)) == tempered


@pytest.mark.parametrize("mutate, message", [
    (lambda s: s.replace("alpha = 0.7", "alpha = 0.7\nalhpa = 1"), "unknown key"),
    (lambda s: s + "\n[extra]\nx = 1\n", "unknown section"),
    (lambda s: s.replace('E = "0"', 'E = "x"'), "depends on x"),
    (lambda s: s.replace("alpha = 0.7", "alpha = 1.7"), "alpha"),
    (lambda s: s.replace("alpha = 0.7", 'alpha = "0.7"'), "finite number"),
    (lambda s: s.replace("n_paths = 50", "n_paths = 5.0"), "integer"),
    (lambda s: s.replace("obs_times = [0.5, 1.0]", "obs_times = [1.0, 0.5]"), "increasing"),
    (lambda s: s.replace("t_max = 1.0", "t_max = 0.7"), "(0, t_max]"),
    (lambda s: s.replace('F = "0"', 'F = "x +"'), "offset 3"),
    (lambda s: s.replace("[ensemble]\nn_paths = 50\nseed = 1", ""), "ensemble"),
    (lambda s: s.replace("alpha = 0.7", "alpha = 0.7\nlambda = 1.0"), "do not apply"),
    (lambda s: s + '\n[noise]\nkind = "symmetric_stable"\n', "needs beta"),
    (lambda s: s + '\n[output]\nformats = ["moments", "pdf"]\n', "unknown formats"),
])
def test_config_rejections(mutate, message):
    with pytest.raises(ConfigError) as info:
        loads_config(mutate(BASE))
    assert message in str(info.value)


def test_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigError) as info:
        loads_config("[law]\nfamily = \"stable\"\nalpha = 0.5 x\n")
    assert "line 3" in str(info.value) and "column" in str(info.value)


def test_config_from_dict_defaults():
    cfg = config_from_dict({"law": {"family": "stable", "alpha": 0.5},
                            "grid": {"delta": 0.01, "t_max": 1.0, "obs_times": [1.0]},
                            "ensemble": {"n_paths": 1, "seed": 0}})
    assert cfg.scenario.F.is_zero and cfg.scenario.noise.kind.value == "none"
    assert cfg.output.formats == ("moments", "density", "report")


# --- cli -----------------------------------------------------------------------

def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_zero_dynamics(tmp_path):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "out"
    assert cli.main(["simulate", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "moments.csv")
    assert rows[0] == ["t", "mean", "mean_se", "var", "var_se", "n"]
    assert [r[0] for r in rows[1:]] == ["0.5", "1.0"]
    for r in rows[1:]:
        assert [float(v) for v in r[1:5]] == [0.0] * 4 and r[5] == "50"
    dens = read_csv(out / "density_t1.csv")
    assert dens[0] == ["bin_left", "bin_right", "density"]
    report = json.loads((out / "report.txt").read_text())
    assert report["scenario"]["grid"]["obs_times"] == [0.5, 1.0]


def test_simulate_seed_override_and_workers(tmp_path):
    cfg = write(tmp_path, BASE.replace('sigma = "0"', 'sigma = "1"'))
    outs = []
    for workers, seed in ((1, 5), (2, 5), (1, 6)):
        out = tmp_path / f"o{workers}{seed}"
        assert cli.main(["simulate", str(cfg), "--out", str(out), "--workers", str(workers),
                         "--seed", str(seed)]) == 0
        outs.append((out / "moments.csv").read_bytes())
    assert outs[0] == outs[1] != outs[2]


def test_simulate_free_sample_config(tmp_path):
    out = tmp_path / "free"
    assert cli.main(["simulate", str(CONFIGS / "free_subdiffusion.toml"), "--out", str(out)]) == 0
    rows = {r[0]: r for r in read_csv(out / "moments.csv")[1:]}
    var, var_se = float(rows["1.0"][3]), float(rows["1.0"][4])
    expected = 1 / special.gamma(1.7)
    assert abs(var - expected) <= max(3 * var_se, 0.02 * expected)


def test_simulate_rejects_space_dependent_jump(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace('E = "0"', 'E = "x"'))
    assert cli.main(["simulate", str(cfg)]) == 2
    assert "depends on x" in capsys.readouterr().err


def test_simulate_missing_file(tmp_path):
    assert cli.main(["simulate", str(tmp_path / "nope.toml")]) == 2


def test_simulate_na_for_infinite_variance(tmp_path):
    cfg = write(tmp_path, BASE.replace('E = "0"', 'E = "1"')
                + '\n[noise]\nkind = "symmetric_stable"\nbeta = 1.5\n')
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "moments.csv")
    assert all(r[3] == "NA" and r[4] == "NA" for r in rows[1:])


def test_lipschitz_warning_printed(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace('F = "0"', 'F = "-x^3"'))
    assert cli.main(["simulate", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert "Lipschitz" in capsys.readouterr().err


def test_verify_operators_default_passes(capsys):
    assert cli.main(["verify-operators"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_verify_operators_coarse_fails(capsys):
    assert cli.main(["verify-operators", "--h", "0.1"]) == 1
    assert "order" in capsys.readouterr().out


def test_verify_operators_tempered():
    assert cli.main(["verify-operators", "--law", "tempered", "--alpha", "0.5",
                     "--lambda", "1.0"]) == 0


def test_verify_operators_bad_parameters(capsys):
    assert cli.main(["verify-operators", "--alpha", "1.5"]) == 2
    assert cli.main(["verify-operators", "--law", "distributed", "--mixture", "0.5"]) == 2


def test_reference_free(tmp_path):
    cfg = write(tmp_path, BASE.replace('sigma = "0"', 'sigma = "1"'))
    assert cli.main(["reference", str(cfg), "--case", "free", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "reference_free_t1.csv")
    assert rows[0] == ["x", "density"]
    x, w = np.array(rows[1:], dtype=float).T
    assert np.trapezoid(w, x) == pytest.approx(1.0, abs=1e-4)


def test_reference_ou_large_time(tmp_path):
    assert cli.main(["reference", str(CONFIGS / "ou_subdiffusion.toml"), "--case", "ou",
                     "--out", str(tmp_path)]) == 0
    x, w = np.array(read_csv(tmp_path / "reference_ou_t10.csv")[1:], dtype=float).T
    assert np.trapezoid(x * x * w, x) == pytest.approx(0.5, rel=0.05)


def test_reference_levy_flight(tmp_path):
    from idsubdiff.exponents import mittag_leffler
    assert cli.main(["reference", str(CONFIGS / "levy_flight.toml"), "--case", "levy-flight",
                     "--out", str(tmp_path)]) == 0
    u, cf = np.array(read_csv(tmp_path / "reference_levy-flight_t1.csv")[1:], dtype=float).T
    np.testing.assert_allclose(cf, mittag_leffler(0.8, -u ** 1.5), rtol=1e-15)


def test_reference_refuses_coupled(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace('F = "0"', 'F = "cos(t)"'))
    assert cli.main(["reference", str(cfg), "--case", "free"]) == 2
    assert "time-dependent" in capsys.readouterr().err


def test_equivalence_command(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace('F = "0"', 'F = "cos(t)"').replace('sigma = "0"', 'sigma = "1"')
                .replace("n_paths = 50", "n_paths = 2000"))
    code = cli.main(["equivalence", str(cfg)])
    out = capsys.readouterr().out
    assert "critical" in out and code in (0, 1)
    assert code == (1 if "FAIL" in out else 0)


def test_equivalence_refuses_space_force(tmp_path):
    cfg = write(tmp_path, BASE.replace('F = "0"', 'F = "-x"'))
    assert cli.main(["equivalence", str(cfg)]) == 2


def test_console_script_entry_point():
    from importlib.metadata import entry_points
    eps = [e for e in entry_points(group="console_scripts") if e.name == "idsubdiff"]
    assert eps and eps[0].value == "idsubdiff.cli:main"
