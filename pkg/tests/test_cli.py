import json

import pytest

from nearparabolic import cli
from nearparabolic.errors import ConfigError
from nearparabolic.measure import read_pgm

SMALL = {"pc_iter": 20000, "julia_samples": 5, "orbit_iter": 2000, "porosity_probes": 3}


def run(tmp_path, *args, config=None):
    out = tmp_path / "out"
    argv = list(args) + ["--out", str(out)]
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = cli.main(argv)
    report = out / "report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None), out


def test_defaults_validate():
    cfg = cli.load_config()
    assert cfg.alpha_digits == (50,) * 30 and cfg.depth == 1
    assert len(cfg.digest()) == 64


@pytest.mark.parametrize("override", [
    {"abel_tol": -1.0}, {"inv_tol": 0.0}, {"depth": 3}, {"pc_iter": 10 ** 9},
    {"julia_samples": 0}, {"alpha_digits": [50, 5, 50]}, {"alpha_digits": [0]},
    {"constants": {"nope": 1}}, {"alpha": 1.5}, {"seed": -1},
])
def test_invalid_configs(override):
    with pytest.raises(ConfigError):
        cli.load_config(None, override)


def test_exit_code_2(tmp_path, capsys):
    code, report, _ = run(tmp_path, "fatou", "--abel-tol", "-1")
    assert code == 2 and report is None
    assert "config error" in capsys.readouterr().err
    assert run(tmp_path, "brjuno", config={"bogus": 1})[0] == 2
    assert run(tmp_path, "brjuno", "--alpha-digits", "50,x")[0] == 2
    bad = tmp_path / "broken.json"
    bad.write_text("{")
    assert cli.main(["brjuno", "--config", str(bad)]) == 2


def test_real_alpha_config():
    cfg = cli.load_config(None, {"alpha": 0.0196, "type_floor": 1, "alpha_depth": 6})
    assert cfg.alpha_digits[0] == 51


def test_hash_ignores_output_dir(tmp_path):
    a = cli.load_config(None, {"out": "x"})
    b = cli.load_config(None, {"out": "y"})
    c = cli.load_config(None, {"seed": 3})
    assert a.digest() == b.digest() != c.digest()


def test_brjuno_report(tmp_path):
    code, rep, _ = run(tmp_path, "brjuno")
    assert code == 0 and rep["passed"]
    assert rep["config_hash"] == cli.load_config().digest()
    assert rep["fitted_constants"]["k_bold"] == 2
    names = {c["name"] for c in rep["checks"]}
    assert names == {"functional_equation_residual", "periodic_closed_form"}
    assert all({"achieved", "target", "passed"} <= set(c) for c in rep["checks"])
    assert rep["result"]["convergents"][1] == [1, 50]


def test_fatou_outputs(tmp_path):
    code, rep, out = run(tmp_path, "fatou")
    assert code == 0
    rows = (out / "abel_residuals.csv").read_text().splitlines()
    assert rows[0] == "bin_lo,bin_hi,count"
    assert sum(int(r.split(",")[2]) for r in rows[1:]) == rep["result"]["validated_points"]
    img = read_pgm(out / "phi_bands.pgm")
    assert img.shape == (cli.PGM_SIDE, cli.PGM_SIDE)
    assert img[0, 0] == 0  # the corner -2-2i escapes


def test_lift_and_model(tmp_path):
    assert run(tmp_path, "lift-verify")[0] == 0
    code, rep, _ = run(tmp_path, "model")
    assert code == 0 and rep["passed"]


def test_pc_outputs_and_determinism(tmp_path):
    code, rep, out = run(tmp_path, "pc", config=SMALL)
    assert code == 0
    first = (out / "report.json").read_bytes(), (out / "pc_mask.pgm").read_bytes()
    table = (out / "box_area.csv").read_text().splitlines()
    assert table[0] == "eps,count,area" and len(table) == 10
    assert len((out / "pc_cloud.csv").read_text().splitlines()) == 20001
    code2, _, _ = run(tmp_path, "pc", config=SMALL)
    assert code2 == 0
    assert ((out / "report.json").read_bytes(), (out / "pc_mask.pgm").read_bytes()) == first


def test_porosity_and_orbits(tmp_path):
    code, rep, _ = run(tmp_path, "porosity", config=SMALL)
    assert code == 0 and len(rep["result"]["probes"]) == 3
    code, rep, out = run(tmp_path, "orbits", config=SMALL)
    # the check is reported either way; the exit code follows it
    assert code == (0 if rep["passed"] else 1)
    assert len((out / "limit_set_distances.csv").read_text().splitlines()) == 6


def test_renorm_needs_depth(tmp_path):
    assert run(tmp_path, "renorm", "--depth", "0")[0] == 2
    assert run(tmp_path, "verify-all", "--depth", "0")[0] == 2


def test_unknown_command():
    assert cli.main(["frobnicate"]) == 2
