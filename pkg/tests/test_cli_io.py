import json
import os

import numpy as np
import pytest

from dewet import cli
from dewet.config import RunConfig, from_dict, load_config, parse_config, serialize
from dewet.errors import AdmissibilityError, IncompatibleHorizons, SchemaError
from dewet.io import (
    MANIFEST,
    compare_trajectories,
    energies_csv,
    load_trajectory,
    read_energies,
    read_manifest,
    run_experiment,
)
from dewet.params import PhysicalParams

SMALL = """
k = 20
T = 0.1
n = 41
ny = 2

[initial]
shape = "cosine-bump"
"""


def small_cfg(tmp_path, name="run", **kw):
    cfg = parse_config(SMALL)
    return cfg.with_overrides(out_dir=str(tmp_path / name), **kw)


def test_minimal_triangle_config_fills_defaults():
    cfg = parse_config('[initial]\nshape = "triangle"\nslope = 1.5\n')
    assert cfg.k == 50 and cfg.T == 0.2 and cfg.n == 201 and cfg.ny == 8
    assert cfg.params == PhysicalParams()
    assert cfg.opts.gtol > 0
    assert cfg.initial == {"shape": "triangle", "slope": 1.5, "center": 0.0}
    echoed = json.loads(serialize(cfg))
    assert echoed["opts"]["gtol"] == cfg.opts.gtol
    assert echoed["params"]["lambda"] == 1.0


def test_json_and_toml_agree():
    toml = parse_config('k = 10\n[params]\ne0 = 0.1\nlambda = 2.0\n[initial]\nshape = "cosine-bump"\nwidth = 2.2\n')
    js = parse_config(json.dumps({"k": 10, "params": {"e0": 0.1, "lambda": 2.0}, "initial": {"shape": "cosine-bump", "width": 2.2}}))
    assert toml == js
    assert toml.params.lam == 2.0


@pytest.mark.parametrize(
    "doc",
    [
        '[initial]\nshape = "triangle"\nslope = 1.2\ncenter = 0.3\n',
        'k = 7\nT = 0.35\nn = 33\nny = 3\nsnapshots = [0.0, 0.2]\n[params]\nnu0 = 0.1\n[opts]\ngtol = 1e-7\nmax_iter = 50\n',
    ],
)
def test_round_trip(doc):
    cfg = parse_config(doc)
    assert parse_config(serialize(cfg)) == cfg


@pytest.mark.parametrize(
    "doc, path",
    [
        ('k = "abc"', "k"),
        ("T = -1.0", "T"),
        ("n = 10.5", "n"),
        ('[params]\ngamma = "x"', "params.gamma"),
        ("[params]\nfoo = 1.0", "params.foo"),
        ('[initial]\nshape = "blob"', "initial.shape"),
        ('[opts]\nhessian = "bfgs"', "opts.hessian"),
        ("bogus = 1", "bogus"),
    ],
)
def test_schema_errors_name_the_key(doc, path):
    with pytest.raises(SchemaError) as exc:
        parse_config(doc)
    assert exc.value.path == path
    assert path in str(exc.value)


def test_nondewetting_regime_rejected():
    with pytest.raises(AdmissibilityError, match="dewetting regime requires"):
        parse_config("[params]\ngamma = 0.5\ngamma0 = 0.5\n")
    with pytest.raises(AdmissibilityError):
        parse_config("[params]\ngamma0 = 2.0\n")


def test_inadmissible_initial_shape_rejected():
    # slope above L0 = 2
    with pytest.raises(AdmissibilityError):
        parse_config('[initial]\nshape = "triangle"\nslope = 3.0\n')


def test_file_shape(tmp_path):
    cfg = small_cfg(tmp_path)
    (tmp_path / "init.json").write_text(cfg.initial_profile().to_json())
    (tmp_path / "cfg.toml").write_text(SMALL.replace('"cosine-bump"', '"file"\npath = "init.json"'))
    loaded = load_config(str(tmp_path / "cfg.toml"))
    assert loaded.initial["path"] == str(tmp_path / "init.json")
    np.testing.assert_array_equal(loaded.initial_profile().h, cfg.initial_profile().h)
    with pytest.raises(SchemaError, match="initial.path"):
        parse_config('[initial]\nshape = "file"\npath = "missing.json"\n', str(tmp_path))


def test_zero_horizon_run(tmp_path):
    cfg = small_cfg(tmp_path, T=0.0)
    traj = run_experiment(cfg)
    assert len(traj.steps) == 1
    man = read_manifest(cfg.out_dir)
    assert man["steps"] == 0
    assert read_energies(cfg.out_dir).shape == (1, 10)
    rep = json.loads(open(os.path.join(cfg.out_dir, "diagnostics.json")).read())
    assert rep["el_residual"] == [] and rep["young_left"] == [] and rep["vtilde_residual"] == []


def test_run_writes_all_artifacts(tmp_path):
    cfg = small_cfg(tmp_path, snapshots=[0.0, 0.05, 0.1])
    run_experiment(cfg)
    d = cfg.out_dir
    for rel in ("manifest.json", "energies.csv", "diagnostics.json", "plot/contacts.csv", "plot/energy.csv",
                "plot/profile_t0.csv", "plot/profile_t0.05.csv", "plot/profile_t0.1.csv", "profiles/step_0002.json"):
        assert os.path.isfile(os.path.join(d, rel)), rel
    man = read_manifest(d)
    assert man["steps"] == 2 and man["tau"] == pytest.approx(0.05)
    assert from_dict(man["config"]) == cfg
    # no temporary files are left behind
    assert not [f for f in os.listdir(d) if f.startswith(".tmp-")]
    # manifest is the newest file
    mtimes = {f: os.stat(os.path.join(d, f)).st_mtime_ns for f in ("manifest.json", "energies.csv", "diagnostics.json")}
    assert mtimes["manifest.json"] >= max(mtimes.values())


def test_rerun_is_byte_identical(tmp_path):
    a = small_cfg(tmp_path, "a")
    b = small_cfg(tmp_path, "b")
    run_experiment(a)
    run_experiment(b)
    ea = open(os.path.join(a.out_dir, "energies.csv"), "rb").read()
    eb = open(os.path.join(b.out_dir, "energies.csv"), "rb").read()
    assert ea == eb


def test_energies_csv_round_trips(tmp_path):
    cfg = small_cfg(tmp_path)
    traj = run_experiment(cfg)
    back = load_trajectory(cfg.out_dir)
    assert energies_csv(back) == energies_csv(traj)
    for s, t in zip(back.steps, traj.steps):
        np.testing.assert_array_equal(s.profile.h, t.profile.h)


def test_doubling_k_doubles_steps(tmp_path):
    a = small_cfg(tmp_path, "a", k=10, T=0.3)
    b = small_cfg(tmp_path, "b", k=20, T=0.3)
    assert (a.steps, b.steps) == (3, 6)
    run_experiment(a)
    run_experiment(b)
    assert read_manifest(b.out_dir)["steps"] == 2 * read_manifest(a.out_dir)["steps"]


def test_compare_with_itself_is_zero(tmp_path):
    cfg = small_cfg(tmp_path)
    run_experiment(cfg)
    rep = compare_trajectories(cfg.out_dir, cfg.out_dir)
    assert all(v == 0.0 for v in rep["pairs"][0]["max"].values())


def test_mismatched_horizons(tmp_path):
    a = small_cfg(tmp_path, "a", T=0.1)
    b = small_cfg(tmp_path, "b", T=0.05)
    run_experiment(a)
    run_experiment(b)
    with pytest.raises(IncompatibleHorizons):
        compare_trajectories(a.out_dir, b.out_dir)


def test_tau_refinement_distance_decreases(tmp_path):
    dirs = []
    for k in (10, 20, 40):
        cfg = small_cfg(tmp_path, f"k{k}", k=k, T=0.2, n=61, ny=3)
        run_experiment(cfg)
        dirs.append(cfg.out_dir)
    rep = compare_trajectories(*dirs)
    d1, d2 = (p["final"]["l2"] for p in rep["pairs"])
    assert d2 < d1
    assert rep["slopes"]["l2"][0] > 0.5


def test_missing_manifest_is_an_incomplete_run(tmp_path):
    cfg = small_cfg(tmp_path)
    run_experiment(cfg)
    os.unlink(os.path.join(cfg.out_dir, MANIFEST))
    with pytest.raises(FileNotFoundError, match="incomplete"):
        load_trajectory(cfg.out_dir)


# command line


def write_cfg(tmp_path, text=SMALL):
    path = tmp_path / "cfg.toml"
    path.write_text(text)
    return str(path)


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", "--config", write_cfg(tmp_path), "--k", "40"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["steps"] == 4 and out["config"]["k"] == 40


def test_cli_run_diagnose_compare(tmp_path, capsys):
    path = write_cfg(tmp_path)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["run", "--config", path, "--out", a, "--quiet"]) == 0
    assert cli.main(["run", "--config", path, "--out", b, "--k", "40", "--quiet"]) == 0
    assert read_manifest(b)["steps"] == 4
    capsys.readouterr()
    assert cli.main(["diagnose", a]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(out["bounds"].values())
    assert os.path.isfile(os.path.join(a, "diagnostics.csv"))
    assert cli.main(["compare", a, b, "--out", str(tmp_path / "cmp.json")]) == 0
    assert json.loads((tmp_path / "cmp.json").read_text())["pairs"][0]["k"] == [20, 40]


def test_cli_corner_exponent(capsys):
    assert cli.main(["corner-exponent", "--slope", "1.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.5 < out["xi0"] < 1


@pytest.mark.parametrize(
    "text, status, error",
    [
        ('k = "abc"\n', 2, "SchemaError"),
        ("[params]\ngamma0 = 1.5\n", 1, "AdmissibilityError"),
    ],
)
def test_cli_errors_are_structured(tmp_path, capsys, text, status, error):
    assert cli.main(["validate", "--config", write_cfg(tmp_path, text)]) == status
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == error and err["message"]


def test_cli_missing_config_and_horizon_mismatch(tmp_path, capsys):
    assert cli.main(["run"]) == 2
    path = write_cfg(tmp_path)
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    cli.main(["run", "--config", path, "--out", a, "--quiet"])
    cli.main(["run", "--config", path, "--out", b, "--horizon", "0.05", "--quiet"])
    capsys.readouterr()
    assert cli.main(["compare", a, b]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "IncompatibleHorizons"


def test_default_config_object_is_valid():
    from dewet.config import validate_config

    validate_config(RunConfig())
