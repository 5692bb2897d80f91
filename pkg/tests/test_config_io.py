import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.config import dump_config, load_config, validate_config
from driftlab.errors import ConfigError
from driftlab.extension import ZGrid, extend
from driftlab.fields import critical_profile, gaussian_bump, random_smooth
from driftlab.grid import Grid, GridField, lp_norm
from driftlab.io import (build_manifest, file_sha256, read_csv, read_extension, read_gridfield, verify_manifest,
                         write_csv, write_extension, write_extension_slices, write_gridfield, write_manifest)
from driftlab.rng import make_rng
from helpers import make_config

BASE = {"schema": 1, "grid": {"d": 1, "N": 16}, "kernel": {"s": 0.5}, "time": {"dt": 0.1, "t_end": 1.0}}


def _with(path, value):
    raw = json.loads(json.dumps(BASE))
    sec, key = path.split(".")
    raw.setdefault(sec, {})[key] = value
    return raw


def test_defaults_filled():
    cfg = validate_config(BASE)
    assert cfg["grid"]["L"] == pytest.approx(2 * np.pi)
    assert cfg["kernel"]["family"] == "fractional" and cfg.seed == 0


@pytest.mark.parametrize("path,value,key", [
    ("kernel.s", 0.7, "kernel.s"), ("grid.N", 12, "grid.N"), ("grid.d", 3, "grid.d"),
    ("time.dt", -1.0, "time.dt"), ("kernel.bogus", 1, "kernel.bogus"), ("drift.mode", "sqg", "drift.mode"),
    ("kernel.lambda", 1.0, "kernel.lambda"), ("initial.kind", "x", "initial.kind"),
])
def test_errors_name_the_key(path, value, key):
    with pytest.raises(ConfigError) as e:
        validate_config(_with(path, value))
    assert e.value.key == key and key in str(e.value)


def test_missing_required_key():
    raw = json.loads(json.dumps(BASE))
    del raw["kernel"]["s"]
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert e.value.key == "kernel.s"
    with pytest.raises(ConfigError):
        validate_config({**BASE, "extra": 1})
    with pytest.raises(ConfigError):
        validate_config({k: v for k, v in BASE.items() if k != "schema"})


def test_holder_needs_q():
    raw = _with("diagnostics.holder", True)
    with pytest.raises(ConfigError) as e:
        validate_config(raw)
    assert e.value.key == "forcing.q"
    raw["forcing"] = {"q": 5.0}
    validate_config(raw)


def test_yaml_roundtrip(tmp_path):
    cfg = make_config(d=2, N=32, drift={"mode": "sqg"})
    p = tmp_path / "c.yaml"
    p.write_text(dump_config(cfg))
    assert load_config(p).to_dict() == cfg.to_dict()
    p.write_text("grid: [unbalanced")
    with pytest.raises(ConfigError):
        load_config(p)


def test_replace_revalidates():
    cfg = make_config()
    assert cfg.replace("time.dt", 0.02)["time"]["dt"] == 0.02
    with pytest.raises(ConfigError):
        cfg.replace("kernel.s", 2.0)


@given(st.integers(0, 2**31 - 1))
def test_gridfield_binary_roundtrip(tmp_path_factory, seed):
    g = Grid(2, 16, 3.0)
    f = GridField(g, make_rng(seed, "io").standard_normal(g.shape), 0.25)
    p = tmp_path_factory.mktemp("io") / "f.bin"
    write_gridfield(p, f)
    back = read_gridfield(p)
    assert back.grid == g and back.time_tag == 0.25 and np.array_equal(back.values, f.values)


def test_extension_and_csv_roundtrip(tmp_path):
    g = Grid(1, 16)
    ext = extend(random_smooth(g, 1), 0.3, ZGrid.geometric(0.1, 2.0, 5))
    header, vals = read_extension(write_extension(tmp_path / "e.bin", ext))
    assert header["s"] == 0.3 and np.array_equal(vals, ext.values)
    paths = write_extension_slices(tmp_path / "slices", ext)
    names, rows = read_csv(paths[2])
    assert names == ["x", "u"] and np.allclose(rows[:, 1], ext.values[2], rtol=0, atol=0)
    write_csv(tmp_path / "a.csv", ["t[time]", "v[u]"], [(0.0, 1.5), (1, 2.5)])
    names, rows = read_csv(tmp_path / "a.csv")
    assert names == ["t", "v"] and rows.tolist() == [[0.0, 1.5], [1.0, 2.5]]


def test_manifest_verification(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("hello")
    man = build_manifest({"k": 1}, [a], tmp_path, 3, {"d_s": 1.0})
    assert man["outputs"] == {"a.txt": file_sha256(a)}
    assert "time" not in json.dumps(man)
    write_manifest(tmp_path / "manifest.json", man)
    assert verify_manifest(tmp_path / "manifest.json") == []
    a.write_text("changed")
    assert verify_manifest(tmp_path / "manifest.json") == ["a.txt"]


def test_rng_streams_independent_and_reproducible():
    a = make_rng(5, "x").standard_normal(4)
    assert np.array_equal(a, make_rng(5, "x").standard_normal(4))
    assert not np.array_equal(a, make_rng(5, "y").standard_normal(4))
    assert not np.array_equal(a, make_rng(6, "x").standard_normal(4))


def test_initial_fields():
    g = Grid(2, 64, 8.0)
    b = gaussian_bump(g, 2.0, 0.5)
    assert b.values.max() == pytest.approx(2.0)
    r = random_smooth(g, 0, amplitude=3.0)
    assert np.max(np.abs(r.values)) == pytest.approx(3.0)
    c = critical_profile(g, smoothing=0.2)
    assert np.all(np.isfinite(c.values)) and c.values.max() == c.values[32, 32]
    # far from the center the profile tracks |x|**(-d/2) up to the periodic correction
    x = g.axis()
    i = 40
    r0 = abs(x[i] - 4.0)
    assert c.values[i, 32] == pytest.approx(r0 ** (-1.0), rel=0.2)
    assert lp_norm(c) > 0
