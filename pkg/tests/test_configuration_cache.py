import json
import math

import numpy as np
import pytest

from databases.configuration_cache import (
    FORMAT_VERSION,
    CacheEntry,
    ConfigurationCache,
    FixedDigitsEncoder,
    read_entry,
)
from utils.errors import CacheError


def test_round_trip_is_exact(cache_dir, solved):
    cfg = solved(101)
    cache = ConfigurationCache(cache_dir)
    path = cache.save(cfg)
    assert path.parent == cache_dir
    loaded = cache.load(101, cfg.tol, cfg.precision)
    np.testing.assert_array_equal(loaded.locations, cfg.locations)
    np.testing.assert_array_equal(loaded.partial_sums, cfg.partial_sums)
    assert loaded.residuals == cfg.residuals


def test_file_layout(cache_dir, solved):
    cfg = solved(10)
    path = ConfigurationCache(cache_dir).save(cfg)
    lines = path.read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    assert header["n_worlds"] == 10
    assert header["format_version"] == FORMAT_VERSION
    assert header["precision"] == "double"
    assert set(header["residuals"]) == {
        "zero_mean_residual",
        "variance_residual",
        "recursion_residual",
        "median_residual",
    }
    assert [float(v) for v in lines[1:]] == cfg.half_locations.tolist()


def test_file_name_carries_the_key(cache_dir):
    path = ConfigurationCache(cache_dir).path_for(1000, 1e-13, "dd")
    assert path.name.startswith("miw_N1000_tol")
    assert path.name.endswith("_dd_v1.txt")


def test_missing_entry_is_none(cache_dir):
    assert ConfigurationCache(cache_dir).load(12, 1e-13, "double") is None


def test_corrupted_entry_is_resolved(cache_dir, solved):
    cfg = solved(10)
    cache = ConfigurationCache(cache_dir)
    path = cache.save(cfg)
    lines = path.read_text(encoding="utf-8").splitlines()
    lines[3] = "%.17g" % (float(lines[3]) + 1e-3)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    assert cache.load(10, cfg.tol, cfg.precision) is None
    again = cache.get_or_solve(10, tol=cfg.tol, precision=cfg.precision)
    np.testing.assert_array_equal(again.locations, cfg.locations)
    assert cache.load(10, cfg.tol, cfg.precision) is not None


def test_get_or_solve_writes_once(cache_dir):
    cache = ConfigurationCache(cache_dir)
    first = cache.get_or_solve(7)
    path = cache.path_for(7, first.tol, first.precision)
    stamp = path.stat().st_mtime_ns
    second = cache.get_or_solve(7)
    assert path.stat().st_mtime_ns == stamp
    np.testing.assert_array_equal(first.locations, second.locations)


def test_entry_rejects_garbage():
    with pytest.raises(CacheError):
        CacheEntry.loads("not json\n1.0\n")
    with pytest.raises(CacheError):
        CacheEntry.loads("")


def test_entry_rejects_wrong_version(solved):
    entry = CacheEntry.from_configuration(solved(10)).model_copy(update={"format_version": 99})
    with pytest.raises(CacheError):
        entry.to_configuration()


def test_read_entry_missing_file(tmp_path):
    with pytest.raises(CacheError):
        read_entry(tmp_path / "absent.txt")


def test_read_entry_explicit_path(tmp_path, cache_dir, solved):
    cfg = solved(11)
    target = ConfigurationCache(cache_dir).save(cfg, tmp_path / "out" / "eleven.txt")
    assert target.exists()
    np.testing.assert_array_equal(read_entry(target).locations, cfg.locations)


def test_environment_overrides_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("MIW_CACHE_DIR", str(tmp_path / "from_env"))
    cache = ConfigurationCache(tmp_path / "from_arg")
    assert cache.directory == tmp_path / "from_env"


def test_encoder_writes_seventeen_digits():
    text = json.dumps({"a": [0.1, 1, "x"], "b": {"c": -math.inf, "d": 0.5}}, cls=FixedDigitsEncoder)
    assert text == '{"a": [0.10000000000000001, 1, "x"], "b": {"c": -Infinity, "d": 0.5}}'
    assert json.loads(text)["a"][0] == 0.1


def test_header_line_is_json_with_full_precision_floats(solved):
    entry = CacheEntry.from_configuration(solved(10)).model_copy(update={"tol": 0.1})
    line = entry.header_line()
    assert line.startswith('{"n_worlds": 10, "tol": 0.10000000000000001, "precision": "double"')
    header = json.loads(line)
    assert header["shoot_value"] == entry.shoot_value
    assert header["residuals"] == entry.residuals.model_dump()
    assert CacheEntry.loads(entry.dumps()).header() == entry.header()
