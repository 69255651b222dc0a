import json
import math
import time

import numpy as np
import pytest

from isingwdg.cli import CONFIG_SCHEMA, get_config_schema, main, render_json
from isingwdg.sampler import read_spool


def run_cli(tmp_path, command, config, name="config.json", extra=()):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    out = tmp_path / f"out_{command}_{name}"
    rc = main([command, "--config", str(path), "--out", str(out), *extra])
    return rc, out


BASE = {"dimension": 2, "params": {"beta": 0.2, "h": 0.0, "bc": "free"}}


def test_schema_is_published_and_valid():
    import jsonschema

    schema = get_config_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    assert schema is CONFIG_SCHEMA


def test_render_json_float_formatting():
    text = render_json({"x": 0.1, "n": 3, "ok": True, "none": None})
    assert "0.10000000000000001" in text
    parsed = json.loads(text)
    assert parsed["x"] == 0.1 and parsed["n"] == 3


def test_exact_command(tmp_path):
    config = dict(BASE)
    config["exact"] = {
        "box": {"lo": [0, 0], "hi": [1, 1]},
        "expectations": [[[0, 0], [1, 0]]],
        "cumulants": {"sites": [[0, 0], [1, 0]], "r_max": 2},
    }
    rc, out = run_cli(tmp_path, "exact", config)
    assert rc == 0
    payload = json.loads((out / "exact.json").read_text())
    beta = 0.2
    want = 2 * math.exp(4 * beta) + 12 + 2 * math.exp(-4 * beta)
    assert payload["results"]["z"] == pytest.approx(want)
    assert (out / "cumulants.csv").exists()
    assert payload["config"]["params"]["bc"] == "free"
    assert "version" in payload


def test_exact_single_site_field(tmp_path):
    config = {"dimension": 2,
              "params": {"beta": 0.0, "h": 0.5, "bc": "free"},
              "exact": {"box": {"lo": [0, 0], "hi": [0, 0]}}}
    rc, out = run_cli(tmp_path, "exact", config)
    payload = json.loads((out / "exact.json").read_text())
    assert payload["results"]["z"] == pytest.approx(2 * math.cosh(0.5))


def test_malformed_config_exits_one(tmp_path, capsys):
    config = {"dimension": 2,
              "params": {"beta": -1.0, "h": 0.0, "bc": "free"}}
    rc, _ = run_cli(tmp_path, "exact", config)
    assert rc == 1
    err = capsys.readouterr().err
    assert "$.params.beta" in err


def test_missing_block_exits_one(tmp_path):
    rc, _ = run_cli(tmp_path, "exact", dict(BASE))
    assert rc == 1


def test_unreadable_config_exits_one(tmp_path):
    out = tmp_path / "out"
    rc = main(["exact", "--config", str(tmp_path / "nope.json"),
               "--out", str(out)])
    assert rc == 1
    assert not out.exists()  # no partial outputs


def test_cap_exceeded_exits_two(tmp_path):
    config = dict(BASE)
    config["exact"] = {"box": {"n": 3}}  # 49 sites, far over the cap
    rc, _ = run_cli(tmp_path, "exact", config)
    assert rc == 2


def test_treelen_command(tmp_path):
    config = dict(BASE)
    config["treelen"] = {"terminals": [[0, 0], [2, 0], [1, 2]]}
    rc, out = run_cli(tmp_path, "treelen", config)
    assert rc == 0
    results = json.loads((out / "treelen.json").read_text())["results"]
    assert results == {"lT": 4, "lT_prime": 5, "ok": True}


def test_verify_expansions_roundtrip_and_forced_failure(tmp_path):
    config = dict(BASE)
    config["verify-expansions"] = {"boxes": [{"n": 1}],
                                   "betas": [0.0, 0.5], "hs": [0.0, 1.5]}
    rc, out = run_cli(tmp_path, "verify-expansions", config)
    assert rc == 0
    report = json.loads((out / "expansions_report.json").read_text())
    assert report["results"]["n_failed"] == 0

    config["verify-expansions"]["self_test_perturbation"] = 1e-6
    rc2, out2 = run_cli(tmp_path, "verify-expansions", config, name="bad.json")
    assert rc2 == 3


def test_sample_and_pattern_count_from_spool(tmp_path):
    config = dict(BASE)
    config["sample"] = {
        "box": {"n": 2},
        "chain": {"seed": 9, "burn_in": 50, "thinning": 2, "n_samples": 12},
        "spool": "run.iwdg",
    }
    rc, out = run_cli(tmp_path, "sample", config)
    assert rc == 0
    batch = read_spool(out / "run.iwdg")
    assert batch.n_samples == 12

    config2 = dict(BASE)
    config2["pattern-count"] = {
        "pattern": {"local": {"shape": [[0, 0]], "signs": "+"}},
        "box": {"n": 2},
        "spool": str(out / "run.iwdg"),
    }
    rc2, out2 = run_cli(tmp_path, "pattern-count", config2, name="pc.json")
    assert rc2 == 0
    lines = (out2 / "pattern_counts.csv").read_text().strip().splitlines()
    assert lines[0] == "sample,count"
    counts = [int(line.split(",")[1]) for line in lines[1:]]
    assert counts == [int((row > 0).sum()) for row in batch.spins]


def test_pattern_count_from_chain_global(tmp_path):
    config = dict(BASE)
    config["pattern-count"] = {
        "pattern": {"global": {"m": 2, "orders": [[1, 2], [1, 2]],
                               "signs": "++"}},
        "box": {"n": 1},
        "chain": {"seed": 4, "burn_in": 30, "thinning": 1, "n_samples": 6},
    }
    rc, out = run_cli(tmp_path, "pattern-count", config)
    assert rc == 0
    payload = json.loads((out / "pattern_count.json").read_text())
    assert payload["results"]["n_samples"] == 6


def test_cumulants_command(tmp_path):
    config = dict(BASE)
    config["cumulants"] = {
        "box": {"n": 1},
        "chain": {"seed": 2, "burn_in": 100, "thinning": 2,
                  "n_samples": 400},
        "sites": [[0, 0], [1, 0]],
        "r_max": 2,
    }
    rc, out = run_cli(tmp_path, "cumulants", config)
    assert rc == 0
    table = (out / "cumulants_estimated.csv").read_text().splitlines()
    assert table[0] == "multiset,value,std_error,provenance"
    assert all(line.endswith("estimated") for line in table[1:])


def test_wdg_check_command(tmp_path):
    config = dict(BASE)
    config["wdg-check"] = {"box": {"lo": [0, 0], "hi": [2, 2]}, "r_max": 2}
    rc, out = run_cli(tmp_path, "wdg-check", config)
    assert rc == 0
    payload = json.loads((out / "wdg_check.json").read_text())
    assert payload["results"]["all_finite"]
    assert "epsilon" in payload["results"]


def test_clt_smoke_preset_under_a_minute(tmp_path):
    config = dict(BASE)
    config["clt"] = {
        "pattern": "magnetization",
        "box_sizes": [4, 8],
        "replicas": 100,
        "base_seed": 7,
        "chain": {"burn_in": 100, "thinning": 1},
    }
    started = time.time()
    rc, out = run_cli(tmp_path, "clt", config)
    elapsed = time.time() - started
    assert rc == 0
    assert elapsed < 60
    payload = json.loads((out / "clt_report.json").read_text())
    rows = payload["results"]["rows"]
    assert [r["n"] for r in rows] == [4, 8]
    csv_lines = (out / "clt_samples.csv").read_text().strip().splitlines()
    assert csv_lines[0] == "n,replica,statistic"
    assert len(csv_lines) == 1 + 2 * 100


def test_variance_scaling_command(tmp_path):
    config = dict(BASE)
    config["variance-scaling"] = {
        "pattern": {"global": {"m": 1, "orders": [[1], [1]], "signs": "+"}},
        "sizes": [3, 4, 5],
        "replicas": 120,
        "base_seed": 5,
        "chain": {"burn_in": 40, "thinning": 1},
    }
    rc, out = run_cli(tmp_path, "variance-scaling", config)
    assert rc == 0
    payload = json.loads((out / "variance_scaling.json").read_text())
    assert "slope" in payload["results"]


def test_byte_identical_reruns(tmp_path):
    config = dict(BASE)
    config["exact"] = {"box": {"n": 1},
                       "cumulants": {"sites": [[0, 0], [1, 0]], "r_max": 2}}
    rc1, out1 = run_cli(tmp_path, "exact", config, name="a.json")
    rc2, out2 = run_cli(tmp_path, "exact", config, name="b.json")
    assert rc1 == rc2 == 0
    assert (out1 / "exact.json").read_bytes() == \
        (out2 / "exact.json").read_bytes()
    assert (out1 / "cumulants.csv").read_bytes() == \
        (out2 / "cumulants.csv").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    config = dict(BASE)
    config["sample"] = {
        "box": {"n": 1},
        "chain": {"seed": 1, "burn_in": 20, "thinning": 1, "n_samples": 4},
    }
    rc1, out1 = run_cli(tmp_path, "sample", config, name="s1.json",
                        extra=("--seed", "123"))
    rc2, out2 = run_cli(tmp_path, "sample", config, name="s2.json",
                        extra=("--seed", "123"))
    rc3, out3 = run_cli(tmp_path, "sample", config, name="s3.json")
    a = read_spool(out1 / "samples.iwdg").spins
    b = read_spool(out2 / "samples.iwdg").spins
    c = read_spool(out3 / "samples.iwdg").spins
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_workers_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("IWDG_WORKERS", "3")
    config = dict(BASE)
    config["clt"] = {"pattern": "magnetization", "box_sizes": [2],
                     "replicas": 16, "chain": {"burn_in": 10, "thinning": 1}}
    rc, out = run_cli(tmp_path, "clt", config)
    assert rc == 0

    monkeypatch.setenv("IWDG_WORKERS", "banana")
    rc2, _ = run_cli(tmp_path, "clt", config, name="c2.json")
    assert rc2 == 1
