import json
import re

import pytest

from mcsc import cli

from cases import ECCENTRIC, square_spec


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def run(tmp_path, config, *extra, out="out"):
    cfg = write(tmp_path, "job.json", config)
    return cli.main(["--config", cfg, "--out", str(tmp_path / out), *extra])


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_check_on_simple_domain(tmp_path, capsys):
    assert run(tmp_path, {"command": "check", "domain": {"circles": []}}) == 0
    out = capsys.readouterr().out
    assert "antisymmetry" in out and "FAIL" not in out
    meta = json.loads((tmp_path / "out" / "check.json").read_text())
    assert meta["passed"] and meta["seed"] == 0


def test_check_with_seed_and_level_flags(tmp_path, capsys):
    cfg = {"domain": ECCENTRIC.to_json()}
    assert run(tmp_path, cfg, "check", "--seed", "7", "--level", "8") == 0
    meta = json.loads((tmp_path / "out" / "check.json").read_text())
    assert meta["seed"] == 7 and meta["level"] == 8


def test_check_fails_with_tight_tolerance(tmp_path, capsys):
    cfg = {"command": "check", "domain": ECCENTRIC.to_json(), "prime": {"level": 2},
           "tolerances": {"truncation": 1e-14}}
    assert run(tmp_path, cfg) == cli.EXIT_TOLERANCE
    assert "FAIL" in capsys.readouterr().out


def test_gamma_is_byte_identical(tmp_path):
    cfg = {"command": "gamma", "domain": ECCENTRIC.to_json()}
    assert run(tmp_path, cfg, out="a") == 0
    assert run(tmp_path, cfg, out="b") == 0
    a = (tmp_path / "a" / "gammas.json").read_bytes()
    assert a == (tmp_path / "b" / "gammas.json").read_bytes()
    assert sorted(json.loads(a)["roots"]) == ["1"]


def test_map_and_trace_csv(tmp_path):
    spec = square_spec().to_json()
    assert run(tmp_path, {"command": "map", "mapping": spec, "points": [[0, 0], [0.3, 0.1]]}) == 0
    rows = (tmp_path / "out" / "map.csv").read_text().splitlines()
    assert rows[0] == "re_zeta,im_zeta,re_z,im_z" and len(rows) == 3
    assert run(tmp_path, {"command": "trace", "mapping": spec}) == 0
    assert (tmp_path / "out" / "trace.csv").read_text().startswith("circle,t,re_z,im_z\n")
    res = json.loads((tmp_path / "out" / "residuals.json").read_text())
    assert max(res["closure"]) < 1e-10


def test_solve_m0_then_render_from_file(tmp_path):
    assert run(tmp_path, {"command": "solve-m0", "target": [[0, 0], [1, 0], [1, 1], [0, 1]]}) == 0
    spec_file = tmp_path / "out" / "spec.json"
    assert spec_file.is_file()
    cfg = {"command": "render", "mapping": "out/spec.json", "grid": {"radial": 3, "angular": 8, "resolution": 12}}
    assert run(tmp_path, cfg, out="r1") == 0
    assert run(tmp_path, cfg, out="r2") == 0
    svg = (tmp_path / "r1" / "render.svg").read_text()
    assert svg == (tmp_path / "r2" / "render.svg").read_text()
    assert "y axis up" in svg
    polygon = re.search(r'<polygon points="([^"]+)"', svg).group(1)
    assert len(polygon.split()) > 4


def test_unknown_key_rejected(tmp_path, capsys):
    assert run(tmp_path, {"command": "check", "domain": {"circles": []}, "colour": "red"}) == cli.EXIT_CONFIG
    err = error_of(capsys)
    assert "colour" in err["error"] and err["context"]["field"] == "<root>"


def test_out_of_range_field_reports_path(tmp_path, capsys):
    cfg = {"command": "check", "domain": {"circles": [{"center": [0, 0], "radius": 1.5}]}}
    assert run(tmp_path, cfg) == cli.EXIT_CONFIG
    assert error_of(capsys)["context"]["field"] == "domain/circles/0/radius"


def test_json_syntax_error_reports_line(tmp_path, capsys):
    assert run(tmp_path, '{"command": "check",\n  "domain": }') == cli.EXIT_CONFIG
    ctx = error_of(capsys)["context"]
    assert ctx["line"] == 2 and ctx["column"] > 1


def test_missing_reference_and_command(tmp_path, capsys):
    assert run(tmp_path, {"command": "trace", "mapping": "nope.json"}) == cli.EXIT_CONFIG
    assert "not found" in error_of(capsys)["error"]
    assert run(tmp_path, {"domain": {"circles": []}}) == cli.EXIT_CONFIG
    assert error_of(capsys)["context"]["field"] == "command"


def test_invalid_domain_is_config_error(tmp_path, capsys):
    cfg = {"command": "check", "domain": {"circles": [{"center": [0.3, 0], "radius": 0.2},
                                                       {"center": [0.4, 0], "radius": 0.2}]}}
    assert run(tmp_path, cfg) == cli.EXIT_CONFIG
    assert "overlap" in error_of(capsys)["error"]


def test_numerical_failure_exit_status(tmp_path, capsys):
    # a single scan sample cannot bracket the roots
    cfg = {"command": "gamma", "domain": ECCENTRIC.to_json()}
    from mcsc import prefactor

    old = prefactor.SCAN_SAMPLES
    try:
        prefactor.find_gamma.__defaults__ = (1,)
        assert run(tmp_path, cfg) == cli.EXIT_NUMERIC
    finally:
        prefactor.find_gamma.__defaults__ = (old,)
    err = error_of(capsys)
    assert err["context"]["type"] == "GammaRootError" and err["context"]["circle"] == 1


def test_normalize_is_idempotent():
    cfg = {"command": "check", "domain": {"circles": []}, "prime": {"level": 3}}
    once = cli.normalize_config(cfg)
    assert cli.normalize_config(once) == once
    assert once["prime"] == {"level": 3, "tolerance": 1e-8}
    cli.validate_config(once)
    assert json.loads(cli.dump_json(once)) == once
