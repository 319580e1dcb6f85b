import io
import json
import shutil

import jsonschema
import pytest

from chansmc.cli import main
from chansmc.schemas import load_schema


def run(*argv):
    out = io.StringIO()
    code = main(list(map(str, argv)), out)
    return code, out.getvalue()


@pytest.fixture
def pingpong(models, tmp_path):
    d = tmp_path / "pingpong"
    shutil.copytree(models / "pingpong", d)
    return d


# validate


def test_validate_ok(models):
    assert run("validate", models / "pingpong" / "manifest.json")[0] == 0


def test_validate_json_schema(models):
    code, out = run("validate", "--json", models / "pingpong" / "manifest.json")
    data = json.loads(out)
    jsonschema.validate(data, load_schema("diagnostics"))
    assert code == 0 and data == {"ok": True, "diagnostics": []}


def test_validate_parallel(pingpong):
    (pingpong / "pong.scxml").write_text(
        '<scxml xmlns="http://www.w3.org/2005/07/scxml" version="1.0" name="Pong" initial="p">'
        '<parallel id="p"/></scxml>'
    )
    code, out = run("validate", "--json", pingpong / "manifest.json")
    data = json.loads(out)
    jsonschema.validate(data, load_schema("diagnostics"))
    assert code == 2 and not data["ok"]
    d = data["diagnostics"][0]
    assert d["element"] == "parallel" and "parallel" in d["restriction"]


def test_validate_missing_property_file(pingpong):
    (pingpong / "properties.xml").unlink()
    assert run("validate", pingpong / "manifest.json")[0] == 1


def test_validate_property_errors(pingpong):
    (pingpong / "properties.xml").write_text(
        '<properties><property name="a"><formula>(F 0 1 (prop nothing))</formula></property></properties>'
    )
    code, out = run("validate", "--json", pingpong / "manifest.json")
    assert code == 2 and "nothing" in out


def test_missing_manifest(tmp_path):
    assert run("validate", tmp_path / "nope.json")[0] == 1


def test_bad_manifest(tmp_path):
    m = tmp_path / "m.json"
    m.write_text("{not json")
    assert run("validate", m)[0] == 1
    m.write_text("{}")
    assert run("validate", m)[0] == 1


def test_usage_errors():
    assert run()[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("verify")[0] == 1


# compile


def test_compile_json(models, tmp_path):
    dump = tmp_path / "model.json"
    code, out = run("compile", "--json", "--emit-model", dump, models / "pingpong" / "manifest.json")
    data = json.loads(out)
    jsonschema.validate(data, load_schema("compile"))
    assert code == 0 and len(data["channels"]) == 5
    assert json.loads(dump.read_text())["format"] == "chansmc-model"


def test_compile_text(models):
    code, out = run("compile", models / "pingpong" / "manifest.json")
    assert code == 0 and "channel c:ping:Ping:Pong" in out


def test_emitted_model_round_trips(models, tmp_path):
    dump = tmp_path / "model.json"
    run("compile", "--emit-model", dump, models / "pingpong" / "manifest.json")
    shutil.copy(models / "pingpong" / "properties.xml", tmp_path / "properties.xml")
    props = (tmp_path / "properties.xml").read_text().replace("#ping", "0").replace("#pong", "1")
    (tmp_path / "properties.xml").write_text(props)
    (tmp_path / "m.json").write_text(json.dumps({"model": "model.json", "properties": "properties.xml"}))
    a = json.loads(run("verify", "--json", models / "pingpong" / "manifest.json")[1])
    b = json.loads(run("verify", "--json", tmp_path / "m.json")[1])
    assert a["properties"] == b["properties"]


# trace


def test_trace_files(models, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    m = models / "pingpong" / "manifest.json"
    assert run("trace", "--seed", 0, "--count", 2, "--out", out1, m)[0] == 0
    assert run("trace", "--seed", 0, "--count", 2, "--out", out2, m)[0] == 0
    for name in ("trace_0000.jsonl", "trace_0001.jsonl"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    lines = [json.loads(l) for l in (out1 / "trace_0000.jsonl").read_text().splitlines()]
    schema = load_schema("trace-record")
    for rec in lines:
        jsonschema.validate(rec, schema)
    first = lines[0]
    assert (first["t"], first["kind"], first["event"], first["origin"], first["target"]) == (0, "send", "ping", "Ping", "Pong")
    assert lines[-1] == {"end": "deadlock", "t": 15}


def test_trace_count_zero(models, tmp_path):
    code, _ = run("trace", "--count", 0, "--out", tmp_path / "none", models / "pingpong" / "manifest.json")
    assert code == 0 and not (tmp_path / "none").exists()


def test_trace_generic_records(models, tmp_path):
    code, _ = run("trace", "--count", 1, "--max-steps", 3, "--out", tmp_path, models / "reach3" / "manifest.json")
    lines = [json.loads(l) for l in (tmp_path / "trace_0000.jsonl").read_text().splitlines()]
    assert code == 0 and len(lines) == 4 and lines[0]["kind"] == "internal-action" and lines[-1]["end"] == "length-cap"


def test_trace_runtime_error(tmp_path):
    model = {
        "format": "chansmc-model",
        "version": 1,
        "pgs": [
            {
                "name": "P",
                "locations": ["a"],
                "initial_locations": ["a"],
                "variables": {"x": {"kind": "int", "lo": 0, "hi": 1}},
                "initial_valuation": {"x": 0},
                "transitions": [{"source": "a", "action": "inc", "target": "a", "effect": [["1", [["x", "x + 1"]]]]}],
            }
        ],
    }
    (tmp_path / "model.json").write_text(json.dumps(model))
    (tmp_path / "p.xml").write_text('<properties><property name="a"><formula>(F 0 inf (prop P@a))</formula></property></properties>')
    (tmp_path / "m.json").write_text(json.dumps({"model": "model.json", "properties": "p.xml"}))
    code, _ = run("trace", "--out", tmp_path / "t", tmp_path / "m.json")
    lines = [json.loads(l) for l in (tmp_path / "t" / "trace_0000.jsonl").read_text().splitlines()]
    assert code == 3 and "error" in lines[-1] and lines[0]["action"] == "inc"
    (tmp_path / "p.xml").write_text('<properties><property name="a"><formula>(G 0 inf (prop P@a))</formula></property></properties>')
    assert run("verify", tmp_path / "m.json")[0] == 3


# verify


def test_verify_json(models):
    code, out = run("verify", "--json", models / "pingpong" / "manifest.json")
    data = json.loads(out)
    jsonschema.validate(data, load_schema("report"))
    assert code == 0 and all(p["estimate"] == 1 for p in data["properties"])
    assert all(p["n"] <= 738 for p in data["properties"])


def test_verify_table(models):
    code, out = run("verify", models / "coin" / "manifest.json")
    assert code == 0 and "heads" in out and "trials" in out


def test_verify_epsilon_out_of_range(models):
    assert run("verify", "--epsilon", "0.6", models / "coin" / "manifest.json")[0] == 1
    assert run("verify", "--delta", "abc", models / "coin" / "manifest.json")[0] == 1
    assert run("verify", "--workers", "0", models / "coin" / "manifest.json")[0] == 1


def test_verify_budget(models):
    assert run("verify", "--max-samples", 5, models / "coin" / "manifest.json")[0] == 4


def test_verify_output_and_timing(models, tmp_path):
    out = tmp_path / "r.json"
    code, text = run("verify", "--timing", "--output", out, models / "coin" / "manifest.json")
    data = json.loads(out.read_text())
    jsonschema.validate(data, load_schema("report"))
    assert code == 0 and "wall_time" in data and "seed" in text


def test_seed_precedence(models, monkeypatch):
    m = models / "coin" / "manifest.json"
    monkeypatch.setenv("SMC_SEED", "17")
    assert json.loads(run("verify", "--json", m)[1])["seed"] == 17
    assert json.loads(run("verify", "--json", "--seed", 3, m)[1])["seed"] == 3
    monkeypatch.setenv("SMC_SEED", "x")
    assert run("verify", m)[0] == 1


def test_verify_deterministic(models):
    m = models / "coin" / "manifest.json"
    assert run("verify", "--json", "--seed", 4, m) == run("verify", "--json", "--seed", 4, m)
