import json
import math
import os

import pytest

from fbmruin import cli, io
from fbmruin.constants import ConstantConfig, estimate_discrete_pickands
from fbmruin.errors import MissingConstant
from fbmruin.harness import CSV_HEADER
from fbmruin.model import ModelParams

ONE_LINE = ["--c1", "1", "--q1", "1", "--H", "0.5", "--delta", "1"]
P0 = ["--c1", "2", "--q1", "1", "--c2", "1", "--q2", "2", "--H", "0.5", "--delta", "1"]


@pytest.fixture(scope="module")
def discrete_record():
    return io.fixture_record(estimate_discrete_pickands(2.0, ConstantConfig(T=4.0, n_paths=2000, rel_tol=0.5)))


def test_dumps_keeps_17_digits_and_nulls_non_finite():
    text = io.dumps({"a": 0.1 + 0.2, "b": math.nan, "c": [math.inf, 1]})
    back = json.loads(text)
    assert back["a"] == 0.1 + 0.2
    assert back["b"] is None and back["c"] == [None, 1]


def test_atomic_write_leaves_old_file_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.json"
    io.atomic_write(target, "old")

    def boom(*_):
        raise OSError("disk full")

    monkeypatch.setattr(io.os, "replace", boom)
    with pytest.raises(OSError):
        io.atomic_write(target, "new")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.json"]


def test_csv_text_formats_floats():
    text = io.csv_text(("a", "b"), [(0.1, "x")])
    assert text == "a,b\n0.10000000000000001,x\n"


def test_fixture_round_trip(tmp_path, discrete_record):
    bundle = io.merge_records(None, [discrete_record])
    path = io.atomic_write(tmp_path / "k.json", io.dumps(bundle))
    loaded = io.load_bundle(path)
    assert loaded["constants"][0] == json.loads(io.dumps(discrete_record))
    k, used = io.require_constants(ModelParams(1, 1, 1, 1, 0.5, 1.0), loaded)
    assert k.discrete_pickands == discrete_record["value"] and len(used) == 1


def test_tampered_fixture_is_rejected(discrete_record):
    rec = dict(discrete_record, spec={"alpha": 3.0})
    with pytest.raises(io.SchemaError):
        io.validate_bundle({"schemaVersion": io.SCHEMA_VERSION, "constants": [rec]})


def test_merge_replaces_same_hash(discrete_record):
    bundle = io.merge_records(None, [discrete_record])
    bundle = io.merge_records(bundle, [dict(discrete_record, value=1.0)])
    assert [r["value"] for r in bundle["constants"]] == [1.0]


def test_fixture_for_other_grid_step_is_missing(discrete_record):
    bundle = io.merge_records(None, [discrete_record])
    with pytest.raises(MissingConstant):
        io.require_constants(ModelParams(1, 1, 1, 1, 0.5, 0.5), bundle)


def test_hash_ignores_int_float_spelling():
    assert io.spec_hash("x", {"a": 3}, {}) == io.spec_hash("x", {"a": 3.0}, {})


def _run(argv, capsys):
    code = cli.run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_classify(capsys):
    code, out, _ = _run(["classify", *P0], capsys)
    assert code == 0
    assert json.loads(out.splitlines()[0])["tag"] == "CaseTwoInterior"


def test_cli_bad_arguments_exit_1(capsys):
    code, _, err = _run(["classify", "--c1", "1"], capsys)
    assert code == 1 and json.loads(err)["exitCode"] == 1


def test_cli_missing_file_exit_1(tmp_path, capsys):
    code, _, _ = _run(["asymptote", *ONE_LINE, "--u", "3", "--constants", str(tmp_path / "nope.json")], capsys)
    assert code == 1


def test_cli_domain_error_exit_2(capsys):
    code, _, err = _run(["classify", "--c1", "-1", "--q1", "1", "--H", "0.5"], capsys)
    assert code == 2 and json.loads(err)["exitCode"] == 2


def test_cli_missing_constant_exit_2(capsys):
    code, _, err = _run(["asymptote", *ONE_LINE, "--u", "3"], capsys)
    assert code == 2 and json.loads(err)["error"] == "MissingConstant"


def test_cli_budget_error_exit_3(capsys):
    code, _, err = _run(["simulate", *ONE_LINE, "--u", "400", "--n-paths", "1000"], capsys)
    assert code == 3 and json.loads(err)["exitCode"] == 3


def test_cli_constants_then_verify(tmp_path, capsys):
    kfile = tmp_path / "k.json"
    code, _, _ = _run(["constants", *ONE_LINE, "--n-paths", "4000", "--T", "4", "--output", str(kfile)], capsys)
    assert code == 0 and kfile.exists()
    out_csv = tmp_path / "v.csv"
    code, out, _ = _run(["verify", *ONE_LINE, "--u", "3,4", "--constants", str(kfile), "--n-paths", "4000",
                         "--format", "csv", "--output", str(out_csv)], capsys)
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 3


def test_cli_verify_is_reproducible(tmp_path, capsys):
    kfile = tmp_path / "k.json"
    _run(["constants", *ONE_LINE, "--n-paths", "4000", "--T", "4", "--output", str(kfile)], capsys)
    texts = []
    for name in ("a.csv", "b.csv"):
        _run(["verify", *ONE_LINE, "--u", "3", "--constants", str(kfile), "--n-paths", "4000",
              "--format", "csv", "--output", str(tmp_path / name)], capsys)
        # runtime column differs run to run
        texts.append([line.rsplit(",", 1)[0] for line in (tmp_path / name).read_text().splitlines()])
    assert texts[0] == texts[1]


def test_shipped_fixtures_validate():
    from pathlib import Path

    bundle = io.load_bundle(Path(__file__).resolve().parents[1] / "data" / "constants.json")
    k, used = io.require_constants(ModelParams(2, 1, 1, 2, 0.5, 1.0), bundle)
    assert len(used) == 2 and k.piterbarg_lower < k.piterbarg_upper
