import json
import subprocess
import sys
from pathlib import Path

import pytest

from greenwalk import config as C
from greenwalk.cli import main, rows_to_csv, validate
from greenwalk.errors import SchemaError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

GREEN = """\
experiment = "green"
seed = 0

[group]
kind = "free"
rank = 2

[measure]
source = "srw"

[engine]
working_radius = 30

[params]
x = "e"
y = "e"
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_green_run(tmp_path, capsys):
    code = main(["run", str(write(tmp_path, GREEN)), "--output-dir", str(tmp_path / "out")])
    assert code == 0
    doc = json.loads((tmp_path / "out" / "green.summary.json").read_text())
    assert doc["result"]["value"] == pytest.approx(1.5, abs=1e-9)
    assert doc["result"]["converged"] is True
    for key in ("config_hash", "version", "seed", "certified", "receipts", "notes"):
        assert key in doc
    assert (tmp_path / "out" / "green.csv").read_text().startswith("x,y,")


def test_radius_over_cap_is_resource_error(tmp_path, capsys):
    text = GREEN.replace("rank = 2", "rank = 2\nball_cap = 1000").replace(
        "working_radius = 30", "working_radius = 9\nengine = \"explicit\"")
    code = main(["run", str(write(tmp_path, text)), "--output-dir", str(tmp_path / "out")])
    err = capsys.readouterr().err
    assert code == 1
    assert "resource" in err and "1000" in err


def test_rerun_is_byte_identical(tmp_path):
    cfg = CONFIGS / "ancona_scan.toml"
    outs = []
    for k, threads in enumerate((1, 3)):
        d = tmp_path / f"o{k}"
        assert main(["run", str(cfg), "--output-dir", str(d), "--threads", str(threads)]) == 0
        outs.append((d / "ancona-scan.csv").read_bytes())
    assert outs[0] == outs[1]


def test_json_format(tmp_path):
    d = tmp_path / "out"
    assert main(["run", str(write(tmp_path, GREEN)), "--output-dir", str(d), "--format", "json"]) == 0
    rows = json.loads((d / "green.json").read_text())
    assert rows[0]["converged"] is True


def test_validate_patho_echoes_solution(capsys):
    ok, lines = validate(CONFIGS / "patho_certify.toml")
    assert ok and lines[0] == "ok"
    assert "364" in lines[1] and "838" in lines[1]


def test_validate_names_failing_index(tmp_path):
    text = """\
experiment = "templates-bound"
[group]
kind = "free"
rank = 2
[pathological]
mode = "prop"
universe = { rho = 0.5, r = [0.3, 0.3, 0.1], s = [0.3, 0.31, 0.15], n = [10, 20] }
"""
    ok, lines = validate(write(tmp_path, text))
    assert not ok
    assert "index 1" in lines[0]


def test_validate_missing_group(tmp_path, capsys):
    p = write(tmp_path, 'experiment = "green"\n[measure]\nsource = "srw"\n')
    ok, lines = validate(p)
    assert not ok and "group" in lines[0]
    assert main(["validate", str(p)]) == 1


def test_unknown_keys_rejected():
    with pytest.raises(SchemaError, match="colour"):
        C.check(C.parse(GREEN + "colour = 1\n"))
    with pytest.raises(SchemaError, match="engine"):
        C.check(C.parse(GREEN.replace("working_radius = 30", "working_radius = 30\nspeed = 2")))


def test_unsafe_flag_required_for_toy(tmp_path):
    cfg = CONFIGS / "toy_green.toml"
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "a")]) == 1
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "b"),
                 "--unsafe-allow-invalid-universe"]) == 0


def test_patho_certify_run(tmp_path):
    d = tmp_path / "out"
    assert main(["run", str(CONFIGS / "patho_certify.toml"), "--output-dir", str(d)]) == 0
    csv_text = (d / "patho-certify.csv").read_text()
    assert csv_text.splitlines()[0].startswith("level,kind,formula,constant,exponent,value")


def test_oscillation_is_inconclusive(tmp_path):
    d = tmp_path / "out"
    assert main(["run", str(CONFIGS / "patho_oscillation.toml"), "--output-dir", str(d)]) == 2


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in C.EXPERIMENTS)


def test_csv_cells():
    text = rows_to_csv([{"a": 0.1, "b": True}, {"a": None, "c": [1, 2]}])
    assert text == "a,b,c\n0.10000000000000001,true,\n,,1;2\n"


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "greenwalk.cli", "list-experiments"],
                         capture_output=True, text=True, check=True)
    assert "templates-bound" in out.stdout
