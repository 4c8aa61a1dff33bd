import json

import pytest

from main import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main


def write_systems(tmp_path, payload, name="systems.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured


def test_sigma_diagonal_example(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("NEWTONFRAME_SEED", raising=False)
    path = write_systems(tmp_path, {"matrices": [[[1, 0, 0], [0, 2, 0], [0, 0, 3]]]})
    code, captured = run(capsys, ["sigma", "--input", path, "--oracle"])
    assert code == EXIT_PASS
    payload = json.loads(captured.out)
    report = payload["result"][0]
    assert report["sigma"]["[1]"] == pytest.approx(6.0)
    assert report["sigma"]["[2]"] == pytest.approx(11.0)
    assert report["sigma"]["[3]"] == pytest.approx(6.0)
    assert report["max_rel_err"] <= 1e-10
    assert payload["seed"] == 0


def test_sigma_selected_index(tmp_path, capsys):
    path = write_systems(tmp_path, [{"matrices": [[[1, 0], [0, 2]], [[0, 1], [1, 0]]]}])
    code, captured = run(capsys, ["sigma", "--input", path, "--u", "1,1"])
    assert code == EXIT_PASS
    assert list(json.loads(captured.out)["result"][0]["sigma"]) == ["[1,1]"]


@pytest.mark.parametrize(
    "payload,message",
    [
        ({"matrices": []}, "q ≥ 1"),
        ({"matrices": [[[1, 0], [0, 1]], [[1, 0, 0], [0, 1, 0], [0, 0, 1]]]}, ""),
        ([], "non-empty"),
    ],
)
def test_bad_systems_are_usage_errors(tmp_path, capsys, payload, message):
    code, captured = run(capsys, ["sigma", "--input", write_systems(tmp_path, payload)])
    assert code == EXIT_USAGE
    assert captured.err.startswith("error:")
    assert message in captured.err
    assert captured.out == ""


def test_missing_and_unsupported_inputs(tmp_path, capsys):
    assert run(capsys, ["sigma"])[0] == EXIT_USAGE
    assert run(capsys, ["sigma", "--input", str(tmp_path / "missing.json")])[0] == EXIT_USAGE
    text = tmp_path / "systems.txt"
    text.write_text("1 2 3")
    assert run(capsys, ["sigma", "--input", str(text)])[0] == EXIT_USAGE


def test_minimality_of_umbilical_sphere(capsys):
    argv = ["minimality", "--patch", "umbilical:n=2,q=2,r=1", "--u", "1,1", "--resolution", "6"]
    code, captured = run(capsys, argv)
    assert code == EXIT_PASS
    report = json.loads(captured.out)["result"]["report"]
    assert report["verdict"] and report["sup_norm"] <= 1e-6


def test_non_minimal_patch_exits_with_failure(capsys):
    code, captured = run(capsys, ["minimality", "--patch", "revolution_torus", "--u", "0", "--resolution", "6"])
    assert code == EXIT_FAIL
    assert json.loads(captured.out)["passed"] is False


def test_index_too_long_is_usage_error(capsys):
    code, captured = run(capsys, ["minimality", "--patch", "umbilical:n=2,q=1", "--u", "3", "--resolution", "4"])
    assert code == EXIT_USAGE
    assert "exceeds" in captured.err


def test_reports_are_byte_identical(tmp_path, capsys):
    outputs = []
    for k, threads in enumerate(("1", "3")):
        out = tmp_path / f"report{k}.json"
        argv = [
            "minimality", "--patch", "umbilical:n=2,q=3", "--u", "1,1,0", "--resolution", "4",
            "--scheme", "mc", "--samples", "64", "--seed", "5", "--threads", threads, "--out", str(out),
        ]
        assert main(argv) in (EXIT_PASS, EXIT_FAIL)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    assert "Report written to" in capsys.readouterr().err


def test_seed_from_environment_and_flag_precedence(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NEWTONFRAME_SEED", "17")
    path = write_systems(tmp_path, {"matrices": [[[1, 0], [0, 2]]]})
    assert json.loads(run(capsys, ["sigma", "--input", path])[1].out)["seed"] == 17
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 3, "inputs": [path]}))
    assert json.loads(run(capsys, ["sigma", "--config", str(config)])[1].out)["seed"] == 3
    payload = json.loads(run(capsys, ["sigma", "--config", str(config), "--seed", "9"])[1].out)
    assert payload["seed"] == 9


def test_bad_environment_seed(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NEWTONFRAME_SEED", "seventeen")
    path = write_systems(tmp_path, {"matrices": [[[1.0]]]})
    code, captured = run(capsys, ["sigma", "--input", path])
    assert code == EXIT_USAGE
    assert "NEWTONFRAME_SEED" in captured.err


def test_unknown_config_key(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"sead": 3}))
    assert run(capsys, ["sigma", "--config", str(config)])[0] == EXIT_USAGE


def test_single_sample_is_usage_error(tmp_path, capsys):
    path = write_systems(tmp_path, {"matrices": [[[1.0]]]})
    code, captured = run(capsys, ["average", "--input", path, "--u", "0", "--scheme", "mc", "--samples", "1"])
    assert code == EXIT_USAGE
    assert "samples must be ≥ 2" in captured.err
    assert "Monte Carlo" not in captured.err


def test_average_command(tmp_path, capsys):
    path = write_systems(tmp_path, {"matrices": [[[1, 0], [0, -1]], [[0, 1], [1, 0]]]})
    code, captured = run(capsys, ["average", "--input", path, "--u", "1,0", "--scheme", "exact"])
    assert code == EXIT_PASS
    result = json.loads(captured.out)["result"][0]
    assert result["sigma_hat"]["value"] == pytest.approx(0.0, abs=1e-12)
    assert result["sections"]["u"] == [1, 0]


def test_functional_command(capsys):
    code, captured = run(capsys, ["functional", "--patch", "umbilical:n=2,q=1,r=1", "--u", "0", "--resolution", "16"])
    assert code == EXIT_PASS
    value = json.loads(captured.out)["result"]["functional"]["value"]
    assert value == pytest.approx(4 * 3.141592653589793, rel=1e-10)


def test_bad_patch_and_field_specs(capsys):
    assert run(capsys, ["functional", "--patch", "klein_bottle", "--u", "0"])[0] == EXIT_USAGE
    assert run(capsys, ["functional", "--patch", "umbilical:n=two", "--u", "0"])[0] == EXIT_USAGE
    argv = ["variation", "--patch", "revolution_torus", "--u", "0", "--field", "wave:amp=1", "--resolution", "4"]
    assert run(capsys, argv)[0] == EXIT_USAGE


def test_variation_command(capsys):
    argv = [
        "variation", "--patch", "revolution_torus:a=1,R=2", "--u", "0", "--field", "bump:amp=0.1,width=1",
        "--resolution", "24",
    ]
    code, captured = run(capsys, argv)
    assert code == EXIT_PASS
    assert len(json.loads(captured.out)["result"]["report"]["rows"]) == 3


def test_gallery_list_and_check(tmp_path, capsys):
    code, captured = run(capsys, ["gallery", "list"])
    assert code == EXIT_PASS
    assert "veronese" in json.loads(captured.out)["result"]["entries"]
    code, captured = run(capsys, ["gallery", "check", "plane", "--resolution", "4", "--output-dir", str(tmp_path)])
    assert code == EXIT_PASS
    assert json.loads(captured.out)["result"]["passed"]
    assert any(p.name.startswith("step0_") for p in tmp_path.iterdir())
    assert run(capsys, ["gallery", "check"])[0] == EXIT_USAGE
    assert run(capsys, ["gallery", "check", "moebius"])[0] == EXIT_USAGE
