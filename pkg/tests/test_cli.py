"""Command-line surface: precedence, validation, exit codes, reproducibility."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

import rabi_lab.cli as cli
from rabi_lab.cli import ConfigError, GridSpec, main, parse_config
from rabi_lab.eigensolve import SolverError
from rabi_lab.io import format_number
from rabi_lab.sweeps import PARITY_COLUMNS


def _read_csv(path):
    lines = Path(path).read_text(encoding="ascii").split("\n")
    assert lines[-1] == ""
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:-1]]
    return header, rows


def test_flag_beats_file_beats_default(tmp_path):
    cfgfile = tmp_path / "job.cfg"
    cfgfile.write_text("delta = 50\ng_over_gc = 1.0\nlevels = 4\n")
    cfg = parse_config(
        [
            "spectrum",
            "--config",
            str(cfgfile),
            "--delta",
            "1",
            "--out",
            str(tmp_path / "o"),
        ]
    )
    assert cfg.values["delta"] == 1.0
    assert cfg.values["g_over_gc"] == 1.0
    assert cfg.values["levels"] == 4
    assert cfg.values["n_trunc"] == 1000
    assert cfg.provenance["delta"] == "flag"
    assert cfg.provenance["g_over_gc"] == "file"
    assert cfg.provenance["levels"] == "file"
    assert cfg.provenance["n_trunc"] == "default"


def test_conflicting_coupling_names_both_sources(tmp_path):
    cfgfile = tmp_path / "job.cfg"
    cfgfile.write_text("g = 1.0\n")
    with pytest.raises(ConfigError) as err:
        parse_config(
            [
                "spectrum",
                "--config",
                str(cfgfile),
                "--delta",
                "1",
                "--g-over-gc",
                "2",
                "--out",
                str(tmp_path / "o"),
            ]
        )
    msg = str(err.value)
    assert "file" in msg and "flag" in msg
    assert "exactly one" in msg


def test_unknown_config_key_rejected(tmp_path):
    cfgfile = tmp_path / "job.cfg"
    cfgfile.write_text("delta = 1\nnonsense = 3\n")
    with pytest.raises(ConfigError) as err:
        parse_config(
            ["spectrum", "--config", str(cfgfile), "--g", "1", "--out", str(tmp_path / "o")]
        )
    assert "nonsense" in str(err.value)


def test_config_file_syntax(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text("# comment\n\ndelta = 1\ng = 0.5   # trailing comment\n")
    cfg = parse_config(["spectrum", "--config", str(good), "--out", str(tmp_path / "o")])
    assert cfg.values["g"] == 0.5
    bad = tmp_path / "bad.cfg"
    bad.write_text("delta 1\n")
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--config", str(bad), "--out", str(tmp_path / "o")])
    dup = tmp_path / "dup.cfg"
    dup.write_text("delta = 1\ndelta = 2\n")
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--config", str(dup), "--out", str(tmp_path / "o")])
    missing = tmp_path / "nothere.cfg"
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--config", str(missing), "--out", str(tmp_path / "o")])


def test_range_tokens_parse():
    cfg = parse_config(
        ["parity", "--delta", "1", "--g-over-gc", "0:2:0.5", "--out", "x"]
    )
    spec = cfg.values["g_over_gc"]
    assert isinstance(spec, GridSpec)
    assert (spec.start, spec.stop, spec.step) == (0.0, 2.0, 0.5)
    with pytest.raises(ConfigError):
        parse_config(["parity", "--delta", "1", "--g-over-gc", "0:2", "--out", "x"])


def test_scalar_only_commands_reject_ranges():
    for command in ("spectrum", "wavefunction"):
        with pytest.raises(ConfigError):
            parse_config(
                [command, "--delta", "1", "--g-over-gc", "0:2:0.5", "--out", "x"]
            )


def test_missing_required_options():
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--delta", "1", "--g", "1"])  # no out
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--delta", "1", "--out", "x"])  # no coupling
    with pytest.raises(ConfigError):
        parse_config(["spectrum", "--g", "1", "--out", "x"])  # no delta


def test_odd_level_count_rejected():
    with pytest.raises(ConfigError):
        parse_config(
            ["parity", "--delta", "1", "--g", "1", "--levels", "3", "--out", "x"]
        )


def test_exit_code_config_error(tmp_path, capsys):
    assert main([]) == 2
    assert main(["spectrum", "--delta", "1", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err


def test_exit_code_success_and_outputs(tmp_path):
    out = tmp_path / "run"
    rc = main(
        [
            "spectrum",
            "--delta",
            "1",
            "--g-over-gc",
            "0.8",
            "--n-trunc",
            "60",
            "--levels",
            "4",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    header, rows = _read_csv(out / "spectrum.csv")
    assert header == list(PARITY_COLUMNS)
    assert len(rows) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["sentinel"]["all_passed"] is True
    assert manifest["config_provenance"]["n_trunc"] == "flag"
    assert "solver_tolerances" in manifest
    for entry in manifest["files"]:
        digest = hashlib.sha256((out / entry["name"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"]


def test_exit_code_sentinel_failure(tmp_path, capsys):
    out = tmp_path / "starved"
    rc = main(
        [
            "spectrum",
            "--delta",
            "1",
            "--g-over-gc",
            "6",
            "--n-trunc",
            "50",
            "--levels",
            "4",
            "--out",
            str(out),
        ]
    )
    assert rc == 4
    assert "sentinel" in capsys.readouterr().err
    header, rows = _read_csv(out / "spectrum.csv")
    sentinel_col = header.index("sentinel")
    assert all(r[sentinel_col] == "0" for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["sentinel"]["all_passed"] is False


def test_wavefunction_sentinel_blocks_exports(tmp_path):
    out = tmp_path / "wf_starved"
    rc = main(
        [
            "wavefunction",
            "--delta",
            "1",
            "--g-over-gc",
            "6",
            "--n-trunc",
            "50",
            "--out",
            str(out),
        ]
    )
    assert rc == 4
    # no partial wavefunction tables may survive a failed sentinel
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]


def test_exit_code_solver_failure(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise SolverError("synthetic failure")

    monkeypatch.setattr(cli, "coupling_sweep", boom)
    rc = main(
        [
            "spectrum",
            "--delta",
            "1",
            "--g",
            "0.5",
            "--n-trunc",
            "40",
            "--levels",
            "2",
            "--out",
            str(tmp_path / "x"),
        ]
    )
    assert rc == 3


def test_exit_code_io_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    rc = main(
        [
            "spectrum",
            "--delta",
            "1",
            "--g",
            "0.5",
            "--n-trunc",
            "40",
            "--levels",
            "2",
            "--out",
            str(blocker / "sub"),
        ]
    )
    assert rc == 2


def test_csv_tokens_round_trip_exactly(tmp_path):
    out = tmp_path / "rt"
    main(
        [
            "spectrum",
            "--delta",
            "1",
            "--g-over-gc",
            "1.3",
            "--n-trunc",
            "60",
            "--levels",
            "4",
            "--out",
            str(out),
        ]
    )
    header, rows = _read_csv(out / "spectrum.csv")
    for row in rows:
        for token in row:
            value = float(token) if ("." in token or "e" in token) else int(token)
            assert format_number(value) == token


def test_manifest_config_reruns_identically(tmp_path):
    out1 = tmp_path / "a"
    argv = [
        "parity",
        "--delta",
        "2",
        "--g-over-gc",
        "0:1:0.25",
        "--n-trunc",
        "50",
        "--levels",
        "4",
        "--out",
        str(out1),
    ]
    assert main(argv) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    out2 = tmp_path / "b"
    replay = ["parity"]
    for key, token in manifest["config"].items():
        if key == "out" or token is None:
            continue
        replay += [f"--{key.replace('_', '-')}", str(token)]
    replay += ["--out", str(out2)]
    assert main(replay) == 0
    assert (out1 / "parity.csv").read_bytes() == (out2 / "parity.csv").read_bytes()


def test_json_format_matches_csv_values(tmp_path):
    argv_common = [
        "spectrum",
        "--delta",
        "1",
        "--g",
        "0.7",
        "--n-trunc",
        "50",
        "--levels",
        "2",
    ]
    out_c = tmp_path / "c"
    out_j = tmp_path / "j"
    assert main(argv_common + ["--out", str(out_c)]) == 0
    assert main(argv_common + ["--format", "json", "--out", str(out_j)]) == 0
    header, rows = _read_csv(out_c / "spectrum.csv")
    payload = json.loads((out_j / "spectrum.json").read_text())
    assert payload["columns"] == header
    for csv_row, json_row in zip(rows, payload["rows"]):
        for token, value in zip(csv_row, json_row):
            if isinstance(value, float):
                assert float(token) == value
            else:
                assert str(value) == token


def test_wavefunction_outputs(tmp_path):
    out = tmp_path / "wf"
    rc = main(
        [
            "wavefunction",
            "--delta",
            "1",
            "--g-over-gc",
            "1.5",
            "--n-trunc",
            "200",
            "--levels",
            "2",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == [
        "manifest.json",
        "wavefunction_level0.csv",
        "wavefunction_level1.csv",
        "wavefunction_summary.csv",
    ]
    header, rows = _read_csv(out / "wavefunction_level0.csv")
    assert header == ["xi", "psi_plus", "psi_minus"]
    xi = np.array([float(r[0]) for r in rows])
    assert xi[0] == -xi[-1]
    header, rows = _read_csv(out / "wavefunction_summary.csv")
    assert header == [
        "level",
        "energy",
        "energy_shifted",
        "parity",
        "symmetry_defect",
        "quadrature_norm",
    ]
    assert len(rows) == 2
    for row in rows:
        assert abs(float(row[5]) - 1.0) <= 1e-6


def test_converge_command(tmp_path):
    out = tmp_path / "cv"
    rc = main(
        [
            "converge",
            "--delta",
            "1",
            "--g-over-gc",
            "0:0.5:0.25",
            "--truncs",
            "20,40",
            "--ref",
            "80",
            "--levels",
            "2",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    header, rows = _read_csv(out / "converge.csv")
    assert header == [
        "g",
        "g_over_gc",
        "n_trunc",
        "level",
        "energy",
        "abs_diff_vs_ref",
        "sentinel",
    ]
    assert len(rows) == 3 * 2 * 2


def test_phase_diagram_command(tmp_path):
    out = tmp_path / "pd"
    rc = main(
        [
            "phase-diagram",
            "--delta-grid",
            "2",
            "--pairs",
            "0",
            "--g-over-gc",
            "0.1:0.5:0.2",
            "--n-trunc",
            "40",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    header, rows = _read_csv(out / "phase_diagram.csv")
    assert header == [
        "delta",
        "g_c",
        "pair_index",
        "onset_g",
        "onset_g_over_gc",
        "grid_step",
        "found",
        "degenerate",
    ]
    assert len(rows) == 1
    assert rows[0][header.index("found")] == "0"


def test_version_flag():
    assert main(["--version"]) == 0
