"""End-to-end tests for the command-line interface.

Everything runs in-process through main(argv) so exit codes, stdout, and the
files on disk are all observable.  The contracts under test: stable exit
codes (0 ok, 2 usage, 3 bad data, 4 failed check), the
<out>/<property>/<strategy>/<n>/ layout, byte-identical reruns, and worker
counts that schedule work without ever touching output bytes.
"""

import json
import os

import pytest

from aplab.cli import main
from aplab.errors import CheckFailure


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def simulate_args(out, **over):
    base = {
        "property": "min-degree:1",
        "strategy": "min-degree:1",
        "n": "60",
        "trials": "40",
        "seed": "5",
    }
    base.update(over)
    argv = ["simulate"]
    for key, val in base.items():
        argv += [f"--{key}", val]
    return argv + ["--out", out]


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def run_dir(out, n=60, prop="min-degree:1", strat="min-degree:1"):
    return os.path.join(out, prop, strat, str(n))


# ---------------------------------------------------------------------------
# simulate


def test_simulate_writes_trials_and_manifest(tmp_path, capsys):
    out = str(tmp_path / "o")
    rc, stdout, _ = run_cli(capsys, *simulate_args(out))
    assert rc == 0
    d = run_dir(out)
    assert sorted(os.listdir(d)) == ["manifest.json", "trials.csv"]
    assert "40 trials, 0 censored" in stdout
    man = json.loads(read(os.path.join(d, "manifest.json")))
    assert sorted(man) == ["censored", "command", "config", "config_sha256", "version"]
    assert man["command"] == "simulate" and man["censored"] == 0
    assert man["config"] == {
        "kind": "trials",
        "max_steps": 600,  # default horizon 10n
        "n": 60,
        "property": "min-degree:1",
        "seed_base": 5,
        "strategy": "min-degree:1",
        "trials": 40,
    }
    # the CSV header embeds the same config fingerprint as the manifest
    first = read(os.path.join(d, "trials.csv")).decode().splitlines()[0]
    assert first == f"# config={man['config_sha256']}"


def test_simulate_rerun_is_byte_identical(tmp_path, capsys):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert run_cli(capsys, *simulate_args(out1))[0] == 0
    assert run_cli(capsys, *simulate_args(out2))[0] == 0
    for name in ("trials.csv", "manifest.json"):
        assert read(os.path.join(run_dir(out1), name)) == read(
            os.path.join(run_dir(out2), name)
        )


def test_worker_count_never_touches_output_bytes(tmp_path, capsys):
    out1, out2 = str(tmp_path / "w1"), str(tmp_path / "w2")
    assert run_cli(capsys, *simulate_args(out1, workers="1"))[0] == 0
    assert run_cli(capsys, *simulate_args(out2, workers="2"))[0] == 0
    for name in ("trials.csv", "manifest.json"):
        assert read(os.path.join(run_dir(out1), name)) == read(
            os.path.join(run_dir(out2), name)
        )


def test_simulate_counts_censored_trials(tmp_path, capsys):
    out = str(tmp_path / "o")
    rc, stdout, _ = run_cli(capsys, *simulate_args(out, **{"max-steps": "5"}))
    assert rc == 0
    assert "40 censored" in stdout
    man = json.loads(read(os.path.join(run_dir(out), "manifest.json")))
    assert man["censored"] == 40 and man["config"]["max_steps"] == 5
    rows = read(os.path.join(run_dir(out), "trials.csv")).decode().splitlines()
    assert all(row.endswith(",1") for row in rows[2:])  # censored flag set


def test_multiple_n_values_create_sibling_directories(tmp_path, capsys):
    out = str(tmp_path / "o")
    rc, _, _ = run_cli(
        capsys,
        "simulate", "--property", "min-degree:1", "--strategy", "min-degree:1",
        "--n", "40", "--n", "50", "--trials", "5", "--out", out,
    )
    assert rc == 0
    base = os.path.join(out, "min-degree:1", "min-degree:1")
    assert sorted(os.listdir(base)) == ["40", "50"]


# ---------------------------------------------------------------------------
# threshold


def test_threshold_writes_summary_with_exact_quantiles(tmp_path, capsys):
    out = str(tmp_path / "o")
    rc, stdout, _ = run_cli(
        capsys,
        "threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
        "--n", "60", "--trials", "40", "--seed", "5",
        "--theta", "0.9", "--theta", "1/2", "--out", out,
    )
    assert rc == 0
    # decimal thetas parse exactly: 0.9 is the rational 9/10
    assert "n=60 theta=9/10: t_hat=43 ci=[42, 44] (40 trials)" in stdout
    assert "n=60 theta=1/2: t_hat=41 ci=[40, 42] (40 trials)" in stdout
    d = run_dir(out)
    assert sorted(os.listdir(d)) == ["manifest.json", "summary.csv", "trials.csv"]
    man = json.loads(read(os.path.join(d, "manifest.json")))
    assert sorted(man) == ["command", "config", "config_sha256", "theta", "version"]
    assert man["theta"] == ["9/10", "1/2"]
    lines = read(os.path.join(d, "summary.csv")).decode().splitlines()
    assert lines[0] == f"# config={man['config_sha256']}"
    assert lines[1] == "property,strategy,n,theta,t_hat,ci_lo,ci_hi,trials"
    assert lines[2] == "min-degree:1,min-degree:1,60,9/10,43,42,44,40"
    assert lines[3] == "min-degree:1,min-degree:1,60,1/2,41,40,42,40"


def test_threshold_worker_count_invisible_in_files(tmp_path, capsys):
    outs = []
    for tag, workers in (("w1", "1"), ("w2", "2")):
        out = str(tmp_path / tag)
        rc, _, _ = run_cli(
            capsys,
            "threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
            "--n", "60", "--trials", "40", "--seed", "5", "--theta", "1/2",
            "--workers", workers, "--out", out,
        )
        assert rc == 0
        outs.append(out)
    for name in ("trials.csv", "summary.csv", "manifest.json"):
        assert read(os.path.join(run_dir(outs[0]), name)) == read(
            os.path.join(run_dir(outs[1]), name)
        )


def test_threshold_censored_quantile_is_a_data_error(tmp_path, capsys):
    rc, _, err = run_cli(
        capsys,
        "threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
        "--n", "60", "--trials", "40", "--max-steps", "5", "--theta", "9/10",
        "--out", str(tmp_path / "o"),
    )
    assert rc == 3
    assert "data error:" in err


# ---------------------------------------------------------------------------
# config files


def test_config_file_merges_and_flags_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "property": "min-degree:1",
                "strategy": "min-degree:1",
                "n": 60,
                "trials": 7,
                "seed": 5,
            }
        )
    )
    out = str(tmp_path / "o")
    rc, _, _ = run_cli(
        capsys, "simulate", "--config", str(cfg), "--trials", "40", "--out", out
    )
    assert rc == 0
    man = json.loads(read(os.path.join(run_dir(out), "manifest.json")))
    assert man["config"]["trials"] == 40  # flag wins
    assert man["config"]["seed_base"] == 5  # config supplies the rest


def test_config_file_error_paths(tmp_path, capsys):
    unknown = tmp_path / "u.json"
    unknown.write_text(json.dumps({"property": "min-degree:1", "wat": 1}))
    assert run_cli(capsys, "simulate", "--config", str(unknown))[0] == 2
    invalid = tmp_path / "i.json"
    invalid.write_text("{ nope")
    assert run_cli(capsys, "simulate", "--config", str(invalid))[0] == 3
    arr = tmp_path / "a.json"
    arr.write_text("[1]")
    assert run_cli(capsys, "simulate", "--config", str(arr))[0] == 3
    assert run_cli(capsys, "simulate", "--config", str(tmp_path / "nope.json"))[0] == 2


# ---------------------------------------------------------------------------
# usage errors


def test_usage_errors_exit_2(tmp_path, capsys):
    out = str(tmp_path / "o")
    bad_calls = [
        simulate_args(out, strategy="wat"),
        simulate_args(out, property="nope:1"),
        simulate_args(out, n="1"),
        simulate_args(out, trials="0"),
        ["simulate", "--strategy", "min-degree:1", "--n", "60", "--out", out],
        ["threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
         "--n", "60", "--out", out],  # no theta
        ["threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
         "--n", "60", "--theta", "3/2", "--out", out],
        ["threshold", "--property", "min-degree:1", "--strategy", "min-degree:1",
         "--n", "60", "--theta", "zap", "--out", out],
        ["verify-martingale", "not-a-bundled-name"],
    ]
    for argv in bad_calls:
        rc, _, err = run_cli(capsys, *argv)
        assert rc == 2, argv
        assert "error:" in err
    # ids are validated before any work: nothing may appear on disk
    assert not os.path.exists(out)


# ---------------------------------------------------------------------------
# verify-martingale


def test_verify_martingale_runs_bundled_instances_by_default(capsys):
    rc, stdout, _ = run_cli(capsys, "verify-martingale")
    assert rc == 0
    doc = json.loads(stdout)
    assert doc["all_passed"] is True
    by_name = {inst["instance"]: inst for inst in doc["instances"]}
    assert sorted(by_name) == ["coupling_k1", "two_subset"]
    two = by_name["two_subset"]
    assert two["mu"] == "1/2"
    assert two["m_star"] == 1 and two["m_star_supplied"] is False
    assert two["boost"]["boosted_win"] == "1"
    assert two["arming_bound"]["margin"] == "1/4"
    k1 = by_name["coupling_k1"]
    assert k1["balanced"] is False and k1["stable_mass"] == "1/2"
    assert k1["coupling_records"][0]["gamma"] == "1/4"
    assert k1["coupled_values"]["0,0"] == "1/2"
    assert k1["coupled_values"]["0,1"] == "1/2"


def test_verify_martingale_out_flag_duplicates_stdout(tmp_path, capsys):
    report = tmp_path / "report.json"
    rc, stdout, _ = run_cli(capsys, "verify-martingale", "two_subset", "--out", str(report))
    assert rc == 0
    assert report.read_text() == stdout
    doc = json.loads(report.read_text())
    assert [inst["instance"] for inst in doc["instances"]] == ["two_subset"]


def test_verify_martingale_reads_instance_files(tmp_path, capsys):
    inst = {
        "kind": "doob",
        "n": 3,
        "outcomes": [
            {"edges": [[1, 2]], "p": "1/2"},
            {"edges": [[1, 3]], "p": "1/2"},
        ],
        "strategy": "lowest-edge",
        "target_edges": [[1, 2]],
        "target_label": "e1",
        "N": 2,
        "theta": "1/2",
    }
    path = tmp_path / "mine.json"
    path.write_text(json.dumps(inst))
    rc, stdout, _ = run_cli(capsys, "verify-martingale", str(path))
    assert rc == 0
    doc = json.loads(stdout)
    (one,) = doc["instances"]
    assert one["instance"] == "mine" and one["N"] == 2
    assert one["mu"] == "3/4"  # wins unless the off-target edge arrives twice
    corrupt = tmp_path / "corrupt.json"
    corrupt.write_text("{ nope")
    rc, _, err = run_cli(capsys, "verify-martingale", str(corrupt))
    assert rc == 3 and "data error:" in err


def test_check_failure_maps_to_exit_4(capsys, monkeypatch):
    import aplab.martingale as mart

    def boom(doob, params):
        raise CheckFailure("forced for the exit-code contract")

    monkeypatch.setattr(mart, "verify_quantify_boost", boom)
    rc, _, err = run_cli(capsys, "verify-martingale", "two_subset")
    assert rc == 4
    assert "check failed:" in err
