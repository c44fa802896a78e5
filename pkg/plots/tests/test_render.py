"""Tests for the standalone figure renderer.

Golden CSV inputs live in plots/golden/ and were produced by the simulator
CLI; these tests never run simulations.  The renderer is imported by file
path so this package needs no installation step.
"""

import os
import sys
from fractions import Fraction

import pytest

PLOTS_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
GOLDEN_DIR = os.path.join(PLOTS_DIR, "golden")
sys.path.insert(0, PLOTS_DIR)

import render  # noqa: E402


TRIALS_HEADER = "property,strategy,n,seed_base,trial,stopping_time,censored"
SUMMARY_HEADER = "property,strategy,n,theta,t_hat,ci_lo,ci_hi,trials"


def run(tmp_path, kind, in_dir=GOLDEN_DIR):
    rc = render.main(["--in", in_dir, "--out", str(tmp_path), "--kind", kind])
    return rc, tmp_path / f"{kind}.svg"


@pytest.mark.parametrize("kind", ["curves", "fit", "width"])
def test_renders_each_kind_from_goldens(tmp_path, kind):
    rc, out = run(tmp_path, kind)
    assert rc == 0
    assert out.exists()
    head = out.read_text()[:200]
    assert "<svg" in head or head.startswith("<?xml")


def test_width_goldens_satisfy_strictly_decreasing_sharpening():
    groups = render.load_summary_groups(GOLDEN_DIR)
    assert sorted(groups) == [1000, 4000, 16000]
    fracs = []
    for n in sorted(groups):
        by_theta = groups[n]["by_theta"]
        assert sorted(by_theta) == [Fraction(1, 10), Fraction(9, 10)]
        width = by_theta[Fraction(9, 10)][0] - by_theta[Fraction(1, 10)][0]
        fracs.append(Fraction(width, n))
    assert fracs[0] > fracs[1] > fracs[2], fracs


def test_curves_golden_crosses_half_near_expected_constant():
    # the golden runs target minimum degree 1; their median stopping time
    # per n sits near 0.693n, so the rendered curve crosses 1/2 close by
    groups = render.load_trial_groups(GOLDEN_DIR)
    for n, g in groups.items():
        times = sorted(g["times"])
        median = times[len(times) // 2]
        assert 0.65 < median / n < 0.73, (n, median / n)


def test_single_n_input_is_a_usage_error(tmp_path, capsys):
    src = os.path.join(GOLDEN_DIR, "min-degree:1", "min-degree:1", "1000")
    only_one = tmp_path / "one"
    dest = only_one / "1000"
    dest.mkdir(parents=True)
    for name in ("trials.csv", "summary.csv"):
        (dest / name).write_bytes(
            open(os.path.join(src, name), "rb").read()
        )
    for kind in ("curves", "fit", "width"):
        rc = render.main(["--in", str(only_one), "--out", str(tmp_path), "--kind", kind])
        assert rc == 2, kind
        assert "error:" in capsys.readouterr().err


def test_missing_inputs_are_usage_errors(tmp_path, capsys):
    rc = render.main(["--in", str(tmp_path / "void"), "--out", str(tmp_path), "--kind", "curves"])
    assert rc == 2
    empty_dir = tmp_path / "empty"
    empty_dir.mkdir()
    rc = render.main(["--in", str(empty_dir), "--out", str(tmp_path), "--kind", "fit"])
    assert rc == 2
    assert "no trials.csv" in capsys.readouterr().err


def test_empty_and_malformed_csv_are_data_errors(tmp_path, capsys):
    d = tmp_path / "bad" / "x"
    d.mkdir(parents=True)
    csv = d / "trials.csv"
    csv.write_text("")  # empty file
    assert render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"]) == 3
    csv.write_text(f"# config=abc\n{TRIALS_HEADER}\n")  # header only
    assert render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"]) == 3
    csv.write_text("a,b\n1,2\n")  # wrong schema
    assert render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"]) == 3
    csv.write_text(f"{TRIALS_HEADER}\np,s,10,0,0,extra_field_missing\n")  # short row
    assert render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"]) == 3
    csv.write_text(f"{TRIALS_HEADER}\np,s,ten,0,0,7,0\n")  # non-numeric n
    assert render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"]) == 3
    err = capsys.readouterr().err
    assert "data error:" in err


def test_uncensored_row_without_time_is_a_data_error(tmp_path):
    d = tmp_path / "bad" / "x"
    d.mkdir(parents=True)
    (d / "trials.csv").write_text(f"{TRIALS_HEADER}\np,s,10,0,0,,0\n")
    rc = render.main(["--in", str(tmp_path / "bad"), "--out", str(tmp_path), "--kind", "curves"])
    assert rc == 3


def test_fit_refuses_censored_trials(tmp_path):
    base = tmp_path / "cens"
    for n in (10, 20):
        d = base / str(n)
        d.mkdir(parents=True)
        rows = [TRIALS_HEADER] + [f"p,s,{n},0,{i},{n + i},0" for i in range(3)]
        if n == 20:
            rows.append(f"p,s,{n},0,3,,1")  # censored trial
        (d / "trials.csv").write_text("\n".join(rows) + "\n")
    rc = render.main(["--in", str(base), "--out", str(tmp_path), "--kind", "fit"])
    assert rc == 3
    rc = render.main(["--in", str(base), "--out", str(tmp_path), "--kind", "curves"])
    assert rc == 0  # curves can render censored pools; the flag only caps p-hat


def test_width_needs_two_theta_rows(tmp_path):
    base = tmp_path / "w"
    for n in (10, 20):
        d = base / str(n)
        d.mkdir(parents=True)
        (d / "summary.csv").write_text(
            f"{SUMMARY_HEADER}\np,s,{n},1/2,7,6,8,40\n"
        )
    rc = render.main(["--in", str(base), "--out", str(tmp_path), "--kind", "width"])
    assert rc == 3


def test_wilson_interval_matches_reference_value():
    lo, hi = render.wilson_interval(50, 100)
    assert abs(lo - 0.4038298) < 1e-6
    assert abs(hi - 0.5961702) < 1e-6
    assert render.wilson_interval(0, 0) == (0.0, 1.0)
