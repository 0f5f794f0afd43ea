"""End-to-end runs of the command-line front door, in process.

Everything goes through dispatch() so the exit-code contract and the
manifest trailer are exercised exactly as a shell user would see them.
"""

import json
import math

import pytest

from conftest import GOLDEN
from oracles import fib
from sftlab.cli import dispatch

FULL2 = [[1, 1], [1, 1]]
SWAP = [[0, 1], [1, 0]]

# omega-word, x-word, value; pairs left out fall back to zero
FREQ_POT = "kind=cylinder depth=1 dim=1\n0 1 1\n1 1 1\n"


def run(capsys, *argv):
    code = dispatch(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def body_and_manifest(out):
    lines = out.splitlines()
    assert lines[-1].startswith("# manifest ")
    return lines[:-1], json.loads(lines[-1][len("# manifest "):])


# -- exit codes --------------------------------------------------------


def test_no_subcommand_is_usage_error(capsys):
    code, out, err = run(capsys)
    assert code == 64
    assert out == ""
    assert err.startswith("usage error:")


def test_unknown_flag_is_usage_error(matrix_file, capsys):
    code, out, err = run(capsys, "entropy", "--matrix", matrix_file(GOLDEN), "--frobnicate")
    assert code == 64
    assert err.startswith("usage error:")


def test_missing_required_argument_is_usage_error(capsys):
    code, _, err = run(capsys, "classify")
    assert code == 64
    assert err.startswith("usage error:")


def test_bad_matrix_entries_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("2\n1 2\n2 1\n")
    code, out, err = run(capsys, "entropy", "--matrix", str(path))
    assert code == 2
    assert out == ""
    assert err.startswith("error:")


def test_bad_point_literal_exits_2(capsys):
    code, out, err = run(capsys, "chaos-pair", "--x", "bogus", "--y", "periodic:/0", "--K", "2")
    assert code == 2
    assert "bad point literal" in err


def test_budget_exhaustion_exits_3_with_no_partial_output(matrix_file, capsys):
    # exact counts stop at 256, so a deep table trips the budget mid-loop;
    # nothing may have reached stdout by then
    code, out, err = run(capsys, "words", "--matrix", matrix_file(GOLDEN), "--max-n", "300")
    assert code == 3
    assert out == ""
    assert err.startswith("budget error:")


def test_unknown_check_name_exits_2(capsys):
    code, _, err = run(capsys, "check", "frobnitz")
    assert code == 2
    assert "unknown check" in err


# -- classify / entropy / words ----------------------------------------


def test_classify_line(matrix_file, capsys):
    code, out, _ = run(capsys, "classify", "--matrix", matrix_file(GOLDEN))
    body, manifest = body_and_manifest(out)
    assert code == 0
    assert body == ["irreducible=true aperiodic=true p=1 r=1"]
    assert manifest["command"] == "classify"
    assert "wall_time_s" not in manifest


def test_classify_periodic_matrix(matrix_file, capsys):
    code, out, _ = run(capsys, "classify", "--matrix", matrix_file(SWAP))
    assert code == 0
    assert "aperiodic=false" in out
    assert "p=2" in out


def test_entropy_digits(matrix_file, capsys):
    code, out, _ = run(capsys, "entropy", "--matrix", matrix_file(GOLDEN))
    body, _ = body_and_manifest(out)
    assert code == 0
    assert body == ["entropy_nats=0.481211825", "dimension=0.694241914"]


def test_entropy_full_shift_dimension_one(matrix_file, capsys):
    _, out, _ = run(capsys, "entropy", "--matrix", matrix_file(FULL2))
    body, _ = body_and_manifest(out)
    assert body == ["entropy_nats=0.693147181", "dimension=1"]


def test_words_counts_and_slopes(matrix_file, capsys):
    code, out, _ = run(capsys, "words", "--matrix", matrix_file(GOLDEN), "--max-n", "12")
    body, manifest = body_and_manifest(out)
    assert code == 0
    assert body[0] == "depth,count,log_count,slope"
    assert len(body) == 13
    for row in body[1:]:
        n, c, lg, sl = row.split(",")
        n, c = int(n), int(c)
        assert c == fib(n + 2)
        assert float(lg) == pytest.approx(math.log(c), abs=1e-8)
        assert float(sl) == pytest.approx(math.log(c) / n, abs=1e-8)
    assert manifest["params"]["max_n"] == 12


# -- manifests and delivery --------------------------------------------


def test_manifest_records_params_without_outputs(matrix_file, capsys):
    _, out, _ = run(capsys, "words", "--matrix", matrix_file(GOLDEN))
    _, manifest = body_and_manifest(out)
    assert manifest["seed"] == 0
    assert manifest["budget"] is None
    params = manifest["params"]
    assert "out" not in params
    assert "func" not in params
    assert params["threads"] == 1


def test_out_writes_body_and_sidecar(tmp_path, matrix_file, capsys):
    target = tmp_path / "h.txt"
    code, out, _ = run(capsys, "entropy", "--matrix", matrix_file(GOLDEN), "--out", str(target))
    assert code == 0
    assert out == f"wrote {target}\n"
    assert target.read_text() == "entropy_nats=0.481211825\ndimension=0.694241914\n"
    side = json.loads((tmp_path / "h.txt.manifest.json").read_text())
    assert side["command"] == "entropy"
    assert side["wall_time_s"] >= 0.0


def test_stdout_bytes_reproducible(matrix_file, potential_file, capsys):
    """Identical invocations give identical bytes, manifest line included."""
    argv = (
        "spectrum", "--matrix", matrix_file(FULL2),
        "--potential", potential_file(FREQ_POT),
        "--alphas", "0.3,0.5", "--n", "8", "--samples", "2",
    )
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second
    assert first[0] == 0


def test_threads_flag_leaves_body_alone(matrix_file, capsys):
    mat = matrix_file(GOLDEN)
    _, one, _ = run(capsys, "entropy", "--matrix", mat)
    _, four, _ = run(capsys, "entropy", "--matrix", mat, "--threads", "4")
    # manifests differ (threads is recorded); bodies must not
    assert one.splitlines()[:2] == four.splitlines()[:2]


# -- spectrum and gcount -----------------------------------------------


def test_spectrum_closed_form_rows(matrix_file, potential_file, capsys):
    code, out, _ = run(
        capsys, "spectrum", "--matrix", matrix_file(FULL2),
        "--potential", potential_file(FREQ_POT),
        "--alphas", "0.3,0.5", "--n", "10", "--samples", "2",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    assert body[0] == "alpha,p_star,value,lower,upper,iterations"
    rows = [ln.split(",") for ln in body[1:]]
    assert [r[0] for r in rows] == ["0.3", "0.5"]
    for r in rows:
        a = float(r[0])
        h = -(a * math.log(a) + (1 - a) * math.log(1 - a))
        assert float(r[1]) == pytest.approx(math.log(a / (1 - a)), abs=1e-4)
        assert float(r[2]) == pytest.approx(h, abs=1e-6)
        assert float(r[3]) <= float(r[2]) + 1e-9
        assert float(r[2]) <= float(r[4]) + 1e-9
        assert int(r[5]) >= 1


def test_gcount_band_counts(matrix_file, potential_file, capsys):
    code, out, _ = run(
        capsys, "gcount", "--matrix", matrix_file(FULL2),
        "--potential", potential_file(FREQ_POT),
        "--targets", "0.5", "--delta", "0.25", "--depths", "4,8",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    assert body[0] == "depth,count,log_count,slope"
    got = {int(r.split(",")[0]): int(r.split(",")[1]) for r in body[1:]}
    # binomial tails cut at the band edges: C(4,1..3), C(8,2..6)
    assert got == {4: 14, 8: 238}


# -- chaos-pair --------------------------------------------------------


def test_chaos_pair_separated_periodic_points(capsys):
    code, out, _ = run(
        capsys, "chaos-pair", "--x", "periodic:/01", "--y", "periodic:/10",
        "--K", "2", "--horizon", "2048",
    )
    body, manifest = body_and_manifest(out)
    assert code == 0
    flags = dict(ln.split("=", 1) for ln in body[:5])
    assert flags["LY"] == "evidence-against"
    assert flags["meanLY"] == "evidence-against"
    tail_min = next(ln for ln in body if ln.startswith("margin_tail_min="))
    lo, hi = tail_min.split("[")[1].rstrip("]").split(",")
    assert float(lo) == 1.0 and float(hi) == 1.0
    k = body.index("eps,n,proportion")
    data = [ln.split(",") for ln in body[k + 1:]]
    assert data and all(len(r) == 3 for r in data)
    # every position disagrees, so nothing ever dips below eps
    assert {r[2] for r in data} == {"0"}
    assert manifest["command"] == "chaos-pair"


def test_chaos_pair_profile_file_keeps_verdict_on_stdout(tmp_path, capsys):
    prof = tmp_path / "prof.csv"
    code, out, _ = run(
        capsys, "chaos-pair", "--x", "periodic:/01", "--y", "periodic:/10",
        "--K", "2", "--horizon", "1024", "--out", str(prof),
    )
    assert code == 0
    assert "LY=evidence-against" in out
    assert out.endswith(f"wrote {prof}\n")
    assert prof.read_text().startswith("eps,n,proportion")
    side = json.loads((tmp_path / "prof.csv.manifest.json").read_text())
    assert side["wall_time_s"] >= 0.0


# -- transfer ----------------------------------------------------------


def test_transfer_full_kind(matrix_file, capsys):
    code, out, _ = run(
        capsys, "transfer", "--matrix", matrix_file(FULL2), "--kind", "full",
        "--samples", "4", "--depth", "64",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    assert "involution ok=true" in body[0]
    assert "mismatch_sets_equal=true" in body[0]
    digits = body[1].removeprefix("first_image_prefix=")
    assert len(digits) == 16
    assert set(digits) <= {"0", "1"}


def test_transfer_sft_kind(matrix_file, capsys):
    code, out, _ = run(
        capsys, "transfer", "--matrix", matrix_file(GOLDEN), "--kind", "sft",
        "--M", "4", "--samples", "20", "--depth", "128",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    assert "kind=sft M=4 r=1" in body[0]
    assert "violations=0" in body[0]
    assert body[0].endswith("ok=true")
    assert "equivariance ok=true" in body[1]


def test_transfer_encode_kind(matrix_file, capsys):
    code, out, _ = run(
        capsys, "transfer", "--matrix", matrix_file(GOLDEN), "--kind", "encode",
        "--M", "6", "--samples", "8", "--depth", "96",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    assert "kind=encode M=6" in body[0]
    assert "violations=0" in body[0]
    assert body[0].endswith("ok=true")


# -- moran -------------------------------------------------------------


def test_moran_build_breakpoint_table(matrix_file, capsys):
    code, out, _ = run(
        capsys, "moran", "build", "--matrix", matrix_file(FULL2),
        "--target", "0.5", "--tol", "0.1", "--stages", "2",
        "--t1", "32", "--ratios", "4", "--gaps", "none",
    )
    body, manifest = body_and_manifest(out)
    assert code == 0
    assert body[0] == "breakpoint,count_log,slope"
    rows = [ln.split(",") for ln in body[1:]]
    assert [int(r[0]) for r in rows] == [32, 64, 128]
    logs = [float(r[1]) for r in rows]
    assert all(b > a for a, b in zip(logs, logs[1:]))
    for r in rows:
        assert 0.0 < float(r[2]) <= math.log(2) + 1e-9
    assert manifest["command"] == "moran build"


def test_moran_build_json_document(tmp_path, matrix_file, capsys):
    target = tmp_path / "build.json"
    code, out, _ = run(
        capsys, "moran", "build", "--matrix", matrix_file(FULL2),
        "--target", "0.5", "--stages", "2", "--t1", "32",
        "--ratios", "4", "--gaps", "none", "--out", str(target),
    )
    assert code == 0
    assert out == f"wrote {target}\n"
    doc = json.loads(target.read_text())
    assert doc["milestones"] == [32, 128]
    assert doc["breakpoints"] == [32, 64, 128]
    assert doc["final_slope"] == doc["slopes"][-1]
    assert doc["gaps"] == "none"
    assert "trends" in doc
    assert "wall_time_s" not in doc["manifest"]
    side = json.loads((tmp_path / "build.json.manifest.json").read_text())
    assert side["wall_time_s"] >= 0.0


def test_moran_witness_stages_and_verdict(matrix_file, capsys):
    """Copy stages sit low, deviate stages high, and the pair reads
    as mean-type scrambling at the schedule horizon."""
    code, out, _ = run(
        capsys, "moran", "witness", "--matrix", matrix_file(FULL2),
        "--omega", "periodic:/0", "--stages", "4", "--tol", "0.5",
        "--t1", "64", "--ratios", "2,20,2.5",
    )
    body, _ = body_and_manifest(out)
    assert code == 0
    flags = dict(ln.split("=", 1) for ln in body[:5])
    assert flags["meanLY"] == "evidence-for"
    assert flags["LY"] == "evidence-for"
    assert body[5] == "deviations=1952"
    k = body.index("stage,end,predicted_avg")
    rows = [ln.split(",") for ln in body[k + 1:]]
    assert [int(r[1]) for r in rows] == [64, 128, 2560, 6400]
    preds = [float(r[2]) for r in rows]
    assert preds[0] < 0.05 and preds[2] < 0.05
    assert preds[1] > 0.3 and preds[3] > 0.3


# -- check -------------------------------------------------------------


def test_check_quick_suite_passes(capsys):
    code, out, _ = run(capsys, "check", "--quick")
    lines = out.splitlines()
    assert code == 0
    assert lines[-1] == "5/5 checks passed"
    assert len(lines) == 6
    assert all(ln.startswith("ok") for ln in lines[:-1])


def test_check_single_name(capsys):
    code, out, _ = run(capsys, "check", "ultrametric", "--quick")
    assert code == 0
    assert out.splitlines()[-1] == "1/1 checks passed"
