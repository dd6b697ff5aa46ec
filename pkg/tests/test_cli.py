import json

import numpy as np
import pandas as pd
import pytest

from fragility.cli import main
from fragility.exposures import write_exposures_csv, write_mask_csv
from fragility.synth import exposure_history


@pytest.fixture
def bundle(tmp_path):
    out = tmp_path / "data"
    assert main(["generate", "--out", str(out), "--seed", "3", "--n-institutions", "14",
                 "--quarters-exposures", "4", "--crisis-quarter-exposures", "2"]) == 0
    return out


def test_generate_emits_bundle(bundle):
    for name in (
        "institutions.csv", "exposures.csv", "mask.csv", "panel.csv", "outcomes.csv",
        "decay.csv", "scenario.json", "policy.json", "truth.json",
    ):
        assert (bundle / name).exists(), name


def test_missing_mask_is_usage_error(bundle, tmp_path, capsys):
    code = main(["impute", "--exposures", str(bundle / "exposures.csv"),
                 "--mask", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "mask" in capsys.readouterr().err


def test_unknown_subcommand_exits_two(capsys):
    assert main(["estimate", "frobnicate", "--out", "/tmp/x"]) == 2


def test_fully_observed_impute_is_identity(tmp_path):
    panel = exposure_history(n=8, T=2, crisis_quarter=0, seed=1)
    exp = tmp_path / "exp.csv"
    write_exposures_csv(panel, exp)
    ids = [inst.id for inst in panel.institutions]
    full_mask = {(q, a, b) for q in panel.quarters for a in ids for b in ids if a != b}
    write_mask_csv(full_mask, tmp_path / "mask.csv")
    out = tmp_path / "out"
    assert main(["impute", "--exposures", str(exp), "--mask", str(tmp_path / "mask.csv"), "--out", str(out)]) == 0
    report = json.loads((out / "impute_report.json").read_text())
    assert all(entry["iterations"] == 0 and entry["converged"] for entry in report.values())

    def totals(path):
        df = pd.read_csv(path, dtype={"lender": str, "borrower": str})
        df["total"] = df[["loans", "securities", "derivatives", "guarantees"]].sum(axis=1)
        return df.set_index(["quarter", "lender", "borrower"])["total"].sort_index()

    orig, completed = totals(exp), totals(out / "completed.csv")
    assert orig.index.equals(completed.index)
    assert np.allclose(orig.to_numpy(), completed.to_numpy(), rtol=1e-12)


def test_masked_impute_converges_and_pins_observed(bundle, tmp_path):
    out = tmp_path / "imp"
    assert main(["impute", "--exposures", str(bundle / "exposures.csv"),
                 "--mask", str(bundle / "mask.csv"), "--out", str(out)]) == 0
    report = json.loads((out / "impute_report.json").read_text())
    assert all(entry["converged"] for entry in report.values())
    assert all(entry["max_marginal_deviation"] <= 1e-8 for entry in report.values())

    mask = {(int(r.quarter), r.lender, r.borrower)
            for r in pd.read_csv(bundle / "mask.csv", dtype={"lender": str, "borrower": str}).itertuples()}
    orig = pd.read_csv(bundle / "exposures.csv", dtype={"lender": str, "borrower": str})
    comp = pd.read_csv(out / "completed.csv", dtype={"lender": str, "borrower": str})
    orig["key"] = list(zip(orig.quarter, orig.lender, orig.borrower))
    comp["key"] = list(zip(comp.quarter, comp.lender, comp.borrower))
    for frame in (orig, comp):
        frame["total"] = frame[["loans", "securities", "derivatives", "guarantees"]].sum(axis=1)
    orig_map = orig.set_index("key")["total"]
    comp_map = comp.set_index("key")["total"]
    for key in mask:
        if key in orig_map.index:
            assert comp_map[key] == orig_map[key]


def test_spectrum_cycle_fixture(tmp_path):
    # ring of equal exposures under binary normalization is the unit cycle
    rows = []
    n = 8
    for q in (0, 1):
        for i in range(n):
            j = (i + 1) % n
            rows.append((q, f"B{i}", f"B{j}", 5.0, 0.0, 0.0, 0.0))
            rows.append((q, f"B{j}", f"B{i}", 5.0, 0.0, 0.0, 0.0))
    df = pd.DataFrame(rows, columns=["quarter", "lender", "borrower", "loans", "securities", "derivatives", "guarantees"])
    exp = tmp_path / "c8.csv"
    df.to_csv(exp, index=False)
    out = tmp_path / "spec"
    assert main(["spectrum", "--exposures", str(exp), "--normalization", "binary", "--out", str(out)]) == 0
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats["quarter"]) == [0, 1]
    expected = 2 * (1 - np.cos(2 * np.pi / 8))
    assert np.allclose(stats["lambda2"], expected, rtol=1e-9)
    spectra = json.loads((out / "spectra.json").read_text())
    assert [s["quarter"] for s in spectra] == [0, 1]
    assert len(spectra[0]["fiedler"]) == 8


def test_spectrum_rerun_byte_identical(bundle, tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    args = ["spectrum", "--exposures", str(bundle / "exposures.csv"),
            "--institutions", str(bundle / "institutions.csv"), "--seed", "5"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "stats.csv").read_bytes() == (out2 / "stats.csv").read_bytes()
    assert (out1 / "spectra.json").read_bytes() == (out2 / "spectra.json").read_bytes()


def test_spectrum_threads_do_not_change_output(bundle, tmp_path, monkeypatch):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    args = ["spectrum", "--exposures", str(bundle / "exposures.csv"), "--seed", "5"]
    monkeypatch.delenv("FRAGILITY_THREADS", raising=False)
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("FRAGILITY_THREADS", "3")
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "stats.csv").read_bytes() == (out2 / "stats.csv").read_bytes()
    assert (out1 / "spectra.json").read_bytes() == (out2 / "spectra.json").read_bytes()


def test_spectrum_degenerate_quarter_flagged_not_fatal(tmp_path, capsys):
    rows = [(0, "A", "B", 3.0, 0, 0, 0), (0, "B", "A", 3.0, 0, 0, 0),
            (1, "A", "B", 0.0, 0, 0, 0)]  # quarter 1 carries no exposure mass
    df = pd.DataFrame(rows, columns=["quarter", "lender", "borrower", "loans", "securities", "derivatives", "guarantees"])
    exp = tmp_path / "exp.csv"
    df.to_csv(exp, index=False)
    out = tmp_path / "spec"
    assert main(["spectrum", "--exposures", str(exp), "--out", str(out)]) == 0
    assert "quarter 1" in capsys.readouterr().err
    stats = pd.read_csv(out / "stats.csv")
    assert list(stats["quarter"]) == [0, 1]
    assert np.isnan(stats.loc[1, "lambda2"])
    spectra = json.loads((out / "spectra.json").read_text())
    assert spectra[1]["degenerate"] is True


def test_stress_reports_amplification(bundle, tmp_path):
    out = tmp_path / "stress"
    assert main(["stress", "--exposures", str(bundle / "exposures.csv"),
                 "--scenario", str(bundle / "scenario.json"), "--out", str(out)]) == 0
    report = json.loads((out / "stress_report.json").read_text())
    assert report["amplification_factor"] == pytest.approx(1.0 / report["damping"], rel=1e-9)
    traj = pd.read_csv(out / "trajectory.csv")
    assert set(traj.columns) == {"t", "node_id", "stress"}
    assert traj["t"].min() == 0.0


def test_estimate_did_round_trip(bundle, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "did", "--panel", str(bundle / "panel.csv"),
                 "--crisis-quarter", "20", "--reps", "200", "--seed", "3", "--out", str(out)]) == 0
    report = json.loads((out / "did_report.json").read_text())
    truth = json.loads((bundle / "truth.json").read_text())
    assert abs(report["coefficients"]["post"] - truth["direct_effect"]) <= 4 * report["std_errors"]["post"]


def test_estimate_decay_round_trip(bundle, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "decay", "--decay", str(bundle / "decay.csv"),
                 "--reps", "60", "--seed", "3", "--out", str(out)]) == 0
    report = json.loads((out / "decay_report.json").read_text())
    assert report["kappa"] == pytest.approx(0.043, rel=0.01)
    assert report["d_star"] == pytest.approx(np.log(100) / report["kappa"], rel=1e-9)


def test_estimate_window_error_exit_code(bundle, tmp_path, capsys):
    code = main(["estimate", "placebo", "--panel", str(bundle / "panel.csv"),
                 "--crisis-quarter", "20", "--placebo-dates", "2", "--reps", "50",
                 "--seed", "0", "--out", str(tmp_path / "e")])
    assert code == 7


def test_policy_outputs(bundle, tmp_path):
    out = tmp_path / "pol"
    assert main(["policy", "--exposures", str(bundle / "exposures.csv"),
                 "--institutions", str(bundle / "institutions.csv"),
                 "--policy", str(bundle / "policy.json"), "--seed", "3", "--out", str(out)]) == 0
    outcomes = pd.read_csv(out / "policy_outcomes.csv")
    assert (outcomes.loc[outcomes["alpha"] == 0.0, "reduction_pct"].abs() < 1e-9).all()
    sweep = outcomes[outcomes["mode"] == "network_targeted"].sort_values("alpha")
    assert sweep["reduction_pct"].is_monotonic_increasing
    ranking = pd.read_csv(out / "resolution_ranking.csv", dtype={"institution": str})
    n_institutions = len(pd.read_csv(bundle / "institutions.csv"))
    assert len(ranking) == n_institutions
    assert ranking["fiedler_sq"].is_monotonic_decreasing
