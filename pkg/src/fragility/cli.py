"""Command-line front end: generate -> impute -> spectrum -> stress -> estimate -> policy.

Every command is deterministic given its inputs and ``--seed``; reruns produce
byte-identical output files. ``FRAGILITY_THREADS`` caps internal parallelism
without changing results.

Exit codes: 0 success, 2 usage/missing input, 3 infeasible imputation,
4 collinear controls, 5 missing event-study year, 6 bad lead index,
7 estimation window too short, 8 sample too small, 9 identification or
bootstrap failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import estimators, exposures, synth
from .dynamics import ShockScenario, amplification_factor, equilibrium_stress, stress_trajectory
from .errors import (
    BootstrapUnstableError,
    CollinearControlsError,
    DegenerateNetworkError,
    FragilityError,
    IdentificationError,
    InfeasibleError,
    MissingYearError,
    SampleTooSmallError,
    WindowError,
)
from .graph import build_graph, compute_stats
from .impute import ImputationProblem, ras_impute
from .policy import CapitalPolicy, apply_capital_policy, resolution_ranking
from .spectrum import lambda2_lanczos


def _threads() -> int:
    raw = os.environ.get("FRAGILITY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _write_json(payload, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require(path_str: str | None, label: str) -> Path:
    if not path_str:
        raise FileNotFoundError(f"--{label} is required")
    path = Path(path_str)
    if not path.exists():
        raise FileNotFoundError(f"--{label} file not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graph_inputs(args, need_institutions: bool = False):
    exp_path = _require(args.exposures, "exposures")
    institutions = None
    if getattr(args, "institutions", None):
        institutions = exposures.read_institutions_csv(_require(args.institutions, "institutions"))
    elif need_institutions or args.normalization == "asset_weighted":
        raise FileNotFoundError("--institutions is required for this command/normalization")
    panel = exposures.read_exposures_csv(exp_path, institutions)
    return panel, institutions


def _quarter_graph(panel, quarter, args, meta):
    E = exposures.aggregate_exposures(panel, quarter)
    assets = np.array([inst.assets for inst in panel.institutions]) if meta is not None else None
    return build_graph(
        E,
        normalization=args.normalization,
        threshold_quantile=args.threshold_quantile,
        node_ids=panel.ids,
        assets=assets,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out = _out_dir(args)
    panel = synth.exposure_history(
        n=args.n_institutions,
        T=args.quarters_exposures,
        crisis_quarter=args.crisis_quarter_exposures,
        seed=args.seed,
    )
    exposures.write_institutions_csv(panel.institutions, out / "institutions.csv")
    exposures.write_exposures_csv(panel, out / "exposures.csv")
    mask = synth.observed_mask(panel, fraction=args.mask_fraction, seed=args.seed)
    exposures.write_mask_csv(mask, out / "mask.csv")

    spec = synth.CrisisPanelSpec(
        T=args.quarters,
        crisis_quarter=args.crisis_quarter,
        direct_effect=args.direct_effect,
        spillover_per_link=args.spillover,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    result = synth.crisis_panel(spec)
    estimators.write_panel_csv(result.panel, out / "panel.csv")
    estimators.write_outcomes_csv(result.outcomes, out / "outcomes.csv")
    _write_json(
        {
            "direct_effect": result.truth.direct_effect,
            "spillover_per_link": result.truth.spillover_per_link,
            "mean_degree": result.truth.mean_degree,
            "naive_effect": result.truth.naive_effect,
            "crisis_quarter": spec.crisis_quarter,
        },
        out / "truth.json",
    )

    decay = synth.decay_dataset(
        kappa=args.decay_kappa, alpha=0.1, beta=1.0, gamma_net=0.687, n_pairs=400, noise_sigma=0.0, seed=args.seed
    )
    estimators.write_decay_csv(decay, out / "decay.csv")

    by_assets = max(panel.institutions, key=lambda inst: inst.assets)
    _write_json(
        {
            "shocks": [{"node_id": by_assets.id, "magnitude": 100.0}],
            "damping": 0.0935,
            "horizon": 10.0,
            "dt": 0.5,
        },
        out / "scenario.json",
    )
    _write_json(
        {
            "scenarios": [
                {"mode": "uniform", "k0": 0.08, "alpha": 0.0},
                {"mode": "network_targeted", "k0": 0.08, "alpha": 0.05},
                {"mode": "network_targeted", "k0": 0.08, "alpha": 0.10},
                {"mode": "network_targeted", "k0": 0.08, "alpha": 0.15},
                {"mode": "network_targeted", "k0": 0.08, "alpha": 0.20},
                {"mode": "size_based", "k0": 0.08, "alpha": 0.15, "top_m": 8},
                {"mode": "leverage_based", "k0": 0.08, "alpha": 0.15, "leverage_threshold": 15.0},
            ]
        },
        out / "policy.json",
    )
    return 0


def cmd_impute(args) -> int:
    exp_path = _require(args.exposures, "exposures")
    mask_path = _require(args.mask, "mask")
    out = _out_dir(args)
    df = pd.read_csv(exp_path, dtype={"lender": str, "borrower": str}, float_precision="round_trip")
    mask = exposures.read_mask_csv(mask_path)
    ids = sorted(set(df["lender"]) | set(df["borrower"]))
    index = {b: k for k, b in enumerate(ids)}
    n = len(ids)

    completed_rows = []
    report = {}
    for quarter, group in df.groupby("quarter", sort=True):
        quarter = int(quarter)
        E = np.zeros((n, n))
        components = {}
        for row in group.itertuples(index=False):
            i, j = index[row.lender], index[row.borrower]
            total = row.loans + row.securities + row.derivatives + row.guarantees
            E[i, j] = total
            components[(i, j)] = (row.loans, row.securities, row.derivatives, row.guarantees)
        observed_cells = [
            (index[l], index[b]) for (q, l, b) in mask if q == quarter and l in index and b in index
        ]
        observed = tuple((i, j, E[i, j]) for i, j in sorted(set(observed_cells)))
        problem = ImputationProblem(
            observed=observed,
            row_targets=E.sum(axis=1),
            col_targets=E.sum(axis=0),
            tolerance=args.tolerance,
            max_iterations=args.max_iterations,
            labels=tuple(ids),
        )
        result = ras_impute(problem)
        report[str(quarter)] = {
            "iterations": result.iterations,
            "max_marginal_deviation": result.max_marginal_deviation,
            "converged": result.converged,
            "n_observed": len(observed),
        }
        # channel split of the quarter's observed mass, applied to imputed cells
        channel = np.array([c for c in components.values()]).sum(axis=0) if components else np.ones(4)
        share = channel / channel.sum() if channel.sum() > 0 else np.array([1.0, 0.0, 0.0, 0.0])
        observed_set = {(i, j) for i, j, _ in observed}
        for i in range(n):
            for j in range(n):
                if i == j or result.matrix[i, j] <= 0:
                    continue
                if (i, j) in observed_set and (i, j) in components:
                    loans, sec, der, gua = components[(i, j)]
                else:
                    total = result.matrix[i, j]
                    loans = total * share[0]
                    sec = total * share[1]
                    der = total * share[2]
                    gua = total - loans - sec - der
                completed_rows.append((quarter, ids[i], ids[j], loans, sec, der, gua))

    pd.DataFrame(completed_rows, columns=list(exposures.EXPOSURE_COLUMNS)).to_csv(
        out / "completed.csv", index=False
    )
    _write_json(report, out / "impute_report.json")
    return 0


def cmd_spectrum(args) -> int:
    panel, meta = _load_graph_inputs(args)
    out = _out_dir(args)

    def one_quarter(quarter: int):
        try:
            g = _quarter_graph(panel, quarter, args, meta)
        except DegenerateNetworkError as exc:
            print(f"warning: quarter {quarter}: {exc}", file=sys.stderr)
            record = {"quarter": quarter, "degenerate": True}
            nan = float("nan")
            return record, (quarter, nan, 0, nan, nan, nan, nan)
        spec = lambda2_lanczos(g, seed=args.seed)
        if spec.disconnected:
            print(f"warning: quarter {quarter}: network disconnected", file=sys.stderr)
        stats = compute_stats(g, institutions=meta, spectrum=spec)
        record = {
            "quarter": quarter,
            "lambda2": spec.lambda2,
            "residual": spec.residual,
            "iterations": spec.iterations,
            "fiedler": [float(x) for x in spec.fiedler],
            "node_ids": list(g.node_ids),
            "disconnected": spec.disconnected,
        }
        row = (
            quarter,
            stats.lambda2,
            stats.n_banks,
            stats.density,
            stats.clustering,
            stats.herfindahl,
            stats.avg_path_length,
        )
        return record, row

    threads = min(_threads(), len(panel.quarters))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_quarter, panel.quarters))
    else:
        results = [one_quarter(q) for q in panel.quarters]

    _write_json([rec for rec, _ in results], out / "spectra.json")
    pd.DataFrame(
        [row for _, row in results],
        columns=["quarter", "lambda2", "n_banks", "density", "clustering", "herfindahl", "avg_path_length"],
    ).to_csv(out / "stats.csv", index=False)
    return 0


def cmd_stress(args) -> int:
    panel, meta = _load_graph_inputs(args)
    scenario_path = _require(args.scenario, "scenario")
    out = _out_dir(args)
    quarter = args.quarter if args.quarter is not None else panel.quarters[-1]
    g = _quarter_graph(panel, quarter, args, meta)
    config = json.loads(scenario_path.read_text())
    shock = np.zeros(g.n)
    for item in config["shocks"]:
        node = item["node_id"]
        if node not in g.node_ids:
            raise FileNotFoundError(f"scenario shock node {node!r} not in quarter {quarter} network")
        shock[g.index_of(node)] = float(item["magnitude"])
    scenario = ShockScenario(
        shock=shock,
        damping=float(config.get("damping", 0.1)),
        horizon=float(config.get("horizon", 10.0)),
        dt=float(config.get("dt", 0.5)),
    )
    x_star = equilibrium_stress(g, scenario)
    af = amplification_factor(g, scenario)
    trajectory = stress_trajectory(g, scenario)

    rows = [
        (float(t), node, float(trajectory.states[k, i]))
        for k, t in enumerate(trajectory.times)
        for i, node in enumerate(g.node_ids)
    ]
    pd.DataFrame(rows, columns=["t", "node_id", "stress"]).to_csv(out / "trajectory.csv", index=False)
    _write_json(
        {
            "quarter": int(quarter),
            "damping": scenario.damping,
            "amplification_factor": af,
            "total_shock": float(shock.sum()),
            "total_equilibrium_stress": float(x_star.sum()),
            "equilibrium": {node: float(x) for node, x in zip(g.node_ids, x_star)},
        },
        out / "stress_report.json",
    )
    return 0


def cmd_estimate(args) -> int:
    out = _out_dir(args)
    controls = args.controls.split(",") if args.controls else None

    if args.estimator == "decay":
        data = estimators.read_decay_csv(_require(args.decay, "decay"))
        fit = estimators.fit_spatial_decay(data, reps=args.reps, seed=args.seed)
        _write_json(fit.to_dict(), out / "decay_report.json")
        return 0
    if args.estimator == "naive":
        outcomes = estimators.read_outcomes_csv(_require(args.outcomes, "outcomes"), args.crisis_quarter)
        report = estimators.naive_did(outcomes, reps=args.reps, seed=args.seed)
        _write_json(report.to_dict(), out / "naive_report.json")
        return 0

    panel = estimators.read_panel_csv(_require(args.panel, "panel"), args.crisis_quarter)
    if args.estimator == "did":
        report = estimators.spatial_did(panel, controls=controls, reps=args.reps, seed=args.seed)
        _write_json(report.to_dict(), out / "did_report.json")
    elif args.estimator == "event":
        report = estimators.event_study(
            panel, window=(args.window_before, args.window_after), controls=controls,
            reps=args.reps, seed=args.seed,
        )
        _write_json(report.to_dict(), out / "event_report.json")
    elif args.estimator == "pretrends":
        leads = [int(x) for x in args.leads.split(",")]
        report = estimators.pretrends_test(panel, leads=leads, controls=controls, reps=args.reps, seed=args.seed)
        _write_json(report.to_dict(), out / "pretrends_report.json")
    elif args.estimator == "placebo":
        if not args.placebo_dates:
            raise FileNotFoundError("--placebo-dates is required for the placebo estimator")
        dates = [int(x) for x in args.placebo_dates.split(",")]
        reports = estimators.placebo_test(panel, dates, controls=controls, reps=args.reps, seed=args.seed)
        _write_json({str(d): r.to_dict() for d, r in reports.items()}, out / "placebo_report.json")
    else:
        raise FragilityError(f"unknown estimator {args.estimator!r}")
    return 0


def cmd_policy(args) -> int:
    panel, meta = _load_graph_inputs(args, need_institutions=True)
    policy_path = _require(args.policy, "policy")
    out = _out_dir(args)
    quarter = args.quarter if args.quarter is not None else panel.quarters[-1]
    g = _quarter_graph(panel, quarter, args, meta)
    spectrum = lambda2_lanczos(g, seed=args.seed)

    config = json.loads(policy_path.read_text())
    scenarios = config["scenarios"] if "scenarios" in config else [config]
    outcome_rows = []
    for sc in scenarios:
        policy = CapitalPolicy(
            mode=sc["mode"],
            k0=float(sc.get("k0", 0.08)),
            alpha=float(sc.get("alpha", 0.0)),
            top_m=int(sc["top_m"]) if sc.get("top_m") is not None else None,
            leverage_threshold=float(sc.get("leverage_threshold", 15.0)),
        )
        outcome = apply_capital_policy(g, meta, spectrum, policy)
        reqs = np.array(list(outcome.requirements.values()))
        outcome_rows.append(
            (
                policy.mode,
                policy.k0,
                policy.alpha,
                policy.top_m if policy.top_m is not None else "",
                policy.leverage_threshold,
                100.0 * reqs.mean(),
                100.0 * reqs.std(),
                100.0 * reqs.max(),
                outcome.lambda2_before,
                outcome.lambda2_after,
                outcome.reduction_pct,
                outcome.banks_affected,
            )
        )
    pd.DataFrame(
        outcome_rows,
        columns=[
            "mode", "k0", "alpha", "top_m", "leverage_threshold", "avg_requirement_pct",
            "std_requirement_pct", "max_requirement_pct", "lambda2_before", "lambda2_after",
            "reduction_pct", "banks_affected",
        ],
    ).to_csv(out / "policy_outcomes.csv", index=False)

    assets_by_id = {inst.id: inst.assets for inst in meta}
    ranking = resolution_ranking(g, spectrum)
    pd.DataFrame(
        [
            (
                rank + 1,
                e.institution,
                assets_by_id[e.institution],
                e.fiedler_sq,
                e.delta_lambda2,
                e.reduction_pct,
                e.disconnects,
            )
            for rank, e in enumerate(ranking)
        ],
        columns=["rank", "institution", "assets", "fiedler_sq", "delta_lambda2", "reduction_pct", "disconnects"],
    ).to_csv(out / "resolution_ranking.csv", index=False)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _add_graph_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--exposures", help="exposure CSV")
    p.add_argument("--institutions", help="institutions CSV")
    p.add_argument("--normalization", default="geometric_mean")
    p.add_argument("--threshold-quantile", dest="threshold_quantile", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fragility", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a synthetic dataset bundle")
    _add_common(p)
    p.add_argument("--n-institutions", type=int, default=24)
    p.add_argument("--quarters", type=int, default=40, help="panel length")
    p.add_argument("--crisis-quarter", type=int, default=20)
    p.add_argument("--quarters-exposures", type=int, default=8)
    p.add_argument("--crisis-quarter-exposures", type=int, default=4)
    p.add_argument("--mask-fraction", type=float, default=0.5)
    p.add_argument("--direct-effect", type=float, default=1176.0)
    p.add_argument("--spillover", type=float, default=700.0)
    p.add_argument("--noise-sigma", type=float, default=50.0)
    p.add_argument("--decay-kappa", type=float, default=0.043)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("impute", help="complete a partially observed exposure panel")
    _add_common(p)
    p.add_argument("--exposures")
    p.add_argument("--mask")
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("spectrum", help="per-quarter connectivity and network statistics")
    _add_common(p)
    _add_graph_opts(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("stress", help="diffusion stress test on one quarter")
    _add_common(p)
    _add_graph_opts(p)
    p.add_argument("--scenario", help="scenario JSON")
    p.add_argument("--quarter", type=int, default=None)
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("estimate", help="run an estimator against panel files")
    p.add_argument("estimator", choices=["did", "event", "pretrends", "placebo", "decay", "naive"])
    _add_common(p)
    p.add_argument("--panel")
    p.add_argument("--outcomes")
    p.add_argument("--decay")
    p.add_argument("--crisis-quarter", type=int, default=20)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--controls", help="comma-separated control names (default: all)")
    p.add_argument("--window-before", type=int, default=2)
    p.add_argument("--window-after", type=int, default=4)
    p.add_argument("--leads", default="6,4,2")
    p.add_argument("--placebo-dates", default="")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("policy", help="capital-policy counterfactuals and resolution ranking")
    _add_common(p)
    _add_graph_opts(p)
    p.add_argument("--policy", help="policy config JSON")
    p.add_argument("--quarter", type=int, default=None)
    p.set_defaults(func=cmd_policy)

    return parser


_EXIT_CODES: list[tuple[type, int]] = [
    (InfeasibleError, 3),
    (CollinearControlsError, 4),
    (MissingYearError, 5),
    (IndexError, 6),
    (WindowError, 7),
    (SampleTooSmallError, 8),
    (IdentificationError, 9),
    (BootstrapUnstableError, 9),
]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except tuple(t for t, _ in _EXIT_CODES) as exc:
        for err_type, code in _EXIT_CODES:
            if isinstance(exc, err_type):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise AssertionError("unreachable")
    except FragilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
