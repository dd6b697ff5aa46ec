"""Estimation machinery: spatial DID on network-level series, event study,
pre-trends and placebo checks, the naive institution-level comparator, block
bootstrap inference, and spatial-decay nonlinear least squares.

Panel CSV header: ``quarter,lambda2,<control columns...>``
Decay observations CSV header: ``distance_km,network_distance,delta_outcome``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import (
    BootstrapUnstableError,
    CollinearControlsError,
    IdentificationError,
    MissingYearError,
    ParamError,
    SampleTooSmallError,
    WindowError,
)

GRID_KAPPA_RANGE = (1e-7, 1.0)
GRID_KAPPA_POINTS = 60


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------


@dataclass
class PanelSeries:
    """Per-quarter network fragility with macro controls and a treatment break."""

    quarters: np.ndarray
    lambda2: np.ndarray
    controls: dict[str, np.ndarray]
    crisis_quarter: int

    def __post_init__(self):
        self.quarters = np.asarray(self.quarters, dtype=int)
        self.lambda2 = np.asarray(self.lambda2, dtype=float)
        if self.quarters.ndim != 1 or self.lambda2.shape != self.quarters.shape:
            raise ParamError("quarters and lambda2 must be vectors of equal length")
        if np.any(np.diff(self.quarters) <= 0):
            raise ParamError("quarters must be strictly increasing")
        if np.any(~np.isfinite(self.lambda2)):
            raise ParamError("lambda2 series has gaps")
        self.controls = {k: np.asarray(v, dtype=float) for k, v in self.controls.items()}
        for name, series in self.controls.items():
            if series.shape != self.quarters.shape:
                raise ParamError(f"control {name!r} length mismatch")
            if np.any(~np.isfinite(series)):
                raise ParamError(f"control {name!r} has gaps")

    @property
    def n_quarters(self) -> int:
        return self.quarters.size


@dataclass
class InstitutionPanel:
    """Per-institution outcome series used by the naive DID comparator."""

    institutions: tuple[str, ...]
    quarters: np.ndarray
    outcomes: np.ndarray  # shape (n_institutions, n_quarters)
    crisis_quarter: int

    def __post_init__(self):
        self.quarters = np.asarray(self.quarters, dtype=int)
        self.outcomes = np.asarray(self.outcomes, dtype=float)
        if self.outcomes.shape != (len(self.institutions), self.quarters.size):
            raise ParamError("outcomes must be (n_institutions, n_quarters)")


@dataclass
class DecayData:
    """Pairwise observations for the spatial-decay regression."""

    distance_km: np.ndarray
    network_distance: np.ndarray
    delta_outcome: np.ndarray

    def __post_init__(self):
        self.distance_km = np.asarray(self.distance_km, dtype=float)
        self.network_distance = np.asarray(self.network_distance, dtype=float)
        self.delta_outcome = np.asarray(self.delta_outcome, dtype=float)
        n = self.distance_km.size
        if self.network_distance.size != n or self.delta_outcome.size != n:
            raise ParamError("decay observation columns must have equal length")

    @property
    def n_obs(self) -> int:
        return self.distance_km.size


@dataclass(frozen=True)
class EstimateReport:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    ci_low: dict[str, float]
    ci_high: dict[str, float]
    r_squared: float
    n_obs: int
    bootstrap_reps: int
    seed: int
    f_stat: float | None = None
    f_pvalue: float | None = None
    pvalues: dict[str, float] | None = None

    def significant(self, name: str, level: float = 0.05) -> bool:
        """Wild-bootstrap p-value under ``level`` when available, else the
        95% percentile CI excluding zero."""
        if self.pvalues is not None and name in self.pvalues:
            return self.pvalues[name] < level
        return not (self.ci_low[name] <= 0.0 <= self.ci_high[name])

    def to_dict(self) -> dict:
        out = {
            "coefficients": dict(self.coefficients),
            "std_errors": dict(self.std_errors),
            "ci_low": dict(self.ci_low),
            "ci_high": dict(self.ci_high),
            "r_squared": self.r_squared,
            "n_obs": self.n_obs,
            "bootstrap_reps": self.bootstrap_reps,
            "seed": self.seed,
        }
        if self.f_stat is not None:
            out["f_stat"] = self.f_stat
            out["f_pvalue"] = self.f_pvalue
        if self.pvalues is not None:
            out["pvalues"] = dict(self.pvalues)
        return out


@dataclass(frozen=True)
class PretrendsReport:
    f_stat: float
    p_value: float
    df_num: int
    df_den: int
    lead_coefficients: dict[int, float]
    bootstrap_pvalue: float | None
    n_obs: int

    def to_dict(self) -> dict:
        return {
            "f_stat": self.f_stat,
            "p_value": self.p_value,
            "df_num": self.df_num,
            "df_den": self.df_den,
            "lead_coefficients": {str(k): v for k, v in self.lead_coefficients.items()},
            "bootstrap_pvalue": self.bootstrap_pvalue,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    beta: float
    kappa: float
    gamma_net: float
    kappa_ci: tuple[float, float]
    d_star: float
    r_squared: float
    identified: bool
    n_obs: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "kappa": self.kappa,
            "gamma_net": self.gamma_net,
            "kappa_ci": list(self.kappa_ci),
            "d_star": self.d_star,
            "r_squared": self.r_squared,
            "identified": self.identified,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class BootstrapResult:
    """Sorted bootstrap estimates with 95% percentile bounds."""

    estimates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_failed: int
    n_requested: int


# ---------------------------------------------------------------------------
# OLS plumbing
# ---------------------------------------------------------------------------


def _check_full_rank(X: np.ndarray, names: Sequence[str]) -> None:
    rank = np.linalg.matrix_rank(X)
    if rank == X.shape[1]:
        return
    offending = []
    current = 0
    for j in range(X.shape[1]):
        new_rank = np.linalg.matrix_rank(X[:, : j + 1])
        if new_rank == current:
            offending.append(names[j])
        current = new_rank
    raise CollinearControlsError(
        f"design matrix rank deficient; offending columns: {', '.join(offending)}",
        columns=tuple(offending),
    )


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Least squares fit returning (beta, rss, r_squared)."""
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if tss == 0.0 else 1.0 - rss / tss
    return beta, rss, r2


def _select_controls(panel: PanelSeries, controls: Sequence[str] | None) -> list[str]:
    if controls is None:
        return list(panel.controls)
    for name in controls:
        if name not in panel.controls:
            raise ParamError(f"unknown control {name!r}")
    return list(controls)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------


def replication_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Splitting rule for per-replication randomness: hash(seed, replication_index)."""
    return np.random.SeedSequence((int(seed), int(index)))


def _wild_pvalue(X: np.ndarray, y: np.ndarray, col: int, reps: int, seed: int) -> float | None:
    """Two-sided wild-bootstrap p-value for one coefficient under its null.

    Residuals from the restricted fit (column dropped) get Rademacher sign
    flips; the design stays fixed, which keeps size close to nominal even
    when one side of a break indicator holds only a few quarters.
    """
    if reps < 30:
        return None
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    stat_obs = abs(float(beta[col]))
    keep = [k for k in range(X.shape[1]) if k != col]
    beta_r, *_ = np.linalg.lstsq(X[:, keep], y, rcond=None)
    fitted = X[:, keep] @ beta_r
    resid = y - fitted
    exceed = 0
    for b in range(reps):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0x71AD, int(b))))
        signs = rng.integers(0, 2, size=y.size) * 2 - 1
        beta_s, *_ = np.linalg.lstsq(X, fitted + signs * resid, rcond=None)
        if abs(float(beta_s[col])) >= stat_obs:
            exceed += 1
    return (1 + exceed) / (reps + 1)


def block_bootstrap(
    estimator: Callable[[np.ndarray], float | np.ndarray],
    n_quarters: int,
    reps: int,
    seed: int,
) -> BootstrapResult:
    """Resample whole quarters with replacement and re-estimate.

    ``estimator`` receives an index vector into the quarter axis and returns a
    scalar or coefficient vector. Replications that raise are dropped and
    counted; more than 10% failures aborts with BootstrapUnstableError. Fully
    deterministic given ``seed`` via :func:`replication_seed`.
    """
    if reps < 1:
        raise ParamError("reps must be positive")
    rows: list[np.ndarray] = []
    failed = 0
    for b in range(reps):
        rng = np.random.default_rng(replication_seed(seed, b))
        idx = rng.integers(0, n_quarters, size=n_quarters)
        try:
            est = estimator(idx)
        except Exception:
            failed += 1
            continue
        rows.append(np.atleast_1d(np.asarray(est, dtype=float)))
    if failed > 0.10 * reps:
        raise BootstrapUnstableError(f"{failed} of {reps} bootstrap replications failed")
    if not rows:
        raise BootstrapUnstableError("all bootstrap replications failed")
    estimates = np.sort(np.vstack(rows), axis=0)
    ci_low = np.percentile(estimates, 2.5, axis=0)
    ci_high = np.percentile(estimates, 97.5, axis=0)
    return BootstrapResult(
        estimates=estimates, ci_low=ci_low, ci_high=ci_high, n_failed=failed, n_requested=reps
    )


def _bootstrap_report(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    r2: float,
    point: np.ndarray,
    reps: int,
    seed: int,
    strata: Sequence[np.ndarray] | None = None,
) -> EstimateReport:
    """Percentile-bootstrap report around an OLS point estimate.

    Default scheme resamples whole quarters with replacement; passing
    ``strata`` (index groups) resamples within each group instead, which keeps
    sparse dummy columns populated.
    """

    def refit(idx: np.ndarray) -> np.ndarray:
        Xb, yb = X[idx], y[idx]
        if np.linalg.matrix_rank(Xb) < Xb.shape[1]:
            raise CollinearControlsError("rank-deficient bootstrap resample")
        beta, *_ = np.linalg.lstsq(Xb, yb, rcond=None)
        return beta

    if strata is None:
        boot = block_bootstrap(refit, X.shape[0], reps, seed)
    else:
        rows = []
        failed = 0
        for b in range(reps):
            rng = np.random.default_rng(replication_seed(seed, b))
            idx = np.concatenate([grp[rng.integers(0, grp.size, size=grp.size)] for grp in strata])
            try:
                rows.append(refit(idx))
            except Exception:
                failed += 1
        if failed > 0.10 * reps or not rows:
            raise BootstrapUnstableError(f"{failed} of {reps} bootstrap replications failed")
        est = np.sort(np.vstack(rows), axis=0)
        boot = BootstrapResult(
            estimates=est,
            ci_low=np.percentile(est, 2.5, axis=0),
            ci_high=np.percentile(est, 97.5, axis=0),
            n_failed=failed,
            n_requested=reps,
        )
    std = boot.estimates.std(axis=0, ddof=1) if boot.estimates.shape[0] > 1 else np.zeros(len(names))
    return EstimateReport(
        coefficients={n: float(b) for n, b in zip(names, point)},
        std_errors={n: float(s) for n, s in zip(names, std)},
        ci_low={n: float(v) for n, v in zip(names, boot.ci_low)},
        ci_high={n: float(v) for n, v in zip(names, boot.ci_high)},
        r_squared=r2,
        n_obs=X.shape[0],
        bootstrap_reps=reps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# DID family
# ---------------------------------------------------------------------------


def _did_design(
    panel: PanelSeries,
    sample: np.ndarray,
    post: np.ndarray,
    control_names: Sequence[str],
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    y = panel.lambda2[sample]
    cols = [np.ones(int(sample.sum())), post[sample].astype(float)]
    names = ["const", "post"]
    for name in control_names:
        cols.append(panel.controls[name][sample])
        names.append(name)
    return np.column_stack(cols), y, names


def spatial_did(
    panel: PanelSeries,
    controls: Sequence[str] | None = None,
    reps: int = 1000,
    seed: int = 0,
) -> EstimateReport:
    """Network-level DID: regress the fragility series on a post-break indicator
    plus controls, with quarter-resampling block-bootstrap inference.

    The break quarter itself is excluded from both periods.
    """
    control_names = _select_controls(panel, controls)
    sample = panel.quarters != panel.crisis_quarter
    post = panel.quarters > panel.crisis_quarter
    n_pre = int((panel.quarters < panel.crisis_quarter).sum())
    n_post = int(post.sum())
    if n_pre < 3 or n_post < 3:
        raise WindowError(f"need >= 3 quarters on each side of the break (have {n_pre} pre, {n_post} post)")
    X, y, names = _did_design(panel, sample, post, control_names)
    _check_full_rank(X, names)
    point, _, r2 = _ols(X, y)
    report = _bootstrap_report(X, y, names, r2, point, reps, seed)
    p_post = _wild_pvalue(X, y, names.index("post"), reps, seed)
    if p_post is not None:
        report = replace(report, pvalues={"post": p_post})
    return report


def event_study(
    panel: PanelSeries,
    window: tuple[int, int],
    controls: Sequence[str] | None = None,
    reps: int = 1000,
    seed: int = 0,
) -> EstimateReport:
    """Yearly dynamic treatment effects around the break.

    Years are four-quarter blocks relative to the break quarter; the year
    immediately before the break is the omitted base, reported as exactly
    zero. ``window`` gives (years before, years after). The report carries a
    joint F test over all non-base year coefficients.
    """
    before, after = window
    if before < 1 or after < 0:
        raise ParamError("window must cover at least one pre year")
    rel_year = np.floor_divide(panel.quarters - panel.crisis_quarter, 4)
    sample = (rel_year >= -before) & (rel_year <= after) & (panel.quarters != panel.crisis_quarter)
    if not sample.any():
        raise WindowError("window excludes every quarter")
    years = list(range(-before, after + 1))
    for s in years:
        if not np.any(rel_year[sample] == s):
            raise MissingYearError(f"no quarters in relative year {s}")
    control_names = _select_controls(panel, controls)
    y = panel.lambda2[sample]
    cols = [np.ones(int(sample.sum()))]
    names = ["const"]
    year_names = []
    for s in years:
        if s == -1:
            continue
        cols.append((rel_year[sample] == s).astype(float))
        name = f"year_{s}"
        names.append(name)
        year_names.append(name)
    for name in control_names:
        cols.append(panel.controls[name][sample])
        names.append(name)
    X = np.column_stack(cols)
    _check_full_rank(X, names)
    point, rss_u, r2 = _ols(X, y)
    f_stat, f_p = _joint_f(X, y, names, year_names, rss_u)
    # resample quarters within year cells so no yearly dummy column collapses
    strata = [np.flatnonzero(rel_year[sample] == s) for s in years]
    report = _bootstrap_report(X, y, names, r2, point, reps, seed, strata=strata)
    coeffs = dict(report.coefficients)
    coeffs["year_-1"] = 0.0
    std = dict(report.std_errors)
    std["year_-1"] = 0.0
    lo = dict(report.ci_low)
    lo["year_-1"] = 0.0
    hi = dict(report.ci_high)
    hi["year_-1"] = 0.0
    return EstimateReport(
        coefficients=coeffs,
        std_errors=std,
        ci_low=lo,
        ci_high=hi,
        r_squared=report.r_squared,
        n_obs=report.n_obs,
        bootstrap_reps=reps,
        seed=seed,
        f_stat=f_stat,
        f_pvalue=f_p,
    )


def _joint_f(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    tested: Sequence[str],
    rss_unrestricted: float,
) -> tuple[float, float]:
    keep = [k for k, n in enumerate(names) if n not in set(tested)]
    _, rss_r, _ = _ols(X[:, keep], y)
    q = len(tested)
    dof = X.shape[0] - X.shape[1]
    if dof <= 0:
        raise ParamError("not enough observations for the joint test")
    if rss_unrestricted <= 0:
        return math.inf if rss_r > 1e-12 else 0.0, 0.0 if rss_r > 1e-12 else 1.0
    f_stat = ((rss_r - rss_unrestricted) / q) / (rss_unrestricted / dof)
    f_stat = max(f_stat, 0.0)
    return float(f_stat), float(stats.f.sf(f_stat, q, dof))


def pretrends_test(
    panel: PanelSeries,
    leads: Sequence[int],
    controls: Sequence[str] | None = None,
    reps: int = 200,
    seed: int = 0,
) -> PretrendsReport:
    """Joint test that lead-quarter indicators are zero before the break.

    ``leads`` counts quarters before the break (6 means the quarter six before
    it). The classical homoskedastic F is reported together with a
    bootstrap-covariance Wald p-value.
    """
    if not leads:
        raise ParamError("need at least one lead")
    lead_quarters = []
    qset = set(panel.quarters.tolist())
    for lead in leads:
        if lead <= 0:
            raise IndexError(f"lead {lead} must be a positive quarters-before count")
        q = panel.crisis_quarter - int(lead)
        if q not in qset:
            raise IndexError(f"lead quarter {q} not in panel")
        lead_quarters.append(q)
    control_names = _select_controls(panel, controls)
    sample = panel.quarters != panel.crisis_quarter
    post = panel.quarters > panel.crisis_quarter
    X, y, names = _did_design(panel, sample, post, control_names)
    lead_names = []
    for q in lead_quarters:
        X = np.column_stack([X, (panel.quarters[sample] == q).astype(float)])
        name = f"lead_{q}"
        names.append(name)
        lead_names.append(name)
    _check_full_rank(X, names)
    point, rss_u, _ = _ols(X, y)
    f_stat, p_value = _joint_f(X, y, names, lead_names, rss_u)

    # wild bootstrap under the null: the design stays fixed (lead dummies are
    # single-quarter indicators, so resampling quarters would zero them out)
    boot_p: float | None = None
    if reps >= 30:
        keep = [k for k, n in enumerate(names) if n not in set(lead_names)]
        beta_r, *_ = np.linalg.lstsq(X[:, keep], y, rcond=None)
        fitted_r = X[:, keep] @ beta_r
        resid_r = y - fitted_r
        exceed = 0
        for b in range(reps):
            rng = np.random.default_rng(replication_seed(seed, b))
            signs = rng.integers(0, 2, size=y.size) * 2 - 1
            y_star = fitted_r + signs * resid_r
            _, rss_u_star, _ = _ols(X, y_star)
            f_star, _ = _joint_f(X, y_star, names, lead_names, rss_u_star)
            if f_star >= f_stat:
                exceed += 1
        boot_p = (1 + exceed) / (reps + 1)

    return PretrendsReport(
        f_stat=f_stat,
        p_value=p_value,
        df_num=len(lead_names),
        df_den=X.shape[0] - X.shape[1],
        lead_coefficients={int(q): float(point[names.index(f"lead_{q}")]) for q in lead_quarters},
        bootstrap_pvalue=boot_p,
        n_obs=X.shape[0],
    )


def placebo_test(
    panel: PanelSeries,
    placebo_dates: Sequence[int],
    controls: Sequence[str] | None = None,
    reps: int = 1000,
    seed: int = 0,
) -> dict[int, EstimateReport]:
    """Re-estimate the DID with the break moved to each placebo date.

    Pre-break placebos are estimated on data strictly before the true break
    (post-break placebos strictly after it) so the real break cannot leak into
    the placebo coefficient; the placebo quarter itself is excluded.
    """
    control_names = _select_controls(panel, controls)
    results: dict[int, EstimateReport] = {}
    for date in placebo_dates:
        date = int(date)
        if date == panel.crisis_quarter:
            results[date] = spatial_did(panel, controls=control_names, reps=reps, seed=seed)
            continue
        if date < panel.crisis_quarter:
            window = panel.quarters < panel.crisis_quarter
        else:
            window = panel.quarters > panel.crisis_quarter
        sample = window & (panel.quarters != date)
        post = panel.quarters > date
        n_pre = int((sample & ~post).sum())
        n_post = int((sample & post).sum())
        if n_pre < 3 or n_post < 3:
            raise WindowError(
                f"placebo {date}: need >= 3 quarters each side inside the window (have {n_pre}/{n_post})"
            )
        X, y, names = _did_design(panel, sample, post, control_names)
        _check_full_rank(X, names)
        point, _, r2 = _ols(X, y)
        result = _bootstrap_report(X, y, names, r2, point, reps, seed)
        p_post = _wild_pvalue(X, y, names.index("post"), reps, seed)
        if p_post is not None:
            result = replace(result, pvalues={"post": p_post})
        results[date] = result
    return results


def naive_did(outcomes: InstitutionPanel, reps: int = 1000, seed: int = 0) -> EstimateReport:
    """Institution-level two-period DID that ignores network structure.

    Pools all institution-quarter observations as independent units and
    bootstraps over institutions. Spillovers load onto the post indicator,
    which is exactly the bias this comparator is meant to exhibit.
    """
    n_inst = len(outcomes.institutions)
    if n_inst < 10:
        raise SampleTooSmallError(f"need >= 10 institutions, have {n_inst}")
    keep = outcomes.quarters != outcomes.crisis_quarter
    quarters = outcomes.quarters[keep]
    Y = outcomes.outcomes[:, keep]
    post = (quarters > outcomes.crisis_quarter).astype(float)

    def pooled_beta(inst_idx: np.ndarray) -> np.ndarray:
        yb = Y[inst_idx].ravel()
        postb = np.tile(post, len(inst_idx))
        Xb = np.column_stack([np.ones(yb.size), postb])
        beta, *_ = np.linalg.lstsq(Xb, yb, rcond=None)
        return beta

    point = pooled_beta(np.arange(n_inst))
    X_full = np.column_stack([np.ones(Y.size), np.tile(post, n_inst)])
    _, _, r2 = _ols(X_full, Y.ravel())

    rows = []
    failed = 0
    for b in range(reps):
        rng = np.random.default_rng(replication_seed(seed, b))
        idx = rng.integers(0, n_inst, size=n_inst)
        try:
            rows.append(pooled_beta(idx))
        except Exception:
            failed += 1
    if failed > 0.10 * reps:
        raise BootstrapUnstableError(f"{failed} of {reps} bootstrap replications failed")
    boot = np.sort(np.vstack(rows), axis=0)
    names = ["const", "post"]
    std = boot.std(axis=0, ddof=1)
    return EstimateReport(
        coefficients={n: float(v) for n, v in zip(names, point)},
        std_errors={n: float(v) for n, v in zip(names, std)},
        ci_low={n: float(v) for n, v in zip(names, np.percentile(boot, 2.5, axis=0))},
        ci_high={n: float(v) for n, v in zip(names, np.percentile(boot, 97.5, axis=0))},
        r_squared=r2,
        n_obs=Y.size,
        bootstrap_reps=reps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# spatial decay
# ---------------------------------------------------------------------------


def _decay_sse(kappa: float, d: np.ndarray, hops: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    X = np.column_stack([np.ones(d.size), np.exp(-kappa * d), hops])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(resid @ resid), beta


def _profile_fit(d: np.ndarray, hops: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Grid-then-golden-section profile search over kappa.

    The model is linear in (alpha, beta, gamma) given kappa, so each kappa is
    scored by its linear-least-squares residual. Returns the best evaluated
    point, guaranteeing the objective never regresses past any grid value.
    Also returns the grid SSE profile for flatness diagnostics.
    """
    grid = np.geomspace(*GRID_KAPPA_RANGE, GRID_KAPPA_POINTS)
    profile = np.empty(grid.size)
    best_k, best_sse, best_beta = grid[0], math.inf, None
    for i, k in enumerate(grid):
        sse, beta = _decay_sse(k, d, hops, y)
        profile[i] = sse
        if sse < best_sse:
            best_k, best_sse, best_beta = k, sse, beta
    i = int(np.argmin(profile))
    lo = math.log(grid[max(0, i - 1)])
    hi = math.log(grid[min(grid.size - 1, i + 1)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, beta_c = _decay_sse(math.exp(c), d, hops, y)
    fe, beta_e = _decay_sse(math.exp(e), d, hops, y)
    while b - a > 1e-4:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc, beta_c = _decay_sse(math.exp(c), d, hops, y)
            if fc < best_sse:
                best_k, best_sse, best_beta = math.exp(c), fc, beta_c
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe, beta_e = _decay_sse(math.exp(e), d, hops, y)
            if fe < best_sse:
                best_k, best_sse, best_beta = math.exp(e), fe, beta_e
    return best_k, best_beta, best_sse, profile


def fit_spatial_decay(data: DecayData, reps: int = 200, seed: int = 0) -> DecayFit:
    """Fit delta_outcome = alpha + beta * exp(-kappa * distance) + gamma * hops.

    Profile strategy: 60-point log grid over kappa in [1e-7, 1], linear least
    squares at each point, golden-section refinement of the best bracket to
    1e-4 relative width. The boundary distance d* is ln(100) / kappa. The
    kappa confidence interval comes from a bootstrap over observations; a flat
    profile (no decay signal) is flagged and reported with the CI spanning the
    whole grid.
    """
    d, hops, y = data.distance_km, data.network_distance, data.delta_outcome
    if data.n_obs < 10:
        raise IdentificationError(f"need >= 10 observations, have {data.n_obs}")
    if np.any(d <= 0):
        raise IdentificationError("distances must be positive")
    if d.max() / d.min() < 10.0:
        raise IdentificationError("distances must span at least one decade")
    if np.ptp(d) == 0.0:
        raise IdentificationError("no distance variation")

    kappa, beta_vec, sse, profile = _profile_fit(d, hops, y)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if tss == 0.0 else 1.0 - sse / tss
    flat = (profile.max() - profile.min()) <= 1e-12 * max(tss, 1e-300)

    grid_lo, grid_hi = GRID_KAPPA_RANGE
    if flat:
        kappa_ci = (grid_lo, grid_hi)
    else:
        draws = []
        failed = 0
        for b in range(reps):
            rng = np.random.default_rng(replication_seed(seed, b))
            idx = rng.integers(0, data.n_obs, size=data.n_obs)
            try:
                k_b, _, _, _ = _profile_fit(d[idx], hops[idx], y[idx])
                draws.append(k_b)
            except Exception:
                failed += 1
        if failed > 0.10 * reps or not draws:
            raise BootstrapUnstableError(f"{failed} of {reps} decay bootstrap replications failed")
        kappa_ci = (float(np.percentile(draws, 2.5)), float(np.percentile(draws, 97.5)))

    return DecayFit(
        alpha=float(beta_vec[0]),
        beta=float(beta_vec[1]),
        kappa=float(kappa),
        gamma_net=float(beta_vec[2]),
        kappa_ci=kappa_ci,
        d_star=math.log(100.0) / kappa,
        r_squared=r2,
        identified=not flat,
        n_obs=data.n_obs,
    )


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def read_panel_csv(path: str | Path, crisis_quarter: int) -> PanelSeries:
    df = pd.read_csv(path, float_precision="round_trip")
    if "quarter" not in df.columns or "lambda2" not in df.columns:
        raise ParamError("panel CSV needs 'quarter' and 'lambda2' columns")
    df = df.sort_values("quarter")
    controls = {c: df[c].to_numpy(dtype=float) for c in df.columns if c not in ("quarter", "lambda2")}
    return PanelSeries(
        quarters=df["quarter"].to_numpy(dtype=int),
        lambda2=df["lambda2"].to_numpy(dtype=float),
        controls=controls,
        crisis_quarter=crisis_quarter,
    )


def write_panel_csv(panel: PanelSeries, path: str | Path) -> None:
    df = pd.DataFrame({"quarter": panel.quarters, "lambda2": panel.lambda2})
    for name, series in panel.controls.items():
        df[name] = series
    df.to_csv(path, index=False)


def read_outcomes_csv(path: str | Path, crisis_quarter: int) -> InstitutionPanel:
    df = pd.read_csv(path, dtype={"institution": str}, float_precision="round_trip")
    for col in ("quarter", "institution", "outcome"):
        if col not in df.columns:
            raise ParamError(f"outcomes CSV missing column {col!r}")
    wide = df.pivot(index="institution", columns="quarter", values="outcome").sort_index()
    if wide.isna().any().any():
        raise ParamError("outcomes CSV has gaps")
    return InstitutionPanel(
        institutions=tuple(wide.index),
        quarters=wide.columns.to_numpy(dtype=int),
        outcomes=wide.to_numpy(dtype=float),
        crisis_quarter=crisis_quarter,
    )


def write_outcomes_csv(outcomes: InstitutionPanel, path: str | Path) -> None:
    rows = [
        (int(q), inst, float(outcomes.outcomes[i, k]))
        for i, inst in enumerate(outcomes.institutions)
        for k, q in enumerate(outcomes.quarters)
    ]
    pd.DataFrame(rows, columns=["quarter", "institution", "outcome"]).to_csv(path, index=False)


def read_decay_csv(path: str | Path) -> DecayData:
    df = pd.read_csv(path, float_precision="round_trip")
    for col in ("distance_km", "network_distance", "delta_outcome"):
        if col not in df.columns:
            raise ParamError(f"decay CSV missing column {col!r}")
    return DecayData(
        distance_km=df["distance_km"].to_numpy(dtype=float),
        network_distance=df["network_distance"].to_numpy(dtype=float),
        delta_outcome=df["delta_outcome"].to_numpy(dtype=float),
    )


def write_decay_csv(data: DecayData, path: str | Path) -> None:
    pd.DataFrame(
        {
            "distance_km": data.distance_km,
            "network_distance": data.network_distance,
            "delta_outcome": data.delta_outcome,
        }
    ).to_csv(path, index=False)
