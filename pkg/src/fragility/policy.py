"""Spectral policy counterfactuals: targeted capital surcharges, first-order
connectivity-reduction approximations, and resolution-priority rankings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParamError, StaleSpectrumError
from .exposures import Institution
from .graph import WeightedGraph, _component_labels, graph_from_adjacency
from .spectrum import SpectrumResult, algebraic_connectivity

POLICY_MODES = ("uniform", "network_targeted", "size_based", "leverage_based")

#: assets divisor making the surcharge term dimensionless (balance sheets in currency units)
ASSETS_UNIT = 1e12


@dataclass(frozen=True)
class CapitalPolicy:
    """Capital requirement schedule K_i = k0 + alpha * score_i * assets_i.

    ``network_targeted`` scores by squared Fiedler-vector components;
    ``size_based`` and ``leverage_based`` replace the score with its uniform
    average 1/n over their targeted set so alpha is comparable across modes;
    ``uniform`` scales everyone to k0 * (1 + alpha). ``top_m`` restricts
    targeting to the m highest-ranked institutions (required for size_based).
    """

    mode: str
    k0: float = 0.08
    alpha: float = 0.0
    top_m: int | None = None
    leverage_threshold: float = 15.0
    assets_unit: float = ASSETS_UNIT

    def __post_init__(self):
        if self.mode not in POLICY_MODES:
            raise ParamError(f"unknown policy mode {self.mode!r}; choose from {POLICY_MODES}")
        if not 0 < self.k0 < 1:
            raise ParamError("k0 must lie in (0, 1)")
        if self.alpha < 0:
            raise ParamError("alpha must be nonnegative")
        if self.mode == "size_based" and self.top_m is None:
            raise ParamError("size_based mode requires top_m")
        if self.top_m is not None and self.top_m < 1:
            raise ParamError("top_m must be positive")


@dataclass(frozen=True)
class PolicyOutcome:
    requirements: dict[str, float]
    lambda2_before: float
    lambda2_after: float
    reduction_pct: float
    banks_affected: int


@dataclass(frozen=True)
class ResolutionEntry:
    institution: str
    fiedler_sq: float
    delta_lambda2: float
    reduction_pct: float
    disconnects: bool


def _check_spectrum(g: WeightedGraph, spectrum: SpectrumResult) -> None:
    if spectrum.fiedler.shape != (g.n,):
        raise StaleSpectrumError(f"spectrum is for n={spectrum.fiedler.shape[0]}, graph has n={g.n}")
    if spectrum.disconnected:
        return
    v = spectrum.fiedler
    rayleigh = float(v @ (g.laplacian @ v))
    scale = max(1.0, abs(spectrum.lambda2))
    if abs(rayleigh - spectrum.lambda2) > 1e-6 * scale:
        raise StaleSpectrumError("spectrum does not match graph (Rayleigh quotient check failed)")


def _aligned_institutions(g: WeightedGraph, institutions: Sequence[Institution]) -> list[Institution]:
    by_id = {inst.id: inst for inst in institutions}
    try:
        return [by_id[node] for node in g.node_ids]
    except KeyError as exc:
        raise ParamError(f"no metadata for institution {exc.args[0]!r}") from None


def apply_capital_policy(
    g: WeightedGraph,
    institutions: Sequence[Institution],
    spectrum: SpectrumResult,
    policy: CapitalPolicy,
) -> PolicyOutcome:
    """Counterfactual connectivity under a capital requirement schedule.

    Surcharged institutions shed exposure proportionally: every edge (i, j) is
    scaled by sqrt(k0/K_i * k0/K_j), the geometric mean of the endpoint
    shrink factors, and lambda-2 is recomputed exactly on the result. This
    exposure response is a modeling choice, not an estimated elasticity.
    """
    _check_spectrum(g, spectrum)
    meta = _aligned_institutions(g, institutions)
    n = g.n
    assets = np.array([inst.assets for inst in meta]) / policy.assets_unit
    v_sq = spectrum.fiedler**2

    surcharge = np.zeros(n)
    if policy.mode == "uniform":
        surcharge[:] = policy.k0 * policy.alpha
    elif policy.mode == "network_targeted":
        score = v_sq
        targeted = np.ones(n, dtype=bool)
        if policy.top_m is not None:
            order = np.argsort(-score, kind="stable")
            targeted = np.zeros(n, dtype=bool)
            targeted[order[: policy.top_m]] = True
        surcharge[targeted] = policy.alpha * score[targeted] * assets[targeted]
    elif policy.mode == "size_based":
        order = np.argsort(-assets, kind="stable")
        targeted = np.zeros(n, dtype=bool)
        targeted[order[: policy.top_m]] = True
        surcharge[targeted] = policy.alpha * (1.0 / n) * assets[targeted]
    else:  # leverage_based
        leverage = np.array([inst.leverage for inst in meta])
        targeted = leverage > policy.leverage_threshold
        surcharge[targeted] = policy.alpha * (1.0 / n) * assets[targeted]

    requirements = policy.k0 + surcharge
    shrink = policy.k0 / requirements
    scale = np.sqrt(np.outer(shrink, shrink))
    g_cf = graph_from_adjacency(g.adjacency * scale, node_ids=g.node_ids, total_exposure=g.total_exposure * scale)
    lambda2_after = algebraic_connectivity(g_cf).lambda2
    before = spectrum.lambda2
    reduction = 100.0 * (1.0 - lambda2_after / before) if before > 0 else 0.0
    return PolicyOutcome(
        requirements={node: float(k) for node, k in zip(g.node_ids, requirements)},
        lambda2_before=before,
        lambda2_after=lambda2_after,
        reduction_pct=reduction,
        banks_affected=int(np.count_nonzero(surcharge > 0)),
    )


def lambda2_reduction_approx(spectrum: SpectrumResult, targeted: Sequence[int]) -> float:
    """First-order connectivity reduction from treating a node set:
    lambda2 times the targeted mass of the squared Fiedler vector."""
    targeted = list(targeted)
    if not targeted:
        return 0.0
    n = spectrum.fiedler.size
    for k in targeted:
        if not 0 <= k < n:
            raise ParamError(f"node index {k} out of range")
    if len(set(targeted)) != len(targeted):
        raise ParamError("targeted set has duplicates")
    return float(spectrum.lambda2 * (spectrum.fiedler[targeted] ** 2).sum())


def resolution_ranking(g: WeightedGraph, spectrum: SpectrumResult) -> list[ResolutionEntry]:
    """Rank institutions by squared Fiedler centrality against the exact
    eigenvalue change from deleting each one's row and column.

    Removal deletes row and column i of the Laplacian and recomputes the
    second-smallest eigenvalue of the result. When removal disconnects the
    remaining network the entry is flagged and the comparison falls back to
    lambda-2 of the largest surviving component. Ties break by institution id
    ascending.
    """
    if g.n < 3:
        raise ParamError("need at least three nodes")
    _check_spectrum(g, spectrum)
    base = spectrum.lambda2
    v_sq = spectrum.fiedler**2
    entries = []
    for i, node in enumerate(g.node_ids):
        keep = np.ones(g.n, dtype=bool)
        keep[i] = False
        sub = g.adjacency[np.ix_(keep, keep)]
        ids = tuple(nid for k, nid in enumerate(g.node_ids) if keep[k])
        ncomp, _ = _component_labels(sub)
        disconnects = ncomp > 1
        if disconnects:
            lam = _largest_component_lambda2(graph_from_adjacency(sub, node_ids=ids))
        else:
            lam = float(np.linalg.eigvalsh(g.laplacian[np.ix_(keep, keep)])[1])
        entries.append(
            ResolutionEntry(
                institution=node,
                fiedler_sq=float(v_sq[i]),
                delta_lambda2=float(lam - base),
                reduction_pct=float(100.0 * (1.0 - lam / base)) if base > 0 else 0.0,
                disconnects=disconnects,
            )
        )
    entries.sort(key=lambda e: (-e.fiedler_sq, e.institution))
    return entries


def _largest_component_lambda2(g: WeightedGraph) -> float:
    ncomp, labels = _component_labels(g.adjacency)
    sizes = np.bincount(labels)
    keep = labels == int(np.argmax(sizes))
    if int(keep.sum()) < 2:
        return 0.0
    sub = g.adjacency[np.ix_(keep, keep)]
    ids = tuple(nid for k, nid in enumerate(g.node_ids) if keep[k])
    return algebraic_connectivity(graph_from_adjacency(sub, node_ids=ids)).lambda2
