"""Synthetic networks and panels with known ground truth.

Every generator is deterministic given its seed, and emits the same data
structures (and, via the CSV helpers, the same file formats) consumed by the
graph, imputation, and estimation layers, so theoretical predictions can be
exercised end to end at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ParamError
from .estimators import DecayData, InstitutionPanel, PanelSeries
from .exposures import ExposurePanel, ExposureRecord, Institution
from .graph import WeightedGraph, graph_from_adjacency

TOPOLOGIES = ("ring_lattice", "erdos_renyi", "core_periphery")

_COUNTRIES = ("US", "JP", "GB", "FR", "DE", "CH", "CA", "NL", "ES", "IT")


def make_regular(n: int, degree: int, weight: float) -> WeightedGraph:
    """Circulant ring lattice: each node tied to degree/2 neighbors per side.

    For degree 2 (a cycle) the algebraic connectivity has the closed form
    2 * weight * (1 - cos(2 pi / n)).
    """
    if degree % 2 != 0:
        raise ParamError("degree must be even")
    if not 0 < degree < n:
        raise ParamError("need 0 < degree < n")
    if weight <= 0:
        raise ParamError("weight must be positive")
    A = np.zeros((n, n))
    for m in range(1, degree // 2 + 1):
        idx = np.arange(n)
        A[idx, (idx + m) % n] = weight
        A[(idx + m) % n, idx] = weight
    return graph_from_adjacency(A)


def ring_lattice_lambda2(n: int, degree: int, weight: float) -> float:
    """Closed-form algebraic connectivity of the circulant ring lattice."""
    if degree % 2 != 0 or not 0 < degree < n:
        raise ParamError("need even degree with 0 < degree < n")
    k = np.arange(1, n)
    m = np.arange(1, degree // 2 + 1)
    eigen = weight * (2.0 * (1.0 - np.cos(2.0 * np.pi * np.outer(k, m) / n))).sum(axis=1)
    return float(eigen.min())


@dataclass(frozen=True)
class ConsolidationScenario:
    """Before/after network sizes and average bilateral intensities.

    ``w0``/``w1`` are mean exposures per ordered node pair; the generated
    graphs hit them exactly (weights rescaled after the topology draw).
    """

    n0: int
    n1: int
    w0: float
    w1: float
    topology: str = "ring_lattice"
    topology_param: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n1 > self.n0:
            raise ParamError("consolidation requires n1 <= n0")
        if min(self.n0, self.n1) < 4:
            raise ParamError("need at least 4 nodes")
        if self.w0 <= 0 or self.w1 <= 0:
            raise ParamError("intensities must be positive")
        if self.topology not in TOPOLOGIES:
            raise ParamError(f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}")

    def predicted_ratio(self) -> float:
        """lambda2(after) / lambda2(before) under the w/n scaling law."""
        return (self.n0 / self.n1) * (self.w1 / self.w0)


def _scaled_topology(n: int, wbar: float, topology: str, param: float | None, rng: np.random.Generator) -> WeightedGraph:
    if topology == "ring_lattice":
        degree = 2 if param is None else int(param)
        if degree % 2 != 0 or not 0 < degree < n:
            raise ParamError(f"ring_lattice degree {degree} invalid for n={n}")
        A = np.zeros((n, n))
        idx = np.arange(n)
        for m in range(1, degree // 2 + 1):
            A[idx, (idx + m) % n] = 1.0
            A[(idx + m) % n, idx] = 1.0
    elif topology == "erdos_renyi":
        p = 0.1 if param is None else float(param)
        if not 0 < p <= 1:
            raise ParamError("erdos_renyi edge probability must lie in (0, 1]")
        upper = np.triu(rng.random((n, n)) < p, k=1).astype(float)
        A = upper + upper.T
        idx = np.arange(n)
        A[idx, (idx + 1) % n] = 1.0  # cycle backbone keeps the draw connected
        A[(idx + 1) % n, idx] = 1.0
    else:  # core_periphery
        frac = 0.25 if param is None else float(param)
        core = max(2, int(round(frac * n)))
        A = np.zeros((n, n))
        A[:core, :core] = 1.0
        np.fill_diagonal(A, 0.0)
        for j in range(core, n):
            hub = int(rng.integers(0, core))
            A[j, hub] = A[hub, j] = 1.0
    total = A.sum()
    if total <= 0:
        raise ParamError("degenerate topology draw")
    A *= wbar * n * (n - 1) / total
    return graph_from_adjacency(A)


def consolidation_pair(scenario: ConsolidationScenario) -> tuple[WeightedGraph, WeightedGraph]:
    """Draw before/after graphs matching the scenario's (n, mean intensity) pairs."""
    rng0 = np.random.default_rng(np.random.SeedSequence((scenario.seed, 0)))
    rng1 = np.random.default_rng(np.random.SeedSequence((scenario.seed, 1)))
    g0 = _scaled_topology(scenario.n0, scenario.w0, scenario.topology, scenario.topology_param, rng0)
    g1 = _scaled_topology(scenario.n1, scenario.w1, scenario.topology, scenario.topology_param, rng1)
    return g0, g1


# ---------------------------------------------------------------------------
# crisis panels
# ---------------------------------------------------------------------------

DEFAULT_CONTROLS_MODEL: Mapping[str, float] = {
    "gdp_growth": -140.0,
    "vix": 40.0,
    "sovereign_debt": 900.0,
}


@dataclass(frozen=True)
class CrisisPanelSpec:
    """Forward model for a quarterly fragility panel with a treatment break.

    The network-level series gets a ``direct_effect`` step strictly after the
    break quarter; institution outcomes additionally receive
    ``spillover_per_link`` per network neighbor, which is exactly the
    double-counting that biases the naive institution-level estimator upward.
    """

    T: int = 40
    crisis_quarter: int = 20
    direct_effect: float = 1176.0
    spillover_per_link: float = 0.0
    noise_sigma: float = 50.0
    trend_slope: float = 0.0
    level: float = 1700.0
    controls_model: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_CONTROLS_MODEL))
    n_institutions: int = 40
    mean_degree: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.T < 12:
            raise ParamError("need T >= 12 quarters")
        if not 3 <= self.crisis_quarter <= self.T - 4:
            raise ParamError("crisis quarter must be interior (>= 3 quarters on each side)")
        if self.noise_sigma < 0:
            raise ParamError("noise_sigma must be nonnegative")
        if self.n_institutions < 1 or self.mean_degree < 0:
            raise ParamError("invalid institution block")


@dataclass(frozen=True)
class CrisisPanelTruth:
    direct_effect: float
    spillover_per_link: float
    mean_degree: float
    naive_effect: float


@dataclass(frozen=True)
class CrisisPanelResult:
    panel: PanelSeries
    outcomes: InstitutionPanel
    truth: CrisisPanelTruth


def _ar1(rng: np.random.Generator, T: int, mean: float, rho: float, sigma: float) -> np.ndarray:
    series = np.empty(T)
    x = mean
    for t in range(T):
        x = mean + rho * (x - mean) + rng.normal(0.0, sigma)
        series[t] = x
    return series


def crisis_panel(spec: CrisisPanelSpec) -> CrisisPanelResult:
    """Generate the network-level panel plus coherent institution outcomes."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0xC815)))
    T = spec.T
    quarters = np.arange(T)
    post = (quarters > spec.crisis_quarter).astype(float)

    controls: dict[str, np.ndarray] = {}
    generators = {
        "gdp_growth": lambda: _ar1(rng, T, mean=2.0, rho=0.5, sigma=0.8),
        "vix": lambda: _ar1(rng, T, mean=20.0, rho=0.7, sigma=3.0),
        "sovereign_debt": lambda: _ar1(rng, T, mean=0.85, rho=0.8, sigma=0.03),
    }
    for name in spec.controls_model:
        controls[name] = generators[name]() if name in generators else _ar1(rng, T, 0.0, 0.5, 1.0)

    y = spec.level + spec.trend_slope * quarters + spec.direct_effect * post
    for name, coef in spec.controls_model.items():
        y = y + coef * controls[name]
    y = y + rng.normal(0.0, spec.noise_sigma, size=T)

    panel = PanelSeries(
        quarters=quarters, lambda2=y, controls=controls, crisis_quarter=spec.crisis_quarter
    )

    n = spec.n_institutions
    p = min(1.0, spec.mean_degree / max(1, n - 1))
    upper = np.triu(rng.random((n, n)) < p, k=1)
    adj = upper | upper.T
    degrees = adj.sum(axis=1).astype(float)
    inst_effect = spec.direct_effect + spec.spillover_per_link * degrees
    base = spec.level + rng.normal(0.0, spec.noise_sigma, size=n)
    outcomes = (
        base[:, None]
        + spec.trend_slope * quarters[None, :]
        + inst_effect[:, None] * post[None, :]
        + rng.normal(0.0, spec.noise_sigma, size=(n, T))
    )
    institutions = tuple(f"B{k:03d}" for k in range(n))
    inst_panel = InstitutionPanel(
        institutions=institutions,
        quarters=quarters,
        outcomes=outcomes,
        crisis_quarter=spec.crisis_quarter,
    )
    mean_degree = float(degrees.mean())
    truth = CrisisPanelTruth(
        direct_effect=spec.direct_effect,
        spillover_per_link=spec.spillover_per_link,
        mean_degree=mean_degree,
        naive_effect=spec.direct_effect + spec.spillover_per_link * mean_degree,
    )
    return CrisisPanelResult(panel=panel, outcomes=inst_panel, truth=truth)


# ---------------------------------------------------------------------------
# decay observations
# ---------------------------------------------------------------------------


def decay_dataset(
    kappa: float,
    alpha: float,
    beta: float,
    gamma_net: float,
    n_pairs: int = 400,
    distance_range: tuple[float, float] = (1.0, 20000.0),
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> DecayData:
    """Forward model of the decay regression: log-uniform distances, uniform
    network hop counts in 1..6, outcome alpha + beta exp(-kappa d) + gamma hops."""
    lo, hi = distance_range
    if not 0 < lo < hi:
        raise ParamError("distance_range must be positive and increasing")
    if hi / lo < 10.0:
        raise ParamError("distance_range must span more than one decade")
    if n_pairs < 10:
        raise ParamError("need at least 10 pairs")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDECA)))
    d = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_pairs))
    hops = rng.integers(1, 7, size=n_pairs).astype(float)
    y = alpha + beta * np.exp(-kappa * d) + gamma_net * hops
    if noise_sigma > 0:
        y = y + rng.normal(0.0, noise_sigma, size=n_pairs)
    return DecayData(distance_km=d, network_distance=hops, delta_outcome=y)


# ---------------------------------------------------------------------------
# exposure histories (file-pipeline input)
# ---------------------------------------------------------------------------


def exposure_history(
    n: int = 24,
    T: int = 8,
    crisis_quarter: int = 4,
    seed: int = 0,
    extra_edge_prob: float = 0.15,
    post_intensity: float = 2.0,
) -> ExposurePanel:
    """Multi-quarter bilateral exposure panel on a connected random backbone.

    Exposure intensity scales by ``post_intensity`` after the break quarter,
    echoing rising coupling among survivors. Produces the exposures and
    institutions consumed by the file pipeline.
    """
    if n < 4 or T < 2:
        raise ParamError("need n >= 4 and T >= 2")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE095)))
    institutions = []
    for k in range(n):
        assets = float(np.exp(rng.normal(27.0, 0.8)))  # roughly 0.1..3 trillion
        leverage = rng.uniform(8.0, 22.0)
        institutions.append(
            Institution(
                id=f"B{k:03d}",
                name=f"Bank {k:03d}",
                country=_COUNTRIES[k % len(_COUNTRIES)],
                assets=assets,
                equity=assets / leverage,
                lat=float(rng.uniform(-55.0, 65.0)),
                lon=float(rng.uniform(-180.0, 180.0)),
            )
        )
    ids = [inst.id for inst in institutions]

    base = np.exp(rng.normal(3.0, 1.0, size=(n, n)))
    ring = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    ring[idx, (idx + 1) % n] = True
    extra = rng.random((n, n)) < extra_edge_prob
    directed = ring | extra
    np.fill_diagonal(directed, False)

    records = []
    for t in range(T):
        intensity = post_intensity if t > crisis_quarter else 1.0
        drift = 1.0 + 0.05 * math.sin(0.7 * t)
        for i in range(n):
            for j in range(n):
                if not directed[i, j]:
                    continue
                total = base[i, j] * intensity * drift
                split = rng.dirichlet((4.0, 2.0, 2.0, 1.0))
                records.append(
                    ExposureRecord(
                        quarter=t,
                        lender=ids[i],
                        borrower=ids[j],
                        loans=total * split[0],
                        securities=total * split[1],
                        derivatives=total * split[2],
                        guarantees=total * split[3],
                    )
                )
    return ExposurePanel(institutions=institutions, records=records)


def observed_mask(panel: ExposurePanel, fraction: float = 0.5, seed: int = 0) -> set[tuple[int, str, str]]:
    """Seeded choice of which recorded pairs count as observed."""
    if not 0 < fraction <= 1:
        raise ParamError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x3A5C)))
    keys = sorted((r.quarter, r.lender, r.borrower) for r in panel.records)
    take = rng.random(len(keys)) < fraction
    return {key for key, t in zip(keys, take) if t}
