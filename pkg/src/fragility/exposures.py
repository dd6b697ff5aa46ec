"""Bilateral exposure data model and CSV interchange.

Exposure CSV header: ``quarter,lender,borrower,loans,securities,derivatives,guarantees``
Institutions CSV header: ``id,name,country,assets,equity,lat,lon``
Mask CSV header: ``quarter,lender,borrower`` (pairs whose exposure is observed)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import NotFoundError, ParamError

EXPOSURE_COLUMNS = ("quarter", "lender", "borrower", "loans", "securities", "derivatives", "guarantees")
INSTITUTION_COLUMNS = ("id", "name", "country", "assets", "equity", "lat", "lon")
MASK_COLUMNS = ("quarter", "lender", "borrower")


@dataclass(frozen=True)
class Institution:
    id: str
    name: str = ""
    country: str = ""
    assets: float = 1.0
    equity: float = 1.0
    lat: float = math.nan
    lon: float = math.nan

    def __post_init__(self):
        if not self.id:
            raise ParamError("institution id must be non-empty")
        if not self.assets > 0 or not self.equity > 0:
            raise ParamError(f"institution {self.id}: assets and equity must be positive")

    @property
    def leverage(self) -> float:
        return self.assets / self.equity

    @property
    def has_coordinates(self) -> bool:
        return math.isfinite(self.lat) and math.isfinite(self.lon)


@dataclass(frozen=True)
class ExposureRecord:
    """One lender->borrower exposure in one quarter, split by channel."""

    quarter: int
    lender: str
    borrower: str
    loans: float = 0.0
    securities: float = 0.0
    derivatives: float = 0.0
    guarantees: float = 0.0
    observed: bool = True

    def __post_init__(self):
        if self.lender == self.borrower:
            raise ParamError(f"self-exposure record for {self.lender} in quarter {self.quarter}")
        for name in ("loans", "securities", "derivatives", "guarantees"):
            if getattr(self, name) < 0:
                raise ParamError(f"negative {name} for {self.lender}->{self.borrower} in quarter {self.quarter}")

    @property
    def total(self) -> float:
        return self.loans + self.securities + self.derivatives + self.guarantees


@dataclass
class ExposurePanel:
    """Quarterly bilateral exposures over a fixed institution universe."""

    institutions: list[Institution]
    records: list[ExposureRecord]
    quarters: list[int] = field(init=False)
    _index: dict[str, int] = field(init=False, repr=False)
    _by_quarter: dict[int, list[ExposureRecord]] = field(init=False, repr=False)

    def __post_init__(self):
        self._index = {inst.id: k for k, inst in enumerate(self.institutions)}
        if len(self._index) != len(self.institutions):
            raise ParamError("duplicate institution ids")
        self._by_quarter = {}
        seen: set[tuple[int, str, str]] = set()
        for rec in self.records:
            if rec.lender not in self._index:
                raise ParamError(f"unknown lender {rec.lender!r}")
            if rec.borrower not in self._index:
                raise ParamError(f"unknown borrower {rec.borrower!r}")
            key = (rec.quarter, rec.lender, rec.borrower)
            if key in seen:
                raise ParamError(f"duplicate record for {key}")
            seen.add(key)
            self._by_quarter.setdefault(rec.quarter, []).append(rec)
        self.quarters = sorted(self._by_quarter)

    @property
    def n(self) -> int:
        return len(self.institutions)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(inst.id for inst in self.institutions)

    def institution(self, inst_id: str) -> Institution:
        try:
            return self.institutions[self._index[inst_id]]
        except KeyError:
            raise NotFoundError(f"unknown institution {inst_id!r}") from None

    def index_of(self, inst_id: str) -> int:
        try:
            return self._index[inst_id]
        except KeyError:
            raise NotFoundError(f"unknown institution {inst_id!r}") from None

    def records_for(self, quarter: int) -> list[ExposureRecord]:
        if quarter not in self._by_quarter:
            raise NotFoundError(f"quarter {quarter} not in panel")
        return list(self._by_quarter[quarter])


def aggregate_exposures(panel: ExposurePanel, quarter: int) -> np.ndarray:
    """Total exposure matrix for one quarter: loans + securities + derivatives + guarantees.

    Entry ``(i, j)`` is the exposure of lender ``i`` to borrower ``j`` in the
    panel's institution order; pairs without a record are zero and the
    diagonal is zero by construction.
    """
    records = panel.records_for(quarter)
    E = np.zeros((panel.n, panel.n))
    for rec in records:
        E[panel.index_of(rec.lender), panel.index_of(rec.borrower)] = rec.total
    return E


def read_institutions_csv(path: str | Path) -> list[Institution]:
    df = pd.read_csv(path, dtype={"id": str, "name": str, "country": str}, float_precision="round_trip")
    missing = [c for c in INSTITUTION_COLUMNS if c not in df.columns]
    if missing:
        raise ParamError(f"institutions CSV missing columns: {missing}")
    return [
        Institution(
            id=row.id,
            name="" if pd.isna(row.name) else str(row.name),
            country="" if pd.isna(row.country) else str(row.country),
            assets=float(row.assets),
            equity=float(row.equity),
            lat=float(row.lat) if pd.notna(row.lat) else math.nan,
            lon=float(row.lon) if pd.notna(row.lon) else math.nan,
        )
        for row in df.itertuples(index=False)
    ]


def write_institutions_csv(institutions: Sequence[Institution], path: str | Path) -> None:
    df = pd.DataFrame(
        [(i.id, i.name, i.country, i.assets, i.equity, i.lat, i.lon) for i in institutions],
        columns=list(INSTITUTION_COLUMNS),
    )
    df.to_csv(path, index=False)


def read_exposures_csv(path: str | Path, institutions: Sequence[Institution] | None = None) -> ExposurePanel:
    """Load an exposure panel. Without an institutions file, the universe is the
    sorted set of ids appearing in the exposure records (placeholder metadata)."""
    df = pd.read_csv(path, dtype={"lender": str, "borrower": str}, float_precision="round_trip")
    missing = [c for c in EXPOSURE_COLUMNS if c not in df.columns]
    if missing:
        raise ParamError(f"exposure CSV missing columns: {missing}")
    if institutions is None:
        ids = sorted(set(df["lender"]) | set(df["borrower"]))
        institutions = [Institution(id=i) for i in ids]
    records = [
        ExposureRecord(
            quarter=int(row.quarter),
            lender=row.lender,
            borrower=row.borrower,
            loans=float(row.loans),
            securities=float(row.securities),
            derivatives=float(row.derivatives),
            guarantees=float(row.guarantees),
        )
        for row in df.itertuples(index=False)
    ]
    return ExposurePanel(institutions=list(institutions), records=records)


def write_exposures_csv(panel: ExposurePanel, path: str | Path) -> None:
    df = pd.DataFrame(
        [
            (r.quarter, r.lender, r.borrower, r.loans, r.securities, r.derivatives, r.guarantees)
            for r in panel.records
        ],
        columns=list(EXPOSURE_COLUMNS),
    )
    df.to_csv(path, index=False)


def read_mask_csv(path: str | Path) -> set[tuple[int, str, str]]:
    df = pd.read_csv(path, dtype={"lender": str, "borrower": str}, float_precision="round_trip")
    missing = [c for c in MASK_COLUMNS if c not in df.columns]
    if missing:
        raise ParamError(f"mask CSV missing columns: {missing}")
    return {(int(r.quarter), r.lender, r.borrower) for r in df.itertuples(index=False)}


def write_mask_csv(pairs: Iterable[tuple[int, str, str]], path: str | Path) -> None:
    df = pd.DataFrame(sorted(pairs), columns=list(MASK_COLUMNS))
    df.to_csv(path, index=False)
