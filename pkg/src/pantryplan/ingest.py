"""Household ingestion: CSV loading, income filter, seeded sampling, weights.

The preparation recipe is filter -> sample -> weight -> duplicate. Weighting
can either attach a weight to each household directly or emulate it by
repeating the household round(w) times, which makes plain unweighted averages
downstream come out weighted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Union

from .distance import GeoPoint
from .errors import IngestError
from .rng import sample_indices

DEFAULT_INCOME_CAP = 40_000.0
DEFAULT_WEIGHT_NUMERATOR = 5.0
DEFAULT_WEIGHT_CAP = 50.0


@dataclass(frozen=True)
class Household:
    """A geolocated demand point; weight defaults to 1 and must stay positive."""

    id: str
    location: GeoPoint
    income: Optional[float] = None
    weight: float = 1.0
    origin_id: str = ""
    city: Optional[str] = None

    def __post_init__(self):
        if not self.weight > 0:
            raise IngestError(f"household {self.id}: weight must be positive, got {self.weight}")
        if self.income is not None and self.income < 0:
            raise IngestError(f"household {self.id}: negative income {self.income}")
        if not self.origin_id:
            object.__setattr__(self, "origin_id", self.id)


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV column names onto household fields; income/id/city optional."""

    lat: str = "lat"
    lon: str = "lon"
    income: Optional[str] = None
    id: Optional[str] = None
    city: Optional[str] = None


@dataclass(frozen=True)
class IngestConfig:
    income_cap: float = DEFAULT_INCOME_CAP
    sample_size: Union[int, str] = "all"
    seed: int = 0
    weighting_mode: str = "none"  # none | duplicate | direct
    weight_cap: float = DEFAULT_WEIGHT_CAP
    weight_numerator: float = DEFAULT_WEIGHT_NUMERATOR

    def __post_init__(self):
        if self.weighting_mode not in ("none", "duplicate", "direct"):
            raise IngestError(f"unknown weighting_mode {self.weighting_mode!r}")
        if self.sample_size != "all":
            if not isinstance(self.sample_size, int) or self.sample_size < 1:
                raise IngestError(f"sample_size must be a positive integer or 'all', got {self.sample_size!r}")
        if self.weight_cap < 1.25:
            raise IngestError(f"weight_cap must be >= 1.25, got {self.weight_cap}")


def _parse_float(raw: str, what: str, line_no: int) -> float:
    try:
        return float(raw)
    except ValueError:
        raise IngestError(f"line {line_no}: cannot parse {what} from {raw!r}") from None


def load_households(path, schema: ColumnSchema) -> list[Household]:
    """Read one Household per CSV row, in file order, all weights 1.0.

    Lines starting with '#' are provenance comments and are skipped. A row
    with an unparseable or out-of-range coordinate is an error naming the
    line; an empty income cell means income unknown.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise IngestError(f"no such file: {path}") from None
    with fh:
        plain = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(plain)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file, expected a CSV header")
        for col in (schema.lat, schema.lon, schema.income, schema.id, schema.city):
            if col is not None and col not in reader.fieldnames:
                raise IngestError(f"{path}: missing column {col!r}")
        households = []
        for i, row in enumerate(reader):
            line_no = reader.line_num
            lat = _parse_float(row[schema.lat], "latitude", line_no)
            lon = _parse_float(row[schema.lon], "longitude", line_no)
            if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
                raise IngestError(f"line {line_no}: coordinate out of range ({lat}, {lon})")
            income = None
            if schema.income and row.get(schema.income, "") != "":
                income = _parse_float(row[schema.income], "income", line_no)
                if income < 0:
                    raise IngestError(f"line {line_no}: negative income {income}")
            hid = row[schema.id] if schema.id else str(i)
            city = row.get(schema.city) if schema.city else None
            households.append(Household(id=hid, location=GeoPoint(lat, lon), income=income, city=city or None))
    return households


def filter_by_income(households: Sequence[Household], cap: float = DEFAULT_INCOME_CAP) -> list[Household]:
    """Keep households with income <= cap or with no income, order preserved."""
    return [h for h in households if h.income is None or h.income <= cap]


def sample(households: Sequence[Household], n: int, seed: int) -> list[Household]:
    """Uniform seeded n-subset in selection order; identity when n >= len."""
    if n < 1:
        raise IngestError(f"sample size must be >= 1, got {n}")
    if n >= len(households):
        return list(households)
    return [households[i] for i in sample_indices(len(households), n, seed)]


def compute_weight(
    income: float,
    numerator: float = DEFAULT_WEIGHT_NUMERATOR,
    cap: float = DEFAULT_WEIGHT_CAP,
) -> float:
    """Income-derived weight numerator/(income in $10k), capped above.

    At the $40,000 filter cap this gives exactly 1.25, and lower incomes get
    larger weights. Nonpositive income is degenerate (the formula blows up)
    and is rejected.
    """
    if income <= 0:
        raise IngestError(f"cannot weight nonpositive income {income}")
    return min(numerator / (income / 10_000.0), cap)


def apply_weights(households: Sequence[Household], config: IngestConfig) -> list[Household]:
    """Attach income-derived weights; absent income keeps weight 1.0."""
    out = []
    for h in households:
        if h.income is None:
            out.append(h)
        else:
            w = compute_weight(h.income, config.weight_numerator, config.weight_cap)
            out.append(replace(h, weight=w))
    return out


def _round_half_away(x: float) -> int:
    # round() would go to even; the duplication rule is half away from zero
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def duplicate_by_weight(households: Sequence[Household]) -> list[Household]:
    """Repeat each household max(1, round(weight)) times, copies adjacent.

    Copies get weight 1.0 and keep the source's origin_id; the first copy
    keeps the source id so single-copy households pass through unchanged.
    """
    out = []
    for h in households:
        if not h.weight > 0:
            raise IngestError(f"household {h.id}: weight must be positive")
        copies = max(1, _round_half_away(h.weight))
        for j in range(copies):
            cid = h.id if j == 0 else f"{h.id}#{j}"
            out.append(replace(h, id=cid, weight=1.0, origin_id=h.origin_id))
    return out


def prepare(households: Sequence[Household], config: IngestConfig) -> list[Household]:
    """Full preparation pipeline: filter -> sample -> weight -> duplicate."""
    hh = filter_by_income(households, config.income_cap)
    if config.sample_size != "all":
        hh = sample(hh, config.sample_size, config.seed)
    if config.weighting_mode == "none":
        return list(hh)
    hh = apply_weights(hh, config)
    if config.weighting_mode == "duplicate":
        hh = duplicate_by_weight(hh)
    return hh


PREPARED_FIELDS = ("id", "lat", "lon", "income", "weight", "origin_id", "city")


def write_households_csv(households: Iterable[Household], path, header_comment: Optional[str] = None) -> None:
    """Write households in the prepared-CSV layout understood by load_prepared."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(PREPARED_FIELDS)
        for h in households:
            writer.writerow([
                h.id,
                repr(h.location.lat),
                repr(h.location.lon),
                "" if h.income is None else repr(h.income),
                repr(h.weight),
                h.origin_id,
                h.city or "",
            ])


def load_prepared(path) -> list[Household]:
    """Read a prepared-households CSV written by write_households_csv."""
    schema = ColumnSchema(lat="lat", lon="lon", income="income", id="id", city="city")
    rows = load_households(path, schema)
    out = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise IngestError(f"no such file: {path}") from None
    with fh:
        plain = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(plain)
        for h, row in zip(rows, reader):
            weight = float(row.get("weight") or 1.0)
            origin = row.get("origin_id") or h.id
            out.append(replace(h, weight=weight, origin_id=origin))
    return out
