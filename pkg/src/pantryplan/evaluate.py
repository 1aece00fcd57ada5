"""Candidate-vs-baseline facility comparisons: household-to-nearest-pantry
distance statistics, savings, and pantry-to-bank penalty.

Distances stay in meters until this module's reports, which convert to miles
(1609.344 m). Averages are plain means over the household list as given;
weighting is realized upstream by duplication, and a direct-weights mode
exists only as a cross-check and must agree for integer weights. Totals use
compensated summation in fixed index order so reports never wobble between
runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distance import DistanceMatrix, GeoPoint, ProviderSpec, build_matrix
from .errors import EvaluateError
from .hierarchy import PlacementPlan

METERS_PER_MILE = 1609.344


@dataclass(frozen=True)
class FacilitySet:
    label: str
    points: tuple[GeoPoint, ...]
    city: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if not self.points:
            raise EvaluateError(f"facility set {self.label!r} is empty")
        if self.city is not None and len(self.city) != len(self.points):
            raise EvaluateError(f"facility set {self.label!r}: city tags do not match points")


@dataclass(frozen=True)
class GroupStats:
    """Per-group comparison figures, all in miles."""

    candidate_avg: float
    baseline_avg: float
    saving_abs: float
    saving_pct: float
    candidate_total: float
    baseline_total: float
    household_count: int


@dataclass(frozen=True)
class PenaltyBlock:
    """Pantry-to-bank penalty of the candidate plan vs the baseline, miles.

    Positive means the candidate's pantry-bank legs are longer.
    """

    per_pantry_avg: float
    total: float
    candidate_avg: float
    candidate_total: float
    baseline_avg: float
    baseline_total: float
    pantry_count: int


@dataclass(frozen=True)
class EvaluationReport:
    groups: dict[str, GroupStats]
    penalty: Optional[PenaltyBlock] = None


def _points_of(households) -> list[GeoPoint]:
    return [h.location if hasattr(h, "location") else h for h in households]


def _distances(households, facility_points: Sequence[GeoPoint], provider, transport=None) -> np.ndarray:
    """Rectangular households x facilities meters from a provider, a
    DistanceMatrix, or a bare array."""
    if isinstance(provider, ProviderSpec):
        m = build_matrix(provider, _points_of(households), list(facility_points), transport=transport)
        return m.values
    vals = provider.values if isinstance(provider, DistanceMatrix) else np.asarray(provider, dtype=np.float64)
    if vals.shape != (len(households), len(facility_points)):
        raise EvaluateError(
            f"distance matrix shape {vals.shape} does not match "
            f"{len(households)} households x {len(facility_points)} facilities"
        )
    return vals


def nearest_facility_stats(households, facilities: FacilitySet, provider, transport=None, weights=None):
    """Per-household distance to the closest facility, mean and total, meters.

    The mean is plain over the household list; weighting normally arrives via
    duplication. Passing weights instead computes the direct weighted mean,
    which must agree with duplication for integer weights.
    """
    if not len(households):
        raise EvaluateError("no households to evaluate")
    d = _distances(households, facilities.points, provider, transport)
    per_household = [float(x) for x in d.min(axis=1)]
    if weights is None:
        total = math.fsum(per_household)
        return per_household, total / len(per_household), total
    if len(weights) != len(per_household):
        raise EvaluateError("weights do not match households")
    total = math.fsum(w * x for w, x in zip(weights, per_household))
    return per_household, total / math.fsum(weights), total


def _group_stats(cand_m: Sequence[float], base_m: Sequence[float]) -> GroupStats:
    count = len(cand_m)
    cand_total = math.fsum(cand_m) / METERS_PER_MILE
    base_total = math.fsum(base_m) / METERS_PER_MILE
    cand_avg = cand_total / count
    base_avg = base_total / count
    saving = base_avg - cand_avg
    pct = 100.0 * saving / base_avg if base_avg > 0 else 0.0
    return GroupStats(
        candidate_avg=cand_avg,
        baseline_avg=base_avg,
        saving_abs=saving,
        saving_pct=pct,
        candidate_total=cand_total,
        baseline_total=base_total,
        household_count=count,
    )


def compare(
    candidate: FacilitySet,
    baseline: FacilitySet,
    households,
    provider,
    groups: Optional[Sequence[Optional[str]]] = None,
    transport=None,
) -> EvaluationReport:
    """Nearest-facility statistics for both sets, per city group and overall.

    provider is a ProviderSpec used for both sets, or a (candidate, baseline)
    pair of precomputed households x facilities matrices.
    """
    if groups is not None and len(groups) != len(households):
        raise EvaluateError("group labels do not match households")
    if isinstance(provider, tuple):
        cand_provider, base_provider = provider
    elif isinstance(provider, ProviderSpec):
        cand_provider = base_provider = provider
    else:
        # a single raw matrix cannot serve two facility sets unambiguously
        raise EvaluateError("compare needs a ProviderSpec or a (candidate, baseline) matrix pair")
    cand_m, _, _ = nearest_facility_stats(households, candidate, cand_provider, transport)
    base_m, _, _ = nearest_facility_stats(households, baseline, base_provider, transport)

    out = {"overall": _group_stats(cand_m, base_m)}
    if groups is not None:
        for label in sorted({g for g in groups if g is not None}):
            idx = [i for i, g in enumerate(groups) if g == label]
            out[label] = _group_stats([cand_m[i] for i in idx], [base_m[i] for i in idx])
    return EvaluationReport(groups=out)


def penalty_from_distances(candidate_m: Sequence[float], baseline_m: Sequence[float]) -> PenaltyBlock:
    """Penalty block from per-pantry pantry-to-bank meters of both sides."""
    if not candidate_m or not baseline_m:
        raise EvaluateError("penalty needs at least one pantry on each side")
    cand_total = math.fsum(candidate_m) / METERS_PER_MILE
    base_total = math.fsum(baseline_m) / METERS_PER_MILE
    cand_avg = cand_total / len(candidate_m)
    base_avg = base_total / len(baseline_m)
    return PenaltyBlock(
        per_pantry_avg=cand_avg - base_avg,
        total=cand_total - base_total,
        candidate_avg=cand_avg,
        candidate_total=cand_total,
        baseline_avg=base_avg,
        baseline_total=base_total,
        pantry_count=len(candidate_m),
    )


def penalty_report(
    plan: PlacementPlan,
    households,
    baseline_banks: FacilitySet,
    baseline_pantries: FacilitySet,
    provider,
    transport=None,
) -> PenaltyBlock:
    """Candidate pantry-to-assigned-bank distances against baseline
    pantry-to-nearest-bank distances."""
    pantry_points = [households[p].location for p in plan.pantries]
    bank_points = [households[b].location for b in plan.banks]
    bank_pos = {b: i for i, b in enumerate(plan.banks)}
    cand = _distances(pantry_points, bank_points, provider, transport)
    candidate_m = [float(cand[i, bank_pos[plan.pantry_to_bank[p]]]) for i, p in enumerate(plan.pantries)]

    base = _distances(baseline_pantries.points, baseline_banks.points, provider, transport)
    baseline_m = [float(x) for x in base.min(axis=1)]
    return penalty_from_distances(candidate_m, baseline_m)


def report_to_dict(report: EvaluationReport) -> dict:
    """Full-precision JSON-ready report."""
    out = {
        "groups": {
            label: {
                "candidate_avg_mi": g.candidate_avg,
                "baseline_avg_mi": g.baseline_avg,
                "saving_mi": g.saving_abs,
                "saving_pct": g.saving_pct,
                "candidate_total_mi": g.candidate_total,
                "baseline_total_mi": g.baseline_total,
                "household_count": g.household_count,
            }
            for label, g in report.groups.items()
        }
    }
    if report.penalty is not None:
        p = report.penalty
        out["penalty"] = {
            "per_pantry_avg_mi": p.per_pantry_avg,
            "total_mi": p.total,
            "candidate_avg_mi": p.candidate_avg,
            "candidate_total_mi": p.candidate_total,
            "baseline_avg_mi": p.baseline_avg,
            "baseline_total_mi": p.baseline_total,
            "pantry_count": p.pantry_count,
        }
    else:
        out["penalty"] = None
    return out


def report_to_csv(report: EvaluationReport) -> str:
    """Display-precision CSV: miles to 2 decimals, percents to 1."""
    lines = [
        "group,household_count,candidate_avg_mi,baseline_avg_mi,saving_mi,saving_pct,candidate_total_mi,baseline_total_mi"
    ]
    labels = [k for k in report.groups if k != "overall"] + ["overall"]
    for label in labels:
        g = report.groups[label]
        lines.append(
            f"{label},{g.household_count},{g.candidate_avg:.2f},{g.baseline_avg:.2f},"
            f"{g.saving_abs:.2f},{g.saving_pct:.1f},{g.candidate_total:.2f},{g.baseline_total:.2f}"
        )
    return "\n".join(lines) + "\n"


def households_geojson(households, candidate_m: Sequence[float], baseline_m: Sequence[float]) -> dict:
    """Households as points tagged with both nearest-facility distances and
    which set serves them better, for map rendering."""
    features = []
    for h, c, b in zip(households, candidate_m, baseline_m):
        p = h.location if hasattr(h, "location") else h
        better = "tie" if c == b else ("candidate" if c < b else "baseline")
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": {
                    "nearest_candidate_mi": c / METERS_PER_MILE,
                    "nearest_baseline_mi": b / METERS_PER_MILE,
                    "better": better,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}
