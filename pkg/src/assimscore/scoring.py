"""Assimilation scoring.

The pipeline has four steps, composed by :func:`score_triple`:

1. normalize each population's audience counts into interest ratios
   (count over table total), which cancels differential platform activity;
2. keep interests whose destination ratio strictly exceeds the home ratio,
   rank them by the ratio quotient and keep the top k percent;
3. score each kept interest as target ratio over destination ratio;
4. aggregate with the median, which is robust to single-interest outliers.

Ratios are computed with Python integer division (arbitrary precision,
correctly rounded), so multiplying every count of one population by any
positive integer leaves every downstream number bitwise unchanged.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass
from typing import Mapping

from .core import (
    Alignment,
    AudienceTable,
    InterestId,
    PopulationSpec,
    TripleSpec,
    align_tables,
    check_k_percent,
)
from .errors import (
    EmptyScores,
    NoDistinctiveInterests,
    UniverseMismatch,
    ZeroTotalAudience,
)

RATIO_SUM_TOL = 1e-12


@dataclass(frozen=True)
class InterestRatios:
    """Normalized audience shares for one population; values sum to 1."""

    population: PopulationSpec
    ratios: Mapping[InterestId, float]


@dataclass(frozen=True)
class SelectionResult:
    """Distinctly-destination interests and the retained top slice.

    ``distinctly_dest`` maps each interest whose destination ratio strictly
    exceeds its home ratio to the quotient of the two ratios (infinite when
    the home ratio is zero). ``top_k`` is ordered by quotient descending,
    ties broken by ascending interest id.
    """

    distinctly_dest: Mapping[InterestId, float]
    top_k: tuple[InterestId, ...]
    k_percent: float
    universe_size: int


@dataclass(frozen=True)
class ScoreReport:
    """Per-interest assimilation scores plus the median aggregate."""

    triple: TripleSpec
    per_interest: Mapping[InterestId, float]
    median_score: float
    selection: SelectionResult


def interest_ratios(table: AudienceTable) -> InterestRatios:
    """Each interest's share of the population's summed audience.

    Raises :class:`ZeroTotalAudience` when every count is zero.
    """
    if table.total == 0:
        raise ZeroTotalAudience(
            f"table for {table.population.label!r} has zero total audience"
        )
    ratios = {i: count / table.total for i, count in table.entries.items()}
    return InterestRatios(table.population, ratios)


def top_k_count(n_distinct: int, k_percent: float) -> int:
    """How many interests the top k percent keeps: max(1, ceil(n*k/100)).

    The tiny epsilon absorbs float fuzz so exact boundaries (e.g. 50% of 4)
    do not round up spuriously.
    """
    return max(1, math.ceil(n_distinct * k_percent / 100.0 - 1e-9))


def select_distinct(
    dest_ir: InterestRatios, home_ir: InterestRatios, k_percent: float
) -> SelectionResult:
    """Pick interests that distinguish the destination from home.

    An interest qualifies when its destination ratio is strictly larger than
    its home ratio; ties are uninformative and excluded. Qualifying interests
    are ranked by destination-to-home ratio quotient (infinity, when home is
    zero, ranks first) and the top ``k_percent`` are kept, never fewer than
    one. Raises :class:`NoDistinctiveInterests` when nothing qualifies.
    """
    k_percent = check_k_percent(k_percent)
    if set(dest_ir.ratios) != set(home_ir.ratios):
        raise UniverseMismatch("destination and home ratios cover different interests")

    distinct = {}
    for interest, d in dest_ir.ratios.items():
        h = home_ir.ratios[interest]
        if d > h:
            distinct[interest] = d / h if h > 0 else math.inf
    if not distinct:
        raise NoDistinctiveInterests(
            "no interest has a strictly larger destination ratio than home ratio"
        )

    ranked = sorted(distinct.items(), key=lambda kv: (-kv[1], kv[0].id))
    keep = top_k_count(len(ranked), k_percent)
    return SelectionResult(
        distinctly_dest=dict(sorted(distinct.items())),
        top_k=tuple(interest for interest, _ in ranked[:keep]),
        k_percent=k_percent,
        universe_size=len(dest_ir.ratios),
    )


def per_interest_scores(
    target_ir: InterestRatios,
    dest_ir: InterestRatios,
    selection: SelectionResult,
) -> dict[InterestId, float]:
    """Target ratio over destination ratio for each selected interest.

    ``target_ir`` must be normalized over the full aligned universe, not the
    selected subset. Division is safe: selection guarantees the destination
    ratio strictly exceeds a non-negative home ratio, hence is positive.
    """
    if set(target_ir.ratios) != set(dest_ir.ratios):
        raise UniverseMismatch("target and destination ratios cover different interests")
    return {
        interest: target_ir.ratios[interest] / dest_ir.ratios[interest]
        for interest in sorted(selection.top_k)
    }


def aggregate_median(per_interest: Mapping[InterestId, float]) -> float:
    """Median score; an even count averages the two middle values."""
    if not per_interest:
        raise EmptyScores("cannot aggregate an empty score set")
    return statistics.median(per_interest.values())


def score_triple(
    dest: AudienceTable,
    target: AudienceTable,
    home: AudienceTable,
    k_percent: float = 50.0,
    *,
    cap_scores: bool = False,
) -> ScoreReport:
    """Run the full pipeline on three audience tables.

    Tables are aligned to their common interest universe first; ratios are
    then computed over that universe. With ``cap_scores`` per-interest scores
    are clipped at 1.0 before aggregation (off by default: raw values carry
    information about over-indexing).
    """
    triple = TripleSpec(
        dest=dest.population,
        target=target.population,
        home=home.population,
        k_percent=k_percent,
    )
    aligned: Alignment = align_tables(dest, target, home)
    dest_ir = interest_ratios(aligned.dest)
    target_ir = interest_ratios(aligned.target)
    home_ir = interest_ratios(aligned.home)
    selection = select_distinct(dest_ir, home_ir, k_percent)
    scores = per_interest_scores(target_ir, dest_ir, selection)
    if cap_scores:
        scores = {i: min(s, 1.0) for i, s in scores.items()}
    return ScoreReport(
        triple=triple,
        per_interest=scores,
        median_score=aggregate_median(scores),
        selection=selection,
    )


# -- serialization ------------------------------------------------------------

def _json_number(x: float):
    # strict JSON has no Infinity token; an unbounded quotient becomes null
    return None if math.isinf(x) else x


def report_to_dict(report: ScoreReport) -> dict:
    """Plain-dict form of a report with fixed field names and ordering."""
    names = {i.id: i.name for i in report.selection.distinctly_dest}
    return {
        "triple": {
            "dest": report.triple.dest.to_dict(),
            "target": report.triple.target.to_dict(),
            "home": report.triple.home.to_dict(),
        },
        "k_percent": report.triple.k_percent,
        "universe_size": report.selection.universe_size,
        "distinct_count": len(report.selection.distinctly_dest),
        "selected": [
            {
                "interest_id": interest.id,
                "name": names[interest.id],
                "distinctiveness": _json_number(
                    report.selection.distinctly_dest[interest]
                ),
            }
            for interest in report.selection.top_k
        ],
        "scores": [
            {"interest_id": interest.id, "score": score}
            for interest, score in sorted(report.per_interest.items())
        ],
        "median_score": report.median_score,
    }


def report_to_json(report: ScoreReport, indent: int | None = None) -> str:
    """Deterministic JSON: same report value, same bytes."""
    return json.dumps(
        report_to_dict(report), indent=indent, ensure_ascii=False, allow_nan=False
    )


_POPULATION_SCHEMA = {
    "type": "object",
    "required": [
        "label",
        "country",
        "language",
        "expat_status",
        "age_min",
        "age_max",
        "gender",
        "education",
    ],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "country": {"type": "string", "minLength": 1},
        "language": {"type": ["string", "null"]},
        "expat_status": {"type": "string"},
        "age_min": {"type": "integer"},
        "age_max": {"type": "integer"},
        "gender": {"enum": ["all", "men", "women"]},
        "education": {"enum": ["all", "university_graduate", "not_university"]},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "triple",
        "k_percent",
        "universe_size",
        "distinct_count",
        "selected",
        "scores",
        "median_score",
    ],
    "properties": {
        "triple": {
            "type": "object",
            "required": ["dest", "target", "home"],
            "properties": {
                "dest": _POPULATION_SCHEMA,
                "target": _POPULATION_SCHEMA,
                "home": _POPULATION_SCHEMA,
            },
        },
        "k_percent": {"type": "number", "exclusiveMinimum": 0, "maximum": 100},
        "universe_size": {"type": "integer", "minimum": 1},
        "distinct_count": {"type": "integer", "minimum": 1},
        "selected": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["interest_id", "name", "distinctiveness"],
                "properties": {
                    "interest_id": {"type": "string", "minLength": 1},
                    "name": {"type": "string"},
                    # null encodes an unbounded quotient (home ratio was zero)
                    "distinctiveness": {
                        "type": ["number", "null"],
                        "exclusiveMinimum": 1,
                    },
                },
            },
        },
        "scores": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["interest_id", "score"],
                "properties": {
                    "interest_id": {"type": "string", "minLength": 1},
                    "score": {"type": "number", "minimum": 0},
                },
            },
        },
        "median_score": {"type": "number", "minimum": 0},
    },
}
