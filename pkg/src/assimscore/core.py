"""Domain types and table alignment.

Audience tables map interests to person counts for one population. Counts
stay integers end to end; normalization into ratios happens only in the
scoring layer, which keeps the scale-invariance guarantee exact. All types
are immutable values and safe to share between threads.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    EmptyIntersection,
    EmptyTable,
    InvalidK,
    InvalidSpec,
    NegativeAudience,
    TotalMismatch,
)

logger = logging.getLogger(__name__)

GENDERS = frozenset({"all", "men", "women"})
EDUCATION_LEVELS = frozenset({"all", "university_graduate", "not_university"})

# "expats_from(xx)" targets expats of one origin; the other statuses are plain.
_EXPAT_STATUS_RE = re.compile(
    r"^(all|expats_all|non_expats|expats_from\([a-z0-9 _\-]+\))$"
)

AGE_FLOOR = 13
AGE_CEIL = 120


@dataclass(frozen=True, order=True)
class InterestId:
    """A platform interest: opaque id plus a human-readable label.

    Identity (equality, hashing, ordering) is the id alone; the label is
    display metadata and may differ between data files for the same id.
    """

    id: str
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.id:
            raise InvalidSpec("interest id must be non-empty")


@dataclass(frozen=True)
class PopulationSpec:
    """Declarative description of an audience segment.

    ``country`` is an ISO-3166 code or a region-set name (e.g. a league of
    countries). ``expat_status`` is one of ``all``, ``expats_all``,
    ``non_expats`` or ``expats_from(<origin>)``. String fields are stored
    lowercase so fingerprints are canonical.
    """

    label: str
    country: str
    language: str | None = None
    expat_status: str = "all"
    age_range: tuple[int, int] = (18, 65)
    gender: str = "all"
    education: str = "all"

    def __post_init__(self):
        if not self.label:
            raise InvalidSpec("population label must be non-empty")
        if not self.country:
            raise InvalidSpec("country must be non-empty")
        object.__setattr__(self, "country", self.country.lower())
        if self.language is not None:
            object.__setattr__(self, "language", self.language.lower())
        object.__setattr__(self, "expat_status", self.expat_status.lower())
        object.__setattr__(self, "gender", self.gender.lower())
        object.__setattr__(self, "education", self.education.lower())
        if not _EXPAT_STATUS_RE.match(self.expat_status):
            raise InvalidSpec(f"bad expat_status: {self.expat_status!r}")
        if self.gender not in GENDERS:
            raise InvalidSpec(f"bad gender: {self.gender!r}")
        if self.education not in EDUCATION_LEVELS:
            raise InvalidSpec(f"bad education: {self.education!r}")
        age = tuple(self.age_range)
        if len(age) != 2 or not all(isinstance(a, int) for a in age):
            raise InvalidSpec("age_range must be a pair of integers")
        object.__setattr__(self, "age_range", age)
        lo, hi = age
        if not (AGE_FLOOR <= lo <= hi <= AGE_CEIL):
            raise InvalidSpec(
                f"age_range must satisfy {AGE_FLOOR} <= min <= max <= {AGE_CEIL}, got {age}"
            )

    def fingerprint(self) -> str:
        """Canonical cache/report key; excludes the free-form label."""
        lo, hi = self.age_range
        return "|".join(
            (
                self.country,
                self.language or "",
                self.expat_status,
                f"{lo}-{hi}",
                self.gender,
                self.education,
            )
        )

    def to_dict(self) -> dict:
        lo, hi = self.age_range
        return {
            "label": self.label,
            "country": self.country,
            "language": self.language,
            "expat_status": self.expat_status,
            "age_min": lo,
            "age_max": hi,
            "gender": self.gender,
            "education": self.education,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PopulationSpec":
        try:
            return cls(
                label=d["label"],
                country=d["country"],
                language=d.get("language"),
                expat_status=d.get("expat_status", "all"),
                age_range=(int(d.get("age_min", 18)), int(d.get("age_max", 65))),
                gender=d.get("gender", "all"),
                education=d.get("education", "all"),
            )
        except KeyError as exc:
            raise InvalidSpec(f"population spec missing field {exc}") from exc


@dataclass(frozen=True)
class AudienceTable:
    """Interest-to-audience-count mapping for one population.

    ``entries`` iterate in ascending interest-id order once the table has
    passed :func:`validate_table` (factory-built tables already do), so
    downstream reports are reproducible byte for byte.
    """

    population: PopulationSpec
    entries: Mapping[InterestId, int]
    total: int

    @classmethod
    def from_counts(
        cls, population: PopulationSpec, counts: Mapping[InterestId, int]
    ) -> "AudienceTable":
        """Build a validated table; the total is computed, never trusted."""
        ordered = dict(sorted(counts.items()))
        table = cls(population, ordered, sum(ordered.values()))
        return validate_table(table)

    def restrict(self, ids: Iterable[InterestId]) -> "AudienceTable":
        """Sub-table over ``ids`` (which must all be present); total recomputed."""
        wanted = set(ids)
        kept = {i: c for i, c in self.entries.items() if i in wanted}
        if len(kept) != len(wanted):
            missing = sorted(i.id for i in wanted - set(kept))
            raise InvalidSpec(f"interests not in table: {missing}")
        return AudienceTable.from_counts(self.population, kept)

    def interest_ids(self) -> tuple[str, ...]:
        return tuple(i.id for i in self.entries)


@dataclass(frozen=True)
class TripleSpec:
    """The three populations of one scoring run plus the selection percentage."""

    dest: PopulationSpec
    target: PopulationSpec
    home: PopulationSpec
    k_percent: float = 50.0

    def __post_init__(self):
        labels = {self.dest.label, self.target.label, self.home.label}
        if len(labels) != 3:
            raise InvalidSpec("dest/target/home must carry distinct labels")
        check_k_percent(self.k_percent)


def check_k_percent(k_percent: float) -> float:
    if not 0 < k_percent <= 100:
        raise InvalidK(f"k_percent must be in (0, 100], got {k_percent}")
    return float(k_percent)


def validate_table(table: AudienceTable) -> AudienceTable:
    """Check table invariants and return a canonically ordered table.

    Idempotent: validating a validated table returns an equal value. Raises
    :class:`EmptyTable`, :class:`NegativeAudience` or :class:`TotalMismatch`.
    """
    if not table.entries:
        raise EmptyTable(f"table for {table.population.label!r} has no entries")
    for interest, count in table.entries.items():
        if not isinstance(count, int) or isinstance(count, bool):
            raise InvalidSpec(
                f"audience for {interest.id!r} must be an integer, got {count!r}"
            )
        if count < 0:
            raise NegativeAudience(
                f"audience for {interest.id!r} is negative ({count})"
            )
    actual = sum(table.entries.values())
    if table.total != actual:
        raise TotalMismatch(
            f"table for {table.population.label!r} claims total {table.total}, "
            f"entries sum to {actual}"
        )
    ids = list(table.entries)
    if ids != sorted(ids):
        return AudienceTable(
            table.population, dict(sorted(table.entries.items())), table.total
        )
    return table


@dataclass(frozen=True)
class Alignment:
    """Three tables restricted to their common interest universe."""

    dest: AudienceTable
    target: AudienceTable
    home: AudienceTable
    dropped: tuple[str, ...]  # interest ids present in some tables but not all

    def universe(self) -> tuple[InterestId, ...]:
        return tuple(self.dest.entries)


def align_tables(
    dest: AudienceTable, target: AudienceTable, home: AudienceTable
) -> Alignment:
    """Restrict all three tables to the intersection of their interest ids.

    Interests missing from any one table are dropped rather than zero-filled:
    an absent interest is indistinguishable from "not collected" in the
    source data. Dropped ids are returned (and logged) as a warning record.
    Raises :class:`EmptyIntersection` when nothing is shared.
    """
    dest = validate_table(dest)
    target = validate_table(target)
    home = validate_table(home)

    by_id = [{i.id: i for i in t.entries} for t in (dest, target, home)]
    common = set(by_id[0]) & set(by_id[1]) & set(by_id[2])
    if not common:
        raise EmptyIntersection("the three tables share no interest ids")
    everything = set(by_id[0]) | set(by_id[1]) | set(by_id[2])
    dropped = tuple(sorted(everything - common))
    if dropped:
        logger.warning(
            "alignment dropped %d interest id(s) not shared by all tables: %s",
            len(dropped),
            ", ".join(dropped[:10]) + ("..." if len(dropped) > 10 else ""),
        )

    def cut(table: AudienceTable, ids: dict) -> AudienceTable:
        kept = {ids[i]: table.entries[ids[i]] for i in common}
        return AudienceTable.from_counts(table.population, kept)

    return Alignment(
        dest=cut(dest, by_id[0]),
        target=cut(target, by_id[1]),
        home=cut(home, by_id[2]),
        dropped=dropped,
    )
