"""Robustness and validation analyses.

Subset stability re-runs the scoring pipeline on random interest subsets of
growing size and summarizes how much the median score moves once the subset
is at least ``stability_floor`` interests. Region correlation checks an
audience-derived regional series against an external reference series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import AudienceTable, align_tables
from .errors import (
    ConstantSeries,
    InvalidSizes,
    InvalidSpec,
    IoError,
    LengthMismatch,
    MissingArea,
    NonPositiveArea,
    NoDistinctiveInterests,
    RegionMismatch,
    SizeExceedsUniverse,
    ZeroTotalAudience,
)
from .scoring import score_triple

# Sampling scheme identifier recorded in every stability series: PCG64 keyed
# by SeedSequence((seed, size, trial)), subset via Generator.choice without
# replacement. Reruns with the same key reproduce the same subsets.
SAMPLER_ID = "pcg64-seedseq(seed,size,trial)-choice-without-replacement"

DEFAULT_STABILITY_FLOOR = 500


@dataclass(frozen=True)
class StabilitySeries:
    """Median scores across random interest subsets.

    ``scores[size]`` holds one entry per trial; ``None`` marks a trial whose
    subset admitted no distinctive interests (a miss, not a failure).
    Relative-change statistics are taken over all non-miss samples at sizes
    at or above ``stability_floor``, against their common mean.
    """

    sizes: tuple[int, ...]
    trials_per_size: int
    seed: int
    scores: Mapping[int, tuple[float | None, ...]]
    max_rel_change: float
    avg_rel_change: float
    stability_floor: int
    sampler: str = SAMPLER_ID


@dataclass(frozen=True)
class RegionSeries:
    """A per-region value series, optionally with region areas."""

    regions: tuple[str, ...]
    values: tuple[float, ...]
    area_km2: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(set(self.regions)) != len(self.regions):
            raise InvalidSpec("duplicate region names")
        if len(self.values) != len(self.regions):
            raise LengthMismatch(
                f"{len(self.regions)} regions but {len(self.values)} values"
            )
        if self.area_km2 is not None:
            if len(self.area_km2) != len(self.regions):
                raise LengthMismatch(
                    f"{len(self.regions)} regions but {len(self.area_km2)} areas"
                )
            for region, area in zip(self.regions, self.area_km2):
                if area <= 0:
                    raise NonPositiveArea(f"area for {region!r} is {area}")


def subset_stability(
    dest: AudienceTable,
    target: AudienceTable,
    home: AudienceTable,
    k_percent: float,
    sizes: Sequence[int],
    trials: int,
    seed: int,
    stability_floor: int = DEFAULT_STABILITY_FLOOR,
) -> StabilitySeries:
    """Score the triple on random interest subsets of each requested size.

    Subsets are drawn uniformly without replacement from the aligned
    universe; the draw for (seed, size, trial) is fixed, so trials are
    independent samples and reruns are reproducible. Ratios are renormalized
    over each subset. A subset of the full universe size reproduces the
    full-data score exactly.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise InvalidSizes("no subset sizes given")
    if any(s < 1 for s in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidSizes(f"sizes must be strictly increasing positives, got {sizes}")
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")

    aligned = align_tables(dest, target, home)
    universe = np.array(aligned.universe(), dtype=object)
    if sizes[-1] > len(universe):
        raise SizeExceedsUniverse(
            f"largest subset size {sizes[-1]} exceeds aligned universe "
            f"of {len(universe)} interests"
        )

    scores: dict[int, tuple[float | None, ...]] = {}
    for size in sizes:
        per_trial: list[float | None] = []
        for trial in range(trials):
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((seed, size, trial)))
            )
            picked = universe[rng.choice(len(universe), size=size, replace=False)]
            try:
                report = score_triple(
                    aligned.dest.restrict(picked),
                    aligned.target.restrict(picked),
                    aligned.home.restrict(picked),
                    k_percent,
                )
                per_trial.append(report.median_score)
            except (NoDistinctiveInterests, ZeroTotalAudience):
                per_trial.append(None)  # degenerate subset: miss, not a crash
        scores[size] = tuple(per_trial)

    stable = [
        s
        for size in sizes
        if size >= stability_floor
        for s in scores[size]
        if s is not None
    ]
    if stable and (mean := float(np.mean(stable))) != 0:
        rel = np.abs(np.asarray(stable) - mean) / mean
        max_rel, avg_rel = float(rel.max()), float(rel.mean())
    else:
        max_rel = avg_rel = float("nan")

    return StabilitySeries(
        sizes=tuple(sizes),
        trials_per_size=trials,
        seed=seed,
        scores=scores,
        max_rel_change=max_rel,
        avg_rel_change=avg_rel,
        stability_floor=stability_floor,
    )


def write_stability_csv(series: StabilitySeries, path: str | Path) -> None:
    """Plot-ready長 form: one row per (size, trial); misses leave the score empty."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["size", "trial", "median_score"])
            for size in series.sizes:
                for trial, score in enumerate(series.scores[size]):
                    writer.writerow(
                        [size, trial, "" if score is None else repr(score)]
                    )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# -- region correlation --------------------------------------------------------

def normalize_by_area(series: RegionSeries) -> RegionSeries:
    """Replace values with value per square kilometer; areas are consumed."""
    if series.area_km2 is None:
        raise MissingArea("series carries no area_km2 column")
    values = tuple(v / a for v, a in zip(series.values, series.area_km2))
    return RegionSeries(series.regions, values, None)


def join_regions(a: RegionSeries, b: RegionSeries) -> tuple[RegionSeries, RegionSeries]:
    """Reorder ``b`` to match ``a``'s region order (join by region name)."""
    if set(a.regions) != set(b.regions):
        missing = sorted(set(a.regions) ^ set(b.regions))
        raise RegionMismatch(f"region sets differ: {missing}")
    index = {region: i for i, region in enumerate(b.regions)}
    order = [index[region] for region in a.regions]
    return a, RegionSeries(
        a.regions,
        tuple(b.values[i] for i in order),
        None if b.area_km2 is None else tuple(b.area_km2[i] for i in order),
    )


def pearson_r(a: RegionSeries, b: RegionSeries) -> float:
    """Sample Pearson correlation of two region series in matching order."""
    if len(a.regions) != len(b.regions):
        raise LengthMismatch(
            f"series lengths differ: {len(a.regions)} vs {len(b.regions)}"
        )
    if a.regions != b.regions:
        raise RegionMismatch("region names differ or are ordered differently")
    if len(a.regions) < 2:
        raise LengthMismatch("need at least 2 regions")
    xs = np.asarray(a.values, dtype=float)
    ys = np.asarray(b.values, dtype=float)
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    sx = float(np.sqrt(np.sum(xc * xc)))
    sy = float(np.sqrt(np.sum(yc * yc)))
    if sx == 0 or sy == 0:
        raise ConstantSeries("correlation of a constant series is undefined")
    return float(np.sum(xc * yc) / (sx * sy))
