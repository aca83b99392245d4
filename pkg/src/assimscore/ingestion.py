"""File ingestion and the audience provider client.

CSV side: audience tables use the header ``interest_id,interest_name,audience``
with RFC-4180 quoting; region series use ``region,value,area_km2``.

Provider side: the wire contract is
``GET {base_url}/audience?pop={fingerprint}&interest={id}`` answered with
status 200 and body ``{"audience_size": <integer>}``. The client consults a
TTL cache first, throttles request starts with a sliding window, retries
transient failures with exponential backoff, and never returns a partially
fetched table.
"""

from __future__ import annotations

import csv
import json
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .analysis import RegionSeries
from .core import AudienceTable, InterestId, PopulationSpec, validate_table
from .errors import (
    ContractViolation,
    EmptyTable,
    InvalidSpec,
    IoError,
    NegativeAudience,
    ParseError,
    ProviderUnavailable,
)

AUDIENCE_HEADER = ("interest_id", "interest_name", "audience")
REGION_HEADER = ("region", "value", "area_km2")


# -- CSV ----------------------------------------------------------------------

def _read_rows(path: str | Path) -> list[list[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path} is not valid UTF-8: {exc}") from exc


def load_audience_csv(path: str | Path, population: PopulationSpec) -> AudienceTable:
    """Load and validate one population's audience table.

    Raises :class:`ParseError` with the offending line number on malformed
    rows, :class:`NegativeAudience` on negative counts and
    :class:`EmptyTable` on a header-only file.
    """
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != AUDIENCE_HEADER:
        raise ParseError(
            f"expected header {','.join(AUDIENCE_HEADER)!r}", line=1
        )
    counts: dict[InterestId, int] = {}
    seen: dict[str, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", line=lineno)
        raw_id, name, raw_count = row
        if not raw_id:
            raise ParseError("empty interest_id", line=lineno)
        if raw_id in seen:
            raise ParseError(
                f"duplicate interest_id {raw_id!r} (first seen on line {seen[raw_id]})",
                line=lineno,
            )
        seen[raw_id] = lineno
        try:
            count = int(raw_count)
        except ValueError:
            raise ParseError(
                f"audience {raw_count!r} is not a base-10 integer", line=lineno
            ) from None
        if count < 0:
            raise NegativeAudience(
                f"line {lineno}: audience for {raw_id!r} is negative ({count})"
            )
        counts[InterestId(raw_id, name)] = count
    if not counts:
        raise EmptyTable(f"{path} holds a header but no rows")
    return AudienceTable.from_counts(population, counts)


def write_audience_csv(table: AudienceTable, path: str | Path) -> None:
    """Write a table so that loading it back reproduces the same value."""
    table = validate_table(table)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(AUDIENCE_HEADER)
            for interest, count in table.entries.items():
                writer.writerow([interest.id, interest.name, count])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_region_csv(path: str | Path) -> RegionSeries:
    """Load a per-region value series; the area column may be left empty.

    Areas must be given for all regions or for none.
    """
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != REGION_HEADER:
        raise ParseError(f"expected header {','.join(REGION_HEADER)!r}", line=1)
    regions: list[str] = []
    values: list[float] = []
    areas: list[float | None] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", line=lineno)
        region, raw_value, raw_area = row
        if not region:
            raise ParseError("empty region name", line=lineno)
        try:
            values.append(float(raw_value))
        except ValueError:
            raise ParseError(f"value {raw_value!r} is not a number", line=lineno) from None
        if raw_area == "":
            areas.append(None)
        else:
            try:
                areas.append(float(raw_area))
            except ValueError:
                raise ParseError(
                    f"area {raw_area!r} is not a number", line=lineno
                ) from None
        regions.append(region)
    if not regions:
        raise ParseError(f"{path} holds a header but no rows")
    if any(a is None for a in areas) and any(a is not None for a in areas):
        raise ParseError("area_km2 must be given for all regions or none")
    area_tuple = None if areas[0] is None else tuple(areas)
    return RegionSeries(tuple(regions), tuple(values), area_tuple)


# -- provider client ----------------------------------------------------------

# A transport takes a URL and returns (status_code, body). Raising OSError or
# urllib.error.URLError marks the attempt as transient.
Transport = Callable[[str], "tuple[int, bytes]"]

RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ProviderConfig:
    """Connection policy for an audience provider."""

    base_url: str
    max_requests_per_window: int = 10
    window: float = 1.0  # seconds
    max_retries: int = 3  # total attempts per request
    cache_ttl: float = 3600.0  # seconds
    backoff_base: float = 0.1  # first retry delay; doubles per attempt
    timeout: float = 10.0

    def __post_init__(self):
        if self.max_requests_per_window < 1:
            raise InvalidSpec("max_requests_per_window must be >= 1")
        if self.window <= 0:
            raise InvalidSpec("window must be positive")
        if self.max_retries < 1:
            raise InvalidSpec("max_retries must be >= 1")
        if self.cache_ttl < 0:
            raise InvalidSpec("cache_ttl must be non-negative")


@dataclass(frozen=True)
class CacheEntry:
    """One cached audience count, stamped with its fetch time."""

    key: tuple[str, str]  # (population fingerprint, interest id)
    value: int
    fetched_at: float

    def expired(self, now: float, ttl: float) -> bool:
        return now - self.fetched_at > ttl


class AudienceCache:
    """TTL cache keyed by (population fingerprint, interest id); thread-safe."""

    def __init__(self, ttl: float, clock: Callable[[], float] = time.monotonic):
        self._ttl = ttl
        self._clock = clock
        self._entries: dict[tuple[str, str], CacheEntry] = {}
        self._lock = threading.Lock()

    def get(self, key: tuple[str, str]) -> int | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None or entry.expired(self._clock(), self._ttl):
                return None
            return entry.value

    def put(self, key: tuple[str, str], value: int) -> None:
        with self._lock:
            self._entries[key] = CacheEntry(key, value, self._clock())


class RateLimiter:
    """Sliding-window throttle on request starts.

    ``acquire`` blocks until starting a request keeps the count of starts in
    any window of the configured length at or below the maximum. ``observer``
    (if given) is called with each grant timestamp while the lock is held,
    which lets tests and metrics see the exact granted schedule.
    """

    def __init__(
        self,
        max_requests: int,
        window: float,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        observer: Callable[[float], None] | None = None,
    ):
        self._max = max_requests
        self._window = window
        self._clock = clock
        self._sleep = sleep
        self._observer = observer
        self._starts: list[float] = []
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                cutoff = now - self._window
                self._starts = [t for t in self._starts if t > cutoff]
                if len(self._starts) < self._max:
                    self._starts.append(now)
                    if self._observer is not None:
                        self._observer(now)
                    return
                wait = self._starts[0] + self._window - now
            self._sleep(max(wait, 1e-4))


def http_get(url: str, timeout: float = 10.0) -> tuple[int, bytes]:
    """Default transport built on urllib; returns (status, body)."""
    request = urllib.request.Request(url, headers={"Accept": "application/json"})
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.status, response.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


class ProviderClient:
    """Stateful fetcher: shares one cache and one rate limiter across calls.

    Safe for concurrent use from multiple threads; the sliding-window limit
    holds over the union of all threads' requests.
    """

    def __init__(
        self,
        config: ProviderConfig,
        transport: Transport | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        observer: Callable[[float], None] | None = None,
    ):
        self.config = config
        self._transport = transport or (
            lambda url: http_get(url, timeout=config.timeout)
        )
        self._sleep = sleep
        self._cache = AudienceCache(config.cache_ttl, clock)
        self._limiter = RateLimiter(
            config.max_requests_per_window, config.window, clock, sleep, observer
        )
        self._count_lock = threading.Lock()
        self._requests_issued = 0

    @property
    def requests_issued(self) -> int:
        """Network requests actually started (cache hits excluded)."""
        with self._count_lock:
            return self._requests_issued

    def fetch_audience(
        self, population: PopulationSpec, interests: Sequence[InterestId]
    ) -> AudienceTable:
        """Fetch one count per requested interest, all or nothing.

        Raises :class:`ProviderUnavailable` once any interest has failed
        ``max_retries`` attempts, and :class:`ContractViolation` on responses
        that break the wire contract.
        """
        unique = list(dict((i.id, i) for i in interests).values())
        if not unique:
            raise EmptyTable("no interests requested")
        fingerprint = population.fingerprint()
        counts: dict[InterestId, int] = {}
        for interest in unique:
            key = (fingerprint, interest.id)
            cached = self._cache.get(key)
            if cached is None:
                cached = self._fetch_one(fingerprint, interest)
                self._cache.put(key, cached)
            counts[interest] = cached
        return AudienceTable.from_counts(population, counts)

    def _url(self, fingerprint: str, interest: InterestId) -> str:
        query = urllib.parse.urlencode({"pop": fingerprint, "interest": interest.id})
        return f"{self.config.base_url.rstrip('/')}/audience?{query}"

    def _fetch_one(self, fingerprint: str, interest: InterestId) -> int:
        url = self._url(fingerprint, interest)
        attempts = self.config.max_retries
        last_failure = "no attempt made"
        for attempt in range(attempts):
            self._limiter.acquire()
            with self._count_lock:
                self._requests_issued += 1
            try:
                status, body = self._transport(url)
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last_failure = f"transport error: {exc}"
            else:
                if status == 200:
                    return self._parse_body(body, interest)
                if status not in RETRYABLE_STATUSES:
                    raise ContractViolation(
                        f"unexpected status {status} for interest {interest.id!r}"
                    )
                last_failure = f"status {status}"
            if attempt + 1 < attempts:
                self._sleep(self.config.backoff_base * 2**attempt)
        raise ProviderUnavailable(
            f"interest {interest.id!r} failed after {attempts} attempt(s); "
            f"last failure: {last_failure}"
        )

    @staticmethod
    def _parse_body(body: bytes, interest: InterestId) -> int:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ContractViolation(
                f"response for {interest.id!r} is not JSON: {exc}"
            ) from exc
        if not isinstance(payload, dict) or "audience_size" not in payload:
            raise ContractViolation(
                f"response for {interest.id!r} lacks 'audience_size'"
            )
        size = payload["audience_size"]
        if not isinstance(size, int) or isinstance(size, bool) or size < 0:
            raise ContractViolation(
                f"audience_size for {interest.id!r} must be a non-negative "
                f"integer, got {size!r}"
            )
        return size


def fetch_audience(
    provider: ProviderConfig | ProviderClient,
    population: PopulationSpec,
    interests: Iterable[InterestId],
) -> AudienceTable:
    """One-shot fetch. Pass a :class:`ProviderClient` to reuse cache state."""
    client = (
        provider if isinstance(provider, ProviderClient) else ProviderClient(provider)
    )
    return client.fetch_audience(population, list(interests))
