"""Conversion-value schemas and per-user update traces.

A schema maps a user's observable state to a 6-bit value in [0, 63]. Five
kinds are supported:

* EV -- six boolean action flags observed on the registration day only.
* RR -- time bits (most significant) plus quantile buckets of rolling revenue.
* RI -- time bits plus the clamped rolling purchase count.
* UD -- a fixed uniform draw per user, reproducible from (seed, user id).
* PV -- quantile bucket of the user's full-horizon revenue (omniscient; uses
  future data, flagged as hypothetical in reports).

Traces follow the platform update rules: the value is committed at first
open, a later event commits only a strictly greater value and only while it
arrives within 24h of the previous commit (each commit resets the timer;
non-commits do not). Once 24h pass without a commit the trace is final.
Day indices are calendar-day offsets from the registration date; the 24h
activity timer uses elapsed time.
"""

from __future__ import annotations

from bisect import bisect_left
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from datetime import datetime

from .errors import ConfigError, DegenerateFitError, LayoutError
from .model import (
    FLAG,
    PURCHASE,
    SECONDS_PER_DAY,
    SESSION,
    UserRecord,
    cumulative_revenue,
    day_offset,
)
from .rng import uniform_value

SCHEMA_KINDS = ("EV", "RR", "RI", "UD", "PV")
VALUE_RANGE = 64  # 6 bits
COMMIT_WINDOW_SECONDS = float(SECONDS_PER_DAY)


@dataclass(frozen=True, slots=True)
class BitLayout:
    """Six bit roles, most-significant first, from {T, V, C}.

    Time bits, when present, must form the most-significant prefix so that
    day increments always raise the value regardless of the low bits.
    """

    bits: str

    def __post_init__(self) -> None:
        if len(self.bits) != 6:
            raise LayoutError(f"layout must have exactly 6 bits, got {self.bits!r}")
        if any(ch not in "TVC" for ch in self.bits):
            raise LayoutError(f"layout characters must be T, V or C, got {self.bits!r}")
        n_t = self.bits.count("T")
        if n_t and self.bits[:n_t] != "T" * n_t:
            raise LayoutError(f"T bits must be a most-significant prefix, got {self.bits!r}")

    @property
    def n_t(self) -> int:
        return self.bits.count("T")

    @property
    def n_v(self) -> int:
        return self.bits.count("V")

    @property
    def n_c(self) -> int:
        return self.bits.count("C")

    def __str__(self) -> str:
        return self.bits


def parse_layout(spec: str) -> BitLayout:
    """Parse a layout string such as 'TTTVVV'."""
    if not isinstance(spec, str):
        raise LayoutError(f"layout must be a string, got {type(spec).__name__}")
    return BitLayout(spec.upper())


@dataclass(frozen=True)
class SchemaSpec:
    """A conversion-value schema: kind, bit layout, fitted boundaries.

    ``bucket_boundaries`` (cents, one per inter-bucket cut) apply to the V
    bits; bucket 0 is reserved for non-spenders. ``horizon_days`` is the day
    span of the T bits for RR/RI and the revenue horizon for PV. ``seed``
    drives the per-user draw for UD only.
    """

    kind: str
    layout: BitLayout | None = None
    horizon_days: int = 0
    bucket_boundaries: tuple[int, ...] | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in SCHEMA_KINDS:
            raise ConfigError(f"unknown schema kind {self.kind!r}")
        if self.bucket_boundaries is not None:
            bb = tuple(self.bucket_boundaries)
            object.__setattr__(self, "bucket_boundaries", bb)
            if any(b <= 0 for b in bb):
                raise ConfigError("bucket boundaries must be positive cents")
            if any(b2 < b1 for b1, b2 in zip(bb, bb[1:])):
                raise ConfigError("bucket boundaries must be ascending")
        if self.kind == "EV":
            if self.layout is None:
                object.__setattr__(self, "layout", BitLayout("CCCCCC"))
            elif self.layout.bits != "CCCCCC":
                raise ConfigError("EV requires the CCCCCC layout")
        elif self.kind == "PV":
            if self.layout is None:
                object.__setattr__(self, "layout", BitLayout("VVVVVV"))
            elif self.layout.bits != "VVVVVV":
                raise ConfigError("PV requires the VVVVVV layout")
            if self.horizon_days < 1:
                raise ConfigError("PV requires a revenue horizon of at least one day")
        elif self.kind in ("RR", "RI"):
            lay = self.layout
            if lay is None:
                raise ConfigError(f"{self.kind} requires an explicit layout")
            low = "V" if self.kind == "RR" else "C"
            if lay.n_t < 1 or lay.bits != "T" * lay.n_t + low * (6 - lay.n_t):
                raise ConfigError(
                    f"{self.kind} layout must be a T prefix followed by {low} bits, got {lay.bits!r}"
                )
            if self.horizon_days != 2 ** lay.n_t - 1:
                raise ConfigError(
                    f"{self.kind} horizon must be 2**n_t - 1 = {2 ** lay.n_t - 1} "
                    f"for {lay.bits!r}, got {self.horizon_days}"
                )
        # UD ignores layout and boundaries entirely.

    @property
    def n_value_bits(self) -> int:
        return self.layout.n_v if self.layout is not None else 0

    @property
    def n_spender_buckets(self) -> int:
        return 2 ** self.n_value_bits - 1

    @property
    def label(self) -> str:
        if self.kind in ("EV", "UD"):
            return self.kind
        return f"D{self.horizon_days} {self.kind}"

    def needs_boundaries(self) -> bool:
        return self.kind in ("RR", "PV")


def schema_from_text(text: str) -> SchemaSpec:
    """Parse 'kind=RR;layout=TTTVVV;horizon=7[;seed=N]' into a SchemaSpec."""
    fields: dict[str, str] = {}
    for part in text.strip().split(";"):
        if not part:
            continue
        if "=" not in part:
            raise LayoutError(f"schema text part {part!r} is not key=value")
        k, v = part.split("=", 1)
        fields[k.strip().lower()] = v.strip()
    if "kind" not in fields:
        raise LayoutError(f"schema text {text!r} lacks kind=")
    kind = fields.pop("kind").upper()
    layout = parse_layout(fields.pop("layout")) if "layout" in fields else None
    try:
        horizon = int(fields.pop("horizon", "0"))
        seed = int(fields.pop("seed")) if "seed" in fields else None
    except ValueError as exc:
        raise LayoutError(f"schema text {text!r}: {exc}") from exc
    if fields:
        raise LayoutError(f"schema text has unknown keys {sorted(fields)}")
    return SchemaSpec(kind=kind, layout=layout, horizon_days=horizon, seed=seed)


def schema_to_text(schema: SchemaSpec) -> str:
    """Canonical text form of a schema (inverse of schema_from_text)."""
    parts = [f"kind={schema.kind}"]
    if schema.kind != "UD" and schema.layout is not None:
        parts.append(f"layout={schema.layout.bits}")
    if schema.horizon_days:
        parts.append(f"horizon={schema.horizon_days}")
    if schema.seed is not None:
        parts.append(f"seed={schema.seed}")
    return ";".join(parts)


def bucket_of(amount: int, boundaries: Sequence[int]) -> int:
    """Spender bucket for a revenue amount; 0 is reserved for non-spenders.

    A value strictly greater than boundary k lands in bucket k+1, so ties
    fall into the lower bucket.
    """
    if amount <= 0:
        return 0
    return 1 + bisect_left(boundaries, amount)


def fit_buckets(
    users: Iterable[UserRecord],
    schema: SchemaSpec,
    revenue_fn: Callable[[UserRecord], int],
) -> SchemaSpec:
    """Fit the V-bit bucket boundaries to the spender revenue distribution.

    Boundaries are the k/(2**b - 1) quantiles (k = 1 .. 2**b - 2) of the
    positive revenues under ``revenue_fn``, so spenders spread uniformly
    over the 2**b - 1 non-zero buckets and non-spenders map to bucket 0.
    """
    b = schema.n_value_bits
    if b < 1:
        raise ConfigError(f"schema {schema.label} has no value bits to fit")
    spends = sorted(r for u in users if (r := revenue_fn(u)) > 0)
    if not spends:
        raise DegenerateFitError("no spenders in population; buckets cannot be fitted")
    m = 2**b - 1
    n = len(spends)
    boundaries = tuple(spends[-(-k * n // m) - 1] for k in range(1, m))
    return replace(schema, bucket_boundaries=boundaries)


def _clamp_day(schema: SchemaSpec, day: int) -> int:
    cap = min(schema.horizon_days, 2 ** schema.layout.n_t - 1)
    return max(0, min(day, cap))


def _require_boundaries(schema: SchemaSpec) -> tuple[int, ...]:
    if schema.bucket_boundaries is None:
        raise ConfigError(f"schema {schema.label} has no fitted bucket boundaries")
    return schema.bucket_boundaries


def candidate_value(user: UserRecord, schema: SchemaSpec, at: datetime) -> int:
    """The value the schema would assign at instant ``at``.

    Considers events with timestamp <= ``at``. EV honors flags on the
    registration day only; RR/RI place the clamped day offset in the T bits
    and the revenue bucket / purchase count in the low bits; UD is the fixed
    per-user draw; PV is the full-horizon revenue bucket regardless of
    ``at``.
    """
    if at < user.registration_instant:
        raise ConfigError("candidate instant precedes registration")
    kind = schema.kind
    if kind == "UD":
        if schema.seed is None:
            raise ConfigError("UD schema needs a seed")
        return uniform_value(schema.seed, "ud", user.id)
    if kind == "PV":
        return bucket_of(cumulative_revenue(user, schema.horizon_days), _require_boundaries(schema))
    if kind == "EV":
        flags = 0
        for e in user.events:
            if e.timestamp > at:
                break
            if e.kind == FLAG and day_offset(user, e.timestamp) == 0:
                flags |= 1 << e.flag_index
        return flags
    # RR / RI share the rolling structure.
    revenue = 0
    purchases = 0
    for e in user.events:
        if e.timestamp > at:
            break
        if e.kind == PURCHASE:
            revenue += e.amount
            purchases += 1
    n_low = 6 - schema.layout.n_t
    day = _clamp_day(schema, day_offset(user, at))
    if kind == "RR":
        low = min(bucket_of(revenue, _require_boundaries(schema)), 2**n_low - 1)
    else:
        low = min(purchases, 2**n_low - 1)
    return (day << n_low) | low


@dataclass(frozen=True)
class UpdateTrace:
    """Committed conversion-value updates for one user.

    Values are strictly increasing, consecutive commits are at most 24h
    apart, and the first entry is the first-open assignment.
    """

    user_id: int
    committed: tuple[tuple[datetime, int], ...]
    first_open: datetime

    def __post_init__(self) -> None:
        if not self.committed:
            raise ConfigError("a trace must contain the first-open commit")
        if self.committed[0][0] != self.first_open:
            raise ConfigError("first commit must be at first open")
        prev_ts, prev_v = self.committed[0]
        if not 0 <= prev_v < VALUE_RANGE:
            raise ConfigError(f"conversion value {prev_v} out of range")
        for ts, v in self.committed[1:]:
            if not 0 <= v < VALUE_RANGE:
                raise ConfigError(f"conversion value {v} out of range")
            if v <= prev_v:
                raise ConfigError("committed values must be strictly increasing")
            gap = (ts - prev_ts).total_seconds()
            if gap < 0 or gap > COMMIT_WINDOW_SECONDS:
                raise ConfigError("consecutive commits must be at most 24h apart")
            prev_ts, prev_v = ts, v

    @property
    def final_value(self) -> int:
        return self.committed[-1][1]

    @property
    def last_commit(self) -> datetime:
        return self.committed[-1][0]


@dataclass(frozen=True)
class _PreppedUser:
    """Schema-independent event digest: one entry per distinct instant."""

    user: UserRecord
    # (seconds since registration midnight, instant, purchase cents, purchase
    #  count, day-0 flag bits) aggregated over simultaneous events.
    groups: tuple[tuple[float, datetime, int, int, int], ...] = field(repr=False)


def prepare_user(user: UserRecord) -> _PreppedUser:
    if not user.events or user.events[0].kind != SESSION:
        raise ConfigError(f"user {user.id} lacks a first-open session event")
    start = user.registration_instant
    groups: list[tuple[float, datetime, int, int, int]] = []
    for e in user.events:
        sec = (e.timestamp - start).total_seconds()
        amount = e.amount if e.kind == PURCHASE else 0
        n_purch = 1 if e.kind == PURCHASE else 0
        flags = 0
        if e.kind == FLAG and sec < SECONDS_PER_DAY:
            flags = 1 << e.flag_index
        if groups and groups[-1][0] == sec:
            _, ts, a, n, f = groups[-1]
            groups[-1] = (sec, ts, a + amount, n + n_purch, f | flags)
        else:
            groups.append((sec, e.timestamp, amount, n_purch, flags))
    return _PreppedUser(user=user, groups=tuple(groups))


def simulate_updates(
    user: UserRecord, schema: SchemaSpec, prepped: _PreppedUser | None = None
) -> UpdateTrace:
    """Replay a user's events through the platform update rules.

    Simultaneous events are absorbed before the candidate is evaluated, so
    at most one commit happens per distinct instant. Iteration stops at the
    first event past the 24h commit window: the trace is final from there.
    """
    if prepped is None:
        prepped = prepare_user(user)
    groups = prepped.groups
    kind = schema.kind

    if kind in ("UD", "PV"):
        # Constant candidates: committed once at first open, never raised.
        value = candidate_value(user, schema, groups[0][1])
        return UpdateTrace(user.id, ((groups[0][1], value),), groups[0][1])

    if kind == "RR":
        boundaries = _require_boundaries(schema)
    n_low = 6 - schema.layout.n_t if kind in ("RR", "RI") else 0
    low_cap = 2**n_low - 1
    day_cap = min(schema.horizon_days, 2 ** schema.layout.n_t - 1) if n_low else 0

    revenue = 0
    purchases = 0
    flags = 0
    committed: list[tuple[datetime, int]] = []
    last_sec = 0.0
    current = -1
    for sec, ts, amount, n_purch, fbits in groups:
        if committed and sec - last_sec > COMMIT_WINDOW_SECONDS:
            break
        revenue += amount
        purchases += n_purch
        flags |= fbits
        if kind == "EV":
            cand = flags
        elif kind == "RR":
            day = min(int(sec) // SECONDS_PER_DAY, day_cap)
            cand = (day << n_low) | min(bucket_of(revenue, boundaries), low_cap)
        else:  # RI
            day = min(int(sec) // SECONDS_PER_DAY, day_cap)
            cand = (day << n_low) | min(purchases, low_cap)
        if not committed:
            committed.append((ts, cand))
            current = cand
            last_sec = sec
        elif cand > current:
            committed.append((ts, cand))
            current = cand
            last_sec = sec
    return UpdateTrace(user.id, tuple(committed), groups[0][1])


def simulate_traces(
    users: Iterable[UserRecord],
    schema: SchemaSpec,
    prepared: dict[int, _PreppedUser] | None = None,
) -> dict[int, UpdateTrace]:
    """Simulate every user's trace; ``prepared`` may be reused across schemas."""
    out: dict[int, UpdateTrace] = {}
    for u in users:
        prepped = prepared.get(u.id) if prepared is not None else None
        out[u.id] = simulate_updates(u, schema, prepped)
    return out


def prepare_users(users: Iterable[UserRecord]) -> dict[int, _PreppedUser]:
    """Precompute the per-user event digest shared by all schema runs."""
    return {u.id: prepare_user(u) for u in users}
