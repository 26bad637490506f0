"""Core domain types: campaign keys, users, events, ground truth.

Money is integer USD cents everywhere. Revenue windows are half-open in
whole days from the registration date: a purchase exactly ``t`` days after
registration midnight falls outside ``[0, t)``. Weeks are ISO year-weeks
(Monday start). All types are immutable after construction; operations are
pure functions.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta

from .errors import ConfigError, InvalidCampaignError, MaturityError, OrganicKeyError

SECONDS_PER_DAY = 86_400

SESSION = "session"
PURCHASE = "purchase"
FLAG = "flag"
EVENT_KINDS = (SESSION, PURCHASE, FLAG)


@dataclass(frozen=True, slots=True, order=True)
class CampaignKey:
    """Combined network/campaign id, or the organic sentinel.

    Paid keys satisfy ``alpha = 100 * network + campaign`` with the campaign
    part restricted to [0, 99]. The organic sentinel is a distinct key that
    decodes to neither a network nor a campaign.
    """

    alpha: int
    organic: bool = False

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise InvalidCampaignError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def network(self) -> int:
        if self.organic:
            raise OrganicKeyError("organic key has no network id")
        return self.alpha // 100

    @property
    def campaign(self) -> int:
        if self.organic:
            raise OrganicKeyError("organic key has no campaign id")
        return self.alpha % 100

    def __str__(self) -> str:
        return f"{self.alpha}*" if self.organic else str(self.alpha)


def encode_alpha(network: int, campaign: int) -> CampaignKey:
    """Combine a network id and a campaign id into one key.

    Each network carries at most 100 campaigns, so the campaign part must
    lie in [0, 99].
    """
    if not 0 <= campaign <= 99:
        raise InvalidCampaignError(f"campaign id must be in [0, 99], got {campaign}")
    if network < 0:
        raise InvalidCampaignError(f"network id must be >= 0, got {network}")
    return CampaignKey(100 * network + campaign)


def decode_alpha(key: CampaignKey | int) -> tuple[int, int]:
    """Split a combined key back into (network, campaign)."""
    if isinstance(key, int):
        key = CampaignKey(key)
    return key.network, key.campaign


def organic_key(alpha: int) -> CampaignKey:
    """Build the organic sentinel key with the given numeric encoding."""
    return CampaignKey(alpha, organic=True)


@dataclass(frozen=True, slots=True)
class Event:
    """One user event: a session, a purchase (amount in cents), or a flag."""

    timestamp: datetime
    kind: str
    amount: int | None = None
    flag_index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if self.kind == PURCHASE:
            if self.amount is None or self.amount <= 0:
                raise ConfigError("purchase amount must be a positive cent count")
            if self.flag_index is not None:
                raise ConfigError("purchase events carry no flag_index")
        elif self.kind == FLAG:
            if self.flag_index is None or not 0 <= self.flag_index <= 5:
                raise ConfigError("flag_index must be in [0, 5]")
            if self.amount is not None:
                raise ConfigError("flag events carry no amount")
        else:
            if self.amount is not None or self.flag_index is not None:
                raise ConfigError("session events carry no amount or flag_index")


@dataclass(frozen=True)
class UserRecord:
    """One user: registration date, true origin, event stream, group label.

    Events must be non-decreasing in time and start no earlier than
    registration midnight. Origin is unique per user (last-click semantics).
    """

    id: int
    registration_date: date
    origin: CampaignKey
    events: tuple[Event, ...]
    group: str

    def __post_init__(self) -> None:
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))
        start = self.registration_instant
        prev = start
        for e in self.events:
            if e.timestamp < prev:
                raise ConfigError(
                    f"user {self.id}: events out of order at {e.timestamp.isoformat()}"
                )
            prev = e.timestamp
        if self.events and self.events[0].timestamp < start:
            raise ConfigError(f"user {self.id}: event precedes registration")

    @property
    def registration_instant(self) -> datetime:
        return datetime.combine(self.registration_date, time.min)


def day_offset(user: UserRecord, at: datetime) -> int:
    """Whole calendar days between the registration date and ``at``."""
    return (at.date() - user.registration_date).days


def revenue_between(user: UserRecord, lo_day: int, hi_day: int) -> int:
    """Purchase cents with day offset in [lo_day, hi_day)."""
    if lo_day < 0 or hi_day < lo_day:
        raise ConfigError(f"invalid revenue window [{lo_day}, {hi_day})")
    total = 0
    for e in user.events:
        if e.kind == PURCHASE and lo_day <= day_offset(user, e.timestamp) < hi_day:
            total += e.amount
    return total


def cumulative_revenue(user: UserRecord, t: int) -> int:
    """Revenue in the user's first ``t`` days (cents); 0 for no purchases."""
    if t < 0:
        raise ConfigError(f"window days must be >= 0, got {t}")
    return revenue_between(user, 0, t)


def revenue_at_days(user: UserRecord, days: Iterable[int]) -> dict[int, int]:
    """Cumulative revenue at several day horizons in one pass."""
    marks = sorted(set(days))
    if marks and marks[0] < 0:
        raise ConfigError("day horizons must be >= 0")
    out = dict.fromkeys(marks, 0)
    for e in user.events:
        if e.kind != PURCHASE:
            continue
        d = day_offset(user, e.timestamp)
        for m in marks:
            if d < m:
                out[m] += e.amount
    return out


def iso_week(d: date) -> str:
    """ISO year-week key, Monday start, e.g. '2024-W05'."""
    y, w, _ = d.isocalendar()
    return f"{y:04d}-W{w:02d}"


def week_start(d: date) -> date:
    """Monday of the ISO week containing ``d``."""
    return d - timedelta(days=d.isoweekday() - 1)


@dataclass(frozen=True)
class GroundTruth:
    """Last-click revenue per (group, week, origin) over a fixed window."""

    values: Mapping[tuple[str, str, CampaignKey], int]
    window_days: int

    def total(self) -> int:
        return sum(self.values.values())


def ground_truth(
    users: Iterable[UserRecord],
    t: int,
    week_of: Callable[[UserRecord], str],
    evaluation_date: date | None = None,
) -> GroundTruth:
    """Aggregate each user's first-``t``-day revenue onto their true origin.

    ``week_of`` maps a user to the reporting week so truth and simulated
    counts share the same cohort keying. When ``evaluation_date`` is given,
    users registered after ``evaluation_date - t`` raise MaturityError: their
    window revenue is not yet observable.
    """
    values: dict[tuple[str, str, CampaignKey], int] = {}
    for u in users:
        if evaluation_date is not None and u.registration_date > evaluation_date - timedelta(days=t):
            raise MaturityError(
                f"user {u.id} registered {u.registration_date.isoformat()} is not "
                f"mature for a {t}-day window at {evaluation_date.isoformat()}"
            )
        cell = (u.group, week_of(u), u.origin)
        values[cell] = values.get(cell, 0) + cumulative_revenue(u, t)
    return GroundTruth(values=values, window_days=t)


def usd(cents: int | float) -> str:
    """Render integer cents as a USD decimal string."""
    c = round(cents)
    sign = "-" if c < 0 else ""
    c = abs(c)
    return f"{sign}{c // 100}.{c % 100:02d}"
