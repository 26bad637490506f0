"""Revenue attribution from conversion-value counts.

The plain estimator credits each campaign with count times the bucket's mean
revenue; it is the expected last-click revenue when users within a bucket
are exchangeable, and it minimizes expected squared attribution error. When
privacy suppression hides rows, the suppressed mass is redistributed by a
per-campaign weight that mixes a uniform share (1/beta over all campaign
columns, organic included) with the empirical distribution of the null row;
the mixing weight lambda spans the uniform (0) and null-based (1) endpoints,
and the optimal redistribution always lies on that segment.

Computation is exact: means are Fractions of integer cents, and rounding
happens only when reports are emitted. The conservation identity
sum_over_campaigns(attributed) == sum_over_values(mean * total) holds
exactly for any lambda and any threshold.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import ConfigError, MissingProfileError
from .model import CampaignKey, UserRecord, revenue_between
from .postback import CountMatrix, Postback
from .schema import VALUE_RANGE

ATTRIBUTION_MODES = ("plain", "null_uniform", "null_empirical", "null_convex")


@dataclass(frozen=True)
class RevenueProfile:
    """Developer-side revenue summary per conversion value.

    ``means`` holds the exact average window revenue (cents) of users with
    each final value; ``totals`` the user counts behind those averages.
    Means are fitted globally; per-cell attribution swaps in that cell's
    totals via ``with_totals`` so suppressed rows redistribute exactly the
    users the cell contains.
    """

    window_days: int
    means: Mapping[int, Fraction]
    totals: Mapping[int, int]

    def __post_init__(self) -> None:
        for v, n in self.totals.items():
            if n < 0:
                raise ConfigError(f"negative total for value {v}")

    def with_totals(self, totals: Mapping[int, int]) -> RevenueProfile:
        return replace(self, totals=totals)

    def total_revenue(self) -> Fraction:
        """Exact sum of mean * total over all values (cents)."""
        acc = Fraction(0)
        for v, n in self.totals.items():
            if n:
                acc += self.means[v] * n
        return acc


def estimate_bucket_means_window(
    users: Iterable[UserRecord],
    postbacks: Iterable[Postback] | Mapping[int, Postback],
    lo_day: int,
    hi_day: int,
) -> RevenueProfile:
    """Group users by final conversion value; exact means of window revenue."""
    if isinstance(postbacks, Mapping):
        final = {uid: pb.final_value for uid, pb in postbacks.items()}
    else:
        final = {pb.user_id: pb.final_value for pb in postbacks}
    sums: dict[int, int] = {}
    counts: dict[int, int] = {}
    for u in users:
        v = final.get(u.id)
        if v is None:
            continue
        sums[v] = sums.get(v, 0) + revenue_between(u, lo_day, hi_day)
        counts[v] = counts.get(v, 0) + 1
    means = {v: Fraction(sums[v], counts[v]) for v in sorted(counts)}
    return RevenueProfile(window_days=hi_day, means=means, totals=dict(sorted(counts.items())))


def estimate_bucket_means(
    users: Iterable[UserRecord],
    postbacks: Iterable[Postback] | Mapping[int, Postback],
    t: int,
) -> RevenueProfile:
    """Revenue profile over the first ``t`` days (the developer-side table)."""
    return estimate_bucket_means_window(users, postbacks, 0, t)


@dataclass(frozen=True)
class AttributionFunction:
    """Choice of estimator: plain, or a null redistribution with weight lambda.

    ``null_uniform`` is the lambda=0 endpoint, ``null_empirical`` lambda=1;
    ``null_convex`` takes lambda from the field. ``beta_count`` is the number
    of campaign columns (organic included) behind the uniform share; when
    None it is taken from the matrix.
    """

    mode: str
    lam: float = 0.0
    beta_count: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ATTRIBUTION_MODES:
            raise ConfigError(f"unknown attribution mode {self.mode!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.beta_count is not None and self.beta_count < 1:
            raise ConfigError("beta_count must be at least 1")

    @property
    def effective_lambda(self) -> float:
        if self.mode == "null_uniform":
            return 0.0
        if self.mode == "null_empirical":
            return 1.0
        return self.lam

    @property
    def label(self) -> str:
        if self.mode == "null_convex":
            return f"null_convex:{self.effective_lambda:g}"
        return self.mode


def _row_mean(profile: RevenueProfile, v: int, context: str) -> Fraction:
    mean = profile.means.get(v)
    if mean is None:
        raise MissingProfileError(f"no revenue profile for value {v} ({context})")
    return mean


def attribute_plain(matrix: CountMatrix, profile: RevenueProfile) -> dict[CampaignKey, Fraction]:
    """Optimal attribution without suppression: count times bucket mean.

    Accepts a privatized matrix only when its null row carries no users
    (thresholds below 2 fold nothing), since a loaded null row would need
    the null-aware estimator.
    """
    if matrix.privacy_applied and sum(matrix.null_row) > 0:
        raise ConfigError("matrix has a loaded null row; use attribute_with_null")
    out: dict[CampaignKey, Fraction] = {k: Fraction(0) for k in matrix.columns}
    for v in range(VALUE_RANGE):
        if v in matrix.suppressed:
            continue  # provably empty: its counts fold to a zero null row
        row = matrix.rows[v]
        if not any(row):
            continue
        mean = _row_mean(profile, v, f"{matrix.group}, {matrix.week}")
        for j, count in enumerate(row):
            if count:
                out[matrix.columns[j]] += count * mean
    return out


def attribute_with_null(
    matrix: CountMatrix,
    profile: RevenueProfile,
    fn: AttributionFunction,
) -> dict[CampaignKey, Fraction]:
    """Null-aware attribution over a privatized matrix.

    Visible cells contribute count times mean. Each suppressed value row
    contributes mean * weight_j * total users with that value, where the
    per-column weight is (1 - lambda)/beta + lambda * null_j / sum(null).
    An empty null row falls back to the uniform weight regardless of lambda.
    ``profile.totals`` are the developer-side counts for this matrix's
    scope; a value absent from the map has no users, and the map must cover
    at least the mass the null row proves was folded.
    """
    if not matrix.privacy_applied:
        raise ConfigError("matrix is not privatized; use attribute_plain")
    if fn.mode == "plain":
        return attribute_plain(matrix, profile)
    n = len(matrix.columns)
    beta = fn.beta_count if fn.beta_count is not None else n
    lam = Fraction(fn.effective_lambda)
    null_row = matrix.null_row
    null_sum = sum(null_row)
    if null_sum == 0:
        weights = [Fraction(1, beta)] * n
    else:
        uniform = (1 - lam) / beta
        weights = [uniform + lam * Fraction(null_row[j], null_sum) for j in range(n)]

    covered = sum(profile.totals.get(v, 0) for v in matrix.suppressed)
    if covered < null_sum:
        raise MissingProfileError(
            f"developer totals cover {covered} suppressed users but the null row "
            f"folded {null_sum} ({matrix.group}, {matrix.week})"
        )

    out: dict[CampaignKey, Fraction] = {k: Fraction(0) for k in matrix.columns}
    context = f"{matrix.group}, {matrix.week}"
    for v in range(VALUE_RANGE):
        if v in matrix.suppressed:
            total = profile.totals.get(v, 0)
            if total == 0:
                continue
            mean = _row_mean(profile, v, context)
            for j in range(n):
                out[matrix.columns[j]] += mean * weights[j] * total
        else:
            row = matrix.rows[v]
            if not any(row):
                continue
            mean = _row_mean(profile, v, context)
            for j, count in enumerate(row):
                if count:
                    out[matrix.columns[j]] += count * mean
    return out
