"""Shared orchestration: traces -> postbacks -> matrices -> attribution inputs.

Both the stage-wise CLI commands and the benchmark grid go through these
helpers, so splitting a run into stages and running it end to end produce
identical numbers for the same seed. Postback delay randomness comes from
the per-user substream (seed, "postback", user_id); UD schemas without an
explicit seed get the derived substream seed (seed, "ud").
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from datetime import datetime

from .errors import ConfigError
from .model import CampaignKey, UserRecord, cumulative_revenue, iso_week, organic_key
from .postback import (
    CountMatrix,
    Postback,
    build_counts,
    empty_matrix,
    estimate_organic,
    finalize_postback,
    paid_campaigns,
)
from .rng import hash64, substream
from .schema import (
    VALUE_RANGE,
    SchemaSpec,
    _PreppedUser,
    fit_buckets,
    prepare_users,
    simulate_traces,
)

CellKey = tuple[str, str]  # (group, week)


def resolve_organic(users: Iterable[UserRecord], override: int | None = None) -> CampaignKey:
    """The dataset's organic sentinel key.

    Prefers the sentinel actually present on organic users; otherwise the
    override, and as a last resort one past the largest paid alpha.
    """
    organics = {u.origin for u in users if u.origin.organic}
    if len(organics) > 1:
        raise ConfigError(f"dataset mixes organic sentinels: {sorted(k.alpha for k in organics)}")
    if organics:
        found = next(iter(organics))
        if override is not None and override != found.alpha:
            raise ConfigError(
                f"organic sentinel {override} does not match the dataset's {found.alpha}"
            )
        return found
    if override is not None:
        return organic_key(override)
    max_alpha = max((u.origin.alpha for u in users), default=-1)
    return organic_key(max_alpha + 1)


def resolve_schema(schema: SchemaSpec, users: Sequence[UserRecord], seed: int) -> SchemaSpec:
    """Fit bucket boundaries and inject the derived UD seed where needed."""
    if schema.kind == "UD" and schema.seed is None:
        schema = replace(schema, seed=hash64(seed, "ud") & 0x7FFFFFFF)
    if schema.needs_boundaries() and schema.bucket_boundaries is None:
        horizon = schema.horizon_days
        schema = fit_buckets(users, schema, lambda u: cumulative_revenue(u, horizon))
    return schema


def simulate_postbacks(
    users: Sequence[UserRecord],
    schema: SchemaSpec,
    seed: int,
    horizon: datetime | None = None,
    prepared: dict[int, _PreppedUser] | None = None,
) -> dict[int, Postback]:
    """One postback per user (organic users included: the developer's view).

    Users whose postback would land after ``horizon`` are excluded entirely;
    they count neither in matrices nor in ground truth.
    """
    traces = simulate_traces(users, schema, prepared)
    by_group = {u.id: u.group for u in users}
    out: dict[int, Postback] = {}
    for uid in sorted(traces):
        pb = finalize_postback(traces[uid], substream(seed, "postback", uid), by_group[uid])
        if horizon is not None and pb.postback_time > horizon:
            continue
        out[uid] = pb
    return out


def cell_of(pb: Postback) -> CellKey:
    return (pb.group, iso_week(pb.postback_time.date()))


def developer_totals(postbacks: Mapping[int, Postback]) -> dict[CellKey, dict[int, int]]:
    """Per-(group, week) user counts per conversion value, all origins.

    Every cell carries entries for all 64 values (zeros included) so the
    null-aware estimator can distinguish "no users" from "missing data".
    """
    totals: dict[CellKey, dict[int, int]] = {}
    for pb in postbacks.values():
        cell = cell_of(pb)
        if cell not in totals:
            totals[cell] = dict.fromkeys(range(VALUE_RANGE), 0)
        totals[cell][pb.final_value] += 1
    return totals


def build_cell_matrices(
    users: Sequence[UserRecord],
    postbacks: Mapping[int, Postback],
    organic: CampaignKey | None = None,
    campaigns: Sequence[CampaignKey] | None = None,
) -> dict[CellKey, CountMatrix]:
    """Pre-privacy matrices with the organic column, one per (group, week)."""
    if organic is None:
        organic = resolve_organic(users)
    if campaigns is None:
        campaigns = paid_campaigns(users)
    paid = build_counts(postbacks.values(), users, campaigns)
    totals = developer_totals(postbacks)
    out: dict[CellKey, CountMatrix] = {}
    for cell in sorted(totals):
        matrix = paid.get(cell)
        if matrix is None:
            matrix = empty_matrix(cell[0], cell[1], campaigns)
        out[cell] = estimate_organic(matrix, totals[cell], organic)
    return out


@dataclass(frozen=True)
class SimArtifacts:
    """Everything downstream stages need from one schema simulation."""

    schema: SchemaSpec
    postbacks: dict[int, Postback]
    matrices: dict[CellKey, CountMatrix]
    cell_totals: dict[CellKey, dict[int, int]]
    organic: CampaignKey
    campaigns: tuple[CampaignKey, ...]

    @property
    def columns(self) -> tuple[CampaignKey, ...]:
        return self.campaigns + (self.organic,)


def run_schema(
    users: Sequence[UserRecord],
    schema: SchemaSpec,
    seed: int,
    horizon: datetime | None = None,
    prepared: dict[int, _PreppedUser] | None = None,
    organic: CampaignKey | None = None,
    campaigns: Sequence[CampaignKey] | None = None,
) -> SimArtifacts:
    """Fit, simulate and aggregate one schema over the dataset."""
    if organic is None:
        organic = resolve_organic(users)
    if campaigns is None:
        campaigns = paid_campaigns(users)
    if prepared is None:
        prepared = prepare_users(users)
    fitted = resolve_schema(schema, users, seed)
    postbacks = simulate_postbacks(users, fitted, seed, horizon, prepared)
    totals = developer_totals(postbacks)
    matrices = build_cell_matrices(users, postbacks, organic, campaigns)
    return SimArtifacts(
        schema=fitted,
        postbacks=postbacks,
        matrices=matrices,
        cell_totals=totals,
        organic=organic,
        campaigns=tuple(campaigns),
    )
