"""Attribution error metrics, the benchmark grid, and the window curve.

The weekly error is the Euclidean distance between attributed and actual
revenue vectors over campaigns (square root of the summed squared gaps), so
it carries money units. Weeks aggregate by a revenue-weighted average and
grids normalize against the omniscient-schema baseline per privacy level:
100 * (1 - err / baseline_err), positive is better than baseline.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime

from .attribution import (
    AttributionFunction,
    RevenueProfile,
    attribute_plain,
    attribute_with_null,
    estimate_bucket_means_window,
)
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateBaselineError,
    UndefinedWeightsError,
)
from .model import CampaignKey, UserRecord, revenue_between
from .pipeline import CellKey, SimArtifacts, cell_of, prepare_users, run_schema
from .postback import CountMatrix, Postback
from .privacy import PrivacyConfig, apply_threshold
from .schema import SchemaSpec, _PreppedUser

LEVELS = ("campaign", "network")


def weekly_error(attributed: Mapping, truth: Mapping) -> float:
    """Euclidean attribution error for one week, in money units."""
    if set(attributed) != set(truth):
        raise AlignmentError("attributed and truth vectors cover different keys")
    acc = 0.0
    for k, a in attributed.items():
        d = a - truth[k]
        if d:
            acc += float(d) * float(d)
    return math.sqrt(acc)


def aggregate_error(weekly: Iterable[tuple[float, float]]) -> float:
    """Revenue-weighted average of (error, week_revenue) pairs."""
    num = 0.0
    den = 0.0
    for err, weight in weekly:
        if weight < 0:
            raise UndefinedWeightsError(f"negative week weight {weight}")
        num += err * weight
        den += weight
    if den == 0:
        raise UndefinedWeightsError("all week weights are zero")
    return num / den


def normalize_vs_baseline(err: float, baseline_err: float) -> float:
    """Percent score vs baseline: 0 at parity, negative when worse."""
    if baseline_err <= 0:
        raise DegenerateBaselineError(f"baseline error must be > 0, got {baseline_err}")
    return 100.0 * (1.0 - err / baseline_err)


@dataclass(frozen=True)
class CellResult:
    """One benchmark grid cell at one aggregation level."""

    schema: str
    p: int
    mode: str
    lam: float | None
    level: str
    weekly_errors: tuple[tuple[str, float], ...]
    aggregate_error: float  # cents
    normalized_score: float | None


@dataclass(frozen=True)
class WindowPoint:
    lo_day: int
    hi_day: int
    error: float  # cents


@dataclass
class AttributionReport:
    """Full benchmark output: grid cells, optional window curve, metadata."""

    cells: list[CellResult]
    metadata: dict
    window_curve: list[WindowPoint] | None = None

    def cell(self, schema: str, p: int, mode: str, lam: float | None, level: str) -> CellResult:
        for c in self.cells:
            if (c.schema, c.p, c.mode, c.level) == (schema, p, mode, level) and (
                c.lam == lam or (c.lam is None and lam is None)
            ):
                return c
        raise KeyError((schema, p, mode, lam, level))


def _network_label(key: CampaignKey) -> str:
    return "organic" if key.organic else f"n{key.network}"


def _truth_cells(
    users: Sequence[UserRecord],
    postbacks: Mapping[int, Postback],
    lo_day: int,
    hi_day: int,
) -> dict[CellKey, dict[CampaignKey, int]]:
    """Actual window revenue per (group, postback week, origin)."""
    out: dict[CellKey, dict[CampaignKey, int]] = {}
    for u in users:
        pb = postbacks.get(u.id)
        if pb is None:
            continue
        cell = cell_of(pb)
        bucket = out.setdefault(cell, {})
        bucket[u.origin] = bucket.get(u.origin, 0) + revenue_between(u, lo_day, hi_day)
    return out


def _level_errors(
    attributed_by_week: Mapping[str, Mapping[CampaignKey, int]],
    truth_by_week: Mapping[str, Mapping[CampaignKey, int]],
    columns: Sequence[CampaignKey],
    include_organic: bool,
    level: str,
) -> tuple[tuple[tuple[str, float], ...], float]:
    keys = [k for k in columns if include_organic or not k.organic]
    weekly: list[tuple[str, float]] = []
    weights: list[float] = []
    for week in sorted(truth_by_week):
        att = attributed_by_week[week]
        tru = truth_by_week[week]
        a: dict = {}
        y: dict = {}
        for k in keys:
            label = k if level == "campaign" else _network_label(k)
            a[label] = a.get(label, 0) + att.get(k, 0)
            y[label] = y.get(label, 0) + tru.get(k, 0)
        weekly.append((week, weekly_error(a, y)))
        weights.append(float(sum(y.values())))
    agg = aggregate_error(zip((e for _, e in weekly), weights))
    return tuple(weekly), agg


def _attribute_cells(
    artifacts: SimArtifacts,
    matrices: Mapping[CellKey, CountMatrix],
    profiles: Mapping[str | None, RevenueProfile],
    fn: AttributionFunction | None,
) -> dict[str, dict[CampaignKey, int]]:
    """Attribute every cell and sum per week across groups.

    ``profiles`` maps a group label to its revenue profile, with None as the
    pooled fallback. Values are rounded to cents per (group, week, campaign),
    the grain the attribution files emit, so errors score exactly what a
    stage-wise run writes and both execution styles commute byte for byte.
    """
    by_week: dict[str, dict[CampaignKey, int]] = {}
    for cell in sorted(matrices):
        matrix = matrices[cell]
        profile = profiles.get(cell[0], profiles.get(None))
        if fn is None:
            res = attribute_plain(matrix, profile)
        else:
            res = attribute_with_null(matrix, profile.with_totals(artifacts.cell_totals[cell]), fn)
        week = cell[1]
        acc = by_week.setdefault(week, {})
        for k, val in res.items():
            acc[k] = acc.get(k, 0) + round(val)
    return by_week


def _schema_job(
    args: tuple[Sequence[UserRecord], SchemaSpec, int, datetime | None, int],
) -> tuple[SimArtifacts, RevenueProfile]:
    """Worker-pool unit: simulate one schema and fit its revenue profile."""
    users, schema, seed, horizon, t = args
    art = run_schema(users, schema, seed, horizon)
    profile = estimate_bucket_means_window(users, art.postbacks, 0, t)
    return art, profile


def _expand_modes(
    g_modes: Sequence[str], lambda_grid: Sequence[float], p: int
) -> list[tuple[str, float | None]]:
    out: list[tuple[str, float | None]] = []
    for mode in g_modes:
        if mode == "plain":
            if p < 2:
                out.append(("plain", None))
        elif mode == "null_uniform":
            out.append((mode, 0.0))
        elif mode == "null_empirical":
            out.append((mode, 1.0))
        elif mode == "null_convex":
            out.extend((mode, float(lam)) for lam in lambda_grid)
        else:
            raise ConfigError(f"unknown attribution mode {mode!r}")
    return out


def _group_profiles(
    users: Sequence[UserRecord],
    postbacks: Mapping[int, Postback],
    lo_day: int,
    hi_day: int,
    per_group: bool,
) -> dict[str | None, RevenueProfile]:
    """Pooled revenue profile, optionally split per group label."""
    profiles: dict[str | None, RevenueProfile] = {
        None: estimate_bucket_means_window(users, postbacks, lo_day, hi_day)
    }
    if per_group:
        for group in sorted({u.group for u in users}):
            members = [u for u in users if u.group == group]
            profiles[group] = estimate_bucket_means_window(members, postbacks, lo_day, hi_day)
    return profiles


def _grid_error(
    users: Sequence[UserRecord],
    artifacts: SimArtifacts,
    matrices: Mapping[CellKey, CountMatrix],
    profiles: Mapping[str | None, RevenueProfile],
    fn: AttributionFunction | None,
    lo_day: int,
    hi_day: int,
    include_organic: bool,
) -> dict[str, tuple[tuple[tuple[str, float], ...], float]]:
    """Weekly and aggregate errors at both levels for one estimator."""
    attributed = _attribute_cells(artifacts, matrices, profiles, fn)
    truth_cells = _truth_cells(users, artifacts.postbacks, lo_day, hi_day)
    truth_by_week: dict[str, dict[CampaignKey, int]] = {}
    for (group, week), vec in truth_cells.items():
        acc = truth_by_week.setdefault(week, {})
        for k, val in vec.items():
            acc[k] = acc.get(k, 0) + val
    return {
        level: _level_errors(attributed, truth_by_week, artifacts.columns, include_organic, level)
        for level in LEVELS
    }


def benchmark_matrix(
    users: Sequence[UserRecord],
    schemas: Sequence[SchemaSpec],
    p_values: Sequence[int],
    g_modes: Sequence[str],
    t: int,
    *,
    seed: int,
    lambda_grid: Sequence[float] = (0.0, 0.5, 1.0),
    include_organic: bool = True,
    profile_per_group: bool = False,
    horizon: datetime | None = None,
    prepared: dict[int, _PreppedUser] | None = None,
    max_workers: int = 1,
) -> AttributionReport:
    """Run the full schema x threshold x estimator grid.

    Scores are normalized per privacy level against the omniscient
    full-horizon-revenue schema (PV) with the uniform estimator, which
    scores 0 by construction; the campaign and network aggregation levels
    are normalized against their own baselines. Any cell failure aborts the
    run with the failing coordinates in the message. ``max_workers`` > 1
    fans schema simulations out to a process pool; results merge in config
    order so parallel and serial runs are identical.
    """
    if not schemas or not p_values or not g_modes:
        raise ConfigError("benchmark needs at least one schema, p value, and g mode")
    if t < 1:
        raise ConfigError("revenue window t must be at least one day")

    artifacts: dict[str, SimArtifacts] = {}
    profiles: dict[str, dict[str | None, RevenueProfile]] = {}
    labels: list[str] = []
    results: list[tuple[SimArtifacts, RevenueProfile]]
    if max_workers > 1 and len(schemas) > 1:
        from concurrent.futures import ProcessPoolExecutor

        jobs = [(users, schema, seed, horizon, t) for schema in schemas]
        try:
            with ProcessPoolExecutor(max_workers=max_workers) as pool:
                results = list(pool.map(_schema_job, jobs))
        except (OSError, PermissionError):  # no subprocess support here
            results = [_schema_job(job) for job in jobs]
    else:
        if prepared is None:
            prepared = prepare_users(users)
        results = []
        for schema in schemas:
            try:
                art = run_schema(users, schema, seed, horizon, prepared)
            except Exception as exc:
                raise type(exc)(f"schema {schema.label}: {exc}") from exc
            results.append((art, estimate_bucket_means_window(users, art.postbacks, 0, t)))
    for art, pooled in results:
        label = art.schema.label
        if label in artifacts:
            raise ConfigError(f"duplicate schema {label} in benchmark grid")
        labels.append(label)
        artifacts[label] = art
        profiles[label] = {None: pooled}
        if profile_per_group:
            profiles[label] = _group_profiles(users, art.postbacks, 0, t, True)

    baseline_label = next((lab for lab in labels if artifacts[lab].schema.kind == "PV"), None)

    privatized: dict[tuple[str, int], dict[CellKey, CountMatrix]] = {}

    def matrices_for(label: str, p: int, fn: AttributionFunction | None):
        if fn is None:
            return artifacts[label].matrices
        key = (label, p)
        if key not in privatized:
            cfg = PrivacyConfig(p)
            privatized[key] = {
                cell: apply_threshold(m, cfg) for cell, m in artifacts[label].matrices.items()
            }
        return privatized[key]

    def cell_errors(label: str, p: int, mode: str, lam: float | None):
        fn = None if mode == "plain" else AttributionFunction(mode=mode, lam=lam or 0.0)
        try:
            return _grid_error(
                users,
                artifacts[label],
                matrices_for(label, p, fn),
                profiles[label],
                fn,
                0,
                t,
                include_organic,
            )
        except Exception as exc:
            raise type(exc)(
                f"grid cell (schema={label}, p={p}, g={mode}, lambda={lam}): {exc}"
            ) from exc

    baselines: dict[tuple[int, str], float] = {}
    if baseline_label is not None:
        for p in p_values:
            base_mode = "plain" if p < 2 else "null_uniform"
            base_lam = None if p < 2 else 0.0
            by_level = cell_errors(baseline_label, p, base_mode, base_lam)
            for level in LEVELS:
                baselines[(p, level)] = by_level[level][1]

    cells: list[CellResult] = []
    for label in labels:
        for p in sorted(p_values):
            for mode, lam in _expand_modes(g_modes, lambda_grid, p):
                by_level = cell_errors(label, p, mode, lam)
                for level in LEVELS:
                    weekly, agg = by_level[level]
                    # A zero baseline error (possible on tiny datasets where
                    # the omniscient schema isolates every spender) leaves
                    # normalization undefined; report raw errors only.
                    base = baselines.get((p, level))
                    score = normalize_vs_baseline(agg, base) if base else None
                    cells.append(
                        CellResult(
                            schema=label,
                            p=p,
                            mode=mode,
                            lam=lam,
                            level=level,
                            weekly_errors=weekly,
                            aggregate_error=agg,
                            normalized_score=score,
                        )
                    )

    first = next(iter(artifacts.values()))
    metadata = {
        "seed": seed,
        "t": t,
        "beta": len(first.columns),
        "organic_alpha": first.organic.alpha,
        "p_values": sorted(p_values),
        "g_modes": list(g_modes),
        "lambda_grid": [float(x) for x in lambda_grid],
        "schemas": [lab for lab in labels],
        "baseline": baseline_label,
        "include_organic_in_error": include_organic,
        "profile_per_group": profile_per_group,
        "hypothetical_schemas": [lab for lab in labels if artifacts[lab].schema.kind == "PV"],
        "normalization": "aggregate",
        "week_start": "monday",
        "substreams": ["campaigns", "user", "postback", "ud"],
    }
    return AttributionReport(cells=cells, metadata=metadata)


def validate_windows(windows: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for lo, hi in windows:
        if lo < 0 or hi <= lo:
            raise ConfigError(f"invalid window [{lo}, {hi})")
        out.append((int(lo), int(hi)))
    for (a_lo, a_hi), (b_lo, b_hi) in zip(out, out[1:]):
        if b_lo < a_hi:
            raise ConfigError(f"windows overlap: [{a_lo},{a_hi}) and [{b_lo},{b_hi})")
    return out


def window_error_curve(
    users: Sequence[UserRecord],
    schema: SchemaSpec,
    p: int,
    g: AttributionFunction | str,
    windows: Sequence[tuple[int, int]],
    *,
    seed: int,
    include_organic: bool = True,
    profile_per_group: bool = False,
    horizon: datetime | None = None,
    prepared: dict[int, _PreppedUser] | None = None,
) -> list[WindowPoint]:
    """Campaign-level error of attributing revenue accrued per day window.

    The schema, counts and privacy stay fixed; only the revenue target and
    its per-window bucket means move, so the curve isolates how revenue
    maturing away from the early signal degrades attribution.
    """
    wins = validate_windows(windows)
    if isinstance(g, str):
        g = AttributionFunction(mode=g) if g != "plain" else AttributionFunction(mode="plain")
    artifacts = run_schema(users, schema, seed, horizon, prepared)
    use_null = g.mode != "plain"
    if use_null:
        cfg = PrivacyConfig(p)
        matrices = {cell: apply_threshold(m, cfg) for cell, m in artifacts.matrices.items()}
        fn: AttributionFunction | None = g
    else:
        if p >= 2:
            raise ConfigError("plain attribution requires p < 2; pick a null-aware mode")
        matrices = artifacts.matrices
        fn = None
    points: list[WindowPoint] = []
    for lo, hi in wins:
        profiles = _group_profiles(users, artifacts.postbacks, lo, hi, profile_per_group)
        by_level = _grid_error(
            users, artifacts, matrices, profiles, fn, lo, hi, include_organic
        )
        points.append(WindowPoint(lo_day=lo, hi_day=hi, error=by_level["campaign"][1]))
    return points
