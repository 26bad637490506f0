import random
from dataclasses import replace
from datetime import date, datetime, timedelta

import pytest

from skattr.errors import ConfigError, DuplicatePostbackError, InconsistentTotalsError
from skattr.model import Event, UserRecord, encode_alpha, iso_week, organic_key
from skattr.postback import (
    Postback,
    build_counts,
    empty_matrix,
    estimate_organic,
    finalize_postback,
    paid_campaigns,
)
from skattr.schema import UpdateTrace

MONDAY = date(2024, 1, 1)
T0 = datetime(2024, 1, 1, 10)


def trace(uid=0, commits=((T0, 5),)):
    return UpdateTrace(user_id=uid, committed=tuple(commits), first_open=commits[0][0])


def user(uid, alpha_key, group="G"):
    return UserRecord(uid, MONDAY, alpha_key, (Event(T0, "session"),), group)


def pb(uid, value, when, group="G"):
    return Postback(user_id=uid, final_value=value, postback_time=when, group=group)


class TestFinalizePostback:
    def test_single_commit_window(self):
        p = finalize_postback(trace(), random.Random(1), "G")
        assert p.final_value == 5
        delta = (p.postback_time - T0).total_seconds()
        assert 86_400 <= delta < 2 * 86_400

    def test_delay_arithmetic_from_last_commit(self):
        tr = trace(commits=((T0, 1), (T0 + timedelta(hours=20), 9)))
        p = finalize_postback(tr, random.Random(2), "G")
        assert p.final_value == 9
        delta = (p.postback_time - T0).total_seconds()
        assert 44 * 3600 <= delta < 68 * 3600

    def test_deterministic_for_fixed_seed(self):
        a = finalize_postback(trace(), random.Random(7), "G")
        b = finalize_postback(trace(), random.Random(7), "G")
        assert a == b

    def test_window_property_over_many_seeds(self):
        for s in range(100):
            p = finalize_postback(trace(), random.Random(s), "G")
            delta = (p.postback_time - T0).total_seconds()
            assert 86_400 <= delta < 2 * 86_400


class TestBuildCounts:
    def test_simple_count(self):
        users = [user(i, encode_alpha(0, 0)) for i in range(3)]
        when = datetime(2024, 1, 3, 12)
        matrices = build_counts([pb(i, 7, when) for i in range(3)], users)
        m = matrices[("G", iso_week(when.date()))]
        assert m.rows[7][0] == 3
        assert m.total() == 3

    def test_week_boundary_sunday_monday(self):
        users = [user(0, encode_alpha(0, 0)), user(1, encode_alpha(0, 0))]
        sunday = datetime(2024, 1, 7, 23, 59)
        monday = datetime(2024, 1, 8, 0, 1)
        matrices = build_counts([pb(0, 1, sunday), pb(1, 1, monday)], users)
        assert len(matrices) == 2
        # calendar oracle
        assert sunday.date().isocalendar()[1] != monday.date().isocalendar()[1]

    def test_empty_input(self):
        assert build_counts([], [user(0, encode_alpha(0, 0))]) == {}

    def test_duplicate_user_rejected(self):
        users = [user(0, encode_alpha(0, 0))]
        when = datetime(2024, 1, 3, 12)
        with pytest.raises(DuplicatePostbackError):
            build_counts([pb(0, 1, when), pb(0, 2, when)], users)

    def test_permutation_invariant(self):
        rng = random.Random(3)
        users = [user(i, encode_alpha(0, i % 3)) for i in range(30)]
        pbs = [pb(i, rng.randrange(64), datetime(2024, 1, 2 + i % 14, 9)) for i in range(30)]
        a = build_counts(pbs, users)
        shuffled = pbs[:]
        rng.shuffle(shuffled)
        b = build_counts(shuffled, users)
        assert a == b

    def test_organic_postbacks_not_in_paid_columns(self):
        users = [user(0, encode_alpha(0, 0)), user(1, organic_key(100))]
        when = datetime(2024, 1, 3, 12)
        matrices = build_counts([pb(0, 1, when), pb(1, 1, when)], users)
        m = matrices[("G", iso_week(when.date()))]
        assert m.columns == (encode_alpha(0, 0),)
        assert m.total() == 1

    def test_each_user_in_exactly_one_cell(self):
        rng = random.Random(11)
        users = [user(i, encode_alpha(0, i % 2), group=("A" if i % 3 else "B")) for i in range(50)]
        pbs = [
            pb(i, rng.randrange(64), datetime(2024, 1, 2, 9) + timedelta(days=rng.randrange(30)),
               group=u.group)
            for i, u in enumerate(users)
        ]
        matrices = build_counts(pbs, users)
        assert sum(m.total() for m in matrices.values()) == len(users)


class TestEstimateOrganic:
    def test_subtraction(self):
        m = empty_matrix("G", "2024-W01", [encode_alpha(0, 0), encode_alpha(0, 1)])
        rows = [list(r) for r in m.rows]
        rows[5] = [4, 3]
        m = replace(m, rows=tuple(tuple(r) for r in rows))
        out = estimate_organic(m, {5: 10}, organic_key(100))
        assert out.columns[-1] == organic_key(100)
        assert out.rows[5] == (4, 3, 3)

    def test_no_paid_installs(self):
        m = empty_matrix("G", "2024-W01", [encode_alpha(0, 0)])
        out = estimate_organic(m, {0: 4, 9: 2}, organic_key(100))
        assert out.rows[0] == (0, 4)
        assert out.rows[9] == (0, 2)

    def test_totals_equal_paid(self):
        m = empty_matrix("G", "2024-W01", [encode_alpha(0, 0)])
        rows = [list(r) for r in m.rows]
        rows[1] = [6]
        m = replace(m, rows=tuple(tuple(r) for r in rows))
        out = estimate_organic(m, {1: 6}, organic_key(100))
        assert out.rows[1] == (6, 0)

    def test_negative_residual_rejected(self):
        m = empty_matrix("G", "2024-W01", [encode_alpha(0, 0)])
        rows = [list(r) for r in m.rows]
        rows[1] = [6]
        m = replace(m, rows=tuple(tuple(r) for r in rows))
        with pytest.raises(InconsistentTotalsError):
            estimate_organic(m, {1: 5}, organic_key(100))

    def test_rejects_double_organic(self):
        m = empty_matrix("G", "2024-W01", [encode_alpha(0, 0)])
        out = estimate_organic(m, {}, organic_key(100))
        with pytest.raises(ConfigError):
            estimate_organic(out, {}, organic_key(100))


def test_paid_campaigns_sorted_distinct():
    users = [user(0, encode_alpha(1, 5)), user(1, encode_alpha(0, 3)),
             user(2, encode_alpha(1, 5)), user(3, organic_key(700))]
    assert paid_campaigns(users) == (encode_alpha(0, 3), encode_alpha(1, 5))
