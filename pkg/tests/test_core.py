from fractions import Fraction

import pytest

from eqshares.core import (
    Allocation,
    Ballot,
    BallotRules,
    Instance,
    Profile,
    Project,
    ValidationError,
    approval_counts,
    format_major,
    money,
    total_score,
    utility,
    validate,
)


def _instance(vote_type="cumulative", **rules):
    rules.setdefault("total_points", 10 if vote_type == "cumulative" else None)
    projects = [Project("A", money(60)), Project("B", money(50)), Project("C", money(40))]
    return Instance(money(100), vote_type, projects, BallotRules(**rules))


def test_utility_lookup():
    ballot = Ballot("v", {"A": 4, "B": 6})
    assert utility(ballot, "A") == 4
    assert utility(ballot, "C") == 0
    assert utility(Ballot("w", {"A": 1}), "A") == 1


def test_total_score():
    assert total_score(Profile([Ballot(str(i), {"A": 1}) for i in range(3)]), "A") == 3
    assert total_score(Profile([Ballot("1", {"A": 4}), Ballot("2", {"A": 6})]), "A") == 10


def test_total_score_rejects_unknown_id():
    inst = _instance()
    with pytest.raises(KeyError):
        total_score(Profile([]), "Z", inst)


def test_approval_counts_count_supporters_not_points():
    inst = _instance()
    prof = Profile([Ballot("1", {"A": 7, "B": 3}), Ballot("2", {"A": 2, "C": 8})])
    assert approval_counts(inst, prof) == {"A": 2, "B": 1, "C": 1}


def test_money_parsing():
    assert money("12.5") == 1250
    assert money(3) == 300
    assert money(Fraction(1, 4)) == 25
    with pytest.raises(TypeError):
        money(1.5)
    with pytest.raises(ValueError):
        money("1,5")
    with pytest.raises(ValueError):
        money("abc")


def test_format_major():
    assert format_major(money("1000.50")) == "1000.5"
    assert format_major(money(7)) == "7"
    assert format_major(Fraction(1, 4)) == "0.0025"
    with pytest.raises(ValueError):
        format_major(Fraction(1, 3))


def test_instance_checks():
    with pytest.raises(ValueError):
        Instance(0, "approval", [])
    with pytest.raises(ValueError):
        Instance(100, "ranked", [])
    with pytest.raises(ValueError):
        Instance(100, "approval", [Project("A", 1), Project("A", 2)])
    with pytest.raises(ValueError):
        Instance(100, "cumulative", [Project("A", 1)])


def test_point_total_mismatch_strict():
    inst = _instance()
    prof = Profile([Ballot("v", {"A": 5, "B": 4})])
    with pytest.raises(ValidationError) as err:
        validate(inst, prof)
    assert err.value.report.kinds() == {"point total mismatch"}


def test_unknown_project_violation():
    inst = _instance("approval")
    report = validate(inst, Profile([Ballot("v", {"Z": 1})]), "lenient")
    assert "unknown project" in report.kinds()
    assert report.dropped_voters == ["v"]
    assert len(report.profile) == 0


def test_wellformed_instance_empty_report():
    inst = _instance(min_projects=2, max_points_per_project=8)
    prof = Profile([Ballot("1", {"A": 6, "B": 4}), Ballot("2", {"B": 2, "C": 8})])
    report = validate(inst, prof)
    assert report.ok and report.violations == [] and report.profile is prof


def test_lenient_drops_only_offending_ballots():
    inst = _instance("approval", max_projects=2)
    prof = Profile([
        Ballot("1", {"A": 1}),
        Ballot("2", {"A": 1, "B": 1, "C": 1}),
        Ballot("1", {"B": 1}),
        Ballot("3", {"A": 2}),
        Ballot("4", {}),
    ])
    report = validate(inst, prof, "lenient", lines={"2": 12})
    assert [b.voter_id for b in report.profile] == ["1", "4"]
    assert report.kinds() == {"too many projects", "duplicate voter", "bad points"}
    assert any(v.line == 12 for v in report.violations)


def test_zero_cost_reported():
    inst = Instance(100, "approval", [Project("A", 0)])
    assert "zero cost" in validate(inst, Profile([]), "lenient").kinds()


def test_allocation_build():
    inst = _instance("approval")
    alloc = Allocation.build(inst, ["A", "C"])
    assert alloc.spent == money(100) and alloc.leftover == 0
    assert alloc.winner_set == {"A", "C"} and len(alloc) == 2
