from fractions import Fraction

import pytest

from eqshares.core import Ballot, Instance, Profile, Project, money
from eqshares.pabulib import (
    PbParseError,
    PbWriteError,
    load_pb,
    parse_pb,
    read_document,
    read_pb,
    scan_corpus,
    serialize_pb,
)

MINIMAL = """META
key;value
budget;1000
vote_type;approval
num_projects;2
num_votes;1
PROJECTS
project_id;cost
p1;600
p2;500
VOTES
voter_id;vote
v1;p1,p2
"""


def _same(a, b):
    (ia, pa), (ib, pb) = a, b
    assert ia == ib
    assert pa == pb


def test_minimal_document():
    inst, prof = parse_pb(MINIMAL)
    assert inst.budget == money(1000)
    assert [p.id for p in inst.projects] == ["p1", "p2"]
    assert len(prof) == 1 and prof[0].points == {"p1": 1, "p2": 1}


def test_minimal_round_trip_identity():
    first = parse_pb(MINIMAL)
    text = serialize_pb(*first)
    _same(first, parse_pb(text))
    assert text == MINIMAL


def test_cumulative_points_align_with_votes():
    text = MINIMAL.replace("vote_type;approval", "vote_type;cumulative\nmax_sum_points;10").replace(
        "p2;500", "p2;500\np3;100").replace("voter_id;vote\nv1;p1,p2", "voter_id;vote;points\nv9;p1,p3;7,3")
    _, prof = parse_pb(text)
    assert prof[0].points == {"p1": 7, "p3": 3}


def test_district_and_passthrough_preserved(data_dir):
    text = (data_dir / "town_approval.pb").read_text()
    text = text.replace("max_length;3", "max_length;3\nfully_funded;1")
    inst, prof = parse_pb(text)
    assert inst.project("B").district == "south"
    assert inst.meta["fully_funded"] == "1"
    assert inst.project("A").extra == {"votes": "3"}
    assert prof[0].voter_meta == {"age": "34", "sex": "F"}
    again = parse_pb(serialize_pb(inst, prof))
    _same((inst, prof), again)
    assert "fully_funded;1" in serialize_pb(*again)


def test_bom_and_crlf(data_dir):
    raw = "﻿" + (data_dir / "minimal.pb").read_text().replace("\n", "\r\n")
    inst, prof = parse_pb(raw)
    assert inst.project_ids == ["p1"] and len(prof) == 1


def test_quoted_semicolon_and_decimal_costs(data_dir):
    inst, prof = parse_pb((data_dir / "cumulative.pb").read_text())
    assert inst.project("1").name == "Solar panels; school"
    assert inst.project("1").cost == money("400.25")
    assert inst.budget == money("1000.50")
    assert inst.ballot_rules.total_points == 10
    assert inst.project("5").categories == ("environment", "biodiversity")


@pytest.mark.parametrize("mutation, line", [
    (lambda t: t.replace("PROJECTS\n", ""), None),
    (lambda t: t.replace("p2;500", "p2;500;extra"), 10),
    (lambda t: t.replace("p2;500", "p2;five"), 10),
    (lambda t: t.replace("budget;1000\n", ""), None),
    (lambda t: t.replace("v1;p1,p2", "v1;p1,p1"), 13),
    (lambda t: t + "v1;p1\n", 14),
])
def test_parse_errors_carry_line_numbers(mutation, line):
    with pytest.raises(PbParseError) as err:
        parse_pb(mutation(MINIMAL), source="x.pb")
    if line is not None:
        assert err.value.line == line
        assert str(err.value).startswith(f"x.pb:{line}:")


def test_points_length_mismatch_is_fatal_in_strict_mode():
    text = MINIMAL.replace("voter_id;vote\nv1;p1,p2", "voter_id;vote;points\nv1;p1,p2;1")
    with pytest.raises(PbParseError):
        parse_pb(text)
    election = load_pb(text, mode="lenient")
    assert len(election.profile) == 0 and election.diagnostics


def test_sections_out_of_order():
    text = MINIMAL.replace("META\nkey;value\nbudget;1000\nvote_type;approval\nnum_projects;2\nnum_votes;1\n", "")
    text += "META\nkey;value\nbudget;1000\nvote_type;approval\n"
    with pytest.raises(PbParseError):
        read_document(text)


def test_serialize_rejects_separator_in_ids():
    inst = Instance(100, "approval", [Project("a;b", 10)])
    with pytest.raises(PbWriteError):
        serialize_pb(inst, Profile([]))


def test_serialized_costs_are_major_units():
    inst = Instance(money(10), "approval", [Project("x", money("2.5"))])
    text = serialize_pb(inst, Profile([Ballot("1", {"x": 1})]))
    assert "x;2.5" in text and "budget;10\n" in text


def test_every_fixture_round_trips(data_dir):
    files = sorted(p for p in data_dir.rglob("*.pb") if p.name != "broken.pb")
    assert files
    for path in files:
        election = read_pb(path, mode="lenient")
        text = serialize_pb(election.instance, election.profile)
        again = load_pb(text, mode="lenient")
        assert again.instance == election.instance, path
        assert again.profile == election.profile, path
        assert serialize_pb(again.instance, again.profile) == text


def test_scan_corpus_skips_corrupt(tmp_path, data_dir):
    for name in ("minimal.pb", "town_approval.pb", "cumulative.pb"):
        (tmp_path / name).write_text((data_dir / name).read_text())
    (tmp_path / "broken.pb").write_text("META\nkey;value\nbudget;oops\n")
    scan = scan_corpus(tmp_path)
    assert [s.file_id for s in scan.summaries] == ["cumulative.pb", "minimal.pb", "town_approval.pb"]
    assert [d[0] for d in scan.diagnostics] == ["broken.pb"]
    assert scan_corpus(tmp_path, workers=2).summaries == scan.summaries


def test_scan_empty_directory(tmp_path):
    assert scan_corpus(tmp_path).summaries == []


def test_summary_statistics(data_dir):
    scan = scan_corpus(data_dir / "corpus") if (data_dir / "corpus").exists() else None
    inst, prof = parse_pb((data_dir / "town_approval.pb").read_text())
    from eqshares.pabulib import summarize
    s = summarize("t", inst, len(prof))
    assert s.relative_budget_allocation == Fraction(100, 180)
    assert s.project_budget_share == Fraction(45, 100)
    assert scan is None or [d[0] for d in scan.diagnostics] == ["broken.pb"]
