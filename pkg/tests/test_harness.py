import json
import shutil
from fractions import Fraction

import pytest

from eqshares import harness, metrics
from eqshares.core import Allocation, RuleTag
from eqshares.rules import RuleConfig

GREEDY = RuleConfig(rule="greedy")
ADD1U = RuleConfig(completion="add1u")


def test_minimal_file_wins_under_both_rules(data_dir):
    for cfg in (GREEDY, ADD1U, RuleConfig()):
        run = harness.run_election(data_dir / "minimal.pb", cfg)
        assert run.allocation.winners == ("p1",)
        assert run.metrics.representation.mean == 1


def test_identical_configs_have_zero_deltas(data_dir):
    report = harness.compare(data_dir / "town_approval.pb", GREEDY, GREEDY)
    assert report.only_a == report.only_b == ()
    assert len(set(report.labels)) == 2
    assert report.spatial_fairness_gain in (None, 0)


def test_compare_is_recomputable(data_dir):
    report = harness.compare(data_dir / "cumulative.pb", ADD1U, GREEDY)
    a, b = report.labels
    wa, wb = report.allocations[a].winner_set, report.allocations[b].winner_set
    assert set(report.only_a) == wa - wb and set(report.only_b) == wb - wa
    election = harness.load_election(data_dir / "cumulative.pb")
    again = metrics.representation_stats(election.profile, wa, "points")
    assert again == report.representation[a]
    assert report.budget == metrics.budget_stats(election.instance)


def test_compare_reports_districts(data_dir):
    report = harness.compare(data_dir / "town_approval.pb", ADD1U, GREEDY)
    assert report.districts is not None
    assert set(report.districts[report.labels[0]].per_district) == {"east", "north", "south"}


def test_invariant_breach_detected(data_dir):
    election = harness.load_election(data_dir / "town_approval.pb")
    inst, prof = election.instance, election.profile
    bogus = Allocation(("A", "B"), {}, inst.cost("A") + inst.cost("B"),
                       inst.budget - inst.cost("A") - inst.cost("B"), RuleTag("mes"))
    with pytest.raises(harness.InvariantError):
        harness.check_allocation(inst, prof, bogus)
    underpaid = Allocation(("A",), {"A": {"1": Fraction(1)}}, inst.cost("A"), inst.budget - inst.cost("A"),
                           RuleTag("mes"))
    with pytest.raises(harness.InvariantError):
        harness.check_allocation(inst, prof, underpaid)


def test_single_election_corpus_equals_that_election(tmp_path, data_dir):
    shutil.copy(data_dir / "town_approval.pb", tmp_path / "only.pb")
    report = harness.corpus_analyze(tmp_path, (), [ADD1U, GREEDY], ["joint"])
    (agg,) = report.aggregates
    (res,) = report.elections
    assert agg.elections == 1
    for label in report.labels:
        assert agg.mean_curves[label] == res.curves[label]
        assert agg.pooled_curves[label] == res.curves[label]
        assert agg.mean_representation[label] == res.mean_representation[label]


@pytest.fixture(scope="module")
def corpus_report():
    from pathlib import Path
    data = Path(__file__).parent / "data"
    return harness.corpus_analyze(data / "corpus", "num_projects_Q4,relative_budget_allocation_Q1,"
                                  "project_budget_share_Q1", reference=data / "town_approval.pb")


def test_corpus_skips_broken_files(corpus_report):
    assert [d[0] for d in corpus_report.diagnostics] == ["broken.pb"]
    assert len(corpus_report.elections) == 30


def test_corpus_criteria_combinations(corpus_report):
    combos = {agg.criteria for agg in corpus_report.aggregates}
    assert combos == {
        ("num_projects_Q4",),
        ("num_projects_Q4", "relative_budget_allocation_Q1"),
        ("num_projects_Q4", "project_budget_share_Q1"),
        ("num_projects_Q4", "relative_budget_allocation_Q1", "project_budget_share_Q1"),
    }
    joint = {agg.criteria: agg.elections for agg in corpus_report.aggregates if agg.ballot_format == "joint"}
    assert sorted(joint.values()) == [1, 4, 5, 8]


def test_aggregates_are_means_of_per_election_values(corpus_report):
    by_id = {r.file_id: r for r in corpus_report.elections}
    summaries = [r.summary for r in corpus_report.elections]
    for agg in corpus_report.aggregates:
        matched = metrics.quartile_match(summaries, agg.criteria).matched
        chosen = [by_id[f] for f in matched if harness._in_format(by_id[f].vote_type, agg.ballot_format)]
        assert agg.elections == len(chosen)
        for label in corpus_report.labels:
            if not chosen:
                continue
            for t, share in agg.mean_curves[label].items():
                assert share == sum(r.curves[label][t] for r in chosen) / len(chosen)
            ref = corpus_report.reference.curves[corpus_report.labels[0]]
            per_election = [metrics.representation_gain(ref, r.curves[label]) for r in chosen]
            assert agg.reference_gain[label] == sum(per_election) / len(per_election)


def test_formats_partition_joint(corpus_report):
    for crit in {a.criteria for a in corpus_report.aggregates}:
        sizes = {a.ballot_format: a.elections for a in corpus_report.aggregates if a.criteria == crit}
        assert sizes["approval"] + sizes["cumulative"] == sizes["joint"]


def test_corpus_report_deterministic(data_dir, corpus_report):
    again = harness.corpus_analyze(data_dir / "corpus", "num_projects_Q4,relative_budget_allocation_Q1,"
                                   "project_budget_share_Q1", reference=data_dir / "town_approval.pb", workers=2)
    assert harness.dumps(again) == harness.dumps(corpus_report)
    assert json.loads(harness.dumps(again))["content_hash"] == corpus_report.content_hash


def test_read_pairwise(data_dir):
    rec = harness.read_pairwise(data_dir / "pairwise.csv")
    assert rec.comparisons == (("a", "b", "a"), ("a", "c", "a"), ("b", "c", None))


def test_parse_rule_label():
    assert harness.parse_rule_label("mes+add1").completion == "add1"
    assert harness.parse_rule_label("greedy").rule == "greedy"
    with pytest.raises(ValueError):
        harness.parse_rule_label("phragmen")


def test_tables_have_headers(data_dir):
    run = harness.run_election(data_dir / "town_approval.pb", ADD1U)
    tables = harness.run_tables(run)
    assert tables["winners"][0][0] == "project_id"
    assert len(tables["representation_curve"]) == 10
    comp = harness.comparison_tables(harness.compare(data_dir / "town_approval.pb", ADD1U, GREEDY))
    assert set(comp) == {"winners", "representation_curve", "districts", "categories"}
