"""Batch orchestration: single runs, rule comparisons and corpus analysis.

Reports are plain dataclasses; :func:`to_jsonable` turns any of them into a
JSON-ready tree (fractions become floats, money becomes major units) and the
``*_tables`` helpers give flat CSV-ready rows for plotting.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, is_dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Sequence

from . import metrics
from .core import (
    Allocation,
    Instance,
    PBError,
    Profile,
    approval_counts,
    format_major,
    total_scores,
    validate,
)
from .pabulib import PbElection, corpus_files, corpus_hash, file_id, read_pb, summarize
from .rules import RuleConfig, run_rule

FORMATS = ("approval", "cumulative", "joint")


class InvariantError(PBError):
    """An allocation broke a rule invariant; signals a bug, not bad input."""


def parse_rule_label(label: str, **options) -> RuleConfig:
    """``"greedy"``, ``"mes"``, ``"mes+add1u"`` ... -> RuleConfig."""
    label = label.strip().lower()
    if label == "greedy":
        return RuleConfig(rule="greedy", **options)
    rule, _, completion = label.partition("+")
    if rule != "mes":
        raise ValueError(f"unknown rule label {label!r}")
    return RuleConfig(rule="mes", completion=completion or "none", **options)


def load_election(path, validation: str = "strict") -> PbElection:
    """Parse and validate one file; lenient mode drops bad ballots."""
    election = read_pb(path, mode=validation)
    report = validate(election.instance, election.profile, validation, election.voter_lines)
    election.diagnostics.extend(report.violations)
    election.profile = report.profile
    return election


def check_allocation(instance: Instance, profile: Profile, allocation: Allocation) -> None:
    """Raise InvariantError unless the allocation is feasible and priced consistently."""
    spent = sum((instance.cost(c) for c in allocation.winners), Fraction(0))
    if spent != allocation.spent or allocation.spent + allocation.leftover != instance.budget:
        raise InvariantError("spent/leftover do not add up to the budget")
    if allocation.spent > instance.budget:
        raise InvariantError("allocation exceeds the budget")
    if len(set(allocation.winners)) != len(allocation.winners):
        raise InvariantError("a project was selected twice")
    paid: dict[str, Fraction] = {}
    for pid, ledger in allocation.payments.items():
        if sum(ledger.values(), Fraction(0)) != instance.cost(pid):
            raise InvariantError(f"payments for {pid} do not sum to its cost")
        for vid, amount in ledger.items():
            paid[vid] = paid.get(vid, Fraction(0)) + amount
    cap = allocation.rule_tag.endowment
    if cap is not None and any(v > cap for v in paid.values()):
        raise InvariantError("a voter paid more than the endowment")


@dataclass
class MetricsReport:
    num_winners: int
    representation: metrics.RepresentationStats
    representation_count: metrics.RepresentationStats
    budget: metrics.BudgetStats
    winner_categories: dict[str, Fraction]
    districts: metrics.DistrictTally | None


def election_metrics(instance: Instance, profile: Profile, allocation: Allocation,
                     district_key: str = "district") -> MetricsReport:
    winners = allocation.winner_set
    tally = metrics.district_tally(instance, winners, district_key)
    return MetricsReport(
        num_winners=len(allocation),
        representation=metrics.representation_stats(profile, winners, "points"),
        representation_count=metrics.representation_stats(profile, winners, "count"),
        budget=metrics.budget_stats(instance),
        winner_categories=metrics.category_shares(instance.project(p) for p in allocation.winners),
        districts=tally if tally.per_district else None,
    )


@dataclass
class ElectionRun:
    instance: Instance
    profile: Profile
    config: RuleConfig
    allocation: Allocation
    metrics: MetricsReport
    diagnostics: list = field(default_factory=list)


def _as_election(source, validation) -> PbElection:
    if isinstance(source, PbElection):
        return source
    if isinstance(source, tuple):
        instance, profile = source
        report = validate(instance, profile, validation)
        return PbElection(instance, report.profile, list(report.violations))
    return load_election(source, validation)


def run_election(source, config: RuleConfig, validation: str = "strict",
                 district_key: str = "district") -> ElectionRun:
    """Run one rule on a file (or a parsed election) and measure the outcome."""
    election = _as_election(source, validation)
    allocation = run_rule(election.instance, election.profile, config)
    check_allocation(election.instance, election.profile, allocation)
    return ElectionRun(election.instance, election.profile, config, allocation,
                       election_metrics(election.instance, election.profile, allocation, district_key),
                       list(election.diagnostics))


@dataclass
class ComparisonReport:
    instance_id: str
    labels: tuple[str, str]
    allocations: dict[str, Allocation]
    only_a: tuple[str, ...]
    only_b: tuple[str, ...]
    representation: dict[str, metrics.RepresentationStats]
    representation_count: dict[str, metrics.RepresentationStats]
    exclusive: metrics.RepresentationStats
    districts: dict[str, metrics.DistrictTally] | None
    spatial_fairness_gain: Fraction | None
    categories: dict[str, dict[str, Fraction]]
    proposed_categories: dict[str, Fraction]
    budget: metrics.BudgetStats
    scores: dict[str, int]
    votes: dict[str, int]


def compare(source, config_a: RuleConfig, config_b: RuleConfig, validation: str = "strict",
            district_key: str = "district") -> ComparisonReport:
    """Evaluate two rules on the same parsed election.

    The spatial gain treats ``config_a`` as the proportional rule and
    ``config_b`` as the baseline.
    """
    election = _as_election(source, validation)
    instance, profile = election.instance, election.profile
    labels = (config_a.label, config_b.label)
    if labels[0] == labels[1]:
        labels = (labels[0] + " [a]", labels[1] + " [b]")
    allocs = {}
    for label, cfg in zip(labels, (config_a, config_b)):
        allocs[label] = run_rule(instance, profile, cfg)
        check_allocation(instance, profile, allocs[label])
    wa, wb = (allocs[l].winner_set for l in labels)
    tallies = {l: metrics.district_tally(instance, allocs[l].winners, district_key) for l in labels}
    districts = tallies if tallies[labels[0]].per_district else None
    gain = None
    if districts:
        try:
            gain = metrics.spatial_fairness_gain(tallies[labels[0]], tallies[labels[1]])
        except ValueError:
            gain = None
    return ComparisonReport(
        instance_id=instance.name,
        labels=labels,
        allocations=allocs,
        only_a=tuple(p for p in allocs[labels[0]].winners if p not in wb),
        only_b=tuple(p for p in allocs[labels[1]].winners if p not in wa),
        representation={l: metrics.representation_stats(profile, allocs[l].winners, "points") for l in labels},
        representation_count={l: metrics.representation_stats(profile, allocs[l].winners, "count") for l in labels},
        exclusive=metrics.exclusive_representation(profile, wa, wb, "points"),
        districts=districts,
        spatial_fairness_gain=gain,
        categories={l: metrics.category_shares(instance.project(p) for p in allocs[l].winners) for l in labels},
        proposed_categories=metrics.category_shares(instance.projects),
        budget=metrics.budget_stats(instance),
        scores=total_scores(instance, profile),
        votes=approval_counts(instance, profile),
    )


# -- corpus ---------------------------------------------------------------

@dataclass
class ElectionResult:
    """What the corpus analysis keeps from one election."""

    file_id: str
    vote_type: str
    summary: object
    winners: dict[str, int]
    mean_representation: dict[str, Fraction | None]
    curves: dict[str, dict[Fraction, Fraction]]
    voter_scores: dict[str, list[Fraction]]


@dataclass
class Aggregate:
    criteria: tuple[str, ...]
    ballot_format: str
    elections: int
    mean_curves: dict[str, dict[Fraction, Fraction]]
    pooled_curves: dict[str, dict[Fraction, Fraction]]
    mean_representation: dict[str, Fraction | None]
    winner_increase: Fraction | None
    reference_gain: dict[str, Fraction]
    reference_gain_pooled: dict[str, Fraction]


@dataclass
class CorpusReport:
    content_hash: str
    labels: tuple[str, ...]
    mode: str
    elections: list[ElectionResult]
    diagnostics: list[tuple[str, str]]
    aggregates: list[Aggregate]
    reference: ElectionResult | None = None


def _analyze_one(args) -> tuple[str, ElectionResult | None, str | None]:
    path, fid, configs, mode, validation = args
    try:
        election = load_election(path, validation)
        if not election.instance.projects or len(election.profile) == 0:
            return fid, None, "no projects or no valid ballots"
        return fid, _election_result(fid, election, configs, mode), None
    except (PBError, OSError, ValueError) as exc:
        return fid, None, str(exc)


def _election_result(fid, election: PbElection, configs, mode) -> ElectionResult:
    instance, profile = election.instance, election.profile
    winners, means, curves, scores = {}, {}, {}, {}
    for cfg in configs:
        alloc = run_rule(instance, profile, cfg)
        check_allocation(instance, profile, alloc)
        stats = metrics.representation_stats(profile, alloc.winners, mode)
        winners[cfg.label] = len(alloc)
        means[cfg.label] = stats.mean
        curves[cfg.label] = stats.curve
        scores[cfg.label] = stats.defined
    return ElectionResult(fid, instance.vote_type, summarize(fid, instance, len(profile)),
                          winners, means, curves, scores)


def _criteria_sets(criteria) -> list[tuple[str, ...]]:
    """The first criterion plus every combination of the rest (as in a nested design)."""
    criteria = metrics.parse_criteria(criteria)
    if not criteria:
        return [()]
    head, rest = criteria[0], criteria[1:]
    out = []
    for k in range(len(rest) + 1):
        for combo in combinations(rest, k):
            out.append((head,) + combo)
    return out


def _in_format(vote_type: str, fmt: str) -> bool:
    if fmt == "joint":
        return vote_type in ("approval", "cumulative")
    return vote_type == fmt


def _aggregate(results: Sequence[ElectionResult], criteria, fmt, labels, reference) -> Aggregate:
    chosen = [r for r in results if _in_format(r.vote_type, fmt)]
    mean_curves = {l: metrics.mean_curve([r.curves[l] for r in chosen]) for l in labels}
    pooled = {l: metrics.pooled_curve([r.voter_scores[l] for r in chosen]) for l in labels}
    means = {}
    for l in labels:
        vals = [r.mean_representation[l] for r in chosen if r.mean_representation[l] is not None]
        means[l] = sum(vals, Fraction(0)) / len(vals) if vals else None
    increase = None
    if len(labels) >= 2:
        a, b = labels[0], labels[1]
        rel = [Fraction(r.winners[a] - r.winners[b], r.winners[b]) for r in chosen if r.winners[b] > 0]
        increase = sum(rel, Fraction(0)) / len(rel) if rel else None
    gain, gain_pooled = {}, {}
    if reference is not None and chosen:
        ref_label = labels[0]
        ref_curve = reference.curves[ref_label]
        ref_pooled = metrics.pooled_curve([reference.voter_scores[ref_label]])
        for l in labels:
            gain[l] = metrics.representation_gain(ref_curve, mean_curves[l])
            gain_pooled[l] = metrics.representation_gain(ref_pooled, pooled[l])
    return Aggregate(tuple(criteria), fmt, len(chosen), mean_curves, pooled, means, increase, gain, gain_pooled)


def corpus_analyze(directory, criteria=(), configs: Sequence[RuleConfig] | None = None,
                   formats: Sequence[str] = FORMATS, reference=None, mode: str = "count",
                   workers: int = 1, validation: str = "lenient") -> CorpusReport:
    """Run every rule config on every election under ``directory`` and aggregate.

    Elections are matched by quartiles of the whole evaluated corpus
    (approval and cumulative files). Aggregates are produced for the first
    criterion combined with each subset of the others, per ballot format. The
    first config is the proportional rule; when ``reference`` (a file or
    parsed election) is given, its curve under that rule is compared with the
    corpus curves of every config.
    """
    configs = list(configs or (RuleConfig(completion="add1u"), RuleConfig(rule="greedy")))
    labels = tuple(c.label for c in configs)
    directory = Path(directory)
    jobs = [(p, file_id(p, directory), configs, mode, validation) for p in corpus_files(directory)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
            outcomes = list(pool.map(_analyze_one, jobs))
    else:
        outcomes = [_analyze_one(j) for j in jobs]
    results, diagnostics = [], []
    for fid, result, err in sorted(outcomes, key=lambda o: o[0]):
        if result is None:
            diagnostics.append((fid, err))
        elif result.vote_type in ("approval", "cumulative"):
            results.append(result)
        else:
            diagnostics.append((fid, f"vote type {result.vote_type} not evaluated"))

    ref_result = None
    if reference is not None:
        election = _as_election(reference, validation)
        ref_result = _election_result("reference", election, configs, mode)

    aggregates = []
    summaries = [r.summary for r in results]
    by_id = {r.file_id: r for r in results}
    for crit in _criteria_sets(criteria):
        match = metrics.quartile_match(summaries, crit) if len(summaries) >= 4 or not crit else None
        subset = [by_id[f] for f in match.matched] if match else []
        for fmt in formats:
            aggregates.append(_aggregate(subset, crit, fmt, labels, ref_result))
    return CorpusReport(corpus_hash(directory), labels, mode, results, diagnostics, aggregates, ref_result)


# -- pairwise input -------------------------------------------------------

def read_pairwise(path) -> metrics.PairwiseRecord:
    """Read ``project_a,project_b,winner`` rows; winner empty or ``tie`` for ties."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        missing = {"project_a", "project_b", "winner"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"pairwise file lacks columns {sorted(missing)}")
        rows = []
        for row in reader:
            winner = (row["winner"] or "").strip()
            rows.append((row["project_a"].strip(), row["project_b"].strip(),
                         None if winner in ("", "tie") else winner))
    return metrics.PairwiseRecord(tuple(rows))


# -- serialization ----------------------------------------------------------

def _money_keys(name: str) -> bool:
    return name in ("spent", "leftover", "endowment", "budget", "cost", "total_cost", "mean_cost", "add1_increment")


_SKIP_FIELDS = ("voter_scores", "per_voter")


def to_jsonable(obj, _key: str | None = None):
    """Recursively convert reports to JSON-compatible values, deterministically."""
    if isinstance(obj, Fraction):
        if _key is not None and _money_keys(_key):
            return float(obj / 100)
        return float(obj)
    if isinstance(obj, (Instance, Profile)):
        return None
    if is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in fields(obj):
            if f.name.startswith("_") or f.name in _SKIP_FIELDS:
                continue
            out[f.name] = to_jsonable(getattr(obj, f.name), f.name)
        for extra in ("ratios", "excluded", "relative_budget_allocation", "project_budget_share"):
            if hasattr(type(obj), extra) and isinstance(getattr(type(obj), extra), property):
                out[extra] = to_jsonable(getattr(obj, extra), extra)
        return out
    if isinstance(obj, dict):
        if _key == "payments":
            return {str(k): {vk: float(vv / 100) for vk, vv in v.items()} for k, v in obj.items()}
        return {(_fmt_key(k)): to_jsonable(v, _key if _key in ("curve", "curves") else None)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v, _key) for v in obj]
    return obj


def _fmt_key(k) -> str:
    if isinstance(k, Fraction):
        return f"{float(k):g}"
    return str(k)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False)


def run_tables(run: ElectionRun) -> dict[str, list[list]]:
    inst, alloc = run.instance, run.allocation
    scores = total_scores(inst, run.profile)
    votes = approval_counts(inst, run.profile)
    order = {p: i + 1 for i, p in enumerate(alloc.winners)}
    winners = [["project_id", "name", "cost", "score", "votes", "selected", "order"]]
    for p in inst.projects:
        winners.append([p.id, p.name, format_major(p.cost), scores[p.id], votes[p.id],
                        int(p.id in order), order.get(p.id, "")])
    curve = [["threshold", "share_points", "share_count"]]
    for t, share in run.metrics.representation.curve.items():
        curve.append([f"{float(t):g}", f"{float(share):.6f}",
                      f"{float(run.metrics.representation_count.curve[t]):.6f}"])
    tables = {"winners": winners, "representation_curve": curve}
    if run.metrics.districts:
        rows = [["district", "proposed", "won", "ratio"]]
        for d, (prop, won) in run.metrics.districts.per_district.items():
            rows.append([d, prop, won, f"{won / prop:.6f}" if prop else ""])
        tables["districts"] = rows
    cats = [["category", "proposed_share", "winner_share"]]
    proposed = metrics.category_shares(inst.projects)
    for c in sorted(set(proposed) | set(run.metrics.winner_categories)):
        cats.append([c, f"{float(proposed.get(c, 0)):.6f}", f"{float(run.metrics.winner_categories.get(c, 0)):.6f}"])
    tables["categories"] = cats
    return tables


def comparison_tables(report: ComparisonReport) -> dict[str, list[list]]:
    a, b = report.labels
    allocs = report.allocations
    tables = {}
    rows = [["project_id", "score", "votes", f"selected_{a}", f"selected_{b}"]]
    for pid in report.scores:
        rows.append([pid, report.scores[pid], report.votes[pid],
                     int(pid in allocs[a].winner_set), int(pid in allocs[b].winner_set)])
    tables["winners"] = rows
    rows = [["threshold", f"share_{a}", f"share_{b}", "share_exclusive"]]
    for t in report.representation[a].curve:
        rows.append([f"{float(t):g}", f"{float(report.representation[a].curve[t]):.6f}",
                     f"{float(report.representation[b].curve[t]):.6f}",
                     f"{float(report.exclusive.curve[t]):.6f}"])
    tables["representation_curve"] = rows
    if report.districts:
        rows = [["district", "proposed", f"won_{a}", f"won_{b}"]]
        for d, (prop, won) in report.districts[a].per_district.items():
            rows.append([d, prop, won, report.districts[b].per_district[d][1]])
        tables["districts"] = rows
    cats = sorted(set(report.proposed_categories) | set(report.categories[a]) | set(report.categories[b]))
    rows = [["category", "proposed_share", f"share_{a}", f"share_{b}"]]
    for c in cats:
        rows.append([c, f"{float(report.proposed_categories.get(c, 0)):.6f}",
                     f"{float(report.categories[a].get(c, 0)):.6f}", f"{float(report.categories[b].get(c, 0)):.6f}"])
    tables["categories"] = rows
    return tables


def corpus_tables(report: CorpusReport) -> dict[str, list[list]]:
    rows = [["criteria", "format", "elections", "rule", "aggregation", "threshold", "share"]]
    for agg in report.aggregates:
        crit = "+".join(agg.criteria) or "none"
        for label in report.labels:
            for kind, curves in (("per_election", agg.mean_curves), ("pooled", agg.pooled_curves)):
                for t, share in curves[label].items():
                    rows.append([crit, agg.ballot_format, agg.elections, label, kind,
                                 f"{float(t):g}", f"{float(share):.6f}"])
    gains = [["criteria", "format", "elections", "baseline_rule", "gain_per_election", "gain_pooled"]]
    for agg in report.aggregates:
        for label, g in agg.reference_gain.items():
            gains.append(["+".join(agg.criteria) or "none", agg.ballot_format, agg.elections, label,
                          f"{float(g):.6f}", f"{float(agg.reference_gain_pooled[label]):.6f}"])
    per = [["file_id", "vote_type", "num_projects"] + [f"winners_{l}" for l in report.labels]
           + [f"mean_repr_{l}" for l in report.labels]]
    for r in report.elections:
        per.append([r.file_id, r.vote_type, r.summary.num_projects] + [r.winners[l] for l in report.labels]
                   + ["" if r.mean_representation[l] is None else f"{float(r.mean_representation[l]):.6f}"
                      for l in report.labels])
    return {"curves": rows, "gains": gains, "elections": per}


def write_tables(tables: dict[str, list[list]], directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in tables.items():
        path = directory / f"{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
        written.append(path)
    return written


def tables_to_text(tables: dict[str, list[list]]) -> str:
    buf = io.StringIO()
    for name, rows in tables.items():
        buf.write(f"# {name}\n")
        csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()
