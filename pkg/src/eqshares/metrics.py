"""Outcome analysis: representation, spatial spread, categories, corpus matching.

Every quantity is an exact Fraction; convert at the reporting edge only.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import Ballot, Instance, Profile, Project

UNCATEGORIZED = "uncategorized"
DEFAULT_THRESHOLDS = tuple(Fraction(k, 10) for k in range(1, 10))
MODES = ("points", "count")


def voter_representation(ballot: Ballot, winners: Iterable[str], mode: str = "points") -> Fraction | None:
    """Share of a voter's support that lands on ``winners``.

    ``points`` mode weighs projects by the points given; ``count`` mode counts
    supported projects. None when the voter supports nothing.

    >>> voter_representation(Ballot("v", {"A": 7, "B": 3}), {"A"})
    Fraction(7, 10)
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    winners = winners if isinstance(winners, (set, frozenset)) else set(winners)
    if mode == "points":
        total = sum(p for p in ballot.points.values() if p > 0)
        hit = sum(p for pid, p in ballot.points.items() if p > 0 and pid in winners)
    else:
        supported = [pid for pid, p in ballot.points.items() if p > 0]
        total = len(supported)
        hit = sum(1 for pid in supported if pid in winners)
    if total == 0:
        return None
    return Fraction(hit, total)


def curve_from_scores(scores: Iterable[Fraction], thresholds: Sequence[Fraction] = DEFAULT_THRESHOLDS
                      ) -> dict[Fraction, Fraction]:
    values = list(scores)
    out = {}
    for t in thresholds:
        t = Fraction(t)
        if not 0 < t <= 1:
            raise ValueError(f"threshold {t} outside (0, 1]")
        out[t] = Fraction(sum(1 for v in values if v >= t), len(values)) if values else Fraction(0)
    return out


def representation_curve(profile: Profile, winners: Iterable[str],
                         thresholds: Sequence[Fraction] = DEFAULT_THRESHOLDS,
                         mode: str = "points") -> dict[Fraction, Fraction]:
    """Share of voters whose representation is at least each threshold.

    Voters without any support are left out of the denominator.
    """
    winners = set(winners)
    scores = (voter_representation(b, winners, mode) for b in profile.ballots)
    return curve_from_scores((s for s in scores if s is not None), thresholds)


@dataclass(frozen=True)
class RepresentationStats:
    per_voter: dict[str, Fraction | None]
    mean: Fraction | None
    curve: dict[Fraction, Fraction]
    excluded_voters: int
    mode: str = "points"

    @property
    def defined(self) -> list[Fraction]:
        return [v for v in self.per_voter.values() if v is not None]


def representation_stats(profile: Profile, winners: Iterable[str], mode: str = "points",
                         thresholds: Sequence[Fraction] = DEFAULT_THRESHOLDS) -> RepresentationStats:
    winners = set(winners)
    per_voter = {b.voter_id: voter_representation(b, winners, mode) for b in profile.ballots}
    defined = [v for v in per_voter.values() if v is not None]
    mean = sum(defined, Fraction(0)) / len(defined) if defined else None
    return RepresentationStats(
        per_voter=per_voter,
        mean=mean,
        curve=curve_from_scores(defined, thresholds),
        excluded_voters=len(per_voter) - len(defined),
        mode=mode,
    )


def exclusive_representation(profile: Profile, winners_mes: Iterable[str], winners_greedy: Iterable[str],
                             mode: str = "points",
                             thresholds: Sequence[Fraction] = DEFAULT_THRESHOLDS) -> RepresentationStats:
    """Representation counted only on projects that win under MES but not greedy."""
    exclusive = set(winners_mes) - set(winners_greedy)
    return representation_stats(profile, exclusive, mode, thresholds)


def coverage(profile: Profile, projects: Iterable[str]) -> Fraction:
    """Share of voters who support at least one of ``projects``."""
    wanted = set(projects)
    if len(profile) == 0:
        return Fraction(0)
    hit = sum(1 for b in profile.ballots if any(p > 0 and pid in wanted for pid, p in b.points.items()))
    return Fraction(hit, len(profile))


def index_of_dispersion(values: Sequence) -> Fraction:
    """Population variance over mean.

    >>> index_of_dispersion([0, 1])
    Fraction(1, 2)
    """
    values = [Fraction(v) for v in values]
    if not values:
        raise ValueError("index of dispersion needs at least one value")
    mean = sum(values, Fraction(0)) / len(values)
    if mean == 0:
        raise ValueError("index of dispersion is undefined for a zero mean")
    variance = sum(((v - mean) ** 2 for v in values), Fraction(0)) / len(values)
    return variance / mean


@dataclass(frozen=True)
class DistrictTally:
    per_district: dict[str, tuple[int, int]]
    unassigned: int = 0

    @property
    def ratios(self) -> dict[str, Fraction]:
        return {d: Fraction(won, proposed) for d, (proposed, won) in self.per_district.items() if proposed > 0}

    @property
    def excluded(self) -> list[str]:
        return [d for d, (proposed, _) in self.per_district.items() if proposed == 0]


def district_tally(instance: Instance, winners: Iterable[str], key: str = "district") -> DistrictTally:
    """Proposed and winning project counts per district.

    ``key`` names the project attribute (``district``) or a passthrough column
    in ``Project.extra`` that holds the district. Projects without one are
    counted in ``unassigned``.
    """
    winners = set(winners)
    tally: dict[str, list[int]] = {}
    unassigned = 0
    for p in instance.projects:
        d = p.district if key == "district" else p.extra.get(key) or None
        if not d:
            unassigned += 1
            continue
        row = tally.setdefault(d, [0, 0])
        row[0] += 1
        if p.id in winners:
            row[1] += 1
    return DistrictTally({d: (a, b) for d, (a, b) in sorted(tally.items())}, unassigned)


def spatial_fairness_gain(tally_mes: DistrictTally, tally_greedy: DistrictTally) -> Fraction:
    """Relative drop in the index of dispersion of win ratios, greedy -> MES."""
    mes, greedy = tally_mes.ratios, tally_greedy.ratios
    if set(mes) != set(greedy):
        raise ValueError("tallies cover different districts")
    keys = sorted(mes)
    d_greedy = index_of_dispersion([greedy[k] for k in keys])
    d_mes = index_of_dispersion([mes[k] for k in keys])
    if d_greedy == 0:
        raise ValueError("greedy dispersion is zero; relative gain undefined")
    return (d_greedy - d_mes) / d_greedy


def category_shares(projects: Iterable[Project]) -> dict[str, Fraction]:
    """Share of each category among all category tags on ``projects``.

    >>> category_shares([Project("a", 1, categories=("health",)),
    ...                  Project("b", 1, categories=("health", "sport"))])
    {'health': Fraction(2, 3), 'sport': Fraction(1, 3)}
    """
    counts: Counter = Counter()
    for p in projects:
        if p.categories:
            counts.update(p.categories)
        else:
            counts[UNCATEGORIZED] += 1
    total = sum(counts.values())
    return {c: Fraction(n, total) for c, n in sorted(counts.items())}


@dataclass(frozen=True)
class BudgetStats:
    relative_budget_allocation: Fraction
    project_budget_share: Fraction

    @property
    def mean_budget_share(self) -> Fraction:
        return self.project_budget_share


def budget_stats(instance: Instance) -> BudgetStats:
    costs = [p.cost for p in instance.projects]
    if not costs:
        raise ValueError("budget statistics need at least one project")
    total = sum(costs, Fraction(0))
    return BudgetStats(
        relative_budget_allocation=instance.budget / total,
        project_budget_share=total / len(costs) / instance.budget,
    )


# -- corpus matching -------------------------------------------------------

MATCH_CRITERIA = {
    "num_projects_Q4": ("num_projects", 4),
    "relative_budget_allocation_Q1": ("relative_budget_allocation", 1),
    "project_budget_share_Q1": ("project_budget_share", 1),
}


def quartile_of(value, population: Sequence) -> int:
    """Rank-based quartile (1-4) of ``value`` within ``population``.

    Tied values share the lowest rank among them, which puts ties in the
    lower quartile.
    """
    n = len(population)
    rank = 1 + sum(1 for v in population if v < value)
    return math.ceil(4 * rank / n)


def quartiles(values: Mapping[str, object]) -> dict[str, int]:
    population = list(values.values())
    return {k: quartile_of(v, population) for k, v in values.items()}


@dataclass(frozen=True)
class CorpusMatch:
    criteria: tuple[str, ...]
    matched: tuple[str, ...]
    quartiles: dict[str, dict[str, int]] = field(default_factory=dict)


def parse_criteria(criteria) -> tuple[str, ...]:
    if isinstance(criteria, str):
        criteria = [c.strip() for c in criteria.split(",") if c.strip()]
    out = []
    for c in criteria:
        if c not in MATCH_CRITERIA:
            raise ValueError(f"unknown matching criterion {c!r}; use {sorted(MATCH_CRITERIA)}")
        if c not in out:
            out.append(c)
    return tuple(out)


def quartile_match(corpus: Sequence, criteria=()) -> CorpusMatch:
    """Keep elections in the required quartile of every selected criterion.

    ``corpus`` holds election summaries exposing ``file_id`` and the three
    statistics (see :class:`eqshares.pabulib.ElectionSummary`). Quartiles are
    computed over the whole corpus before any filtering.
    """
    criteria = parse_criteria(criteria)
    ids = [s.file_id for s in corpus]
    if criteria and len(corpus) < 4:
        raise ValueError("quartile matching needs at least 4 elections")
    q = {}
    for name in criteria:
        stat, _ = MATCH_CRITERIA[name]
        q[name] = quartiles({s.file_id: getattr(s, stat) for s in corpus})
    matched = [fid for fid in ids if all(q[name][fid] == MATCH_CRITERIA[name][1] for name in criteria)]
    return CorpusMatch(criteria, tuple(matched), q)


# -- pairwise comparisons ---------------------------------------------------

@dataclass(frozen=True)
class PairwiseRecord:
    """Pairwise comparisons ``(a, b, outcome)``; outcome is ``a``, ``b`` or None for a tie."""

    comparisons: tuple[tuple[str, str, str | None], ...]

    def __post_init__(self):
        cleaned = []
        for a, b, outcome in self.comparisons:
            if a == b:
                raise ValueError(f"project {a!r} compared with itself")
            if outcome == "tie":
                outcome = None
            if outcome not in (a, b, None):
                raise ValueError(f"outcome {outcome!r} is neither {a!r} nor {b!r}")
            cleaned.append((a, b, outcome))
        object.__setattr__(self, "comparisons", tuple(cleaned))


def pairwise_win_ranking(records) -> list[tuple[str, int, int]]:
    """Projects by descending pairwise wins, with dense ranks.

    >>> pairwise_win_ranking(PairwiseRecord((("a", "b", "a"), ("a", "c", "a"), ("b", "c", None))))
    [('a', 2, 1), ('b', 0, 2), ('c', 0, 2)]
    """
    comparisons = records.comparisons if isinstance(records, PairwiseRecord) else PairwiseRecord(tuple(records)).comparisons
    wins: Counter = Counter()
    for a, b, outcome in comparisons:
        wins[a] += 0
        wins[b] += 0
        if outcome is not None:
            wins[outcome] += 1
    ordered = sorted(wins.items(), key=lambda kv: (-kv[1], kv[0]))
    out = []
    rank = 0
    previous = None
    for pid, w in ordered:
        if w != previous:
            rank += 1
            previous = w
        out.append((pid, w, rank))
    return out


# -- curve aggregation ------------------------------------------------------

def mean_curve(curves: Sequence[Mapping[Fraction, Fraction]]) -> dict[Fraction, Fraction]:
    """Threshold-wise mean of several curves (each election weighs the same)."""
    if not curves:
        return {}
    keys = list(curves[0])
    return {t: sum((c[t] for c in curves), Fraction(0)) / len(curves) for t in keys}


def pooled_curve(score_lists: Sequence[Sequence[Fraction]],
                 thresholds: Sequence[Fraction] = DEFAULT_THRESHOLDS) -> dict[Fraction, Fraction]:
    """Curve over all voters of all elections taken together."""
    return curve_from_scores([s for scores in score_lists for s in scores], thresholds)


def representation_gain(curve: Mapping[Fraction, Fraction], baseline: Mapping[Fraction, Fraction]) -> Fraction:
    """Mean over thresholds of ``curve - baseline`` (shares of voters)."""
    keys = list(curve)
    if set(keys) != set(baseline):
        raise ValueError("curves use different thresholds")
    return sum((curve[t] - baseline[t] for t in keys), Fraction(0)) / len(keys)
