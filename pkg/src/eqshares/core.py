"""Domain types shared by the parser, the rules and the metrics.

Money is an exact :class:`fractions.Fraction` counted in minor currency units
(one major unit = ``MINOR_PER_MAJOR`` minor units). Utilities are the points a
voter puts on a project. Nothing in here uses floating point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Mapping

MINOR_PER_MAJOR = 100

VOTE_TYPES = ("approval", "cumulative", "scoring", "ordinal")

Money = Fraction

_DECIMAL_RE = re.compile(r"^[+]?(\d+(\.\d*)?|\.\d+)$")


class PBError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(PBError):
    """Raised in strict mode when an election violates its own rules."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        first = report.violations[0] if report.violations else None
        msg = f"{len(report.violations)} violation(s)"
        if first is not None:
            msg += f"; first: {first}"
        super().__init__(msg)


def money(value) -> Money:
    """Convert a major-unit amount (int, Fraction or decimal string) to minor units.

    >>> money("12.5")
    Fraction(1250, 1)
    >>> money(3)
    Fraction(300, 1)
    """
    if isinstance(value, str):
        text = value.strip()
        if "," in text:
            raise ValueError(f"',' is not allowed in an amount: {value!r}")
        if not _DECIMAL_RE.match(text):
            raise ValueError(f"not a decimal amount: {value!r}")
        try:
            value = Fraction(Decimal(text))
        except InvalidOperation as exc:  # pragma: no cover - regex already guards
            raise ValueError(f"not a decimal amount: {value!r}") from exc
    elif isinstance(value, float):
        raise TypeError("floats are not accepted as money; pass a string or Fraction")
    return Fraction(value) * MINOR_PER_MAJOR


def to_major(amount: Money) -> Fraction:
    return Fraction(amount) / MINOR_PER_MAJOR


def format_major(amount: Money) -> str:
    """Render a minor-unit amount as a plain major-unit decimal string.

    Raises ValueError when the amount has no finite decimal expansion.
    """
    value = to_major(amount)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{amount} minor units has no finite decimal form")
    places = max(twos, fives)
    if places == 0:
        return str(value.numerator)
    scaled = value.numerator * 10**places // value.denominator
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


@dataclass(frozen=True)
class Project:
    id: str
    cost: Money
    name: str = ""
    categories: tuple[str, ...] = ()
    district: str | None = None
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("project id must be non-empty")
        object.__setattr__(self, "cost", Fraction(self.cost))
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class BallotRules:
    min_projects: int | None = None
    max_projects: int | None = None
    total_points: int | None = None
    max_points_per_project: int | None = None


@dataclass(frozen=True)
class Instance:
    budget: Money
    vote_type: str
    projects: tuple[Project, ...]
    ballot_rules: BallotRules = BallotRules()
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "budget", Fraction(self.budget))
        object.__setattr__(self, "projects", tuple(self.projects))
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.vote_type not in VOTE_TYPES:
            raise ValueError(f"unknown vote_type {self.vote_type!r}")
        ids = [p.id for p in self.projects]
        if len(set(ids)) != len(ids):
            raise ValueError("project ids must be unique")
        if self.vote_type == "cumulative" and self.ballot_rules.total_points is None:
            raise ValueError("cumulative instances need ballot_rules.total_points")
        object.__setattr__(self, "_by_id", {p.id: p for p in self.projects})

    def project(self, project_id: str) -> Project:
        return self._by_id[project_id]

    def __contains__(self, project_id) -> bool:
        return project_id in self._by_id

    @property
    def project_ids(self) -> list[str]:
        return [p.id for p in self.projects]

    def cost(self, project_id: str) -> Money:
        return self._by_id[project_id].cost

    @property
    def name(self) -> str:
        return self.meta.get("description") or self.meta.get("instance") or ""


@dataclass(frozen=True)
class Ballot:
    voter_id: str
    points: dict[str, int]
    voter_meta: dict[str, str] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.points.values())


@dataclass(frozen=True)
class Profile:
    ballots: tuple[Ballot, ...]

    def __post_init__(self):
        object.__setattr__(self, "ballots", tuple(self.ballots))

    def __len__(self) -> int:
        return len(self.ballots)

    def __iter__(self):
        return iter(self.ballots)

    def __getitem__(self, i):
        return self.ballots[i]


@dataclass(frozen=True)
class TieEvent:
    """A tie resolved by the tie-break order during a rule run."""

    stage: str
    tied: tuple[str, ...]
    chosen: str
    key: str

    def as_dict(self) -> dict:
        return {"stage": self.stage, "tied": list(self.tied), "chosen": self.chosen, "key": self.key}


@dataclass(frozen=True)
class RuleTag:
    rule: str
    completion: str = "none"
    endowment: Money | None = None
    ties: tuple[TieEvent, ...] = ()


@dataclass(frozen=True)
class Allocation:
    winners: tuple[str, ...]
    payments: dict[str, dict[str, Money]]
    spent: Money
    leftover: Money
    rule_tag: RuleTag

    @classmethod
    def build(cls, instance: Instance, winners: Iterable[str], payments=None, rule_tag=None):
        winners = tuple(winners)
        spent = sum((instance.cost(c) for c in winners), Fraction(0))
        return cls(
            winners=winners,
            payments=dict(payments or {}),
            spent=spent,
            leftover=instance.budget - spent,
            rule_tag=rule_tag or RuleTag(rule="unknown"),
        )

    @property
    def winner_set(self) -> frozenset[str]:
        return frozenset(self.winners)

    def __len__(self) -> int:
        return len(self.winners)


def utility(ballot: Ballot, project_id: str) -> int:
    return ballot.points.get(project_id, 0)


def total_score(profile: Profile, project_id: str, instance: Instance | None = None) -> int:
    """Sum of points over all ballots. Pass ``instance`` to reject unknown ids."""
    if instance is not None and project_id not in instance:
        raise KeyError(f"unknown project id {project_id!r}")
    return sum(b.points.get(project_id, 0) for b in profile.ballots)


def total_scores(instance: Instance, profile: Profile) -> dict[str, int]:
    scores = {p.id: 0 for p in instance.projects}
    for ballot in profile.ballots:
        for pid, pts in ballot.points.items():
            if pid in scores:
                scores[pid] += pts
    return scores


def approval_counts(instance: Instance, profile: Profile) -> dict[str, int]:
    counts = {p.id: 0 for p in instance.projects}
    for ballot in profile.ballots:
        for pid, pts in ballot.points.items():
            if pid in counts and pts > 0:
                counts[pid] += 1
    return counts


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    voter_id: str | None = None
    project_id: str | None = None
    line: int | None = None

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line is not None else ""
        return f"{self.kind}: {self.message}{where}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    dropped_voters: list[str] = field(default_factory=list)
    profile: Profile | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _ballot_violations(instance: Instance, ballot: Ballot, line=None) -> list[Violation]:
    out = []
    rules = instance.ballot_rules
    vid = ballot.voter_id

    def add(kind, msg, pid=None):
        out.append(Violation(kind, msg, voter_id=vid, project_id=pid, line=line))

    for pid, pts in ballot.points.items():
        if pid not in instance:
            add("unknown project", f"voter {vid} references absent project {pid!r}", pid)
        if not isinstance(pts, int) or pts <= 0:
            add("bad points", f"voter {vid} gives {pts!r} points to {pid!r}", pid)
        elif instance.vote_type == "approval" and pts != 1:
            add("bad points", f"approval ballot of {vid} gives {pts} points to {pid!r}", pid)
        elif rules.max_points_per_project is not None and pts > rules.max_points_per_project:
            add("too many points", f"voter {vid} gives {pts} > {rules.max_points_per_project} to {pid!r}", pid)
    n = len(ballot.points)
    if rules.min_projects is not None and n < rules.min_projects:
        add("too few projects", f"voter {vid} selects {n} < {rules.min_projects} projects")
    if rules.max_projects is not None and n > rules.max_projects:
        add("too many projects", f"voter {vid} selects {n} > {rules.max_projects} projects")
    if instance.vote_type == "cumulative" and rules.total_points is not None:
        if ballot.total != rules.total_points:
            add("point total mismatch", f"voter {vid} distributes {ballot.total} of {rules.total_points} points")
    return out


def validate(instance: Instance, profile: Profile, mode: str = "strict",
             lines: Mapping[str, int] | None = None) -> ValidationReport:
    """Check an election against its declared ballot rules.

    In ``strict`` mode any violation raises :class:`ValidationError`. In
    ``lenient`` mode offending ballots (and repeated voter ids after the first)
    are dropped and listed in ``report.dropped_voters``; ``report.profile`` holds
    the ballots to use downstream. ``lines`` optionally maps voter id to a
    source line for diagnostics.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown validation mode {mode!r}")
    lines = lines or {}
    report = ValidationReport()
    for p in instance.projects:
        if p.cost <= 0:
            report.violations.append(Violation("zero cost", f"project {p.id!r} has cost {p.cost}", project_id=p.id))
    kept = []
    seen = set()
    for ballot in profile.ballots:
        line = lines.get(ballot.voter_id)
        if ballot.voter_id in seen:
            report.violations.append(Violation(
                "duplicate voter", f"voter id {ballot.voter_id!r} repeated", voter_id=ballot.voter_id, line=line))
            report.dropped_voters.append(ballot.voter_id)
            continue
        seen.add(ballot.voter_id)
        problems = _ballot_violations(instance, ballot, line)
        if problems:
            report.violations.extend(problems)
            report.dropped_voters.append(ballot.voter_id)
        else:
            kept.append(ballot)
    if mode == "strict":
        if report.violations:
            raise ValidationError(report)
        report.profile = profile
    else:
        report.profile = Profile(tuple(kept))
    return report
