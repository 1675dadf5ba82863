"""Utilitarian greedy and the Method of Equal Shares with its completions.

All arithmetic is exact. Voters start with an equal endowment; a project is
bought at the price per unit of utility ``rho`` that its supporters can just
cover, each paying ``min(budget, rho * utility)``. The cheapest-rho project is
bought first, and the round repeats until nothing is affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .core import (
    Allocation,
    Instance,
    Money,
    PBError,
    Profile,
    RuleTag,
    TieEvent,
    money,
    total_scores,
)

RULES = ("greedy", "mes")
COMPLETIONS = ("none", "utilitarian", "add1", "add1u")
UTILITIES = ("points", "normalized")
TIEBREAK_CRITERIA = ("score", "cost", "id", "votes")
DEFAULT_TIEBREAK = ("score", "cost", "id")


try:
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _rational = Fraction


def _to_fraction(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


class RuleError(PBError):
    pass


@dataclass(frozen=True)
class Endowment:
    per_voter: Money

    def __post_init__(self):
        object.__setattr__(self, "per_voter", Fraction(self.per_voter))
        if self.per_voter <= 0:
            raise ValueError("endowment must be positive")


@dataclass(frozen=True)
class RhoSolution:
    rho: Fraction
    payments: dict


def parse_tiebreak(spec) -> tuple[str, ...]:
    """``"score,cost,id"`` -> ``("score", "cost", "id")``.

    ``score`` and ``votes`` prefer higher values, ``cost`` lower, ``id``
    lexicographically smaller. A leading ``-`` reverses a criterion.
    """
    if isinstance(spec, str):
        items = [s.strip() for s in spec.split(",") if s.strip()]
    else:
        items = list(spec)
    for item in items:
        if item.lstrip("-") not in TIEBREAK_CRITERIA:
            raise ValueError(f"unknown tie-break criterion {item!r}; use {TIEBREAK_CRITERIA}")
    return tuple(items)


@dataclass(frozen=True)
class RuleConfig:
    rule: str = "mes"
    completion: str = "none"
    add1_increment: Money = field(default_factory=lambda: money(1))
    tiebreak: tuple[str, ...] = DEFAULT_TIEBREAK
    utility: str = "points"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.completion not in COMPLETIONS:
            raise ValueError(f"unknown completion {self.completion!r}")
        if self.rule == "greedy" and self.completion != "none":
            raise ValueError("completions apply to the mes rule only")
        if self.utility not in UTILITIES:
            raise ValueError(f"unknown utility mode {self.utility!r}")
        object.__setattr__(self, "add1_increment", Fraction(self.add1_increment))
        if self.completion in ("add1", "add1u") and self.add1_increment <= 0:
            raise ValueError("add1_increment must be positive")
        object.__setattr__(self, "tiebreak", parse_tiebreak(self.tiebreak))

    @property
    def label(self) -> str:
        if self.rule == "greedy":
            return "greedy"
        return "mes" if self.completion == "none" else f"mes+{self.completion}"


class _Order:
    """Tie-break order over project ids, fixed for one (instance, profile)."""

    def __init__(self, instance: Instance, profile: Profile, criteria: Sequence[str]):
        self.scores = total_scores(instance, profile)
        self.instance = instance
        self.criteria = tuple(criteria) + ("id",)
        votes = None
        if any(c.lstrip("-") == "votes" for c in self.criteria):
            votes = {p.id: 0 for p in instance.projects}
            for b in profile.ballots:
                for pid in b.points:
                    if pid in votes:
                        votes[pid] += 1
        self.votes = votes

    def _value(self, criterion: str, pid: str):
        name = criterion.lstrip("-")
        if name == "score":
            v = -self.scores[pid]
        elif name == "votes":
            v = -self.votes[pid]
        elif name == "cost":
            v = self.instance.cost(pid)
        else:
            return pid
        return -v if criterion.startswith("-") else v

    def key(self, pid: str):
        out = []
        for criterion in self.criteria:
            value = self._value(criterion, pid)
            if criterion == "-id":
                # reversed lexicographic order on strings
                value = tuple(-ord(ch) for ch in value) + (1,)
            out.append(value)
        return tuple(out)

    def resolve(self, tied: Sequence[str]) -> tuple[str, str]:
        """Pick the preferred id among ``tied``; also report the deciding criterion."""
        pool = list(tied)
        for criterion in self.criteria:
            values = {pid: self.key(pid)[self.criteria.index(criterion)] for pid in pool}
            best = min(values.values())
            pool = [pid for pid in pool if values[pid] == best]
            if len(pool) == 1:
                return pool[0], criterion
        return sorted(pool)[0], "id"


def _require_voters(profile: Profile):
    if len(profile) == 0:
        raise RuleError("cannot evaluate a rule on an empty profile")


def _require_positive_costs(instance: Instance):
    bad = [p.id for p in instance.projects if p.cost <= 0]
    if bad:
        raise RuleError(f"projects with non-positive cost: {bad}")


def _greedy_scan(instance, order: _Order, candidates, remaining: Money, stage: str):
    ranked = sorted(candidates, key=order.key)
    ties = []
    i = 0
    while i < len(ranked):
        j = i
        while j + 1 < len(ranked) and order.scores[ranked[j + 1]] == order.scores[ranked[i]]:
            j += 1
        if j > i:
            group = ranked[i:j + 1]
            chosen, crit = order.resolve(group)
            ties.append(TieEvent(stage, tuple(group), chosen, crit))
        i = j + 1
    chosen = []
    for pid in ranked:
        cost = instance.cost(pid)
        if cost <= remaining:
            chosen.append(pid)
            remaining -= cost
    return chosen, ties


def utilitarian_greedy(instance: Instance, profile: Profile, config: RuleConfig | None = None) -> Allocation:
    """Select projects by descending total score while they fit the budget.

    A project that does not fit is skipped and the scan goes on.
    """
    config = config or RuleConfig(rule="greedy")
    _require_voters(profile)
    _require_positive_costs(instance)
    order = _Order(instance, profile, config.tiebreak)
    winners, ties = _greedy_scan(instance, order, instance.project_ids, instance.budget, "greedy")
    return Allocation.build(instance, winners, rule_tag=RuleTag("greedy", "none", None, tuple(ties)))


def find_rho(cost: Money, supporters) -> RhoSolution | None:
    """Smallest price per utility unit at which ``supporters`` can pay ``cost``.

    ``supporters`` is either a sequence of ``(budget, utility)`` pairs or a
    mapping ``voter -> (budget, utility)``; payments are keyed by position or
    voter accordingly. Returns None when the supporters hold less than
    ``cost`` in total.

    >>> sol = find_rho(20, [(5, 1), (25, 1)])
    >>> sol.rho, sol.payments
    (Fraction(15, 1), {0: Fraction(5, 1), 1: Fraction(15, 1)})
    """
    cost = Fraction(cost)
    if cost <= 0:
        raise ValueError("cost must be positive")
    if isinstance(supporters, Mapping):
        items = list(supporters.items())
    else:
        items = list(enumerate(supporters))
    for _, (_, u) in items:
        if u <= 0:
            raise ValueError("supporter utilities must be positive")
    total = sum((Fraction(b) for _, (b, _) in items), Fraction(0))
    if total < cost:
        return None
    # ascending budget/utility: the first voters to hit their cap
    ordered = sorted(items, key=lambda kv: Fraction(kv[1][0]) / kv[1][1])
    capped = Fraction(0)
    util_left = sum((u for _, (_, u) in items), 0)
    rho = None
    for _, (b, u) in ordered:
        trial = (cost - capped) / util_left
        if trial * u <= b:
            rho = trial
            break
        capped += b
        util_left -= u
    if rho is None:
        # everyone capped: the supporters' money is exactly the cost
        rho = Fraction(ordered[-1][1][0]) / ordered[-1][1][1]
    payments = {k: min(Fraction(b), rho * u) for k, (b, u) in items}
    return RhoSolution(rho, payments)


def _voter_groups(profile: Profile) -> list[list[int]]:
    """Indices of voters with identical ballots; they pay identically throughout MES."""
    groups: dict = {}
    for i, ballot in enumerate(profile.ballots):
        groups.setdefault(frozenset(ballot.points.items()), []).append(i)
    return list(groups.values())


def _supporters(instance: Instance, profile: Profile, groups, mode: str):
    """Per-project lists ``[(group, utility per member, group size)]``."""
    supp = {p.id: [] for p in instance.projects}
    for g, members in enumerate(groups):
        ballot = profile.ballots[members[0]]
        total = ballot.total
        if mode == "normalized" and total <= 0:
            continue
        for pid, pts in ballot.points.items():
            if pts <= 0 or pid not in supp:
                continue
            u = _rational(pts, total) if mode == "normalized" else _rational(pts)
            supp[pid].append((g, u, len(members)))
    return supp


def _rho_fast(cost, members, total_util, budgets):
    """Same answer as :func:`find_rho` for the MES inner loop, without sorting.

    ``members`` holds ``(group, utility, size)``; every voter of a group has
    the budget ``budgets[group]``. Starts from "nobody capped" and moves
    groups whose budget falls short of their share into the capped set until
    the price stops moving. The price only rises between passes, so a capped
    group never comes back.
    """
    rho = cost / total_util
    capped = 0
    util_left = total_util
    money_left = 0
    still = []
    for m in members:
        g, u, w = m
        b = budgets[g]
        if b < rho * u:
            capped += b * w
            util_left -= u * w
        else:
            money_left += b * w
            still.append(m)
    if capped + money_left < cost:
        return None
    rich = members
    while len(still) != len(rich):
        rich = still
        rho = (cost - capped) / util_left
        still = []
        for m in rich:
            g, u, w = m
            b = budgets[g]
            if b < rho * u:
                capped += b * w
                util_left -= u * w
            else:
                still.append(m)
        if not still:
            # unreachable while the supporters can afford the cost
            return max(budgets[g] / u for g, u, _ in members)
    return rho


class _MesRunner:
    """Precomputed inputs for repeated MES runs on one election."""

    def __init__(self, instance: Instance, profile: Profile, config: RuleConfig):
        _require_voters(profile)
        _require_positive_costs(instance)
        self.instance = instance
        self.n = len(profile)
        self.order = _Order(instance, profile, config.tiebreak)
        # Inner loop runs on gmpy2 rationals when available; exact either way.
        self.groups = _voter_groups(profile)
        self.supporters = _supporters(instance, profile, self.groups, config.utility)
        self.total_util = {pid: sum((u * w for _, u, w in members), _rational(0))
                           for pid, members in self.supporters.items()}
        self.costs = {p.id: _rational(p.cost.numerator, p.cost.denominator) for p in instance.projects}
        self.voter_ids = [b.voter_id for b in profile.ballots]
        self.position = {vid: i for i, vid in enumerate(self.voter_ids)}
        self.rank = {pid: self.order.key(pid) for pid in instance.project_ids}

    def run(self, per_voter: Fraction):
        budgets = [_rational(per_voter.numerator, per_voter.denominator)] * len(self.groups)
        supporters, costs, rank = self.supporters, self.costs, self.rank
        total_util = self.total_util
        # Budgets only shrink, so a project's rho never decreases: the last
        # computed value is a lower bound that lets us skip hopeless candidates.
        lower = {pid: _rational(0) for pid in self.instance.project_ids if supporters[pid]}
        winners, payments, ties = [], {}, []
        round_no = 0
        while lower:
            round_no += 1
            best = None
            tied: list[str] = []
            for pid in sorted(lower, key=lambda p: (lower[p], rank[p])):
                if best is not None and lower[pid] > best:
                    break
                rho = _rho_fast(costs[pid], supporters[pid], total_util[pid], budgets)
                if rho is None:
                    del lower[pid]
                    continue
                lower[pid] = rho
                if best is None or rho < best:
                    best, tied = rho, [pid]
                elif rho == best:
                    tied.append(pid)
            if best is None:
                break
            if len(tied) > 1:
                chosen, crit = self.order.resolve(tied)
                ties.append(TieEvent(f"mes round {round_no}", tuple(sorted(tied, key=rank.get)), chosen, crit))
            else:
                chosen = tied[0]
            ledger = []
            for g, u, _ in supporters[chosen]:
                pay = min(budgets[g], best * u)
                if pay > 0:
                    budgets[g] -= pay
                    ledger.append((g, pay))
            payments[chosen] = ledger
            winners.append(chosen)
            del lower[chosen]
        spent = sum((self.instance.cost(c) for c in winners), Fraction(0))
        return winners, payments, ties, spent

    def allocation(self, per_voter: Fraction, raw) -> Allocation:
        winners, payments, ties, _ = raw
        ledger = {}
        for pid, rows in payments.items():
            per_voter_pay = {}
            for g, pay in rows:
                pay = _to_fraction(pay)
                for i in self.groups[g]:
                    per_voter_pay[self.voter_ids[i]] = pay
            ledger[pid] = dict(sorted(per_voter_pay.items(), key=lambda kv: self.position[kv[0]]))
        tag = RuleTag("mes", "none", per_voter, tuple(ties))
        return Allocation.build(self.instance, winners, ledger, tag)


def mes_core(instance: Instance, profile: Profile, endowment: Endowment | None = None,
             config: RuleConfig | None = None) -> Allocation:
    """Method of Equal Shares without completion.

    ``endowment`` defaults to an equal split of the budget over all voters.
    The returned allocation may overspend the instance budget only when the
    endowment exceeds budget / n (as the Add1 search does).
    """
    config = config or RuleConfig()
    runner = _MesRunner(instance, profile, config)
    per_voter = endowment.per_voter if endowment is not None else instance.budget / runner.n
    return runner.allocation(per_voter, runner.run(per_voter))


def is_exhaustive(instance: Instance, allocation: Allocation) -> bool:
    chosen = allocation.winner_set
    return not any(p.cost <= allocation.leftover for p in instance.projects if p.id not in chosen)


def complete_utilitarian(instance: Instance, profile: Profile, partial: Allocation,
                         config: RuleConfig | None = None) -> Allocation:
    """Spend the leftover of ``partial`` with the greedy scan over unselected projects."""
    config = config or RuleConfig()
    if partial.spent > instance.budget:
        raise RuleError("partial allocation already exceeds the budget")
    order = _Order(instance, profile, config.tiebreak)
    chosen = partial.winner_set
    rest = [pid for pid in instance.project_ids if pid not in chosen]
    extra, ties = _greedy_scan(instance, order, rest, partial.leftover, "utilitarian completion")
    tag = partial.rule_tag
    tag = RuleTag(tag.rule, "utilitarian", tag.endowment, tag.ties + tuple(ties))
    return Allocation.build(instance, partial.winners + tuple(extra), partial.payments, tag)


@dataclass(frozen=True)
class Add1Step:
    endowment: Money
    spent: Money
    winners: int
    exhaustive: bool


def add1_trace(instance: Instance, profile: Profile, config: RuleConfig | None = None):
    """Run the Add1 search; returns the kept allocation and every step tried."""
    config = config or RuleConfig(completion="add1")
    runner = _MesRunner(instance, profile, config)
    budget = instance.budget
    per_voter = budget / runner.n
    kept = None
    steps = []
    while True:
        raw = runner.run(per_voter)
        winners, spent = raw[0], raw[3]
        over = spent > budget
        exhaustive = not over and not any(
            p.cost <= budget - spent for p in instance.projects if p.id not in set(winners))
        steps.append(Add1Step(per_voter, spent, len(winners), exhaustive))
        if over:
            break
        kept = (per_voter, raw)
        if exhaustive or per_voter >= budget:
            break
        per_voter += config.add1_increment
    # the first step spends at most the budget, so kept is always set
    alloc = runner.allocation(*kept)
    tag = alloc.rule_tag
    alloc = Allocation(alloc.winners, alloc.payments, alloc.spent, alloc.leftover,
                       RuleTag(tag.rule, "add1", tag.endowment, tag.ties))
    return alloc, steps


def add1(instance: Instance, profile: Profile, config: RuleConfig | None = None) -> Allocation:
    """MES with endowments raised step by step while the outcome stays within budget."""
    return add1_trace(instance, profile, config)[0]


def add1u(instance: Instance, profile: Profile, config: RuleConfig | None = None) -> Allocation:
    """Add1 followed by utilitarian completion."""
    config = config or RuleConfig(completion="add1u")
    base = add1(instance, profile, config)
    done = complete_utilitarian(instance, profile, base, config)
    tag = done.rule_tag
    return Allocation(done.winners, done.payments, done.spent, done.leftover,
                      RuleTag(tag.rule, "add1u", tag.endowment, tag.ties))


def run_rule(instance: Instance, profile: Profile, config: RuleConfig) -> Allocation:
    if config.rule == "greedy":
        return utilitarian_greedy(instance, profile, config)
    if config.completion == "none":
        return mes_core(instance, profile, None, config)
    if config.completion == "utilitarian":
        return complete_utilitarian(instance, profile, mes_core(instance, profile, None, config), config)
    if config.completion == "add1":
        return add1(instance, profile, config)
    return add1u(instance, profile, config)
