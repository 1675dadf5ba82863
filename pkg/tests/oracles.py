"""Slow reference implementations used to check the package rules.

Nothing here imports from ``eqshares.rules``. Prices are found by trying
every subset of capped supporters, and every round of equal shares re-prices
all remaining projects from scratch.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations


def brute_rho(cost, supporters):
    """Smallest rho with sum(min(b, rho * u)) == cost, or None.

    Candidate prices come from every split of the supporters into a capped
    group (pays its whole budget) and a paying group (pays rho * u); the
    single-voter budget ratios cover the case where everybody is capped.
    """
    cost = Fraction(cost)
    supporters = [(Fraction(b), Fraction(u)) for b, u in supporters]
    if sum(b for b, _ in supporters) < cost:
        return None
    idx = range(len(supporters))
    candidates = {b / u for b, u in supporters}
    for k in range(len(supporters) + 1):
        for capped in combinations(idx, k):
            paying = [i for i in idx if i not in capped]
            util = sum(supporters[i][1] for i in paying)
            if util == 0:
                continue
            rest = cost - sum(supporters[i][0] for i in capped)
            if rest >= 0:
                candidates.add(rest / util)
    valid = [r for r in candidates
             if r >= 0 and sum(min(b, r * u) for b, u in supporters) == cost]
    return min(valid) if valid else None


def _order_key(scores, costs, pid):
    return (-scores[pid], costs[pid], pid)


def naive_scores(projects, ballots):
    return {p: sum(b.get(p, 0) for b in ballots) for p in projects}


def naive_greedy(budget, projects, ballots, chosen=(), remaining=None):
    """Projects by (score desc, cost asc, id asc); take each that still fits."""
    scores = naive_scores(projects, ballots)
    remaining = Fraction(budget) if remaining is None else remaining
    out = list(chosen)
    for pid in sorted(projects, key=lambda p: _order_key(scores, projects, p)):
        if pid in out:
            continue
        if projects[pid] <= remaining:
            out.append(pid)
            remaining -= projects[pid]
    return out


def naive_mes(budget, projects, ballots, endowment=None):
    """Equal shares with raw point utilities.

    ``projects`` maps id -> cost, ``ballots`` is a list of {id: points}.
    Returns (winners in selection order, payments {id: [amount per voter]}).
    """
    n = len(ballots)
    per_voter = Fraction(budget, n) if endowment is None else Fraction(endowment)
    money = [per_voter] * n
    scores = naive_scores(projects, ballots)
    winners, payments = [], {}
    while True:
        best = None
        for pid, cost in projects.items():
            if pid in winners:
                continue
            backers = [i for i in range(n) if ballots[i].get(pid, 0) > 0]
            rho = brute_rho(cost, [(money[i], ballots[i][pid]) for i in backers])
            if rho is None:
                continue
            key = (rho,) + _order_key(scores, projects, pid)
            if best is None or key < best[0]:
                best = (key, pid, rho, backers)
        if best is None:
            return winners, payments
        _, pid, rho, backers = best
        paid = [Fraction(0)] * n
        for i in backers:
            paid[i] = min(money[i], rho * ballots[i][pid])
            money[i] -= paid[i]
        winners.append(pid)
        payments[pid] = paid


def naive_add1(budget, projects, ballots, increment=1):
    """Raise the endowment by ``increment`` until overspending or exhaustion."""
    n = len(ballots)
    budget = Fraction(budget)
    endowment = budget / n
    kept = None
    while True:
        winners, _ = naive_mes(budget, projects, ballots, endowment)
        spent = sum(projects[p] for p in winners)
        if spent > budget:
            break
        kept = winners
        left = budget - spent
        if all(projects[p] > left for p in projects if p not in winners):
            break
        if endowment >= budget:
            break
        endowment += increment
    return kept
