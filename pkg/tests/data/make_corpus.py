"""Regenerate the frozen fixture corpus in ./corpus (seeded; run once, commit output).

Usage: python3 make_corpus.py
"""

import random
from pathlib import Path

from eqshares.core import Ballot, BallotRules, Instance, Profile, Project, money
from eqshares.pabulib import write_pb

OUT = Path(__file__).parent / "corpus"


def election(rng, idx, large=False):
    vote_type = "cumulative" if idx % 3 == 2 else "approval"
    m = rng.randint(25, 40) if large else rng.randint(3, 14)
    costs = [rng.choice([5, 8, 10, 12, 15, 20, 25, 30, 40]) * 100 for _ in range(m)]
    low, high = (0.12, 0.25) if large else (0.15, 0.7)
    budget = rng.randint(int(sum(costs) * low), int(sum(costs) * high)) // 100 * 100 or 100
    districts = ["north", "south", "east"]
    cats = ["health", "sport", "culture", "education", "environment"]
    projects = [Project(f"{j + 1}", money(c), name=f"Project {j + 1}",
                        categories=tuple(rng.sample(cats, rng.randint(0, 2))),
                        district=rng.choice(districts)) for j, c in enumerate(costs)]
    popularity = [rng.random() ** 2 + 0.05 for _ in range(m)]
    ballots = []
    for v in range(rng.randint(6, 30)):
        k = rng.randint(1, min(4, m))
        chosen = set()
        while len(chosen) < k:
            chosen.add(rng.choices(range(m), weights=popularity)[0])
        chosen = sorted(chosen)
        if vote_type == "cumulative":
            pts = [1] * k
            for _ in range(5 - k if k < 5 else 0):
                pts[rng.randrange(k)] += 1
            ballots.append(Ballot(f"{v + 1}", {f"{c + 1}": p for c, p in zip(chosen, pts)}))
        else:
            ballots.append(Ballot(f"{v + 1}", {f"{c + 1}": 1 for c in chosen}))
    rules = BallotRules(total_points=5) if vote_type == "cumulative" else BallotRules()
    inst = Instance(money(budget), vote_type, projects, rules,
                    {"description": f"Fixture election {idx:02d}", "country": "Fixture", "unit": f"Town {idx:02d}"})
    return inst, Profile(ballots)


def main():
    rng = random.Random(20240607)
    OUT.mkdir(exist_ok=True)
    # the last six mimic large, tight-budget processes so all criteria can match
    for idx in range(30):
        inst, prof = election(rng, idx, large=idx >= 24)
        sub = OUT / ("approval" if inst.vote_type == "approval" else "cumulative")
        sub.mkdir(exist_ok=True)
        write_pb(sub / f"fixture_{idx:02d}.pb", inst, prof)
    (OUT / "broken.pb").write_text("META\nkey;value\nbudget;100\n", encoding="utf-8")


if __name__ == "__main__":
    main()
