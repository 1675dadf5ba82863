"""Equal shares on four voters, step by step.

Four voters share a budget of 100, so each starts with 25. Project A (60) is
wanted by v1, v2 and v3, B (50) by v3 and v4, C (40) by v1 alone. We look at
the price per utility unit each project would need, let MES pick, then see
what the Add1 search and the greedy completion change.

Run: python3 demos/equal_shares_by_hand.py
"""

from eqshares import Ballot, Instance, Profile, Project, RuleConfig, find_rho, money
from eqshares.core import format_major
from eqshares.rules import add1_trace, add1u, mes_core, utilitarian_greedy

inst = Instance(money(100), "approval",
                [Project("A", money(60)), Project("B", money(50)), Project("C", money(40))])
prof = Profile([Ballot("v1", {"A": 1, "C": 1}), Ballot("v2", {"A": 1}),
                Ballot("v3", {"A": 1, "B": 1}), Ballot("v4", {"B": 1})])

share = inst.budget / len(prof)
print(f"each voter holds {format_major(share)}")
for pid in inst.project_ids:
    backers = [(share, 1) for b in prof if pid in b.points]
    sol = find_rho(inst.cost(pid), backers)
    price = "unaffordable" if sol is None else format_major(sol.rho)
    print(f"  {pid}: cost {format_major(inst.cost(pid))}, {len(backers)} backers, price per unit {price}")

alloc = mes_core(inst, prof)
print(f"\nMES picks {alloc.winners}, leftover {format_major(alloc.leftover)}")
for pid, ledger in alloc.payments.items():
    print(f"  {pid} paid by " + ", ".join(f"{v}={format_major(a)}" for v, a in ledger.items()))

kept, steps = add1_trace(inst, prof, RuleConfig(completion="add1"))
print(f"\nAdd1 tried {len(steps)} endowments; the last few:")
for step in steps[-3:]:
    print(f"  endowment {format_major(step.endowment)}: spends {format_major(step.spent)}"
          f"{' (over budget)' if step.spent > inst.budget else ''}")
print(f"kept endowment {format_major(kept.rule_tag.endowment)} -> winners {kept.winners}")

print(f"\nAdd1U (Add1 then greedy on the leftover): {add1u(inst, prof).winners}")
print(f"greedy by votes:                          {utilitarian_greedy(inst, prof).winners}")
