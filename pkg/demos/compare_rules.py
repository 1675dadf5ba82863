"""Compare equal shares with the greedy rule on one election file.

Prints the winner sets, who gained representation, how wins spread over
districts and how category shares move. Pass any Pabulib file; the default
is a small fixture shipped with the tests.

Run: python3 demos/compare_rules.py [file.pb]
"""

import sys
from pathlib import Path

from eqshares import RuleConfig
from eqshares.harness import compare

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests/data/cumulative.pb"
report = compare(path, RuleConfig(completion="add1u"), RuleConfig(rule="greedy"))
mes, greedy = report.labels

for label in report.labels:
    alloc = report.allocations[label]
    rep = report.representation[label]
    print(f"{label:10s} {len(alloc):3d} winners, mean representation {float(rep.mean):.1%}")
print(f"only under {mes}: {list(report.only_a)}; only under {greedy}: {list(report.only_b)}")

print("\nshare of voters with at least t of their points funded")
print("   t  " + "  ".join(f"{label:>10s}" for label in report.labels))
for t in report.representation[mes].curve:
    row = "  ".join(f"{float(report.representation[label].curve[t]):10.2f}" for label in report.labels)
    print(f"{float(t):4.1f}  {row}")

if report.districts:
    print("\nwins per district (proposed, won)")
    for label, tally in report.districts.items():
        print(f"  {label}: {tally.per_district}")
    if report.spatial_fairness_gain is not None:
        print(f"  dispersion drops by {float(report.spatial_fairness_gain):.0%}")

print("\ncategory shares among winners")
for cat in sorted(set(report.categories[mes]) | set(report.categories[greedy])):
    a = float(report.categories[mes].get(cat, 0))
    b = float(report.categories[greedy].get(cat, 0))
    print(f"  {cat:15s} {a:6.1%} vs {b:6.1%}")
