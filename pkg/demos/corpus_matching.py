"""Matched-corpus comparison on the fixture corpus.

Elections are kept when they sit in the same quartile as a large, tight
budget process: many projects, little money relative to the proposals and
cheap projects relative to the budget. For each subset we compare the
representation curve of a reference election
(np = project count in Q4, rba = budget over total cost in Q1, pbs = mean
cost over budget in Q1) under equal shares with the
corpus curves under each rule.

Run: python3 demos/corpus_matching.py [corpus_dir] [reference.pb]
"""

import sys
from pathlib import Path

from eqshares.harness import corpus_analyze

SHORT = {"num_projects_Q4": "np", "relative_budget_allocation_Q1": "rba", "project_budget_share_Q1": "pbs"}

tests = Path(__file__).parents[1] / "tests/data"
corpus = Path(sys.argv[1]) if len(sys.argv) > 1 else tests / "corpus"
reference = Path(sys.argv[2]) if len(sys.argv) > 2 else tests / "town_approval.pb"

report = corpus_analyze(corpus, "num_projects_Q4,relative_budget_allocation_Q1,project_budget_share_Q1",
                        reference=reference, workers=2)
print(f"{len(report.elections)} elections analysed, {len(report.diagnostics)} skipped "
      f"(corpus hash {report.content_hash[:12]})")
for fid, why in report.diagnostics:
    print(f"  skipped {fid}: {why}")

mes, greedy = report.labels
print(f"\n{'criteria':14s} {'format':10s} {'n':>3s} {'gain vs ' + greedy:>16s} {'gain vs ' + mes:>16s} {'more winners':>13s}")
for agg in report.aggregates:
    if not agg.elections:
        continue
    crit = "+".join(SHORT[c] for c in agg.criteria)
    inc = "" if agg.winner_increase is None else f"{float(agg.winner_increase):.1%}"
    print(f"{crit:14s} {agg.ballot_format:10s} {agg.elections:3d} "
          f"{float(agg.reference_gain[greedy]):16.1%} {float(agg.reference_gain[mes]):16.1%} {inc:>13s}")
