"""Participatory budgeting outcomes under utilitarian greedy and the Method of Equal Shares.

The package reads Pabulib election files, runs the rules with exact rational
arithmetic and measures the outcomes (voter representation, spatial and
category spread, corpus-level comparisons).
"""

from .core import (
    Allocation,
    Ballot,
    BallotRules,
    Instance,
    PBError,
    Profile,
    Project,
    ValidationError,
    ValidationReport,
    money,
    total_score,
    validate,
)
from .pabulib import PbParseError, parse_pb, read_pb, serialize_pb, write_pb
from .rules import (
    Endowment,
    RuleConfig,
    add1,
    add1u,
    complete_utilitarian,
    find_rho,
    mes_core,
    run_rule,
    utilitarian_greedy,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "Ballot", "BallotRules", "Endowment", "Instance", "PBError", "PbParseError",
    "Profile", "Project", "RuleConfig", "ValidationError", "ValidationReport", "add1", "add1u",
    "complete_utilitarian", "find_rho", "mes_core", "money", "parse_pb", "read_pb", "run_rule",
    "serialize_pb", "total_score", "utilitarian_greedy", "validate", "write_pb",
]
