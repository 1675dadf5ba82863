"""Reader and writer for Pabulib ``.pb`` election files.

A file has three ``;``-separated sections, always in this order::

    META
    key;value
    budget;50000
    vote_type;cumulative
    ...
    PROJECTS
    project_id;cost;name;category
    1;15000;Upgrade soccer field;sport
    VOTES
    voter_id;vote;points
    v1;1,4,7;5,3,2

List-valued fields (``vote``, ``points``, ``category``) use ``,``. Columns and
META keys this module does not interpret are kept verbatim so that
``parse_pb(serialize_pb(*parse_pb(text)))`` reproduces the election.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import (
    Ballot,
    BallotRules,
    Instance,
    PBError,
    Profile,
    Project,
    Violation,
    format_major,
    money,
)

SECTIONS = ("META", "PROJECTS", "VOTES")

# META keys mapped onto Instance fields; everything else is passthrough.
_RULE_KEYS = {
    "min_length": "min_projects",
    "max_length": "max_projects",
    "max_sum_points": "total_points",
    "max_points": "max_points_per_project",
}
_LEADING_META = ("description", "country", "unit", "instance", "subunit", "district")
_DERIVED_META = ("budget", "vote_type", "num_projects", "num_votes")

_PROJECT_COLUMNS = ("project_id", "cost", "name", "category", "district")
_VOTE_COLUMNS = ("voter_id", "vote", "points")


class PbParseError(PBError):
    """A document could not be parsed; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        self.message = message
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())


class PbWriteError(PBError):
    pass


@dataclass
class PbSection:
    name: str
    header: list[str]
    rows: list[list[str]]
    header_line: int
    row_lines: list[int]


@dataclass
class PbDocument:
    """Raw row-level view of a file, before any interpretation."""

    meta: PbSection
    projects: PbSection
    votes: PbSection

    @property
    def sections(self) -> tuple[PbSection, PbSection, PbSection]:
        return (self.meta, self.projects, self.votes)


@dataclass
class PbElection:
    instance: Instance
    profile: Profile
    diagnostics: list[Violation] = field(default_factory=list)
    voter_lines: dict[str, int] = field(default_factory=dict)


def read_document(text: str, source: str | None = None) -> PbDocument:
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.splitlines()
    found: dict[str, PbSection] = {}
    current: PbSection | None = None
    order = []
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        name = raw.strip().upper()
        if name in SECTIONS and ";" not in raw:
            if name in found:
                raise PbParseError(f"section {name} appears twice", lineno, source)
            current = PbSection(name, [], [], lineno, [])
            found[name] = current
            order.append(name)
            continue
        if current is None:
            raise PbParseError("content before the META section", lineno, source)
        fields = next(csv.reader([raw], delimiter=";"))
        if not current.header:
            current.header = [f.strip() for f in fields]
            current.header_line = lineno
            continue
        width = len(current.header)
        if len(fields) > width and all(not f.strip() for f in fields[width:]):
            fields = fields[:width]
        if len(fields) != width:
            raise PbParseError(
                f"{current.name} row has {len(fields)} fields, header has {width}", lineno, source)
        current.rows.append(fields)
        current.row_lines.append(lineno)
    for name in SECTIONS:
        if name not in found:
            raise PbParseError(f"missing {name} section", None, source)
    if tuple(order) != SECTIONS:
        raise PbParseError(f"sections out of order: {order}", found[order[1]].header_line, source)
    return PbDocument(found["META"], found["PROJECTS"], found["VOTES"])


def _int(text: str, what: str, line: int, source) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise PbParseError(f"cannot parse {what} {text!r} as an integer", line, source) from None


def _split_list(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    return [t.strip() for t in text.split(",")]


def load_pb(text: str, mode: str = "strict", source: str | None = None) -> PbElection:
    """Parse a document into an election, keeping diagnostics and line numbers.

    ``mode="lenient"`` skips malformed or duplicated ballots (recording them in
    ``diagnostics``) instead of raising.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown mode {mode!r}")
    doc = read_document(text, source)

    meta: dict[str, str] = {}
    meta_lines: dict[str, int] = {}
    for row, line in zip(doc.meta.rows, doc.meta.row_lines):
        if len(row) < 2:
            raise PbParseError("META row needs a key and a value", line, source)
        key, value = row[0].strip(), row[1].strip()
        meta[key] = value
        meta_lines[key] = line
    for key in ("budget", "vote_type"):
        if key not in meta:
            raise PbParseError(f"META lacks required key {key!r}", doc.meta.header_line, source)
    try:
        budget = money(meta["budget"])
    except ValueError as exc:
        raise PbParseError(f"bad budget: {exc}", meta_lines["budget"], source) from None
    vote_type = meta["vote_type"].strip().lower()
    rules = {}
    for key, attr in _RULE_KEYS.items():
        if key in meta and meta[key] != "":
            rules[attr] = _int(meta[key], key, meta_lines[key], source)
    passthrough_meta = {k: v for k, v in meta.items() if k not in _RULE_KEYS and k not in _DERIVED_META}

    header = doc.projects.header
    for col in ("project_id", "cost"):
        if col not in header:
            raise PbParseError(f"PROJECTS header lacks {col!r}", doc.projects.header_line, source)
    projects = []
    for row, line in zip(doc.projects.rows, doc.projects.row_lines):
        rec = dict(zip(header, row))
        pid = rec["project_id"].strip()
        try:
            cost = money(rec["cost"])
        except ValueError as exc:
            raise PbParseError(f"bad cost: {exc}", line, source) from None
        extra = {k: v for k, v in rec.items() if k not in _PROJECT_COLUMNS}
        district = rec.get("district")
        try:
            projects.append(Project(
                id=pid,
                cost=cost,
                name=rec.get("name", ""),
                categories=tuple(_split_list(rec.get("category", ""))),
                district=district if district else None,
                extra=extra,
            ))
        except ValueError as exc:
            raise PbParseError(str(exc), line, source) from None
    try:
        instance = Instance(budget=budget, vote_type=vote_type, projects=projects,
                            ballot_rules=BallotRules(**rules), meta=passthrough_meta)
    except ValueError as exc:
        raise PbParseError(str(exc), doc.projects.header_line, source) from None

    vheader = doc.votes.header
    for col in ("voter_id", "vote"):
        if col not in vheader:
            raise PbParseError(f"VOTES header lacks {col!r}", doc.votes.header_line, source)
    has_points = "points" in vheader
    ballots = []
    diagnostics: list[Violation] = []
    voter_lines: dict[str, int] = {}

    def problem(kind, msg, line, vid=None):
        if mode == "strict":
            raise PbParseError(msg, line, source)
        diagnostics.append(Violation(kind, msg, voter_id=vid, line=line))

    for row, line in zip(doc.votes.rows, doc.votes.row_lines):
        rec = dict(zip(vheader, row))
        vid = rec["voter_id"].strip()
        if not vid:
            problem("missing voter id", "empty voter_id", line)
            continue
        if vid in voter_lines:
            problem("duplicate voter", f"voter id {vid!r} repeated (first on line {voter_lines[vid]})",
                    line, vid)
            continue
        vote = _split_list(rec["vote"])
        if has_points:
            raw_points = _split_list(rec["points"])
            if len(raw_points) != len(vote):
                problem("length mismatch",
                        f"voter {vid}: {len(vote)} projects but {len(raw_points)} point values", line, vid)
                continue
            pts = [_int(p, "points", line, source) for p in raw_points]
        else:
            pts = [1] * len(vote)
        if len(set(vote)) != len(vote):
            problem("repeated project", f"voter {vid} lists a project twice", line, vid)
            continue
        meta_cols = {k: v for k, v in rec.items() if k not in _VOTE_COLUMNS}
        ballots.append(Ballot(voter_id=vid, points=dict(zip(vote, pts)), voter_meta=meta_cols))
        voter_lines[vid] = line
    return PbElection(instance, Profile(tuple(ballots)), diagnostics, voter_lines)


def parse_pb(text: str, mode: str = "strict", source: str | None = None) -> tuple[Instance, Profile]:
    """Parse a Pabulib document into ``(instance, profile)``."""
    election = load_pb(text, mode=mode, source=source)
    return election.instance, election.profile


def read_pb(path, mode: str = "strict") -> PbElection:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise PbParseError(f"not valid UTF-8: {exc}", None, str(path)) from None
    return load_pb(text, mode=mode, source=str(path))


def _check_token(value: str, what: str):
    if not value or any(ch in value for ch in ";,\r\n"):
        raise PbWriteError(f"{what} {value!r} is empty or contains ';', ',' or a line break")


def _check_field(value: str, what: str):
    if "\n" in value or "\r" in value:
        raise PbWriteError(f"{what} {value!r} contains a line break")


def _column_union(records) -> list[str]:
    cols: list[str] = []
    for rec in records:
        for key in rec:
            if key not in cols:
                cols.append(key)
    return cols


def serialize_pb(instance: Instance, profile: Profile) -> str:
    """Write an election back to Pabulib text (``\\n`` line ends)."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=";", lineterminator="\n")

    meta_rows = []
    for key in _LEADING_META:
        if key in instance.meta:
            meta_rows.append((key, instance.meta[key]))
    meta_rows.append(("budget", format_major(instance.budget)))
    meta_rows.append(("vote_type", instance.vote_type))
    meta_rows.append(("num_projects", str(len(instance.projects))))
    meta_rows.append(("num_votes", str(len(profile))))
    for key, attr in _RULE_KEYS.items():
        value = getattr(instance.ballot_rules, attr)
        if value is not None:
            meta_rows.append((key, str(value)))
    for key, value in instance.meta.items():
        if key not in _LEADING_META:
            meta_rows.append((key, value))
    buf.write("META\n")
    writer.writerow(["key", "value"])
    for key, value in meta_rows:
        _check_field(key, "META key")
        _check_field(value, "META value")
        writer.writerow([key, value])

    projects = instance.projects
    pcols = ["project_id", "cost"]
    if any(p.name for p in projects):
        pcols.append("name")
    if any(p.categories for p in projects):
        pcols.append("category")
    if any(p.district is not None for p in projects):
        pcols.append("district")
    pcols += [c for c in _column_union(p.extra for p in projects) if c not in pcols]
    buf.write("PROJECTS\n")
    writer.writerow(pcols)
    for p in projects:
        _check_token(p.id, "project id")
        for cat in p.categories:
            _check_token(cat, "category")
        rec = {
            "project_id": p.id,
            "cost": format_major(p.cost),
            "name": p.name,
            "category": ",".join(p.categories),
            "district": p.district or "",
        }
        row = [rec[c] if c in rec else p.extra.get(c, "") for c in pcols]
        for value in row:
            _check_field(value, "project field")
        writer.writerow(row)

    ballots = profile.ballots
    with_points = instance.vote_type in ("cumulative", "scoring") or any(
        pts != 1 for b in ballots for pts in b.points.values())
    vcols = ["voter_id", "vote"] + (["points"] if with_points else [])
    vcols += [c for c in _column_union(b.voter_meta for b in ballots) if c not in vcols]
    buf.write("VOTES\n")
    writer.writerow(vcols)
    for b in ballots:
        _check_token(b.voter_id, "voter id")
        for pid in b.points:
            _check_token(pid, "project id")
        rec = {
            "voter_id": b.voter_id,
            "vote": ",".join(b.points),
            "points": ",".join(str(v) for v in b.points.values()),
        }
        row = [rec[c] if c in rec else b.voter_meta.get(c, "") for c in vcols]
        for value in row:
            _check_field(value, "vote field")
        writer.writerow(row)
    return buf.getvalue()


def write_pb(path, instance: Instance, profile: Profile) -> None:
    Path(path).write_text(serialize_pb(instance, profile), encoding="utf-8", newline="")


@dataclass(frozen=True)
class ElectionSummary:
    file_id: str
    vote_type: str
    num_projects: int
    num_votes: int
    budget: Fraction
    total_cost: Fraction
    mean_cost: Fraction

    @property
    def relative_budget_allocation(self) -> Fraction:
        return self.budget / self.total_cost

    @property
    def project_budget_share(self) -> Fraction:
        return self.mean_cost / self.budget


def summarize(file_id: str, instance: Instance, num_votes: int) -> ElectionSummary:
    costs = [p.cost for p in instance.projects]
    total = sum(costs, Fraction(0))
    return ElectionSummary(
        file_id=file_id,
        vote_type=instance.vote_type,
        num_projects=len(costs),
        num_votes=num_votes,
        budget=instance.budget,
        total_cost=total,
        mean_cost=total / len(costs) if costs else Fraction(0),
    )


@dataclass
class CorpusScan:
    summaries: list[ElectionSummary]
    diagnostics: list[tuple[str, str]]
    content_hash: str


def corpus_files(directory) -> list[Path]:
    root = Path(directory)
    return sorted(p for p in root.rglob("*.pb") if p.is_file())


def file_id(path, directory) -> str:
    return Path(path).relative_to(directory).as_posix()


def _scan_one(args):
    path, fid = args
    try:
        election = read_pb(path, mode="lenient")
        if not election.instance.projects:
            return fid, None, "no projects"
        return fid, summarize(fid, election.instance, len(election.profile)), None
    except (PBError, OSError, ValueError) as exc:
        return fid, None, str(exc)


def corpus_hash(directory) -> str:
    digest = hashlib.sha256()
    for path in corpus_files(directory):
        digest.update(file_id(path, directory).encode())
        digest.update(b"\0")
        digest.update(path.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()


def scan_corpus(directory, workers: int = 1) -> CorpusScan:
    """Summarize every ``.pb`` file under ``directory``.

    Files that fail to parse are listed in ``diagnostics`` as ``(file_id,
    message)``; they never abort the scan. Results are ordered by file id
    whatever ``workers`` is.
    """
    directory = Path(directory)
    jobs = [(p, file_id(p, directory)) for p in corpus_files(directory)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1)) as pool:
            results = list(pool.map(_scan_one, jobs))
    else:
        results = [_scan_one(j) for j in jobs]
    summaries, diagnostics = [], []
    for fid, summary, err in sorted(results, key=lambda r: r[0]):
        if summary is None:
            diagnostics.append((fid, err))
        else:
            summaries.append(summary)
    return CorpusScan(summaries, diagnostics, corpus_hash(directory))
