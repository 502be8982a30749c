"""Pool files: one JSON header line, then one candidate per line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Union

from .core import Candidate, check_pool
from .evidence import make_candidate


@dataclass
class Problem:
    problem_id: str
    problem_text: str
    domain: str = "code"
    candidates: list[Candidate] = field(default_factory=list)

    def header(self) -> dict:
        return {"problem_id": self.problem_id, "problem_text": self.problem_text, "domain": self.domain}


def parse_pool_lines(lines: Iterable[str]) -> Problem:
    rows = [json.loads(line) for line in lines if line.strip()]
    if not rows:
        raise ValueError("empty pool file")
    head = rows[0]
    domain = head.get("domain", "code")
    problem = Problem(str(head.get("problem_id", "")), head.get("problem_text", ""), domain)
    for row in rows[1:]:
        problem.candidates.append(make_candidate(int(row["id"]), row["raw_text"], domain, row.get("ground_truth")))
    check_pool(problem.candidates)
    return problem


def read_pool(source: Union[str, Path, IO[str]]) -> Problem:
    if hasattr(source, "read"):
        return parse_pool_lines(source.read().splitlines())
    with open(source, encoding="utf-8") as fh:
        return parse_pool_lines(fh)


def pool_lines(problem: Problem) -> list[str]:
    lines = [json.dumps(problem.header())]
    for c in problem.candidates:
        row = {"id": c.id, "raw_text": c.raw_text}
        if c.ground_truth is not None:
            row["ground_truth"] = c.ground_truth
        lines.append(json.dumps(row))
    return lines


def write_pool(problem: Problem, path: Union[str, Path]) -> None:
    Path(path).write_text("\n".join(pool_lines(problem)) + "\n", encoding="utf-8")
