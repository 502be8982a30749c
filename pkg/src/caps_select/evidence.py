"""Evidence views of a candidate: signature (E0), partial view (E1), full text (E2)."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Optional, Protocol

from .core import Candidate, CapsError, Level

TRUNCATION_MARKER = "[...reasoning truncated...]"
SUMMARY_HEAD_WORDS = 50
SUMMARY_TAIL_WORDS = 50
CODE_PREFIX_CHARS = 500
THINKING_TAIL_TOKENS = 500

# Line prefixes treated as import statements by normalize_code.
IMPORT_PATTERNS = (
    r"import\s",
    r"from\s+\S+\s+import\s",
    r"#\s*include\b",
    r"using\s+namespace\s",
    r"using\s+[\w.]+\s*;",
    r"package\s+[\w.]+\s*;?$",
    r"extern\s+crate\s",
    r"use\s+[\w:]+",
    r"require\s*\(",
)
_IMPORT_RE = re.compile("|".join(f"(?:{p})" for p in IMPORT_PATTERNS))

_THINK_RE = re.compile(r"<(think|thinking)>(.*?)</\1>", re.DOTALL | re.IGNORECASE)
_FENCE_RE = re.compile(r"```[^\n`]*\n.*?```", re.DOTALL)
_BLOCK_COMMENT_RE = re.compile(r"/\*.*?\*/", re.DOTALL)
# Thin/negative spaces and outer sizing commands; nothing else is rewritten.
_LATEX_ARTIFACT_RE = re.compile(
    r"\\[,!;:> ]|\\(?:left|right|big|Big|bigg|Bigg)[lr]?(?![a-zA-Z])"
)


class MissingAnswer(CapsError):
    """A math candidate has no boxed expression."""


class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...

    def tail(self, text: str, n: int) -> str: ...


class CharTokenCounter:
    """ceil(characters / chars_per_token); tokenizer-free approximation."""

    def __init__(self, chars_per_token: int = 4):
        self.chars_per_token = chars_per_token

    def count(self, text: str) -> int:
        return math.ceil(len(text) / self.chars_per_token)

    def tail(self, text: str, n: int) -> str:
        return text[-n * self.chars_per_token:] if n > 0 else ""


class WordTokenCounter:
    def count(self, text: str) -> int:
        return len(text.split())

    def tail(self, text: str, n: int) -> str:
        return " ".join(text.split()[-n:]) if n > 0 else ""


DEFAULT_COUNTER = CharTokenCounter()


@dataclass(frozen=True)
class EvidenceView:
    """What a judge sees of one candidate at one evidence level.

    For E0 the ``text`` holds the cluster signature and ``size_tokens`` is 0:
    signatures are never shown to a judge.
    """

    level: Level
    text: str
    size_tokens: int
    candidate: Candidate


# -- span extraction ---------------------------------------------------------

def last_boxed(text: str) -> Optional[str]:
    """Content of the last ``\\boxed{...}``, with nested braces matched."""
    start = text.rfind("\\boxed{")
    while start != -1:
        depth, pos = 1, start + len("\\boxed{")
        body_start = pos
        while pos < len(text) and depth:
            if text[pos] == "{":
                depth += 1
            elif text[pos] == "}":
                depth -= 1
            pos += 1
        if depth == 0:
            return text[body_start:pos - 1]
        start = text.rfind("\\boxed{", 0, start)
    return None


def split_spans(raw_text: str, domain: str) -> tuple[Optional[str], str]:
    """Return ``(reasoning_span, solution_span)`` for a raw candidate.

    Reasoning is the text between thinking delimiters when present. Without
    them it is everything before the last fenced code block (code) or the
    full text minus the line holding the last boxed answer (math). For code
    the solution is the last fenced block including its fences, falling back
    to the text after the thinking block or the whole text.
    """
    think = _THINK_RE.search(raw_text)
    reasoning = think.group(2).strip() if think else None

    if domain == "code":
        fences = list(_FENCE_RE.finditer(raw_text))
        if fences:
            last = fences[-1]
            solution = last.group(0)
            if reasoning is None:
                reasoning = raw_text[: last.start()].strip() or None
        elif think:
            solution = raw_text[think.end():].strip() or raw_text
        else:
            solution = raw_text
        return reasoning, solution

    if domain != "math":
        raise ValueError(f"unknown domain {domain!r}")
    if reasoning is None:
        idx = raw_text.rfind("\\boxed{")
        if idx == -1:
            reasoning = raw_text.strip() or None
        else:
            line_start = raw_text.rfind("\n", 0, idx) + 1
            line_end = raw_text.find("\n", idx)
            line_end = len(raw_text) if line_end == -1 else line_end
            rest = (raw_text[:line_start] + raw_text[line_end:]).strip()
            reasoning = rest or None
    return reasoning, raw_text


def make_candidate(cid: int, raw_text: str, domain: str, ground_truth: Optional[bool] = None) -> Candidate:
    reasoning, solution = split_spans(raw_text, domain)
    return Candidate(cid, raw_text, solution, reasoning, ground_truth)


# -- signatures ----------------------------------------------------------------

def _strip_line_comment(line: str) -> str:
    quote = None
    i = 0
    while i < len(line):
        ch = line[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#" or line.startswith("//", i):
            return line[:i]
        i += 1
    return line


def code_body(solution_span: str) -> str:
    """Drop the opening and closing fence lines of a fenced block."""
    lines = solution_span.split("\n")
    if lines and lines[0].lstrip().startswith("```"):
        lines = lines[1:]
    if lines and lines[-1].strip().startswith("```"):
        lines = lines[:-1]
    elif lines and lines[-1].rstrip().endswith("```"):
        lines[-1] = lines[-1].rstrip()[:-3]
    return "\n".join(lines)


def normalize_code(text: str) -> str:
    """Strip imports, comments, blank lines and leading whitespace; keep line order."""
    text = _BLOCK_COMMENT_RE.sub("", text)
    out = []
    for line in text.split("\n"):
        stripped = line.strip()
        if _IMPORT_RE.match(stripped):
            continue
        stripped = _strip_line_comment(stripped).strip()
        if stripped:
            out.append(stripped)
    return "\n".join(out)


def normalize_answer(answer: str) -> str:
    answer = _LATEX_ARTIFACT_RE.sub("", answer)
    return "".join(answer.lower().split())


def signature(candidate: Candidate, domain: str) -> str:
    if domain == "code":
        normalized = normalize_code(code_body(candidate.solution_span))
        return hashlib.sha256(normalized.encode("utf-8")).hexdigest()[:16]
    if domain == "math":
        answer = last_boxed(candidate.raw_text)
        if answer is None:
            raise MissingAnswer(f"candidate {candidate.id} has no boxed answer")
        return normalize_answer(answer)
    raise ValueError(f"unknown domain {domain!r}")


def signature_or_self(candidate: Candidate, domain: str) -> str:
    """Signature, or a key unique to the candidate when it has no answer."""
    try:
        return signature(candidate, domain)
    except MissingAnswer:
        return f"<singleton:{candidate.id}>"


# -- views -------------------------------------------------------------------

def reasoning_summary(reasoning: Optional[str]) -> str:
    if not reasoning:
        return ""
    words = reasoning.split()
    if len(words) <= SUMMARY_HEAD_WORDS + SUMMARY_TAIL_WORDS:
        return " ".join(words)
    head = " ".join(words[:SUMMARY_HEAD_WORDS])
    tail = " ".join(words[-SUMMARY_TAIL_WORDS:])
    return f"{head} {TRUNCATION_MARKER} {tail}"


def partial_view(
    candidate: Candidate,
    domain: str,
    thinking_aware: bool = False,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> EvidenceView:
    """Partial (E1) view of a candidate.

    Never larger than the full view: if the assembled partial text would
    cost more tokens than the raw text, the raw text is used instead.
    """
    answer = last_boxed(candidate.raw_text)
    if thinking_aware:
        parts = [f"Final answer: \\boxed{{{answer}}}"] if answer is not None else []
        parts.append(counter.tail(candidate.raw_text, THINKING_TAIL_TOKENS))
    else:
        summary = reasoning_summary(candidate.reasoning_span)
        parts = [summary] if summary else []
        if domain == "code":
            parts.append(candidate.solution_span[:CODE_PREFIX_CHARS])
        elif domain == "math":
            parts.append(f"Final answer: \\boxed{{{answer}}}" if answer is not None else "Final answer: (none)")
        else:
            raise ValueError(f"unknown domain {domain!r}")
    text = "\n\n".join(parts)
    size = counter.count(text)
    full = counter.count(candidate.raw_text)
    if size > full:
        text, size = candidate.raw_text, full
    return EvidenceView(Level.E1, text, size, candidate)


def full_view(candidate: Candidate, counter: TokenCounter = DEFAULT_COUNTER) -> EvidenceView:
    return EvidenceView(Level.E2, candidate.raw_text, counter.count(candidate.raw_text), candidate)


class EvidenceExtractor:
    """Memoizing view factory for one problem domain."""

    def __init__(self, domain: str, thinking_aware: bool = False, counter: TokenCounter = DEFAULT_COUNTER):
        if domain not in ("code", "math"):
            raise ValueError(f"unknown domain {domain!r}")
        self.domain = domain
        self.thinking_aware = thinking_aware
        self.counter = counter
        self._cache: dict[tuple[Candidate, Level], EvidenceView] = {}

    def view(self, candidate: Candidate, level: Level) -> EvidenceView:
        key = (candidate, level)
        cached = self._cache.get(key)
        if cached is None:
            if level is Level.E1:
                cached = partial_view(candidate, self.domain, self.thinking_aware, self.counter)
            elif level is Level.E2:
                cached = full_view(candidate, self.counter)
            else:
                cached = EvidenceView(Level.E0, signature_or_self(candidate, self.domain), 0, candidate)
            self._cache[key] = cached
        return cached

    def signature(self, candidate: Candidate) -> str:
        return self.view(candidate, Level.E0).text
