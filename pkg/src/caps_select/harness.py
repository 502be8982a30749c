"""Monte Carlo experiments over synthetic pools and simulated judges."""

from __future__ import annotations

import hashlib
import logging
import random
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from scipy.stats import binomtest

from .baselines import METHODS, select_pointwise, select_random_pairs, select_swiss_v1, select_vanilla
from .core import Candidate, CapsConfig, Level, SelectionResult, SwissConfig
from .evidence import EvidenceExtractor, make_candidate
from .judge import Judge, SimJudgeConfig, SimulatedJudge
from .tournament import select_caps

log = logging.getLogger(__name__)

DIFFICULTY = {"easy": 0.6, "medium": 0.3, "hard": 0.1}
SYNTHETIC_PROBLEM = "Return the requested value for the input."
_FILLER = "We check each case against the constraints and keep the invariant. "


@dataclass(frozen=True)
class PoolSpec:
    """Synthetic pool recipe.

    ``dup_profile`` is ``"distinct"``, ``"all"`` (one cluster), ``"crp:<alpha>"``
    (Chinese-restaurant clusters), or cluster sizes joined by ``+`` whose last
    term counts singletons: ``"11+5"`` is one cluster of 11 and 5 singletons.
    Members of a cluster share correctness.
    """

    N: int = 16
    p_correct: float = 0.3
    dup_profile: str = "distinct"
    seed: int = 0
    domain: str = "code"
    reasoning_words: int = 2000

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 <= self.p_correct <= 1:
            raise ValueError("p_correct must lie in [0, 1]")
        if self.domain not in ("code", "math"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @classmethod
    def difficulty(cls, level: str, **kw) -> "PoolSpec":
        return cls(p_correct=DIFFICULTY[level], **kw)


def cluster_sizes(profile: str, n: int, rng: random.Random) -> list[int]:
    if profile == "distinct":
        return [1] * n
    if profile == "all":
        return [n]
    if profile.startswith("crp:"):
        alpha = float(profile[4:])
        if alpha <= 0:
            raise ValueError("crp concentration must be positive")
        sizes: list[int] = []
        for k in range(n):
            u = rng.random() * (k + alpha)
            acc = 0.0
            for idx, s in enumerate(sizes):
                acc += s
                if u < acc:
                    sizes[idx] += 1
                    break
            else:
                sizes.append(1)
        return sizes
    try:
        terms = [int(t) for t in profile.split("+")]
    except ValueError:
        raise ValueError(f"bad dup_profile {profile!r}") from None
    if any(t < 0 for t in terms):
        raise ValueError(f"bad dup_profile {profile!r}")
    sizes = [t for t in terms[:-1] if t > 0] + [1] * terms[-1]
    if sum(sizes) != n:
        raise ValueError(f"dup_profile {profile!r} covers {sum(sizes)} candidates, pool has {n}")
    return sizes


@lru_cache(maxsize=8)
def _filler(words: int) -> str:
    return " ".join((_FILLER * (words // 10 + 1)).split()[:words])


def _synthetic_text(cluster: int, member: int, domain: str, words: int) -> str:
    # Fixed-width ids keep every candidate the same length.
    reasoning = f"Plan {cluster:04d}. " + _filler(words)
    if domain == "code":
        return (f"{reasoning}\n\n```python\ndef solve(x):\n    return x * {cluster + 2:04d}  "
                f"# draft {member:04d}\n```")
    return f"{reasoning} Draft {member:04d}.\nThe answer is \\boxed{{v{cluster:04d}}}."


def gen_pool(spec: PoolSpec, rng: Optional[random.Random] = None) -> list[Candidate]:
    rng = rng or random.Random(spec.seed)
    sizes = cluster_sizes(spec.dup_profile, spec.N, rng)
    correct = [rng.random() < spec.p_correct for _ in sizes]
    slots = [(k, m) for k, s in enumerate(sizes) for m in range(s)]
    rng.shuffle(slots)
    return [
        make_candidate(cid, _synthetic_text(k, m, spec.domain, spec.reasoning_words), spec.domain, correct[k])
        for cid, (k, m) in enumerate(slots)
    ]


def sub_seed(master: int, index: int) -> int:
    digest = hashlib.blake2b(f"{master}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def run_method(
    method: str,
    problem: str,
    pool: Sequence[Candidate],
    judge: Judge,
    seed: int = 0,
    caps_cfg: CapsConfig = CapsConfig(),
    swiss_cfg: SwissConfig = SwissConfig(),
    random_count: Optional[int] = None,
    extractor: Optional[EvidenceExtractor] = None,
    domain: str = "code",
) -> SelectionResult:
    extractor = extractor or EvidenceExtractor(domain)
    if method == "vanilla":
        return select_vanilla(pool)
    if method == "pointwise":
        return select_pointwise(problem, pool, judge, seed=seed, extractor=extractor)
    if method == "random":
        count = round(swiss_cfg.budget_multiplier * len(pool)) if random_count is None else random_count
        return select_random_pairs(problem, pool, judge, count, seed=seed, extractor=extractor)
    if method == "swiss":
        return select_swiss_v1(problem, pool, judge, SwissConfig(**{**asdict(swiss_cfg), "seed": seed}), extractor)
    if method in ("caps", "caps_r"):
        cfg = CapsConfig(**{**asdict(caps_cfg), "seed": seed, "rescue_enabled": method == "caps_r"})
        return select_caps(problem, pool, judge, cfg, extractor)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def pair_accuracy_counts(result: SelectionResult, pool: Sequence[Candidate]) -> dict[str, int]:
    """Correct picks among ground-truth-distinguishable calls, per level. Ties count as wrong."""
    truth = {c.id: c.ground_truth for c in pool}
    counts = {"dist_e1": 0, "right_e1": 0, "dist_e2": 0, "right_e2": 0}
    for o in result.transcript:
        if truth[o.i] == truth[o.j]:
            continue
        tag = "e1" if o.level is Level.E1 else "e2"
        counts[f"dist_{tag}"] += 1
        winner = o.winner_id()
        counts[f"right_{tag}"] += int(winner is not None and truth[winner])
    return counts


def run_trial(
    index: int,
    master_seed: int,
    methods: Sequence[str],
    pool_spec: PoolSpec,
    judge_cfg: SimJudgeConfig,
    caps_cfg: CapsConfig = CapsConfig(),
    swiss_cfg: SwissConfig = SwissConfig(),
    random_count: Optional[int] = None,
) -> list[dict]:
    """One pool, every method on it, one record per method.

    All methods share the pool and the judge seed, so their judgments of the
    same pair at the same level agree.
    """
    seed = sub_seed(master_seed, index)
    pool = gen_pool(pool_spec, random.Random(seed))
    extractor = EvidenceExtractor(pool_spec.domain)
    any_correct = any(c.ground_truth for c in pool)
    trivial = len({extractor.signature(c) for c in pool}) == 1
    truth = {c.id: c.ground_truth for c in pool}
    records = []
    for method in methods:
        judge = SimulatedJudge(judge_cfg.with_seed(seed))
        result = run_method(method, SYNTHETIC_PROBLEM, pool, judge, seed, caps_cfg, swiss_cfg, random_count,
                            extractor, pool_spec.domain)
        rec = result.as_record()
        rec.update(pair_accuracy_counts(result, pool))
        rec.update({"trial": index, "seed": seed, "correct": bool(truth[result.winner]),
                    "any_correct": any_correct, "trivial": trivial, "calls_e1": result.calls_e1,
                    "calls_e2": result.calls_e2 + result.calls.get("pointwise", 0)})
        records.append(rec)
    return records


def _wilson(k: int, n: int) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    return (float(ci.low), float(ci.high))


@dataclass
class MethodSummary:
    method: str
    trials: int
    pass_at_1: float
    ci_low: float
    ci_high: float
    mean_tokens: float
    mean_calls_e1: float
    mean_calls_e2: float
    t_percent: Optional[float] = None
    pair_acc_e1: Optional[float] = None
    pair_acc_e2: Optional[float] = None
    pair_acc: Optional[float] = None
    rescue_rate: Optional[float] = None


@dataclass
class ExperimentReport:
    methods: dict[str, MethodSummary]
    trials: int
    pass_at_n: float
    trivial_fraction: float
    master_seed: Optional[int] = None
    trial_seeds: list[int] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    delta_pp: Optional[float] = None
    p_r: Optional[float] = None

    def as_dict(self, include_records: bool = False) -> dict:
        out = {
            "trials": self.trials,
            "pass_at_n": self.pass_at_n,
            "trivial_fraction": self.trivial_fraction,
            "delta_pp": self.delta_pp,
            "p_r": self.p_r,
            "master_seed": self.master_seed,
            "trial_seeds": list(self.trial_seeds),
            "methods": {m: asdict(s) for m, s in self.methods.items()},
        }
        if include_records:
            out["records"] = list(self.records)
        return out

    def table(self) -> str:
        cols = ("method", "pass@1", "95% CI", "tokens", "T%", "E1 calls", "E2 calls")
        rows = []
        for s in self.methods.values():
            rows.append((s.method, f"{100 * s.pass_at_1:.1f}", f"[{100 * s.ci_low:.1f}, {100 * s.ci_high:.1f}]",
                         f"{s.mean_tokens:.0f}", "-" if s.t_percent is None else f"{s.t_percent:.1f}",
                         f"{s.mean_calls_e1:.1f}", f"{s.mean_calls_e2:.1f}"))
        widths = [max(len(str(r[i])) for r in rows + [cols]) for i in range(len(cols))]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [fmt.format(*cols)] + [fmt.format(*r) for r in rows]
        lines.append(f"pass@N {100 * self.pass_at_n:.1f}  trivial {100 * self.trivial_fraction:.1f}%  trials {self.trials}")
        if self.delta_pp is not None:
            lines.append(f"delta {self.delta_pp:+.2f} pp")
        if self.p_r is not None:
            lines.append(f"rescue rate {100 * self.p_r:.1f}%")
        return "\n".join(lines)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def aggregate(records: Iterable[dict], baseline: str = "swiss", master_seed: Optional[int] = None,
              keep_records: bool = False) -> ExperimentReport:
    """Fold trial records (in trial order) into a report."""
    records = sorted(records, key=lambda r: (r["trial"], METHODS.index(r["method"]) if r["method"] in METHODS else 99))
    by_method: dict[str, list[dict]] = defaultdict(list)
    per_trial: dict[int, dict] = {}
    for r in records:
        by_method[r["method"]].append(r)
        per_trial.setdefault(r["trial"], r)
    summaries = {}
    for method, rows in by_method.items():
        n = len(rows)
        k = sum(r["correct"] for r in rows)
        lo, hi = _wilson(k, n)
        sums = Counter()
        for r in rows:
            for key in ("dist_e1", "right_e1", "dist_e2", "right_e2"):
                sums[key] += r.get(key, 0)
        summaries[method] = MethodSummary(
            method=method,
            trials=n,
            pass_at_1=k / n,
            ci_low=lo,
            ci_high=hi,
            mean_tokens=sum(r["total_tokens"] for r in rows) / n,
            mean_calls_e1=sum(r["calls_e1"] for r in rows) / n,
            mean_calls_e2=sum(r["calls_e2"] for r in rows) / n,
            pair_acc_e1=_ratio(sums["right_e1"], sums["dist_e1"]),
            pair_acc_e2=_ratio(sums["right_e2"], sums["dist_e2"]),
            pair_acc=_ratio(sums["right_e1"] + sums["right_e2"], sums["dist_e1"] + sums["dist_e2"]),
            rescue_rate=(sum(r["rescued"] for r in rows) / n) if method == "caps_r" else None,
        )
    base = summaries.get(baseline)
    if base and base.mean_tokens > 0:
        for s in summaries.values():
            s.t_percent = 100.0 * s.mean_tokens / base.mean_tokens
    trials = len(per_trial)
    report = ExperimentReport(
        methods=summaries,
        trials=trials,
        pass_at_n=sum(r["any_correct"] for r in per_trial.values()) / trials if trials else 0.0,
        trivial_fraction=sum(r["trivial"] for r in per_trial.values()) / trials if trials else 0.0,
        master_seed=master_seed,
        trial_seeds=[per_trial[t]["seed"] for t in sorted(per_trial)],
        records=records if keep_records else [],
    )
    report.delta_pp = diagnostic_delta(report)
    if "caps_r" in summaries:
        report.p_r = summaries["caps_r"].rescue_rate
    return report


def diagnostic_delta(report: ExperimentReport) -> Optional[float]:
    """Cascade pair accuracy minus the all-E2 baseline's, in percentage points."""
    caps = report.methods.get("caps_r") or report.methods.get("caps")
    base = report.methods.get("swiss") or report.methods.get("random")
    if caps is None or base is None or caps.pair_acc is None or base.pair_acc is None:
        return None
    return 100.0 * (caps.pair_acc - base.pair_acc)


def run_experiment(
    methods: Sequence[str],
    pool_spec: PoolSpec,
    judge_cfg: SimJudgeConfig,
    trials: int,
    caps_cfg: CapsConfig = CapsConfig(),
    swiss_cfg: SwissConfig = SwissConfig(),
    random_count: Optional[int] = None,
    keep_records: bool = True,
    workers: int = 1,
) -> ExperimentReport:
    """Run ``trials`` independent trials; the pool spec's seed is the master seed."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    args = (methods, pool_spec, judge_cfg, caps_cfg, swiss_cfg, random_count)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = ex.map(_trial_star, [(t, pool_spec.seed, *args) for t in range(trials)], chunksize=64)
            records = [r for chunk in chunks for r in chunk]
    else:
        records = [r for t in range(trials) for r in run_trial(t, pool_spec.seed, *args)]
    log.info("ran %d trials of %s", trials, ",".join(methods))
    return aggregate(records, master_seed=pool_spec.seed, keep_records=keep_records)


def _trial_star(args):
    return run_trial(*args)
