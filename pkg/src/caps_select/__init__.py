"""Budget-aware best-of-N selection with cascaded pairwise judging."""

from .baselines import METHODS, select_pointwise, select_random_pairs, select_swiss_v1, select_vanilla
from .core import (
    Candidate,
    CapsConfig,
    Confidence,
    InvalidConfig,
    JudgeOutcome,
    Level,
    RawVerdict,
    SelectionResult,
    SwissConfig,
    TournamentState,
    Winner,
)
from .cost import CostModel, caps_cost_asymptotic, caps_cost_closed_form, expected_cost_with_rescue, t_percent
from .evidence import EvidenceExtractor, make_candidate
from .harness import PoolSpec, gen_pool, run_experiment
from .judge import CountingJudge, LLMJudge, ReplayJudge, SimJudgeConfig, SimulatedJudge, SIM_PRESETS
from .tournament import select_caps

__version__ = "0.1.0"
