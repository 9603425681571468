"""trajlab: generate, curate, and export ReAct-format agent trajectories for
fine-tuning, and evaluate prompted or fine-tuned QA agents."""

from .agent import (
    EpisodeConfig,
    Finish,
    ParseFailure,
    Round,
    Search,
    Trajectory,
    parse_action,
    read_trajectories,
    render_context,
    run_episode,
    write_trajectories,
)
from .curation import CurationPlan, PlanEntry, PlanFilters, cot_to_react, export, filter_successful, mix
from .datasets import DatasetRegistry, load
from .errors import (
    ConfigurationError,
    CurationError,
    DatasetError,
    EpisodeError,
    ExportError,
    ScriptExhaustedError,
    ToolError,
    TrajlabError,
    TransportError,
)
from .evaluation import aggregate_report, run_eval, scaling_sweep
from .lm import (
    FineTuneClient,
    FineTuneJob,
    FineTuneStatus,
    GenerationRequest,
    OpenAIChatClient,
    PriceTable,
    RateLimiter,
    ScriptedLM,
    TokenUsage,
    cost_of,
)
from .metrics import (
    MetricReport,
    ResultMatrix,
    em,
    f1,
    item_em,
    item_f1,
    method_choice_bounds,
    normalize,
    standard_error,
    turn_stats,
)
from .prompts import PromptSet, get_prompt_set
from .qa import AnswerStyle, Method, QAItem, SplitSpec, Task
from .tools import (
    ObservationPool,
    PerturbationConfig,
    PerturbMode,
    ScriptedTool,
    SerpApiClient,
    extract_answer,
    perturb,
)

__version__ = "0.1.0"
