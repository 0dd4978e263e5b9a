"""Hybrid greedy + genetic EEG channel subset selection.

The public surface is intentionally small: dataset I/O, the preprocessing
transforms, the two search stages, the final pick, and the pipeline that
strings them together. Everything else is implementation detail.
"""

from .errors import SelectError
from .evaluator import (
    EvalContext,
    Evaluator,
    FitnessRecord,
    LinearProbeEvaluator,
    ModularEvaluator,
    PlantedEvaluator,
    SubsetCache,
    evaluate,
    evaluate_many,
)
from .finalpick import SelectionTally, TallyEntry, select_final, tally_unique
from .ga import GaConfig, Population, rank_select, run_dgaff, tournament_select
from .hics import HicsConfig, HicsTrace, run_hics
from .pipeline import RunConfig, apply_report, emit_report, load_report, run_pipeline, run_sweep
from .preprocess import (
    WindowSpec,
    normalize_amplitude,
    reject_artifacts,
    split_train_valid,
    window_trials,
)
from .subsets import ChannelSubset
from .tensorio import Dataset, load_dataset, save_dataset
from .weights import WeightVector, build_weights, uniform_weights

__version__ = "0.1.0"

__all__ = [
    "ChannelSubset",
    "Dataset",
    "EvalContext",
    "Evaluator",
    "FitnessRecord",
    "GaConfig",
    "HicsConfig",
    "HicsTrace",
    "LinearProbeEvaluator",
    "ModularEvaluator",
    "PlantedEvaluator",
    "Population",
    "RunConfig",
    "SelectError",
    "SelectionTally",
    "SubsetCache",
    "TallyEntry",
    "WeightVector",
    "WindowSpec",
    "apply_report",
    "build_weights",
    "emit_report",
    "evaluate",
    "evaluate_many",
    "load_dataset",
    "load_report",
    "normalize_amplitude",
    "rank_select",
    "reject_artifacts",
    "run_dgaff",
    "run_hics",
    "run_pipeline",
    "run_sweep",
    "save_dataset",
    "select_final",
    "split_train_valid",
    "tally_unique",
    "tournament_select",
    "uniform_weights",
    "window_trials",
]
