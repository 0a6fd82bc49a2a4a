"""Label-free evaluation engine for abductive hypothesis sets.

Scores sets of candidate explanations by three reference-free criteria:
consistency with the given observations, coverage of a shared sample space
(generalizability), and prediction-pattern diversity. Also ships the
generation-loop protocol with its three-strike stopping rule, two validation
studies over synthetic pools, preference-pair export for downstream
preference training, and a momentum-based curriculum scheduler.
"""

__version__ = "0.1.0"

from .values import (
    Entity,
    Grid,
    Observation,
    ObservationSet,
    canonicalize,
    equal_values,
    parse_value,
)
from .spaces import (
    SampleSpace,
    SpaceRecipe,
    build_acre_space,
    build_corpus_space,
    build_list_function_space,
    read_space,
    sample_observations,
    write_space,
)
from .executor import (
    ExecLimits,
    Hypothesis,
    Outcome,
    PredictionSet,
    compute_prediction_set,
    compute_prediction_sets,
    eval_program,
    evaluate_on_observations,
    make_lookup_hypothesis,
)
from .dsl import parse_program
from .metrics import (
    BoundsCertificate,
    DiversityReport,
    Verdict,
    beta_diversity,
    bounds_certificate,
    check_consistency,
    classify_hypothesis,
    diversity_report,
    gamma_beta_bounds,
    gamma_diversity,
    generalizability,
    jaccard_dissim,
    novelty_coverage,
)

__all__ = [
    "Entity",
    "Grid",
    "Observation",
    "ObservationSet",
    "canonicalize",
    "equal_values",
    "parse_value",
    "SampleSpace",
    "SpaceRecipe",
    "build_acre_space",
    "build_corpus_space",
    "build_list_function_space",
    "read_space",
    "sample_observations",
    "write_space",
    "ExecLimits",
    "Hypothesis",
    "Outcome",
    "PredictionSet",
    "compute_prediction_set",
    "compute_prediction_sets",
    "eval_program",
    "evaluate_on_observations",
    "make_lookup_hypothesis",
    "parse_program",
    "BoundsCertificate",
    "DiversityReport",
    "Verdict",
    "beta_diversity",
    "bounds_certificate",
    "check_consistency",
    "classify_hypothesis",
    "diversity_report",
    "gamma_beta_bounds",
    "gamma_diversity",
    "generalizability",
    "jaccard_dissim",
    "novelty_coverage",
]
