"""Workbench for variation operators: invariance certification, weighted-sum
operator search, and a benchmark comparison harness."""

__version__ = "0.1.0"

from .algorithms import algorithm_names, run_algorithm
from .autov import (
    EvalConfig,
    InvalidMatrixError,
    MetaConfig,
    OperatorMatrix,
    ParentSetKind,
    apply_operator,
    autov_search,
    convergence_smoke,
    evaluate_operator,
    genome_bounds,
    inner_evolve,
    matrix_operator,
    parent_set_kind,
    published_operator,
    published_operator_json,
)
from .harness import (
    CatalogError,
    ComparisonCell,
    ComparisonResult,
    ConfigurationError,
    ExperimentConfig,
    ProblemSpec,
    build_problem,
    compare,
    export,
    parse_problem_spec,
    run_batch,
    run_single,
)
from .invariance import (
    DegenerateInputError,
    InvalidWeightsError,
    InvarianceReport,
    NondeterministicDrawError,
    check_rotation,
    check_scale,
    check_translation,
    classify,
    make_t_invariant,
    make_ts_invariant,
    make_tsr_invariant,
    weighted_sum_operator,
)
from .numerics import RandomStream, RankSumVerdict, median, random_orthogonal, rank_sum_test
from .operators import (
    CMAESState,
    CovarianceDegeneracyError,
    DEParams,
    SBXParams,
    SwarmState,
    VariationOperator,
    lab_operator,
    lab_operator_names,
    registry_names,
)
from .problems import (
    Bounds,
    Problem,
    benchmark_names,
    make_benchmark,
    rotate_problem,
    scale_problem,
    translate_problem,
)
from .records import RunRecord

__all__ = [
    "Bounds",
    "CMAESState",
    "CatalogError",
    "ComparisonCell",
    "ComparisonResult",
    "ConfigurationError",
    "CovarianceDegeneracyError",
    "DEParams",
    "DegenerateInputError",
    "EvalConfig",
    "ExperimentConfig",
    "InvalidMatrixError",
    "InvalidWeightsError",
    "InvarianceReport",
    "MetaConfig",
    "NondeterministicDrawError",
    "OperatorMatrix",
    "ParentSetKind",
    "Problem",
    "ProblemSpec",
    "RandomStream",
    "RankSumVerdict",
    "RunRecord",
    "SBXParams",
    "SwarmState",
    "VariationOperator",
    "algorithm_names",
    "apply_operator",
    "autov_search",
    "benchmark_names",
    "build_problem",
    "check_rotation",
    "check_scale",
    "check_translation",
    "classify",
    "compare",
    "convergence_smoke",
    "evaluate_operator",
    "export",
    "genome_bounds",
    "inner_evolve",
    "lab_operator",
    "lab_operator_names",
    "make_benchmark",
    "make_t_invariant",
    "make_ts_invariant",
    "make_tsr_invariant",
    "matrix_operator",
    "median",
    "parent_set_kind",
    "parse_problem_spec",
    "published_operator",
    "published_operator_json",
    "random_orthogonal",
    "rank_sum_test",
    "registry_names",
    "rotate_problem",
    "run_algorithm",
    "run_batch",
    "run_single",
    "scale_problem",
    "translate_problem",
    "weighted_sum_operator",
]
