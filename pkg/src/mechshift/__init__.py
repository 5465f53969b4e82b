"""Causal structure discovery from multi-environment data.

The score of a candidate DAG counts, over environment pairs, how many of its
conditional mechanisms change; the data-generating graph minimizes it. This
package provides the graph machinery (DAGs, patterns, d-separation,
equivalence classes), the oracle and empirical scorers with pluggable
invariance tests, a pooled constraint-based baseline, recovery-probability
bounds, a simulation harness, and a CLI.
"""

from .data import EnvSample, MultiEnvDataset, as_dataset, default_schema
from .estimators import MechanismShiftScorer, PooledPC
from .exceptions import (
    CiTestError,
    ConfigError,
    CycleError,
    DatasetFormatError,
    DegenerateDataError,
    GraphFormatError,
    MechshiftError,
    MecSizeError,
    NoConsistentExtensionError,
    ScoreTestError,
    SkeletonMismatchError,
)
from .graph import (
    AugmentedDag,
    Cpdag,
    Dag,
    d_separated,
    parse_graph,
    read_graph,
    serialize_graph,
    skeleton,
    v_structures,
    write_graph,
)
from .invariance import (
    InvarianceQuery,
    KernelConfig,
    TestResult,
    fisher_z_invariance,
    kci_invariance,
    linear_param_invariance,
    make_invariance_test,
    oracle_invariance,
    regression_residual_invariance,
)
from .io import load_multi_env, preprocess, save_multi_env
from .mec import (
    DEFAULT_MEC_LIMIT,
    MecEnumeration,
    cpdag_of,
    enumerate_extensions,
    enumerate_mec,
)
from .metrics import EvalResult, evaluate
from .mss import (
    InterventionScenario,
    OracleScorer,
    ScoreReport,
    bivariate_identify,
    default_alpha,
    empirical_mss,
    graph_recovery_bound,
    oracle_mss,
    oracle_mss_j,
    oracle_score_report,
    pairwise_shift_set,
    parent_recovery_bound,
    report_from_json,
    report_to_json,
    scenario_from_json,
    scenario_to_json,
)
from .pc import oracle_ci_test, pc_algorithm, pooled_pc, pooled_pc_oracle
from .sim import Mechanism, SimConfig, sample_er_dag, sample_hub_dag, sample_scenario, simulate

__version__ = "0.1.0"

__all__ = [
    "AugmentedDag",
    "CiTestError",
    "ConfigError",
    "Cpdag",
    "CycleError",
    "Dag",
    "DatasetFormatError",
    "DEFAULT_MEC_LIMIT",
    "DegenerateDataError",
    "EnvSample",
    "EvalResult",
    "GraphFormatError",
    "InterventionScenario",
    "InvarianceQuery",
    "KernelConfig",
    "Mechanism",
    "MechanismShiftScorer",
    "MechshiftError",
    "MecEnumeration",
    "MecSizeError",
    "MultiEnvDataset",
    "NoConsistentExtensionError",
    "OracleScorer",
    "PooledPC",
    "ScoreReport",
    "ScoreTestError",
    "SimConfig",
    "SkeletonMismatchError",
    "TestResult",
    "as_dataset",
    "bivariate_identify",
    "cpdag_of",
    "d_separated",
    "default_alpha",
    "default_schema",
    "empirical_mss",
    "enumerate_extensions",
    "enumerate_mec",
    "evaluate",
    "fisher_z_invariance",
    "graph_recovery_bound",
    "kci_invariance",
    "linear_param_invariance",
    "load_multi_env",
    "make_invariance_test",
    "oracle_ci_test",
    "oracle_invariance",
    "oracle_mss",
    "oracle_mss_j",
    "oracle_score_report",
    "pairwise_shift_set",
    "parent_recovery_bound",
    "parse_graph",
    "pc_algorithm",
    "pooled_pc",
    "pooled_pc_oracle",
    "preprocess",
    "read_graph",
    "regression_residual_invariance",
    "report_from_json",
    "report_to_json",
    "sample_er_dag",
    "sample_hub_dag",
    "sample_scenario",
    "save_multi_env",
    "scenario_from_json",
    "scenario_to_json",
    "serialize_graph",
    "simulate",
    "skeleton",
    "v_structures",
    "write_graph",
]
