"""Parallel learning and inference for discrete probabilistic graphical models.

The public surface mirrors the pipeline: io_formats loads data and
networks, structure learns a CPDAG, parameters fits CPTs, exact and
approximate answer queries, simulate generates data and scores results.
All parallel code paths produce output identical to the single-threaded
ones, bit for bit.
"""

__version__ = "0.1.0"

from .core import (
    DEFAULT_SIZE_CAP,
    DiscreteVariable,
    Network,
    PotentialTable,
    cpt_from_rows,
    cpt_rows,
    table_divide,
    table_marginalize,
    table_multiply,
    table_normalize,
    table_reduce,
    validate_evidence,
)
from .errors import (
    AllSamplesRejectedError,
    ExtensionError,
    FormatError,
    ImpossibleEvidenceError,
    InconsistentCalibrationError,
    ParseError,
    PgmError,
    ScopeViolationError,
    TableTooLargeError,
    ValidationError,
    ZeroMassError,
    ZeroTotalWeightError,
)
from .io_formats import (
    Dataset,
    convert,
    load_csv,
    network_to_json,
    parse_bif,
    parse_network_json,
    parse_structure_json,
    read_network_text,
    structure_to_json,
    write_bif,
    write_csv,
    write_dot,
)
from .structure import (
    CiResult,
    PdagGraph,
    StructureResult,
    apply_meek_rules,
    ci_test,
    dag_to_cpdag,
    extend_to_dag,
    learn_structure,
    orient_v_structures,
    pc_stable_skeleton,
)
from .parameters import fit_mle
from .exact import (
    CalibratedTree,
    JunctionTree,
    build_junction_tree,
    elimination_order,
    jt_marginals,
    jt_propagate,
    variable_elimination,
    ve_marginals,
)
from .approximate import (
    ENGINES,
    Diagnostics,
    MarginalSet,
    SamplerConfig,
    ais_bn,
    classify,
    epis_bn,
    infer_marginals,
    likelihood_weighting,
    loopy_belief_propagation,
    probabilistic_logic_sampling,
    self_importance_sampling,
)
from .simulate import generate_dataset, hellinger, mean_hellinger, shd

__all__ = [
    "__version__",
    "DEFAULT_SIZE_CAP",
    "DiscreteVariable",
    "Network",
    "PotentialTable",
    "cpt_from_rows",
    "cpt_rows",
    "table_divide",
    "table_marginalize",
    "table_multiply",
    "table_normalize",
    "table_reduce",
    "validate_evidence",
    "PgmError",
    "ValidationError",
    "ParseError",
    "FormatError",
    "TableTooLargeError",
    "ScopeViolationError",
    "InconsistentCalibrationError",
    "ZeroMassError",
    "ImpossibleEvidenceError",
    "AllSamplesRejectedError",
    "ZeroTotalWeightError",
    "ExtensionError",
    "Dataset",
    "load_csv",
    "write_csv",
    "parse_bif",
    "write_bif",
    "network_to_json",
    "parse_network_json",
    "structure_to_json",
    "parse_structure_json",
    "write_dot",
    "convert",
    "read_network_text",
    "CiResult",
    "PdagGraph",
    "StructureResult",
    "ci_test",
    "pc_stable_skeleton",
    "orient_v_structures",
    "apply_meek_rules",
    "extend_to_dag",
    "dag_to_cpdag",
    "learn_structure",
    "fit_mle",
    "JunctionTree",
    "CalibratedTree",
    "elimination_order",
    "variable_elimination",
    "ve_marginals",
    "build_junction_tree",
    "jt_propagate",
    "jt_marginals",
    "ENGINES",
    "MarginalSet",
    "SamplerConfig",
    "Diagnostics",
    "probabilistic_logic_sampling",
    "likelihood_weighting",
    "self_importance_sampling",
    "ais_bn",
    "epis_bn",
    "loopy_belief_propagation",
    "infer_marginals",
    "classify",
    "generate_dataset",
    "shd",
    "hellinger",
    "mean_hellinger",
]
