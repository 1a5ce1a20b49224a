"""Meta distance for hierarchical mixed-variable domains.

Role graphs describe which variables exist for which values of others;
extended points mark absent variables with :data:`EXC`; the meta distance
compares such points as a true metric, and IDW/KNN models and a pattern
search tuner are built on top of it.
"""

from .distance import (
    CompiledDistance,
    ConfigError,
    DistanceConfig,
    Encoder,
    hybrid_distance,
    hybrid_variables,
    inc_exc_distance,
    induced_distance,
    meta_distance,
    one_dim_distance,
    sub_distance,
    theta_lower_bound,
)
from .domain import (
    ArcKind,
    DecreeArc,
    DecreeRule,
    GraphError,
    PointError,
    Role,
    RoleGraph,
    RuleCase,
    Signature,
    SignatureError,
    Variable,
    VariableKind,
    Violation,
    load_domain,
    validate_graph,
)
from .kernels import BACKEND
from .models import Approach, LabelBinning, TrainedIdw, TrainedKnn, accuracy, bin_label, idw_predict, knn_predict, rmse
from .tuning import ParameterSpace, TuneResult, lhs_sample, parameter_count, pattern_search, tune
from .valuesets import EXC, parse_descriptor

__version__ = "0.1.0"

__all__ = [
    "Approach", "ArcKind", "BACKEND", "CompiledDistance", "ConfigError", "DecreeArc", "DecreeRule",
    "DistanceConfig", "EXC", "Encoder", "GraphError", "LabelBinning", "ParameterSpace", "PointError", "Role",
    "RoleGraph", "RuleCase", "Signature", "SignatureError", "TrainedIdw", "TrainedKnn", "TuneResult", "Variable",
    "VariableKind", "Violation", "accuracy", "bin_label", "hybrid_distance", "hybrid_variables", "idw_predict", "inc_exc_distance",
    "induced_distance", "knn_predict", "lhs_sample", "load_domain", "meta_distance", "one_dim_distance",
    "parameter_count", "parse_descriptor", "pattern_search", "rmse", "sub_distance", "theta_lower_bound", "tune",
    "validate_graph",
]
