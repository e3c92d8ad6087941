"""Schema mappings as functors, checked by a bounded path-equality prover,
with delta/sigma migration, schema merging and a small ``.fql`` language."""

__version__ = "0.1.0"

from .catcore import (DEFAULT_DEPTH, Attr, Equation, Fk, Path, ProofResult, Schema, Verdict,
                      decide_path_equality, replay_trace, validate_schema)
from .errors import FunmigError
from .instance import Instance, InstanceBuilder, check_instance
from .mapping import (Apply, Const, Mapping, MappingVerdict, NullExpr, PathExpr, check_mapping,
                      compose_mappings, identity_mapping)
from .migrate import (ChaseConfig, FilterSpec, MergeSpec, Pipeline, delta, filter_instance, merge,
                      pushout, run_pipeline, sigma)
from .udf import DEFAULT_REGISTRY, UdfRegistry

__all__ = [
    "DEFAULT_DEPTH", "DEFAULT_REGISTRY", "Apply", "Attr", "ChaseConfig", "Const", "Equation",
    "FilterSpec", "Fk", "FunmigError", "Instance", "InstanceBuilder", "Mapping", "MappingVerdict",
    "MergeSpec", "NullExpr", "Path", "PathExpr", "Pipeline", "ProofResult", "Schema", "UdfRegistry",
    "Verdict", "check_instance", "check_mapping", "compose_mappings", "decide_path_equality",
    "delta", "filter_instance", "identity_mapping", "merge", "pushout", "replay_trace", "run_pipeline",
    "sigma", "validate_schema",
]
