from .assembly import evaluate_assembly
from .config import PipelineConfig
from .joints import LEVELS, evaluate_joints, per_joint_summary
from .result import SCHEMA, EvaluationResult, sha256_file

__all__ = [
    "PipelineConfig",
    "EvaluationResult",
    "SCHEMA",
    "evaluate_assembly",
    "evaluate_joints",
    "per_joint_summary",
    "LEVELS",
    "sha256_file",
]
