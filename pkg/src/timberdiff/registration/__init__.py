from .estimators import GlobalRegistration, ICPRegistration, RegistrationReport, prepare_features, register
from .fpfh import FeatureSet, compute_fpfh
from .icp import icp_refine, icp_to_mesh, truncated_objective
from .kabsch import fit_rigid_correspondences
from .ransac import evaluate_alignment, match_features, ransac_register
from .transform import RegistrationResult, RigidTransform, load_transform, save_transform

__all__ = [
    "RigidTransform",
    "RegistrationResult",
    "RegistrationReport",
    "FeatureSet",
    "fit_rigid_correspondences",
    "compute_fpfh",
    "match_features",
    "ransac_register",
    "evaluate_alignment",
    "icp_refine",
    "icp_to_mesh",
    "truncated_objective",
    "register",
    "prepare_features",
    "load_transform",
    "save_transform",
    "GlobalRegistration",
    "ICPRegistration",
]
