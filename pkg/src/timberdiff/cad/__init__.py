from .io import format_obj, load_assembly, parse_obj, save_assembly
from .joints import beam_frame, cross_section_diagonal, detect_joints
from .model import Assembly, Beam, Joint, MeshFace, build_beam, strip_joints, transform_beam
from .sampling import sample_mesh, sample_triangles

__all__ = [
    "Assembly",
    "Beam",
    "Joint",
    "MeshFace",
    "build_beam",
    "strip_joints",
    "transform_beam",
    "load_assembly",
    "save_assembly",
    "parse_obj",
    "format_obj",
    "detect_joints",
    "beam_frame",
    "cross_section_diagonal",
    "sample_mesh",
    "sample_triangles",
]
