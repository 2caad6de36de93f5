from .association import (
    FaceAssociation,
    JointCloud,
    associate_segments,
    cluster_beam_indices,
    cluster_beams,
    extract_joint_cloud,
    joint_clouds_as_points,
    project_onto_face,
    shared_segments,
    unassociated_faces,
)
from .region_growing import (
    NormalRegionGrowing,
    Segment,
    residue_indices,
    save_segments,
    segment_by_normals,
    segment_labels,
)

__all__ = [
    "Segment",
    "FaceAssociation",
    "JointCloud",
    "segment_by_normals",
    "residue_indices",
    "segment_labels",
    "save_segments",
    "associate_segments",
    "unassociated_faces",
    "shared_segments",
    "cluster_beam_indices",
    "cluster_beams",
    "extract_joint_cloud",
    "joint_clouds_as_points",
    "project_onto_face",
    "NormalRegionGrowing",
]
