"""Assembly-level evaluation: one report per beam."""

import numpy as np

from ..cloud import PointCloud
from ..segmentation import cluster_beam_indices, unassociated_faces
from .config import PipelineConfig
from .result import EvaluationResult, make_provenance, sha256_arrays
from .stages import measure, owned_points, preprocess, register, residue_size, sample_faces, segment_and_associate, stage


def evaluate_assembly(scan, assembly, config=None, inputs=None):
    """Register ``scan`` to ``assembly``, split it into beams and measure each beam.

    ``inputs`` optionally maps input names to SHA-256 digests for the
    provenance block; by default the scan arrays are hashed.
    """
    config = config or PipelineConfig()
    log = []
    cloud = preprocess(scan, config, log)
    face_clouds = sample_faces(assembly.beams, config)
    target = PointCloud.concatenate(face_clouds.values())
    t1, reg_diag = register(cloud, target, config, log)
    registered = cloud.transformed(t1.rotation, t1.translation)

    segments, assoc = segment_and_associate(registered, face_clouds, assembly.beams, config, log)
    with stage("clustering", log):
        beam_idx = cluster_beam_indices(assoc, segments, [b.id for b in assembly.beams])

    reports, unassociated, clouds = [], [], {}
    with stage("metrics", log):
        for beam in assembly.beams:
            idx = beam_idx[beam.id]
            if len(idx) == 0:
                unassociated.append({"beam": beam.id})
                continue
            beam_cloud = registered.select(idx)
            beam_target = PointCloud.concatenate(face_clouds[f.ref] for f in beam.faces)
            rep = measure(beam_cloud, beam_target, beam.faces, {"beam": beam.id}, "beam", config)
            reports.append(rep)
            clouds[rep.label] = beam_cloud

    n_owned, owned = owned_points(beam_idx)
    n_res = residue_size(segments, len(registered))
    in_segments = np.zeros(len(registered), dtype=bool)
    for s in segments:
        in_segments[s.point_indices] = True
    in_segments[owned] = False
    n_free = int(in_segments.sum())
    assert n_owned + n_res + n_free == len(registered)

    diagnostics = {
        "registration": reg_diag,
        "scan_points": len(scan),
        "registered_points": len(registered),
        "segments": len(segments),
        "beam_points": n_owned,
        "unassociated_segment_points": n_free,
        "unmatched_faces": [list(r) for r in unassociated_faces(assoc, face_clouds.items())],
    }
    inputs = inputs or {"scan": sha256_arrays(scan.points), "model": sha256_arrays(*(b.vertices for b in assembly.beams))}
    return EvaluationResult(
        kind="assembly",
        t1=t1,
        reports={"beam": reports},
        unassociated=unassociated,
        residue_size=n_res,
        provenance=make_provenance(log, config, inputs),
        diagnostics=diagnostics,
        clouds=clouds,
    )
