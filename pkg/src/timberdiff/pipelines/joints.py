"""Subtractive evaluation of a single beam's joints."""

import warnings

import numpy as np

from ..cloud import PointCloud
from ..errors import JointNotDetected, NotApplicable
from ..metrics import ErrorReport, cloud_to_mesh_distances
from ..registration import icp_to_mesh, truncated_objective
from ..segmentation import extract_joint_cloud, unassociated_faces
from .config import PipelineConfig
from .result import EvaluationResult, make_provenance, sha256_arrays
from .stages import measure, preprocess, register, residue_size, sample_faces, segment_and_associate, stage

LEVELS = ("per_joint", "per_joint_face")


def _fit_t2(joint_cloud, joint_faces, config):
    """Joint-local ICP onto the joint's CAD faces; returns the result and the objective before/after."""
    cap = config.t2_distance
    before = truncated_objective(cloud_to_mesh_distances(joint_cloud, joint_faces), cap)
    res = icp_to_mesh(joint_cloud, joint_faces, None, cap, config.icp_iterations)
    moved = res.transform.apply(joint_cloud.points)
    after = truncated_objective(cloud_to_mesh_distances(moved, joint_faces), cap)
    return res, before, after


def evaluate_joints(scan, beam, config=None, level="per_joint", inputs=None):
    """Per-joint or per-joint-face errors of ``beam``'s joints.

    ``per_joint`` compares each extracted joint cloud with its CAD joint as
    registered. ``per_joint_face`` first fits one joint-local transform T2
    of the joint cloud onto the joint's target cloud, applies it to every
    face cloud of that joint and then measures each face. Joints or faces
    without scan points are listed as unassociated.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    if not beam.joints:
        raise NotApplicable(f"beam {beam.id} has no joints")
    config = config or PipelineConfig()
    log = []
    cloud = preprocess(scan, config, log)
    face_clouds = sample_faces([beam], config)
    target = PointCloud.concatenate(face_clouds.values())
    t1, reg_diag = register(cloud, target, config, log)
    registered = cloud.transformed(t1.rotation, t1.translation)

    segments, assoc = segment_and_associate(registered, face_clouds, [beam], config, log)
    faces = {f.ref: f for f in beam.faces}
    with stage("joint_extraction", log):
        extracted = extract_joint_cloud(assoc, registered, segments, faces, config.projection_tolerance)

    reports, unassociated, t2, clouds, t2_diag = [], [], {}, {}, {}
    with stage("metrics" if level == "per_joint" else "t2_and_metrics", log):
        for joint in beam.joints:
            key = (beam.id, joint.id)
            jc = extracted.get(key)
            if jc is None or len(jc.indices) == 0:
                warnings.warn(str(JointNotDetected(f"joint {key} has no scan points")), stacklevel=2)
                if level == "per_joint":
                    unassociated.append({"beam": beam.id, "joint": joint.id})
                else:
                    unassociated.extend({"beam": beam.id, "joint": joint.id, "face": f.id} for f in joint.faces)
                continue
            joint_cloud = registered.select(jc.indices)
            if level == "per_joint":
                joint_target = PointCloud.concatenate(face_clouds[f.ref] for f in joint.faces)
                rep = measure(joint_cloud, joint_target, joint.faces, {"beam": beam.id, "joint": joint.id}, "joint", config)
                reports.append(rep)
                clouds[rep.label] = joint_cloud
                continue
            res, before, after = _fit_t2(joint_cloud, joint.faces, config)
            t2[key] = res.transform
            t2_diag[f"{beam.id}/{joint.id}"] = {"objective_before": before, "objective_after": after,
                                                "fitness": res.fitness, "inlier_rmse": res.inlier_rmse}
            for face in joint.faces:
                idx = jc.face_indices.get(face.id, np.zeros(0, dtype=np.intp))
                entity = {"beam": beam.id, "joint": joint.id, "face": face.id}
                if len(idx) == 0:
                    unassociated.append(entity)
                    continue
                moved = registered.select(idx).transformed(res.transform.rotation, res.transform.translation)
                rep = measure(moved, face_clouds[face.ref], [face], entity, "face", config)
                reports.append(rep)
                clouds[rep.label] = moved

    diagnostics = {
        "registration": reg_diag,
        "scan_points": len(scan),
        "registered_points": len(registered),
        "segments": len(segments),
        "unmatched_faces": [list(r) for r in unassociated_faces(assoc, face_clouds.items())],
    }
    if t2_diag:
        diagnostics["t2"] = t2_diag
    inputs = inputs or {"scan": sha256_arrays(scan.points), "model": sha256_arrays(beam.vertices)}
    return EvaluationResult(
        kind=level,
        t1=t1,
        reports={"joint" if level == "per_joint" else "face": reports},
        unassociated=unassociated,
        residue_size=residue_size(segments, len(registered)),
        provenance=make_provenance(log, config, inputs),
        t2=t2,
        diagnostics=diagnostics,
        clouds=clouds,
    )


def per_joint_summary(result):
    """Pool face reports of a per-joint-face result by joint: {(beam, joint): ErrorReport}."""
    groups = {}
    for r in result.reports.get("face", []):
        groups.setdefault((r.entity["beam"], r.entity["joint"]), []).append(r.per_point_distances)
    return {
        k: ErrorReport.from_distances({"beam": k[0], "joint": k[1]}, "joint", np.concatenate(v))
        for k, v in sorted(groups.items())
    }
