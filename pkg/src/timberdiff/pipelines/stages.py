"""Stages shared by the assembly and joint pipelines."""

from contextlib import contextmanager

import numpy as np

from ..cad import cross_section_diagonal, sample_mesh
from ..cloud import SpatialIndex, estimate_normals, remove_statistical_outliers, voxel_downsample
from ..errors import EmptyInput, NoConsensus, RegistrationFailed, StageError, TimberDiffError
from ..metrics import ErrorReport, cloud_to_cloud_distances, cloud_to_mesh_distances
from ..registration import RigidTransform, icp_refine, prepare_features, ransac_register
from ..segmentation import associate_segments, residue_indices, segment_by_normals


@contextmanager
def stage(name, log):
    """Record ``name`` in ``log`` and tag errors raised inside with it."""
    log.append(name)
    try:
        yield
    except (RegistrationFailed, StageError):
        raise
    except TimberDiffError as exc:
        raise StageError(name, exc) from exc


def preprocess(scan, config, log):
    if len(scan) == 0:
        raise EmptyInput("scan is empty")
    with stage("downsample", log):
        cloud = voxel_downsample(scan, config.voxel_size)
    with stage("outlier_removal", log):
        if config.remove_outliers and len(cloud) > config.outlier_k:
            cloud, _ = remove_statistical_outliers(cloud, config.outlier_k, config.outlier_std_ratio)
    with stage("normals", log):
        cloud = estimate_normals(cloud, min(config.normal_k, len(cloud)))
    return cloud


def sample_faces(beams, config):
    """Target cloud per face reference, seeded per (beam position, face position)."""
    out = {}
    for bi, beam in enumerate(beams):
        for fi, face in enumerate(beam.faces):
            out[face.ref] = sample_mesh([face], config.sample_density, config.seed_for("target_sampling", bi, fi))
    return out


def _diagnostics(result, stage_name):
    if result is None:
        return {"stage": stage_name}
    return {
        "stage": stage_name,
        "transform": result.transform.to_dict(),
        "fitness": result.fitness,
        "inlier_rmse": result.inlier_rmse,
        "iterations": result.iterations,
    }


def register(cloud, target, config, log):
    """T1 mapping the preprocessed scan onto the target; returns (T1, diagnostics)."""
    if config.skip_registration:
        log.extend(["ransac:skipped", "icp:skipped"])
        return RigidTransform.identity(), {"mode": "skipped"}
    target_down = voxel_downsample(target, config.voxel_size)
    coarse = None
    with stage("ransac:external" if config.t1 is not None else "ransac", log):
        if config.t1 is not None:
            initial = config.t1
        else:
            s_down, s_feat = prepare_features(cloud, config.registration_voxel)
            t_down, t_feat = prepare_features(target, config.registration_voxel)
            try:
                coarse = ransac_register(
                    s_down, t_down, s_feat, t_feat, 1.5 * config.registration_voxel,
                    max_iterations=config.ransac_max_iterations, confidence=config.ransac_confidence,
                    min_fitness=config.min_fitness, seed=config.int_seed_for("ransac"),
                )
            except NoConsensus as exc:
                raise RegistrationFailed(f"coarse registration failed: {exc}", {"stage": "ransac"}) from exc
            initial = coarse.transform
    with stage("icp", log):
        index = SpatialIndex(target_down)
        wide = icp_refine(cloud, target_down, initial, 1.5 * config.registration_voxel,
                          config.icp_iterations, target_index=index)
        fine = wide
        # the robust cutoff is fixed per call, so re-estimate it from each refined pose
        for _ in range(config.icp_robust_passes):
            fine = icp_refine(cloud, target_down, fine.transform, config.fine_distance, config.icp_iterations,
                              method="point_to_plane", target_index=index, robust_k=config.icp_robust_k)
    diag = {"mode": "external" if config.t1 is not None else "ransac",
            "coarse": _diagnostics(coarse, "ransac") if coarse else None,
            "fine": _diagnostics(fine, "icp")}
    if fine.fitness < config.min_fitness:
        raise RegistrationFailed(
            f"registered fitness {fine.fitness:.3f} below {config.min_fitness}",
            {"coarse": diag["coarse"], "fine": diag["fine"]},
        )
    return fine.transform, diag


def segment_and_associate(cloud, face_clouds, beams, config, log):
    """Segment the registered cloud and match segments to every beam face.

    The centroid gate is per beam unless ``config.association_distance`` is set.
    """
    with stage("segmentation", log):
        segments = segment_by_normals(
            cloud, config.angle_threshold, config.segmentation_k, config.min_segment_size,
            config.curvature_threshold,
        )
    with stage("association", log):
        assoc = []
        for beam in beams:
            gate = config.association_distance or 2.0 * cross_section_diagonal(beam)
            faces = [(f.ref, face_clouds[f.ref]) for f in beam.faces]
            assoc += associate_segments(segments, faces, gate, config.association_angle)
    return segments, assoc


def measure(cloud, target_cloud, faces, entity, level, config):
    if config.backend(level) == "cloud_to_mesh":
        d = cloud_to_mesh_distances(cloud, faces)
    else:
        d = cloud_to_cloud_distances(cloud, target_cloud)
    return ErrorReport.from_distances(entity, level, d, config.threshold)


def residue_size(segments, n):
    return int(len(residue_indices(segments, n)))


def owned_points(index_map):
    arrays = [v for v in index_map.values() if len(v)]
    return int(sum(len(v) for v in arrays)), (np.unique(np.concatenate(arrays)) if arrays else np.zeros(0, dtype=np.intp))
