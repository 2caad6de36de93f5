import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timberdiff.cad import Assembly, cross_section_diagonal, sample_mesh
from timberdiff.cloud import PointCloud, estimate_normals
from timberdiff.errors import MissingNormals
from timberdiff.segmentation import (
    NormalRegionGrowing,
    Segment,
    associate_segments,
    cluster_beam_indices,
    cluster_beams,
    extract_joint_cloud,
    project_onto_face,
    residue_indices,
    segment_by_normals,
    segment_labels,
    unassociated_faces,
)
from timberdiff.synthetic import box_beam, cross_lap_beam, half_lap_beam, plank_assembly


def _plane_pair(rng, n=10_000):
    a = np.column_stack([rng.random(n), rng.random(n), np.zeros(n)])
    b = np.column_stack([rng.random(n), np.zeros(n), rng.random(n) + 0.05])
    normals = np.vstack([np.tile([0, 0, 1.0], (n, 1)), np.tile([0, 1.0, 0], (n, 1))])
    return PointCloud(np.vstack([a, b]), normals)


def _check_partition(segments, n):
    seen = np.concatenate([s.point_indices for s in segments] + [residue_indices(segments, n)])
    assert len(seen) == n and np.array_equal(np.sort(seen), np.arange(n))


def test_two_perpendicular_planes(rng):
    cloud = _plane_pair(rng)
    segs = segment_by_normals(cloud, 10.0, 20, 50)
    assert len(segs) == 2
    sets = sorted(tuple(s.point_indices[[0, -1]]) for s in segs)
    assert sets == [(0, 9999), (10000, 19999)]
    assert all(len(s) == 10_000 for s in segs)


def test_single_plane(rng):
    pts = np.column_stack([rng.random((3000, 2)), np.zeros(3000)])
    cloud = estimate_normals(PointCloud(pts), 15)
    segs = segment_by_normals(cloud)
    assert len(segs) == 1 and len(segs[0]) == 3000


def test_sphere_partition(rng):
    v = rng.normal(size=(4000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    cloud = PointCloud(v, v)
    segs = segment_by_normals(cloud, 5.0, 20, 10)
    assert len(segs) > 5
    _check_partition(segs, len(cloud))
    sizes = [len(s) for s in segs]
    assert sizes == sorted(sizes, reverse=True)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**31), angle=st.floats(3.0, 40.0), min_size=st.integers(1, 80))
def test_partition_property(seed, angle, min_size):
    r = np.random.default_rng(seed)
    cloud = sample_mesh(half_lap_beam().faces, 3e4, seed=seed)
    cloud = PointCloud(cloud.points + r.normal(scale=1e-3, size=cloud.points.shape))
    cloud = estimate_normals(cloud, 12)
    segs = segment_by_normals(cloud, angle, 12, min_size)
    _check_partition(segs, len(cloud))
    assert all(len(s) >= min_size for s in segs)
    # deterministic and order-driven
    again = segment_by_normals(cloud, angle, 12, min_size)
    assert all(np.array_equal(a.point_indices, b.point_indices) for a, b in zip(segs, again))


def test_missing_normals():
    with pytest.raises(MissingNormals):
        segment_by_normals(PointCloud(np.zeros((5, 3))))


def test_estimator_labels(rng):
    cloud = _plane_pair(rng, 2000)
    est = NormalRegionGrowing(angle_threshold=10.0).fit(cloud)
    assert set(np.unique(est.labels_)) == {0, 1}
    np.testing.assert_array_equal(est.labels_, segment_labels(est.segments_, len(cloud)))
    np.testing.assert_array_equal(est.fit_predict(cloud), est.labels_)


# -- association --------------------------------------------------------------

def _face_targets(beam, density=2e4):
    return [(f.ref, sample_mesh([f], density, seed=i)) for i, f in enumerate(beam.faces)]


def test_segment_on_face():
    beam = box_beam()
    face = beam.faces[0]
    cloud = sample_mesh([face], 2e4, seed=3)
    seg = Segment.from_members(cloud, np.arange(len(cloud)), face.normal)
    out = associate_segments([seg], [(face.ref, cloud)], 0.05)
    assert len(out) == 1 and out[0].segment == 0
    assert out[0].score == pytest.approx(0.0, abs=1e-12)


def test_far_segment_gated():
    face = box_beam().faces[0]
    cloud = sample_mesh([face], 2e4, seed=3).transformed(np.eye(3), face.normal * 1.0)
    seg = Segment.from_members(cloud, np.arange(len(cloud)), face.normal)
    targets = [(face.ref, sample_mesh([face], 2e4, seed=4))]
    assert associate_segments([seg], targets, 0.05) == []
    assert unassociated_faces([], targets) == [face.ref]


def test_flipped_normals_still_match():
    face = box_beam().faces[2]
    cloud = sample_mesh([face], 2e4, seed=3)
    seg = Segment.from_members(cloud, np.arange(len(cloud)), -face.normal)
    assert len(associate_segments([seg], [(face.ref, sample_mesh([face], 2e4))], 0.05)) == 1


def test_notch_joint_faces_associated():
    beam = cross_lap_beam()
    scan = sample_mesh(beam.faces, 3e4, seed=11)
    scan = estimate_normals(scan, 15)
    segs = segment_by_normals(scan, 15, 15, 30)
    targets = _face_targets(beam)
    assoc = associate_segments(segs, targets, 2 * cross_section_diagonal(beam))
    jfaces = {f.ref: f for f in beam.joint_faces}
    assert len(jfaces) == 3
    got = {a.target_face: a.segment for a in assoc if a.target_face in jfaces}
    assert set(got) == set(jfaces)
    # hand check: the chosen segment lies on its face plane
    for ref, s in got.items():
        f = jfaces[ref]
        signed = scan.points[segs[s].point_indices] @ f.normal - f.offset
        assert np.median(np.abs(signed)) < 1e-6


# -- beam clustering ----------------------------------------------------------

@pytest.fixture(scope="module")
def four_planks():
    return plank_assembly(n_members=4, size=(0.4, 0.03, 0.12), gap=0.05, seed=3)


def _labelled_scan(assembly, density=1.5e4):
    clouds, origin = [], []
    for b in assembly.beams:
        c = sample_mesh(b.faces, density, seed=b.id + 20)
        clouds.append(c.points)
        origin.append(np.full(len(c), b.id))
    scan = estimate_normals(PointCloud(np.vstack(clouds)), 15)
    return scan, np.concatenate(origin)


def test_four_member_clustering_disjoint_and_pure(four_planks):
    scan, origin = _labelled_scan(four_planks)
    segs = segment_by_normals(scan, 15, 15, 30)
    targets = [(f.ref, sample_mesh([f], 1.5e4, seed=7)) for f in four_planks.faces]
    gate = min(2 * cross_section_diagonal(b) for b in four_planks.beams)
    assoc = associate_segments(segs, targets, gate)
    clouds = cluster_beams(assoc, four_planks, scan, segs)
    idx = cluster_beam_indices(assoc, segs, [b.id for b in four_planks.beams])
    assert set(clouds) == {b.id for b in four_planks.beams}
    assert all(len(c) > 0 for c in clouds.values())
    flat = np.concatenate(list(idx.values()))
    assert len(flat) == len(np.unique(flat))
    for b, i in idx.items():
        assert np.all(origin[i] == b)
        np.testing.assert_array_equal(clouds[b].points, scan.points[i])


def test_single_beam_union(rng):
    beam = box_beam()
    scan = estimate_normals(sample_mesh(beam.faces, 2e4, seed=1), 15)
    segs = segment_by_normals(scan, 15, 15, 30)
    assoc = associate_segments(segs, _face_targets(beam), 2 * cross_section_diagonal(beam))
    assert {a.segment for a in assoc} == set(range(len(segs)))
    clouds = cluster_beams(assoc, Assembly("one", (beam,)), scan, segs)
    union = np.unique(np.concatenate([s.point_indices for s in segs]))
    np.testing.assert_array_equal(clouds[beam.id].points, scan.points[union])


def test_empty_associations_warn():
    beam = box_beam()
    scan = PointCloud(np.zeros((3, 3)))
    with pytest.warns(UserWarning):
        clouds = cluster_beams([], Assembly("one", (beam,)), scan, [])
    assert len(clouds[0]) == 0


# -- joint cloud extraction ---------------------------------------------------

def _brute_projectable(p, face, tol):
    n = face.normal
    d = p @ n - face.offset
    if abs(d) > tol:
        return False
    q = p - d * n
    for a, b, c in face.triangle_coords:
        # same-side test on each edge, in the face plane
        s = [np.dot(np.cross(e1 - e0, q - e0), n) for e0, e1 in ((a, b), (b, c), (c, a))]
        if all(x >= -1e-12 for x in s) or all(x <= 1e-12 for x in s):
            return True
    return False


def test_projection_matches_brute_force(rng):
    face = half_lap_beam().joint_faces[0]
    lo = face.vertices[np.unique(face.triangles)].min(axis=0) - 0.01
    hi = face.vertices[np.unique(face.triangles)].max(axis=0) + 0.01
    pts = rng.uniform(lo, hi, size=(3000, 3))
    # pull most points near the plane so the containment test matters
    pts -= ((pts @ face.normal - face.offset) * 0.95)[:, None] * face.normal
    mask = project_onto_face(pts, face, 1e-3)
    oracle = np.array([_brute_projectable(p, face, 1e-3) for p in pts])
    assert mask.any() and (~mask).any()
    np.testing.assert_array_equal(mask, oracle)


def test_off_plane_point_excluded():
    face = half_lap_beam().joint_faces[0]
    c = face.centroid
    pts = np.array([c, c + 0.005 * face.normal, c + 0.0009 * face.normal])
    assert project_onto_face(pts, face, 1e-3).tolist() == [True, False, True]


def _joint_setup(noise=0.0):
    beam = half_lap_beam()
    scan = sample_mesh(beam.faces, 3e4, seed=5)
    if noise:
        scan = PointCloud(scan.points + np.random.default_rng(0).normal(scale=noise, size=scan.points.shape))
    scan = estimate_normals(scan, 15)
    segs = segment_by_normals(scan, 15, 15, 30)
    assoc = associate_segments(segs, _face_targets(beam), 2 * cross_section_diagonal(beam))
    faces = {f.ref: f for f in beam.faces}
    return beam, scan, segs, assoc, faces


def test_noise_free_joint_face_keeps_all_samples():
    beam, scan, segs, assoc, faces = _joint_setup()
    jc = extract_joint_cloud(assoc, scan, segs, faces, 1e-3)
    assert list(jc) == [(beam.id, 0)]
    for fid, idx in jc[(beam.id, 0)].face_indices.items():
        f = faces[(beam.id, 0, fid)]
        on_face = np.flatnonzero(project_onto_face(scan.points, f, 1e-9))
        seg_members = np.concatenate([segs[a.segment].point_indices for a in assoc if a.target_face == f.ref])
        np.testing.assert_array_equal(idx, np.intersect1d(on_face, seg_members))
        assert len(idx) > 0.9 * len(on_face)


@pytest.mark.parametrize("noise", [0.0, 5e-4])
def test_faces_union_equals_joint(noise):
    _, scan, segs, assoc, faces = _joint_setup(noise)
    for jc in extract_joint_cloud(assoc, scan, segs, faces, 2e-3).values():
        parts = [v for v in jc.face_indices.values()]
        assert all(np.isin(p, jc.indices).all() for p in parts)
        np.testing.assert_array_equal(np.unique(np.concatenate(parts)), jc.indices)
        clouds = jc.per_face_clouds(scan)
        assert sum(len(c) for c in clouds.values()) >= len(jc.joint_cloud(scan))
