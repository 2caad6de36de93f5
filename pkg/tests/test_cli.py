import json
import subprocess
import sys

import numpy as np
import pytest

from timberdiff.cad import Assembly, save_assembly
from timberdiff.cli import cli_main
from timberdiff.cloud import load_cloud, save_cloud
from timberdiff.registration import RigidTransform, load_transform, save_transform
from timberdiff.synthetic import axis_angle, box_beam, half_lap_beam, simulate_scan


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    beam = half_lap_beam()
    truth = RigidTransform(axis_angle([0, 0, 1], 0.4), [0.2, -0.1, 0.05])
    scan = simulate_scan(beam.faces, 3e4, 5e-4, seed=2, rotation=truth.rotation, translation=truth.translation)
    save_cloud(scan, root / "scan.ply")
    save_assembly(Assembly("one", (beam,)), root / "model.obj")
    save_transform(truth.inverse(), root / "t1.json")
    return root, truth


def _strip_time(path):
    data = json.loads(path.read_text())
    del data["provenance"]["timestamp"]
    return data


def test_eval_assembly_outputs(workspace):
    root, truth = workspace
    out = root / "asm"
    code = cli_main(["eval-assembly", "--scan", str(root / "scan.ply"), "--model", str(root / "model.obj"),
                     "--out", str(out), "--threshold-mm", "2"])
    assert code == 0
    for name in ("report.json", "report.csv", "colored.ply", "t1.json"):
        assert (out / name).is_file()
    t1 = load_transform(out / "t1.json")
    assert t1.translation_distance_to(truth.inverse()) < 1e-3
    colored = load_cloud(out / "colored.ply")
    assert colored.has_colors
    data = json.loads((out / "report.json").read_text())
    assert data["schema"] == 1 and data["kind"] == "assembly"
    assert data["provenance"]["stages"][3] == "ransac"


def test_eval_assembly_deterministic(workspace):
    root, _ = workspace
    args = ["eval-assembly", "--scan", str(root / "scan.ply"), "--model", str(root / "model.obj"), "--seed", "7"]
    assert cli_main(args + ["--out", str(root / "d1")]) == 0
    assert cli_main(args + ["--out", str(root / "d2")]) == 0
    assert _strip_time(root / "d1" / "report.json") == _strip_time(root / "d2" / "report.json")
    assert (root / "d1" / "report.csv").read_bytes() == (root / "d2" / "report.csv").read_bytes()


def test_eval_joints_with_t1(workspace, capsys):
    root, _ = workspace
    out = root / "joints"
    code = cli_main(["eval-joints", "--scan", str(root / "scan.ply"), "--model", str(root / "model.obj"),
                     "--out", str(out), "--level", "per-joint-face", "--t1", str(root / "t1.json"), "--per-point"])
    data = json.loads((out / "report.json").read_text())
    assert data["provenance"]["stages"][3] == "ransac:external"
    assert "t1" in data["provenance"]["inputs"]
    assert code == (1 if data["unassociated"] else 0)
    assert data["kind"] == "per_joint_face" and data["reports"]["face"]
    # the stored report can be re-summarised with a new threshold
    assert cli_main(["report", str(out / "report.json"), "--threshold-mm", "1", "--format", "csv"]) == code
    lines = capsys.readouterr().out.strip().splitlines()
    assert any(line.startswith("entity,level,mean_mm") for line in lines)


def test_unassociated_exit_code(tmp_path):
    # model has a second beam the scan never saw
    a = box_beam(beam_id=0)
    b = box_beam(beam_id=1)
    b = type(b)(1, b.vertices + [0, 0.6, 0], b.triangles,
                tuple(type(f)(f.vertices + [0, 0.6, 0], f.triangles, 1, f.id, f.joint_id) for f in b.faces), ())
    save_assembly(Assembly("two", (a, b)), tmp_path / "m.json")
    save_cloud(simulate_scan(a.faces, 2e4, seed=0), tmp_path / "s.xyz")
    code = cli_main(["eval-assembly", "--scan", str(tmp_path / "s.xyz"), "--model", str(tmp_path / "m.json"),
                     "--out", str(tmp_path / "o"), "--skip-registration"])
    assert code == 1
    assert json.loads((tmp_path / "o" / "report.json").read_text())["unassociated"] == [{"beam": 1}]


def test_hard_errors_exit_2(tmp_path, capsys):
    assert cli_main(["eval-assembly", "--scan", str(tmp_path / "missing.ply"), "--model", "x.obj",
                     "--out", str(tmp_path)]) == 2
    assert cli_main(["eval-assembly"]) == 2
    assert cli_main(["eval-assembly", "--scan", "a", "--model", "b", "--out", "c", "--t1", "t", "--skip-registration"]) == 2
    assert capsys.readouterr().err


def test_registration_failure_dump(tmp_path):
    pts = np.random.default_rng(0).uniform(-1, 1, (20000, 3))
    np.savetxt(tmp_path / "noise.xyz", pts)
    save_assembly(Assembly("one", (half_lap_beam(),)), tmp_path / "m.obj")
    code = cli_main(["eval-assembly", "--scan", str(tmp_path / "noise.xyz"), "--model", str(tmp_path / "m.obj"),
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert (tmp_path / "o" / "registration_failure.json").is_file()


def test_small_commands(workspace, tmp_path):
    root, truth = workspace
    assert cli_main(["convert", str(root / "scan.ply"), str(tmp_path / "s.xyz")]) == 0
    np.testing.assert_allclose(load_cloud(tmp_path / "s.xyz").points, load_cloud(root / "scan.ply").points, atol=1e-7)
    assert cli_main(["preprocess", str(root / "scan.ply"), str(tmp_path / "p.ply"), "--voxel-mm", "5"]) == 0
    pre = load_cloud(tmp_path / "p.ply")
    assert pre.has_normals and len(pre) < len(load_cloud(root / "scan.ply"))
    assert cli_main(["register", "--scan", str(root / "scan.ply"), "--model", str(root / "model.obj"),
                     "--out", str(tmp_path / "t1.json")]) == 0
    assert load_transform(tmp_path / "t1.json").translation_distance_to(truth.inverse()) < 1e-3
    assert cli_main(["segment", "--scan", str(tmp_path / "p.ply"), "--out", str(tmp_path / "seg")]) == 0
    assert json.loads((tmp_path / "seg" / "segments.json").read_text())
    assert cli_main(["colorize", "--cloud", str(root / "scan.ply"), "--model", str(root / "model.obj"),
                     "--t1", str(root / "t1.json"), "--out", str(tmp_path / "c.ply"),
                     "--colormap-range-mm", "0", "3"]) == 0
    assert load_cloud(tmp_path / "c.ply").has_colors


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "timberdiff.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "timberdiff" in out.stdout
