"""Command line interface: ``timberdiff <subcommand> ...``.

Tolerances on the command line are in millimeters; files are in meters.
Exit status: 0 success, 1 evaluation finished with unassociated
entities, 2 usage or hard error.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cad import detect_joints, load_assembly
from .cloud import PointCloud, estimate_normals, load_cloud, remove_statistical_outliers, save_cloud, voxel_downsample
from .errors import RegistrationFailed, TimberDiffError
from .metrics import ColorMap, cloud_to_mesh_distances, colorize
from .pipelines import EvaluationResult, PipelineConfig, evaluate_assembly, evaluate_joints, sha256_file
from .pipelines.stages import preprocess, register, sample_faces
from .registration import load_transform, save_transform
from .segmentation import save_segments, segment_by_normals, segment_labels

EXIT_OK, EXIT_INCOMPLETE, EXIT_ERROR = 0, 1, 2

MM = 1e-3


def _mm(value):
    return None if value is None else value * MM


def _add_config_args(p, joints=False):
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="JSON file with PipelineConfig fields (meters); flags override it")
    g.add_argument("--voxel-mm", type=float, help="down-sampling voxel size (default 2)")
    g.add_argument("--reg-voxel-mm", type=float, help="voxel size for coarse feature matching (default 10)")
    g.add_argument("--threshold-mm", type=float, help="pass/warn/fail threshold")
    g.add_argument("--proj-tol-mm", type=float, help="joint projection tolerance (default 5)")
    g.add_argument("--assoc-dist-mm", type=float, help="max segment-to-face centroid distance (default: twice the beam cross-section diagonal)")
    g.add_argument("--density", type=float, help="CAD sampling density in points per m^2 (default 1e6)")
    g.add_argument("--backend", choices=["auto", "cloud_to_cloud", "cloud_to_mesh"])
    g.add_argument("--colormap", choices=["adaptive", "fixed"])
    g.add_argument("--colormap-range-mm", type=float, nargs=2, metavar=("LOW", "HIGH"))
    g.add_argument("--no-outliers", action="store_true", help="skip statistical outlier removal")
    reg = g.add_mutually_exclusive_group()
    reg.add_argument("--t1", help="JSON transform mapping the scan into the model frame; skips RANSAC")
    reg.add_argument("--skip-registration", action="store_true", help="scan is already in the model frame")
    g.add_argument("--seed", type=int, help="random seed (default 0)")


def _config(args):
    base = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
    overrides = {
        "voxel_size": _mm(args.voxel_mm),
        "registration_voxel": _mm(args.reg_voxel_mm),
        "threshold": _mm(args.threshold_mm),
        "projection_tolerance": _mm(args.proj_tol_mm),
        "association_distance": _mm(args.assoc_dist_mm),
        "sample_density": args.density,
        "metric_backend": args.backend,
        "colormap_mode": args.colormap,
        "colormap_bounds": None if args.colormap_range_mm is None else tuple(_mm(v) for v in args.colormap_range_mm),
        "seed": args.seed,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_outliers:
        base["remove_outliers"] = False
    if args.skip_registration:
        base["skip_registration"] = True
    config = PipelineConfig.from_dict(base)
    if args.t1:
        config = config.replace(t1=load_transform(args.t1))
    return config


def _colormap(config):
    if config.colormap_mode == "fixed":
        return ColorMap("fixed", config.colormap_bounds)
    return ColorMap()


def _write_colored(result, config, path):
    reports = [r for reps in result.reports.values() for r in reps if r.label in result.clouds]
    if not reports:
        return
    clouds = [result.clouds[r.label] for r in reports]
    dist = np.concatenate([r.per_point_distances for r in reports])
    merged = PointCloud.concatenate(clouds)
    cmap = _colormap(config)
    if cmap.mode == "fixed":
        for r in reports:
            _, clamped = cmap(r.per_point_distances)
            r.n_clamped += int(clamped.sum())
    save_cloud(colorize(merged, dist, cmap), path)


def _inputs(args, *names):
    out = {n: sha256_file(getattr(args, n)) for n in names}
    if args.t1:
        out["t1"] = sha256_file(args.t1)
    return out


def _finish(result, config, args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_colored(result, config, out / "colored.ply")
    result.save(out, per_point=args.per_point)
    save_transform(result.t1, out / "t1.json")
    for level, summary in result.summary().items():
        if summary:
            a = summary["across_entities"]
            line = f"{level}: {a['n_entities']} reported, mean {a['mean'] / MM:.3f} mm, std across {a['std'] / MM:.3f} mm"
            if "pooled" in summary:
                line += f", pooled std {summary['pooled']['std'] / MM:.3f} mm"
            print(line)
    if result.unassociated:
        print(f"unassociated: {json.dumps(result.unassociated)}", file=sys.stderr)
        return EXIT_INCOMPLETE
    return EXIT_OK


def _registration_failure(exc, args):
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "registration_failure.json").write_text(json.dumps(exc.diagnostics, indent=2, sort_keys=True))


def cmd_convert(args):
    cloud = load_cloud(args.input)
    save_cloud(cloud, args.output, binary=not args.ascii)
    return EXIT_OK


def cmd_preprocess(args):
    cloud = load_cloud(args.input)
    n0 = len(cloud)
    cloud = voxel_downsample(cloud, args.voxel_mm * MM)
    if not args.no_outliers and len(cloud) > args.outlier_k:
        cloud, _ = remove_statistical_outliers(cloud, args.outlier_k, args.std_ratio)
    if not args.no_normals:
        cloud = estimate_normals(cloud, min(args.normal_k, len(cloud)))
    save_cloud(cloud, args.output, binary=not args.ascii)
    print(f"{n0} -> {len(cloud)} points")
    return EXIT_OK


def cmd_register(args):
    config = _config(args)
    assembly = load_assembly(args.model)
    cloud = preprocess(load_cloud(args.scan), config, [])
    target = PointCloud.concatenate(sample_faces(assembly.beams, config).values())
    t1, diag = register(cloud, target, config, [])
    save_transform(t1, args.out)
    fine = diag.get("fine") or {}
    if fine:
        print(f"fitness {fine['fitness']:.4f}, inlier rmse {fine['inlier_rmse'] / MM:.3f} mm")
    return EXIT_OK


def cmd_segment(args):
    config = _config(args)
    cloud = preprocess(load_cloud(args.scan), config, [])
    if config.t1 is not None:
        cloud = config.t1.apply_cloud(cloud)
    segments = segment_by_normals(cloud, config.angle_threshold, config.segmentation_k,
                                  config.min_segment_size, config.curvature_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_segments(segments, out / "segments.json")
    labels = segment_labels(segments, len(cloud))
    rng = np.random.default_rng(config.seed)
    palette = np.vstack([rng.random((len(segments), 3)), [[0.5, 0.5, 0.5]]])
    save_cloud(cloud.with_colors(palette[labels]), out / "segments.ply")
    print(f"{len(segments)} segments, {int(np.sum(labels < 0))} residue points")
    return EXIT_OK


def cmd_eval_assembly(args):
    config = _config(args)
    assembly = load_assembly(args.model)
    scan = load_cloud(args.scan)
    result = evaluate_assembly(scan, assembly, config, inputs=_inputs(args, "scan", "model"))
    return _finish(result, config, args)


def cmd_eval_joints(args):
    config = _config(args)
    assembly = load_assembly(args.model)
    if args.beam is None:
        candidates = [b for b in assembly.beams if b.joints] or list(assembly.beams)
        beam = candidates[0]
    else:
        beam = assembly.beam(args.beam)
    if not beam.joints and args.detect_joints:
        beam = detect_joints(beam)
    scan = load_cloud(args.scan)
    level = args.level.replace("-", "_")
    result = evaluate_joints(scan, beam, config, level, inputs=_inputs(args, "scan", "model"))
    return _finish(result, config, args)


def cmd_colorize(args):
    cloud = load_cloud(args.cloud)
    if args.t1:
        cloud = load_transform(args.t1).apply_cloud(cloud)
    assembly = load_assembly(args.model)
    d = cloud_to_mesh_distances(cloud, assembly.faces)
    if args.colormap_range_mm:
        cmap = ColorMap("fixed", tuple(v * MM for v in args.colormap_range_mm))
    else:
        cmap = ColorMap()
    save_cloud(colorize(cloud, d, cmap), args.out)
    print(f"mean {d.mean() / MM:.3f} mm, max {d.max() / MM:.3f} mm")
    return EXIT_OK


def cmd_report(args):
    result = EvaluationResult.load(args.report)
    if args.threshold_mm is not None:
        from .metrics import ErrorReport

        t = args.threshold_mm * MM
        for level, reps in result.reports.items():
            if any(len(r.per_point_distances) != r.n_points for r in reps):
                raise TimberDiffError("re-thresholding needs a report saved with --per-point")
            result.reports[level] = [
                ErrorReport.from_distances(r.entity, r.level, r.per_point_distances, t, **r.extra) for r in reps
            ]
    if args.format == "csv":
        sys.stdout.write(result.to_csv())
    elif args.format == "json":
        sys.stdout.write(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    else:
        for reps in result.reports.values():
            for r in reps:
                extra = "" if r.pass_fraction is None else f"  pass {r.pass_fraction:.1%}"
                print(f"{r.label:<24} {r.level:<5} n={r.n_points:<7} mean {r.mean / MM:7.3f} mm  "
                      f"std {r.std / MM:7.3f} mm  max {r.max / MM:7.3f} mm{extra}")
        for u in result.unassociated:
            print(f"{'/'.join(f'{k}{v}' for k, v in u.items()):<24} unassociated")
    return EXIT_INCOMPLETE if result.unassociated else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="timberdiff", description="Compare scans of timber elements with their CAD model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert between PLY and XYZ")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ascii", action="store_true", help="write ASCII PLY")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("preprocess", help="down-sample, remove outliers, estimate normals")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--voxel-mm", type=float, default=2.0)
    p.add_argument("--outlier-k", type=int, default=20)
    p.add_argument("--std-ratio", type=float, default=2.0)
    p.add_argument("--normal-k", type=int, default=20)
    p.add_argument("--no-outliers", action="store_true")
    p.add_argument("--no-normals", action="store_true")
    p.add_argument("--ascii", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("register", help="estimate T1 and write it as JSON")
    p.add_argument("--scan", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output transform JSON")
    _add_config_args(p)
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("segment", help="debug dump of the normal-based segmentation")
    p.add_argument("--scan", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_config_args(p)
    p.set_defaults(func=cmd_segment)

    for name, func, help_ in (
        ("eval-assembly", cmd_eval_assembly, "per-beam evaluation of an assembly scan"),
        ("eval-joints", cmd_eval_joints, "per-joint or per-joint-face evaluation of one beam"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scan", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--per-point", action="store_true", help="store per-point distances in report.json")
        if name == "eval-joints":
            p.add_argument("--beam", type=int, help="beam id (default: first beam with joints)")
            p.add_argument("--level", choices=["per-joint", "per-joint-face"], default="per-joint")
            p.add_argument("--detect-joints", action="store_true", help="tag joints geometrically if the beam has none")
        _add_config_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("colorize", help="heatmap PLY of distances to the model")
    p.add_argument("--cloud", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t1", help="transform to apply to the cloud first")
    p.add_argument("--colormap-range-mm", type=float, nargs=2, metavar=("LOW", "HIGH"))
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("report", help="re-summarise a stored report.json")
    p.add_argument("report")
    p.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p.add_argument("--threshold-mm", type=float, help="recompute categories (needs --per-point reports)")
    p.set_defaults(func=cmd_report)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return args.func(args)
    except RegistrationFailed as exc:
        _registration_failure(exc, args)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (TimberDiffError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
