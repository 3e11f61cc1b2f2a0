"""Batch command-line frontend for the augmentation pipeline.

Subcommands: range-project, sgp, clean, fuse, stvd, sweep, sim, pipeline.
Every command is deterministic given its flags; the stochastic-discard
commands require an explicit --seed.  Exit codes: 0 success, 1 validation
or parse failure, 2 partial batch failure (some frames failed, the rest
were processed).

The pipeline command runs the same file-to-file stage functions the
individual commands use, on the same intermediate files, so chaining
``sgp`` then ``clean`` then ``fuse`` by hand produces byte-identical
output to one ``pipeline`` run.

Dataset layout (as the ``sim`` command emits):

    root/velodyne/FRAME.bin      root/calib/FRAME.txt
    root/depth/FRAME.png         root/segments/FRAME.png
    root/labelmap.txt

Configuration precedence, lowest to highest: built-in defaults, the
SGPKIT_DATASET_ROOT environment variable (dataset root only), the config
file, command-line flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .augment import DiscardSpec, discard_sweep, fuse, stvd_discard
from .clean import (
    DEFAULT_MIN_REAL_NEIGHBORS,
    DEFAULT_RADIUS,
    DEFAULT_SHAPE,
    CleanPolicy,
    clean_pseudo,
)
from .errors import ConfigError, SgpKitError
from .kitti_io import (
    DEPTH_PNG_SCALE,
    labels_sidecar_path,
    read_calib_file,
    read_depth_png,
    read_label_map,
    read_labeled_bin,
    read_segment_png,
    read_velodyne_bin,
    write_calib_file,
    write_depth_png,
    write_label_map,
    write_segment_png,
    write_velodyne_bin,
)
from .rangeview import RANGE_FLOOR, FovSpec, label_scan, lift_labels, spherical_project
from .reports import format_csv, format_kv, format_table, write_jsonl
from .sgp import DEFAULT_WHITELIST_NAMES, DEPTH_MAX, DEPTH_MIN, ClassWhitelist, sgp_generate
from .simulate import make_random_scene, read_scene_file, render_frame, write_scene_file

ENV_DATASET_ROOT = "SGPKIT_DATASET_ROOT"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2

# The depth/segment rasters are interpreted in this camera frame; the
# KITTI-style calib chain below assumes the rectified left color camera.
CAMERA_FRAME = "rectified_camera_2"


# ---------------------------------------------------------------- stages

def sgp_frame(depth_path, segments_path, calib_path, label_map_path, out_path,
              whitelist_names=DEFAULT_WHITELIST_NAMES, depth_min: float = DEPTH_MIN,
              depth_max: float = DEPTH_MAX, stride: int = 1,
              scale: float = DEPTH_PNG_SCALE) -> dict:
    """File-to-file pseudo point generation for one frame."""
    depth = read_depth_png(depth_path, scale)
    segments = read_segment_png(segments_path, label_map_path)
    calib = read_calib_file(calib_path)
    whitelist = ClassWhitelist.from_names(whitelist_names, segments.label_names)
    cloud, report = sgp_generate(depth, segments, whitelist, calib,
                                 depth_min=depth_min, depth_max=depth_max,
                                 stride=stride)
    write_velodyne_bin(cloud, out_path)
    return report.as_dict()


def clean_frame(pseudo_path, real_path, label_map_path, out_path,
                policy: CleanPolicy | None = None,
                cell_size: float | None = None) -> dict:
    """File-to-file volumetric cleaning for one frame."""
    label_names = read_label_map(label_map_path)
    pseudo = read_labeled_bin(pseudo_path, label_names)
    real = read_velodyne_bin(real_path)
    cleaned, report = clean_pseudo(pseudo, real, policy, cell_size)
    write_velodyne_bin(cleaned, out_path)
    return report.as_dict()


def fuse_frame(real_path, pseudo_path, label_map_path, out_path,
               range_segments_path=None, fov: FovSpec | None = None,
               background_class: int = 0) -> dict:
    """File-to-file fusion for one frame.

    Real points are labeled from a range-view segment PNG when one is
    given, else uniformly with the background class.
    """
    label_names = read_label_map(label_map_path)
    scan = read_velodyne_bin(real_path)
    if range_segments_path is not None:
        image = spherical_project(scan, fov)
        segments = read_segment_png(range_segments_path, label_map_path)
        real = lift_labels(segments, image, scan)
    else:
        real = label_scan(scan, label_names, background_class)
    pseudo = read_labeled_bin(pseudo_path, label_names)
    result = fuse(real, pseudo)
    write_velodyne_bin(result.cloud, out_path)
    return result.as_dict()


# ---------------------------------------------------------------- config

_CONFIG_DEFAULTS = {
    "dataset_root": None,
    "output_dir": None,
    "label_map": None,
    "raster_scale": DEPTH_PNG_SCALE,
    "workers": 1,
    "whitelist": list(DEFAULT_WHITELIST_NAMES),
    "depth_min": DEPTH_MIN,
    "depth_max": DEPTH_MAX,
    "stride": 1,
    "camera_frame": CAMERA_FRAME,
    "fov": {},
    "clean": {},
    "range_segments_dir": None,
}
_FOV_KEYS = {"up_deg": 3.0, "down_deg": -25.0, "height": 64, "width": 2048}
_CLEAN_KEYS = {"radius": DEFAULT_RADIUS, "shape": DEFAULT_SHAPE,
               "min_real_neighbors": DEFAULT_MIN_REAL_NEIGHBORS, "cell_size": None}


def _merge_section(raw, defaults: dict, context: str) -> dict:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{context}: expected a mapping")
    unknown = sorted(set(raw) - set(defaults))
    if unknown:
        raise ConfigError(f"{context}: unknown key {unknown[0]!r} "
                          f"(allowed: {sorted(defaults)})")
    merged = dict(defaults)
    merged.update({k: v for k, v in raw.items() if v is not None})
    return merged


class PipelineConfig:
    """Validated settings for a pipeline run over a dataset directory."""

    def __init__(self, values: dict):
        values = _merge_section(values, _CONFIG_DEFAULTS, "config")
        if values["dataset_root"] is None:
            raise ConfigError("config: dataset_root is required "
                              f"(flag, config file, or {ENV_DATASET_ROOT})")
        if values["output_dir"] is None:
            raise ConfigError("config: output_dir is required")
        if values["camera_frame"] != CAMERA_FRAME:
            raise ConfigError(
                f"config: camera_frame must be {CAMERA_FRAME!r} (the raster frame "
                f"this toolkit assumes), got {values['camera_frame']!r}"
            )
        self.dataset_root = Path(values["dataset_root"])
        self.output_dir = Path(values["output_dir"])
        self.label_map = Path(values["label_map"]) if values["label_map"] \
            else self.dataset_root / "labelmap.txt"
        self.raster_scale = float(values["raster_scale"])
        self.workers = int(values["workers"])
        if self.workers < 1:
            raise ConfigError(f"config: workers must be >= 1, got {self.workers}")
        self.whitelist = [str(n) for n in values["whitelist"]]
        self.depth_min = float(values["depth_min"])
        self.depth_max = float(values["depth_max"])
        self.stride = int(values["stride"])
        fov = _merge_section(values["fov"], _FOV_KEYS, "config.fov")
        self.fov = FovSpec.from_degrees(fov["up_deg"], fov["down_deg"],
                                        fov["height"], fov["width"])
        clean = _merge_section(values["clean"], _CLEAN_KEYS, "config.clean")
        self.clean_policy = CleanPolicy(clean["radius"], clean["shape"],
                                        clean["min_real_neighbors"])
        self.cell_size = None if clean["cell_size"] is None else float(clean["cell_size"])
        self.range_segments_dir = Path(values["range_segments_dir"]) \
            if values["range_segments_dir"] else None

        for sub in ("velodyne", "depth", "segments", "calib"):
            if not (self.dataset_root / sub).is_dir():
                raise ConfigError(f"config: missing dataset directory "
                                  f"{self.dataset_root / sub}")
        if not self.label_map.is_file():
            raise ConfigError(f"config: label map not found: {self.label_map}")
        if self.range_segments_dir and not self.range_segments_dir.is_dir():
            raise ConfigError(f"config: range_segments_dir not found: "
                              f"{self.range_segments_dir}")
        # fail early on whitelist names the label map cannot resolve
        ClassWhitelist.from_names(self.whitelist, read_label_map(self.label_map))

    @classmethod
    def load(cls, config_path=None, overrides: dict | None = None) -> "PipelineConfig":
        values: dict = {}
        env_root = os.environ.get(ENV_DATASET_ROOT)
        if env_root:
            values["dataset_root"] = env_root
        if config_path is not None:
            try:
                data = yaml.safe_load(Path(config_path).read_text())
            except yaml.YAMLError as exc:
                raise ConfigError(f"{config_path}: not valid YAML: {exc}") from None
            if data is None:
                data = {}
            if not isinstance(data, dict):
                raise ConfigError(f"{config_path}: expected a top-level mapping")
            _merge_section(data, _CONFIG_DEFAULTS, "config")   # key check
            values.update({k: v for k, v in data.items() if v is not None})
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        return cls(values)


def pipeline_frame(config: PipelineConfig, stem: str) -> dict:
    """Run sgp, clean, fuse for one frame; returns the report row."""
    root = config.dataset_root
    out = config.output_dir
    pseudo_path = out / "pseudo" / f"{stem}.bin"
    cleaned_path = out / "cleaned" / f"{stem}.bin"
    fused_path = out / "fused" / f"{stem}.bin"

    t0 = time.perf_counter()
    sgp_row = sgp_frame(root / "depth" / f"{stem}.png",
                        root / "segments" / f"{stem}.png",
                        root / "calib" / f"{stem}.txt",
                        config.label_map, pseudo_path,
                        whitelist_names=config.whitelist,
                        depth_min=config.depth_min, depth_max=config.depth_max,
                        stride=config.stride, scale=config.raster_scale)
    t1 = time.perf_counter()
    clean_row = clean_frame(pseudo_path, root / "velodyne" / f"{stem}.bin",
                            config.label_map, cleaned_path,
                            policy=config.clean_policy, cell_size=config.cell_size)
    t2 = time.perf_counter()
    range_seg = config.range_segments_dir / f"{stem}.png" \
        if config.range_segments_dir else None
    fuse_row = fuse_frame(root / "velodyne" / f"{stem}.bin", cleaned_path,
                          config.label_map, fused_path,
                          range_segments_path=range_seg, fov=config.fov)
    t3 = time.perf_counter()

    row = {"frame": stem}
    row.update({f"sgp_{k}": v for k, v in sgp_row.items()})
    row.update({f"clean_{k}": v for k, v in clean_row.items()})
    row.update({f"fuse_{k}": v for k, v in fuse_row.items()})
    row["sgp_ms"] = (t1 - t0) * 1e3
    row["clean_ms"] = (t2 - t1) * 1e3
    row["fuse_ms"] = (t3 - t2) * 1e3
    return row


# ---------------------------------------------------------------- helpers

def _named_inputs(path, pattern: str) -> list[Path]:
    """A single file, or every match of pattern inside a directory, sorted."""
    path = Path(path)
    if path.is_dir():
        found = sorted(path.glob(pattern))
        if not found:
            raise ConfigError(f"{path}: no {pattern} files found")
        return found
    if not path.exists():
        raise ConfigError(f"{path}: no such file or directory")
    return [path]


def _run_batch(inputs: list[Path], one_frame) -> tuple[list[dict], int]:
    """Apply one_frame per input; failures become error rows + stderr lines."""
    rows = []
    failures = 0
    for item in inputs:
        try:
            rows.append(one_frame(item))
        except SgpKitError as exc:
            failures += 1
            print(f"error: {item.name}: {exc}", file=sys.stderr)
            rows.append({"frame": item.stem, "error": str(exc)})
    return rows, failures


def _finish_batch(rows: list[dict], failures: int, report_path=None) -> int:
    if report_path is not None:
        write_jsonl(report_path, rows)
    return EXIT_PARTIAL if failures else EXIT_OK


def _parse_fov(args) -> FovSpec:
    return FovSpec.from_degrees(args.fov_up, args.fov_down,
                                args.fov_height, args.fov_width)


def _parse_whitelist(text: str) -> list[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise ConfigError(f"whitelist {text!r} names no classes")
    return names


def _load_cloud(path: Path, label_names: dict):
    """Labeled bin when the sidecar exists, else a background-labeled raw scan."""
    if labels_sidecar_path(path).exists():
        return read_labeled_bin(path, label_names)
    return label_scan(read_velodyne_bin(path), label_names)


def _parse_rates(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"rates {text!r} are not comma-separated numbers") from None


# ---------------------------------------------------------------- commands

def cmd_range_project(args) -> int:
    inputs = _named_inputs(args.scan, "*.bin")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fov = _parse_fov(args)

    def one_frame(path: Path) -> dict:
        scan = read_velodyne_bin(path)
        image = spherical_project(scan, fov, range_floor=args.range_floor)
        saturated = write_depth_png(out_dir / f"{path.stem}.png",
                                    image.to_depth_map(), scale=args.scale)
        row = {"frame": path.stem, "points": len(scan),
               "valid_pixels": image.valid_count, "skipped": image.skipped,
               "saturated": saturated, "height": image.height,
               "width": image.width}
        (out_dir / f"{path.stem}.json").write_text(json.dumps(row, sort_keys=True) + "\n")
        return row

    rows, failures = _run_batch(inputs, one_frame)
    print(format_table(rows))
    return _finish_batch(rows, failures, args.report)


def cmd_sgp(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    row = sgp_frame(args.depth, args.segments, args.calib, args.label_map,
                    out, whitelist_names=_parse_whitelist(args.whitelist),
                    depth_min=args.depth_min, depth_max=args.depth_max,
                    stride=args.stride, scale=args.scale)
    print(format_kv(row))
    if args.report is not None:
        write_jsonl(args.report, [row])
    return EXIT_OK


def _paired_input(other_root: Path, item: Path) -> Path:
    return other_root / item.name if other_root.is_dir() else other_root


def cmd_clean(args) -> int:
    inputs = _named_inputs(args.pseudo, "*.bin")
    real_root = Path(args.real)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = CleanPolicy(args.radius, args.shape, args.min_real_neighbors)

    def one_frame(path: Path) -> dict:
        row = clean_frame(path, _paired_input(real_root, path), args.label_map,
                          out_dir / path.name, policy=policy,
                          cell_size=args.cell_size)
        return {"frame": path.stem, **row}

    rows, failures = _run_batch(inputs, one_frame)
    print(format_table(rows))
    return _finish_batch(rows, failures, args.report)


def cmd_fuse(args) -> int:
    inputs = _named_inputs(args.pseudo, "*.bin")
    real_root = Path(args.real)
    seg_root = Path(args.range_segments) if args.range_segments else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fov = _parse_fov(args)

    def one_frame(path: Path) -> dict:
        seg = None
        if seg_root is not None:
            seg = seg_root / f"{path.stem}.png" if seg_root.is_dir() else seg_root
        row = fuse_frame(_paired_input(real_root, path), path, args.label_map,
                         out_dir / path.name, range_segments_path=seg, fov=fov)
        return {"frame": path.stem, **row}

    rows, failures = _run_batch(inputs, one_frame)
    print(format_table(rows))
    return _finish_batch(rows, failures, args.report)


def cmd_stvd(args) -> int:
    inputs = _named_inputs(args.input, "*.bin")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label_names = read_label_map(args.label_map)
    spec = DiscardSpec(args.rate, args.seed)

    def one_frame(path: Path) -> dict:
        cloud = _load_cloud(path, label_names)
        kept = stvd_discard(cloud, spec)
        write_velodyne_bin(kept, out_dir / path.name)
        return {"frame": path.stem, "rate": spec.rate, "seed": spec.seed,
                "points_in": len(cloud), "points_kept": len(kept)}

    rows, failures = _run_batch(inputs, one_frame)
    print(format_table(rows))
    return _finish_batch(rows, failures, args.report)


def cmd_sweep(args) -> int:
    inputs = _named_inputs(args.input, "*.bin")
    label_names = read_label_map(args.label_map)
    rates = _parse_rates(args.rates)

    totals = [{"rate": rate, "kept_count": 0} for rate in rates]
    n_total = 0
    for path in inputs:
        cloud = _load_cloud(path, label_names)
        n_total += len(cloud)
        for slot, row in zip(totals, discard_sweep(cloud, rates, args.seed)):
            slot["kept_count"] += row["kept_count"]
    rows = [{"rate": slot["rate"], "kept_count": slot["kept_count"],
             "kept_fraction": slot["kept_count"] / n_total if n_total else 0.0}
            for slot in totals]

    print(format_table(rows))
    if args.csv is not None:
        Path(args.csv).write_text(format_csv(rows))
    if args.report is not None:
        write_jsonl(args.report, rows)
    return EXIT_OK


def cmd_sim(args) -> int:
    out = Path(args.out_dir)
    for sub in ("velodyne", "depth", "segments", "calib", "scenes"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    fov = _parse_fov(args)
    base_scene = read_scene_file(args.scene) if args.scene else None

    rows = []
    label_names = None
    for i in range(args.frames):
        stem = f"{i:06d}"
        scene = base_scene if base_scene is not None \
            else make_random_scene(args.seed + i)
        if label_names is None:
            label_names = scene.label_names
            write_label_map(out / "labelmap.txt", label_names)
        frame = render_frame(scene, fov)
        write_velodyne_bin(frame.scan, out / "velodyne" / f"{stem}.bin")
        saturated = write_depth_png(out / "depth" / f"{stem}.png", frame.depth,
                                    scale=args.scale)
        write_segment_png(out / "segments" / f"{stem}.png", frame.segments)
        write_calib_file(out / "calib" / f"{stem}.txt", scene.calib)
        write_scene_file(out / "scenes" / f"{stem}.yaml", scene)
        rows.append({"frame": stem, "scan_points": len(frame.scan),
                     "valid_pixels": int(frame.depth.valid.sum()),
                     "saturated": saturated,
                     "primitives": len(scene.primitives)})
    print(format_table(rows))
    if args.report is not None:
        write_jsonl(args.report, rows)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    overrides = {"dataset_root": args.dataset_root, "output_dir": args.out_dir,
                 "workers": args.workers}
    config = PipelineConfig.load(args.config, overrides)
    for sub in ("pseudo", "cleaned", "fused"):
        (config.output_dir / sub).mkdir(parents=True, exist_ok=True)

    stems = sorted(p.stem for p in (config.dataset_root / "velodyne").glob("*.bin"))
    if not stems:
        raise ConfigError(f"{config.dataset_root / 'velodyne'}: no .bin frames found")

    rows = []
    failures = 0
    if config.workers == 1:
        for stem in stems:
            try:
                rows.append(pipeline_frame(config, stem))
            except SgpKitError as exc:
                failures += 1
                print(f"error: {stem}: {exc}", file=sys.stderr)
                rows.append({"frame": stem, "error": str(exc)})
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {stem: pool.submit(pipeline_frame, config, stem)
                       for stem in stems}
            for stem, future in futures.items():
                try:
                    rows.append(future.result())
                except SgpKitError as exc:
                    failures += 1
                    print(f"error: {stem}: {exc}", file=sys.stderr)
                    rows.append({"frame": stem, "error": str(exc)})
    rows.sort(key=lambda row: row["frame"])

    report_path = Path(args.report) if args.report else config.output_dir / "report.jsonl"
    write_jsonl(report_path, rows)
    done = [r for r in rows if "error" not in r]
    summary = {
        "frames": len(stems),
        "failed": failures,
        "report": str(report_path),
    }
    if done:
        for key in ("sgp_ms", "clean_ms", "fuse_ms"):
            summary[f"mean_{key}"] = sum(r[key] for r in done) / len(done)
        summary["fused_points"] = sum(r["fuse_total"] for r in done)
    print(format_kv(summary))
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- parser

def _add_fov_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fov-up", type=float, default=3.0,
                        help="upper field of view, degrees (default 3)")
    parser.add_argument("--fov-down", type=float, default=-25.0,
                        help="lower field of view, degrees (default -25)")
    parser.add_argument("--fov-height", type=int, default=64,
                        help="range image rows (default 64)")
    parser.add_argument("--fov-width", type=int, default=2048,
                        help="range image columns (default 2048)")


def _add_report_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--report", default=None,
                        help="write per-frame JSON-lines report to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgpkit",
        description="LiDAR scan augmentation with semantically guided "
                    "pseudo point clouds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("range-project",
                       help="project scans onto the spherical range image")
    p.add_argument("--scan", required=True, help="velodyne .bin file or directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scale", type=float, default=DEPTH_PNG_SCALE,
                   help="PNG meters-per-unit scale (default 256)")
    p.add_argument("--range-floor", type=float, default=RANGE_FLOOR)
    _add_fov_flags(p)
    _add_report_flag(p)
    p.set_defaults(func=cmd_range_project)

    p = sub.add_parser("sgp", help="generate a pseudo cloud from depth + segments")
    p.add_argument("--depth", required=True, help="16-bit depth PNG")
    p.add_argument("--segments", required=True, help="8-bit segment PNG")
    p.add_argument("--calib", required=True, help="KITTI-style calib txt")
    p.add_argument("--label-map", required=True, help="labelmap.txt path")
    p.add_argument("--out", required=True, help="output .bin path")
    p.add_argument("--whitelist", default=",".join(DEFAULT_WHITELIST_NAMES),
                   help="comma-separated class names to keep")
    p.add_argument("--depth-min", type=float, default=DEPTH_MIN)
    p.add_argument("--depth-max", type=float, default=DEPTH_MAX)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--scale", type=float, default=DEPTH_PNG_SCALE)
    _add_report_flag(p)
    p.set_defaults(func=cmd_sgp)

    p = sub.add_parser("clean", help="remove pseudo points lacking real support")
    p.add_argument("--pseudo", required=True, help="pseudo .bin file or directory")
    p.add_argument("--real", required=True, help="real scan .bin file or directory")
    p.add_argument("--label-map", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--radius", type=float, default=DEFAULT_RADIUS)
    p.add_argument("--shape", choices=("sphere", "cube"), default=DEFAULT_SHAPE)
    p.add_argument("--min-real-neighbors", type=int,
                   default=DEFAULT_MIN_REAL_NEIGHBORS)
    p.add_argument("--cell-size", type=float, default=None)
    _add_report_flag(p)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("fuse", help="concatenate real scans with pseudo clouds")
    p.add_argument("--real", required=True, help="real scan .bin file or directory")
    p.add_argument("--pseudo", required=True, help="pseudo .bin file or directory")
    p.add_argument("--label-map", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--range-segments", default=None,
                   help="range-view segment PNG file or directory for real labels")
    _add_fov_flags(p)
    _add_report_flag(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("stvd", help="stochastically discard points (baseline)")
    p.add_argument("--input", required=True, help="labeled .bin file or directory")
    p.add_argument("--label-map", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rate", type=float, required=True, help="drop probability")
    p.add_argument("--seed", type=int, required=True,
                   help="generator seed (required: no hidden time-based seeding)")
    _add_report_flag(p)
    p.set_defaults(func=cmd_stvd)

    p = sub.add_parser("sweep", help="kept-count table across discard rates")
    p.add_argument("--input", required=True, help="labeled .bin file or directory")
    p.add_argument("--label-map", required=True)
    p.add_argument("--rates", required=True, help="comma-separated rates in [0,1]")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--csv", default=None, help="also write the table as CSV")
    _add_report_flag(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sim", help="render synthetic dataset frames")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scene", default=None,
                   help="YAML scene file (default: seeded random scenes)")
    p.add_argument("--scale", type=float, default=DEPTH_PNG_SCALE)
    _add_fov_flags(p)
    _add_report_flag(p)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("pipeline", help="run sgp, clean, fuse over a dataset")
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--dataset-root", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_report_flag(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else EXIT_ERROR
    try:
        return args.func(args)
    except SgpKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
