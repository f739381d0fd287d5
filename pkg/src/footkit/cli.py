"""Command-line front end.

Every subcommand reads JSON scenes and writes JSON, plus a report file that
records the resolved configuration so a run can be repeated exactly.
Inputs may be a single file (one scene or an array of scenes) or a
directory of ``*.json`` files; directory inputs produce directory outputs
with the same file names.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import NamedTuple

from . import geometry, metrics, polygonize, sofa, synth
from .core import BuildingInstance, SceneAnnotation, scene_from_dict, scene_to_dict, parse_scenes, serialize_scenes
from .errors import FootkitError, UnknownSubcommand, UsageError

log = logging.getLogger("footkit")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
SEED_ENV = "FOOTKIT_SEED"
REPORT_SUFFIX = ".report.json"
DIR_REPORT = "run" + REPORT_SUFFIX
MODES = ("roof+offset", "building+offset", "roof+building", "roof+building+dir")
COMMANDS = ("synth", "derive", "correct", "polygonize", "evaluate", "fit-sofa")


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 is reserved for I/O errors here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- I/O --------------------------------------------------------------------

def _input_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.glob("*.json") if not p.name.endswith(REPORT_SUFFIX))
        if not files:
            raise UsageError(f"{path}: no scene files found")
        return files
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    return [path]


class SceneFile(NamedTuple):
    name: str
    scenes: list[SceneAnnotation]
    is_array: bool


def load_scene_files(path) -> list[SceneFile]:
    """Scenes of one file, or of every scene file in a directory."""
    out = []
    for f in _input_files(Path(path)):
        text = f.read_text()
        try:
            out.append(SceneFile(f.name, parse_scenes(text), text.lstrip().startswith("[")))
        except FootkitError as exc:
            raise type(exc)(f"{f}: {exc}") from exc
    return out


def load_scenes(path) -> list[SceneAnnotation]:
    return [s for sf in load_scene_files(path) for s in sf.scenes]


def _serialize_like(sf: SceneFile, scenes) -> str:
    return serialize_scenes(scenes if sf.is_array else scenes[0])


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _report_path(out: Path, is_dir: bool) -> Path:
    if is_dir:
        return out / DIR_REPORT
    if out.suffix == ".json":
        return out.with_suffix(REPORT_SUFFIX)
    return out.with_name(out.name + REPORT_SUFFIX)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_report(path: Path, args, summary: dict) -> None:
    _write_text(path, _dump({"command": args.command, "config": _resolved(args), "summary": summary}))


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}


def _write_like_input(files, results, args, summary) -> None:
    """Write processed scenes mirroring the input layout, then the report."""
    src, out = Path(args.input), Path(args.out)
    if src.is_dir():
        for sf, scenes in zip(files, results):
            _write_text(out / sf.name, _serialize_like(sf, scenes))
    else:
        _write_text(out, _serialize_like(files[0], results[0]))
    _write_report(_report_path(out, src.is_dir()), args, summary)


def _pool_map(fn, items, jobs: int):
    """Map in input order, fanning out to processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _map_scenes(worker, files, jobs: int):
    """Apply ``worker(scene_dict) -> (scene_dict, notes)`` to every scene, keeping file grouping."""
    flat = [scene_to_dict(s) for sf in files for s in sf.scenes]
    done = _pool_map(worker, flat, jobs)
    grouped, notes, k = [], [], 0
    for sf in files:
        chunk = done[k:k + len(sf.scenes)]
        k += len(sf.scenes)
        grouped.append([scene_from_dict(d) for d, _ in chunk])
        for _, n in chunk:
            notes.extend(n)
    return grouped, notes


# -- synth ------------------------------------------------------------------

def _synth_one(index: int, master: int, overrides: dict) -> tuple[str, str]:
    cfg = synth.SynthConfig(seed=synth.scene_seed(master, index), image_id=f"scene_{index:05d}", **overrides)
    return cfg.image_id, serialize_scenes(synth.gen_scene(cfg))


def cmd_synth(args) -> dict:
    out = Path(_need(args, "out"))
    if args.scenes < 1:
        raise UsageError("--scenes must be >= 1")
    overrides = {
        "width": args.width,
        "height": args.height,
        "n_buildings": args.buildings,
        "direction": None if args.direction is None else math.radians(args.direction),
        "length_range": (args.min_len, args.max_len),
        "footprint_size_range": (args.size_min, args.size_max),
        "l_shape_prob": args.l_shape_prob,
    }
    try:
        synth.SynthConfig(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    made = _pool_map(partial(_synth_one, master=args.seed, overrides=overrides), range(args.scenes), args.jobs)
    for image_id, text in made:
        _write_text(out / f"{image_id}.json", text)
    summary = {"scenes": len(made), "outputs": [f"{i}.json" for i, _ in made]}
    if args.noisy_out:
        noisy = Path(args.noisy_out)
        noise_seed = synth.scene_seed(args.seed, 1_000_000)
        for k, (image_id, text) in enumerate(made):
            scene = parse_scenes(text)[0]
            model = synth.NoiseModel(args.angle_noise, args.length_noise, seed=synth.scene_seed(noise_seed, k))
            pred = iter(synth.perturb_offsets(scene, model))
            instances = tuple(
                replace(inst, offset=next(pred)) if inst.offset is not None else inst for inst in scene.instances
            )
            _write_text(noisy / f"{image_id}.json", serialize_scenes(replace(scene, instances=instances)))
        _write_report(noisy / DIR_REPORT, args, {"scenes": len(made), "noisy_from": str(out)})
        summary["noisy_out"] = str(noisy)
    _write_report(out / DIR_REPORT, args, summary)
    log.info("wrote %d scenes to %s", len(made), out)
    return summary


# -- derive -----------------------------------------------------------------

_MODE_NEEDS = {
    "roof+offset": ("roof_mask", "offset"),
    "building+offset": ("building_mask", "offset"),
    "roof+building": ("roof_mask", "building_mask"),
    "roof+building+dir": ("roof_mask", "building_mask"),
}


def _derive_instance(inst: BuildingInstance, mode: str, cfg: geometry.SearchConfig, direction):
    if mode == "roof+offset":
        return inst.offset, geometry.footprint_from_roof_offset(inst.roof_mask, inst.offset)
    if mode == "building+offset":
        return inst.offset, geometry.footprint_from_building_offset(inst.building_mask, inst.offset)
    if mode == "roof+building":
        res = geometry.footprint_search(inst.roof_mask, inst.building_mask, cfg)
    else:
        if direction is None:
            raise UsageError("scene has no global_direction")
        res = geometry.footprint_given_direction(inst.roof_mask, inst.building_mask, direction, cfg)
    return res.offset, res.footprint


def _derive_scene(doc: dict, mode: str, search: dict):
    scene = scene_from_dict(doc)
    cfg = geometry.SearchConfig(**search)
    out, notes = [], []
    for inst in scene.instances:
        missing = [f for f in _MODE_NEEDS[mode] if getattr(inst, f) is None]
        if missing:
            notes.append({"image_id": scene.image_id, "id": inst.id, "skipped": f"missing {', '.join(missing)}"})
            continue
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                offset, footprint = _derive_instance(inst, mode, cfg, scene.global_direction)
            except FootkitError as exc:
                notes.append({"image_id": scene.image_id, "id": inst.id, "skipped": f"{type(exc).__name__}: {exc}"})
                continue
        for w in caught:
            notes.append({"image_id": scene.image_id, "id": inst.id, "warning": str(w.message)})
        poly = None
        if inst.roof_polygon is not None and "roof" in mode:
            poly = geometry.footprint_polygon_from_roof_polygon(inst.roof_polygon, offset)
        keep = {f: getattr(inst, f) for f in _MODE_NEEDS[mode]}
        out.append(BuildingInstance(
            id=inst.id,
            roof_mask=keep.get("roof_mask"),
            building_mask=keep.get("building_mask"),
            footprint_mask=footprint,
            offset=offset,
            roof_polygon=inst.roof_polygon if "roof" in mode else None,
            footprint_polygon=poly,
        ))
    return scene_to_dict(replace(scene, instances=tuple(out))), notes


def _search_config(args) -> dict:
    kw = {
        "angle_step": args.angle_step,
        "step_length": args.probe_length,
        "length_tolerance": args.len_tol,
        "max_iter": args.max_iter,
    }
    try:
        geometry.SearchConfig(**kw)
    except (ValueError, FootkitError) as exc:
        raise UsageError(str(exc)) from None
    return kw


def cmd_derive(args) -> dict:
    if args.mode not in MODES:
        raise UsageError(f"--mode must be one of {', '.join(MODES)}")
    _need(args, "input")
    _need(args, "out")
    search = _search_config(args)
    files = load_scene_files(args.input)
    worker = partial(_derive_scene, mode=args.mode, search=search)
    results, notes = _map_scenes(worker, files, args.jobs)
    summary = {
        "scenes": sum(len(s) for s in results),
        "derived": sum(len(s.instances) for r in results for s in r),
        "notes": notes,
    }
    _write_like_input(files, results, args, summary)
    return summary


# -- SOFA -------------------------------------------------------------------

def _sofa_config(args, w: float = 0.0) -> sofa.SofaConfig:
    try:
        return sofa.SofaConfig(w=w, level=args.level, masking=args.masking.replace("-", "_"))
    except FootkitError as exc:
        raise UsageError(str(exc)) from None


def _offset_pairs(pred_scenes, gt_scenes):
    """Align scenes by image_id and instances by id; keep pairs with both offsets."""
    gt_by_id = {s.image_id: s for s in gt_scenes}
    problems = [f"{s.image_id}: no ground-truth scene" for s in pred_scenes if s.image_id not in gt_by_id]
    pred_ids = {s.image_id for s in pred_scenes}
    problems += [f"{i}: no predicted scene" for i in gt_by_id if i not in pred_ids]
    if problems:
        raise UsageError("scenes do not match:\n  " + "\n  ".join(problems))
    batches = []
    for ps in pred_scenes:
        gt = {i.id: i for i in gt_by_id[ps.image_id].instances}
        pairs = [
            (p.offset, gt[p.id].offset) for p in ps.instances
            if p.offset is not None and p.id in gt and gt[p.id].offset is not None
        ]
        if pairs:
            batches.append(pairs)
    return batches


def _fit(args, pred_path, gt_path) -> sofa.FitResult:
    batches = _offset_pairs(load_scenes(pred_path), load_scenes(gt_path))
    calib = [([p for p, _ in b], [g for _, g in b]) for b in batches]
    return sofa.fit_w(calib, _sofa_config(args))


def cmd_fit_sofa(args) -> dict:
    out = Path(_need(args, "out"))
    fit = _fit(args, _need(args, "pred"), _need(args, "gt"))
    _write_text(out, _dump(fit.to_dict()))
    summary = fit.to_dict()
    _write_report(_report_path(out, False), args, summary)
    log.info("fitted w=%.6f objective=%.6f", fit.w, fit.objective)
    return summary


def _correct_scene(doc: dict, cfg: dict):
    scene = scene_from_dict(doc)
    idx = [k for k, inst in enumerate(scene.instances) if inst.offset is not None]
    if not idx:
        return doc, []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fixed = sofa.correct([scene.instances[k].offset for k in idx], sofa.SofaConfig(**cfg))
    instances = list(scene.instances)
    for k, o in zip(idx, fixed):
        instances[k] = replace(instances[k], offset=o)
    notes = [{"image_id": scene.image_id, "warning": str(w.message)} for w in caught]
    return scene_to_dict(replace(scene, instances=tuple(instances))), notes


def cmd_correct(args) -> dict:
    _need(args, "input")
    _need(args, "out")
    given = [args.w is not None, args.w_file is not None, bool(args.fit)]
    if sum(given) != 1:
        raise UsageError("give exactly one of --w, --w-file or --fit")
    if args.w is not None:
        w, fit = args.w, None
    elif args.w_file is not None:
        try:
            doc = json.loads(Path(args.w_file).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.w_file}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("w"), (int, float)):
            raise UsageError(f"{args.w_file}: expected an object with a numeric 'w'")
        w, fit = float(doc["w"]), None
    else:
        fit = _fit(args, args.calib_pred or args.input, _need(args, "calib_gt"))
        w = fit.w
    cfg = _sofa_config(args, w)
    files = load_scene_files(args.input)
    worker = partial(_correct_scene, cfg={"w": cfg.w, "level": cfg.level, "masking": cfg.masking})
    results, notes = _map_scenes(worker, files, args.jobs)
    summary = {"w": w, "fit": None if fit is None else fit.to_dict(), "notes": notes}
    _write_like_input(files, results, args, summary)
    return summary


# -- polygonize -------------------------------------------------------------

def _polygonize_scene(doc: dict, epsilon: float, min_area: int, snap_radius: float):
    scene = scene_from_dict(doc)
    out, notes = [], []
    for inst in scene.instances:
        roof_poly, foot_poly = inst.roof_polygon, inst.footprint_polygon
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                if inst.roof_mask is not None:
                    if roof_poly is not None:
                        roof_poly = polygonize.connect_vertices(roof_poly.vertices, inst.roof_mask, snap_radius)
                    else:
                        roof_poly = polygonize.polygonize_mask(inst.roof_mask, epsilon, min_area)
                if roof_poly is not None and inst.offset is not None:
                    foot_poly = geometry.footprint_polygon_from_roof_polygon(roof_poly, inst.offset)
                elif inst.footprint_mask is not None:
                    foot_poly = polygonize.polygonize_mask(inst.footprint_mask, epsilon, min_area)
            except FootkitError as exc:
                notes.append({"image_id": scene.image_id, "id": inst.id, "skipped": f"{type(exc).__name__}: {exc}"})
        for w in caught:
            notes.append({"image_id": scene.image_id, "id": inst.id, "warning": str(w.message)})
        out.append(replace(inst, roof_polygon=roof_poly, footprint_polygon=foot_poly))
    return scene_to_dict(replace(scene, instances=tuple(out))), notes


def cmd_polygonize(args) -> dict:
    _need(args, "input")
    _need(args, "out")
    if args.epsilon < 0 or args.min_area < 1 or args.snap_radius <= 0:
        raise UsageError("--epsilon must be >= 0, --min-area >= 1 and --snap-radius > 0")
    files = load_scene_files(args.input)
    worker = partial(_polygonize_scene, epsilon=args.epsilon, min_area=args.min_area, snap_radius=args.snap_radius)
    results, notes = _map_scenes(worker, files, args.jobs)
    summary = {"scenes": sum(len(r) for r in results), "notes": notes}
    _write_like_input(files, results, args, summary)
    return summary


# -- evaluate ---------------------------------------------------------------

def evaluate_scenes(pred_scenes, gt_scenes, mask: str = "footprint", level: str = "instance",
                    iou_threshold: float = 0.5, buckets: metrics.BucketSpec | None = None) -> dict:
    """Offset and mask metrics of predicted scenes against ground truth, as a dict."""
    batches = _offset_pairs(pred_scenes, gt_scenes)
    pairs = [p for b in batches for p in b]
    report = metrics.grouped_errors(pairs, buckets) if pairs else metrics.MetricReport()
    gt_by_id = {s.image_id: s for s in gt_scenes}
    field = f"{mask}_mask"
    tp = fp = fn = 0
    compared = 0
    for ps in pred_scenes:
        gs = gt_by_id[ps.image_id]
        if (gs.width, gs.height) != (ps.width, ps.height):
            raise UsageError(f"{ps.image_id}: image size differs between pred and gt")
        gt_masks = {i.id: getattr(i, field) for i in gs.instances if getattr(i, field) is not None}
        pred_masks = {i.id: getattr(i, field) for i in ps.instances if getattr(i, field) is not None}
        compared += len(gt_masks)
        if level == "instance":
            c = metrics.instance_counts(list(pred_masks.values()), list(gt_masks.values()), iou_threshold)
        else:
            ids = sorted(gt_masks)
            c = metrics.pixel_counts([pred_masks.get(i) for i in ids], [gt_masks[i] for i in ids])
            # pixels predicted for instances absent from the ground truth are false positives
            c = (c[0], c[1] + sum(m.area for i, m in pred_masks.items() if i not in gt_masks), c[2])
        tp, fp, fn = tp + c[0], fp + c[1], fn + c[2]
    if compared or tp or fp:
        p, r, f = metrics.prf_from_counts(tp, fp, fn)
        report = replace(report, precision=p, recall=r, f1=f)
    doc = report.to_dict()
    doc["counts"] = {"offset_pairs": len(pairs), "tp": tp, "fp": fp, "fn": fn}
    return doc


def cmd_evaluate(args) -> dict:
    if not 0.0 < args.iou < 1.0:
        raise UsageError("--iou must be in (0, 1)")
    try:
        buckets = metrics.BucketSpec(args.bucket_width, args.buckets)
    except FootkitError as exc:
        raise UsageError(str(exc)) from None
    gt_path, pred_path = _need(args, "gt"), _need(args, "pred")
    gt, pred = load_scenes(gt_path), load_scenes(pred_path)
    doc = evaluate_scenes(pred, gt, args.mask, args.mask_level, args.iou, buckets)
    doc["config"] = _resolved(args)
    doc["command"] = args.command
    text = _dump(doc)
    if args.report:
        _write_text(Path(args.report), text)
    else:
        sys.stdout.write(text)
    return doc


# -- parser -----------------------------------------------------------------

def _need(args, name: str):
    value = getattr(args, name)
    if value is None:
        raise UsageError(f"{args.command}: --{name.replace('_', '-')} is required")
    return value


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parallel = _Parser(add_help=False)
    parallel.add_argument("--jobs", type=int, default=1, help="worker processes (output order is fixed)")

    search = _Parser(add_help=False)
    search.add_argument("--angle-step", type=float, default=1.0, help="angle grid step in degrees")
    search.add_argument("--probe-length", type=float, default=5.0, help="probe length of the angle scan (px)")
    search.add_argument("--len-tol", type=float, default=0.25, help="length bisection tolerance (px)")
    search.add_argument("--max-iter", type=int, default=40, help="bisection iteration cap")

    sofa_opts = _Parser(add_help=False)
    sofa_opts.add_argument("--level", choices=sofa.LEVELS, default="vector")
    sofa_opts.add_argument("--masking", choices=("look-longer", "look_longer", "none"), default="look-longer")

    parser = _Parser(prog="footkit", description="Building footprints from off-nadir annotations.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    subs = {}

    p = sub.add_parser("synth", parents=[common, parallel], help="generate synthetic scenes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--buildings", type=int, default=20)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("--direction", type=float, default=None, help="shared offset direction in degrees")
    p.add_argument("--min-len", type=float, default=5.0)
    p.add_argument("--max-len", type=float, default=60.0)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--size-min", type=int, default=12, help="smallest footprint side (px)")
    p.add_argument("--size-max", type=int, default=40, help="largest footprint side (px)")
    p.add_argument("--l-shape-prob", type=float, default=0.0)
    p.add_argument("--noisy-out", help="also write copies with perturbed offsets here")
    p.add_argument("--angle-noise", type=float, default=2.0, help="angle std times length (rad*px)")
    p.add_argument("--length-noise", type=float, default=2.0, help="length std (px)")
    p.set_defaults(func=cmd_synth)
    subs["synth"] = p

    p = sub.add_parser("derive", parents=[common, parallel, search], help="derive footprints")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--mode", default="roof+offset", help=" | ".join(MODES))
    p.set_defaults(func=cmd_derive)
    subs["derive"] = p

    p = sub.add_parser("correct", parents=[common, parallel, sofa_opts], help="correct offsets with SOFA")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--w", type=float, default=None, help="kernel scale")
    p.add_argument("--w-file", default=None, help="JSON written by fit-sofa")
    p.add_argument("--fit", action="store_true", help="fit w on calibration data first")
    p.add_argument("--calib-pred", default=None, help="calibration predictions (default: --input)")
    p.add_argument("--calib-gt", default=None, help="calibration ground truth")
    p.set_defaults(func=cmd_correct)
    subs["correct"] = p

    p = sub.add_parser("polygonize", parents=[common, parallel], help="vectorize roof and footprint masks")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--epsilon", type=float, default=1.0, help="Douglas-Peucker tolerance (px)")
    p.add_argument("--min-area", type=int, default=polygonize.DEFAULT_MIN_AREA)
    p.add_argument("--snap-radius", type=float, default=polygonize.DEFAULT_SNAP_RADIUS)
    p.set_defaults(func=cmd_polygonize)
    subs["polygonize"] = p

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against ground truth")
    p.add_argument("--gt")
    p.add_argument("--pred")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--bucket-width", type=float, default=10.0)
    p.add_argument("--buckets", type=int, default=9)
    p.add_argument("--mask", choices=("footprint", "roof", "building"), default="footprint")
    p.add_argument("--mask-level", choices=("instance", "pixel"), default="instance")
    p.add_argument("--report", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)
    subs["evaluate"] = p

    p = sub.add_parser("fit-sofa", parents=[common, sofa_opts], help="fit the SOFA kernel scale")
    p.add_argument("--pred")
    p.add_argument("--gt")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_sofa)
    subs["fit-sofa"] = p
    return parser, subs


def _apply_config(args, argv, parser, subs):
    path = Path(args.config)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: expected a JSON object")
    sub = subs[args.command]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"{path}: unknown keys for {args.command}: {', '.join(unknown)}")
    sub.set_defaults(**doc)
    return parser.parse_args(argv)


def parse_args(argv):
    argv = list(argv)
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        raise UnknownSubcommand(f"unknown command {argv[0]!r}; expected one of {', '.join(COMMANDS)}")
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing command; expected one of " + ", ".join(COMMANDS))
    if args.config:
        args = _apply_config(args, argv, parser, subs)
    if hasattr(args, "jobs") and args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if hasattr(args, "seed") and args.seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = int(env) if env is not None else 0
        except ValueError:
            raise UsageError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    return args


def run(argv=None) -> int:
    """Run one subcommand and return the exit code."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s: %(message)s",
        )
        args.func(args)
    except OSError as exc:
        print(f"footkit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FootkitError as exc:
        print(f"footkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())
