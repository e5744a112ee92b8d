"""Command-line interface composing the toolkit stages.

Every subcommand accepts --config <json> whose keys provide defaults for the
command's options. Exit codes: 0 success, 2 validation, 3 I/O or format,
4 external enhancer, 5 numeric, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import grdf, metrics, pairs, preprocess
from .enhance import EnhancerBinding, TilingPlan, enhance_tiled, iterate_refine
from .errors import EXIT_IO, EXIT_OK, SarlooksError, ValidationError
from .metrics import EvalReport, RoiSet
from .pipeline import PipelineConfig, default_radar_params, run_pipeline
from .rasters import ComplexRaster, IntensityRaster, RadarParams, \
    RadiometricState
from .simulate import SceneSpec, simulate_slc
from .subaperture import WindowSpec, decompose, make_spec

logger = logging.getLogger("sarlooks")

ENHANCER_ALIASES = {
    "lee": "lee_filter",
    "multilook": "subap_multilook",
    "identity": "identity",
    "boxcar": "boxcar",
    "external": "external",
}


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


_SUBPARSERS: dict = {}


def _apply_config(args: argparse.Namespace) -> None:
    """Fill args from --config JSON for options left at their defaults."""
    if not getattr(args, "config", None):
        return
    subparser = _SUBPARSERS.get(args.func)
    overrides = _load_json(args.config)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or subparser is None:
            continue
        if getattr(args, attr) == subparser.get_default(attr):
            setattr(args, attr, value)


def _binding_from_args(args) -> EnhancerBinding:
    kind = ENHANCER_ALIASES.get(args.enhancer)
    if kind is None:
        raise ValidationError(f"unknown enhancer {args.enhancer!r}")
    params = {}
    if getattr(args, "window", None):
        params["window"] = args.window
    if getattr(args, "noise_cv", None) is not None:
        params["noise_cv"] = args.noise_cv
    arity = "MF" if kind == "subap_multilook" else "SI"
    return EnhancerBinding(
        kind=kind,
        arity=arity,
        params=params,
        external_command=getattr(args, "cmd", None),
        workdir=getattr(args, "workdir", None),
        batch_size=getattr(args, "batch_size", 0) or 0,
        num_inputs=len(args.inputs.split(",")) if arity == "MF" else 3,
    )


def cmd_simulate(args) -> int:
    scene = SceneSpec.from_json(args.scene)
    radar = (RadarParams.from_dict(_load_json(args.radar))
             if args.radar else default_radar_params())
    slc, clean = simulate_slc(scene, radar,
                              apply_weighting=not args.no_weighting)
    if args.scene_id:
        slc.scene_id = clean.scene_id = args.scene_id
    slc.polarization = clean.polarization = args.polarization
    os.makedirs(args.out_dir, exist_ok=True)
    grdf.write_grdf(slc, os.path.join(args.out_dir, "slc.grdf"))
    grdf.write_grdf(clean, os.path.join(args.out_dir, "clean_linear.grdf"))
    print(os.path.join(args.out_dir, "slc.grdf"))
    return EXIT_OK


def cmd_decompose(args) -> int:
    slc = grdf.read_grdf(args.input)
    if not isinstance(slc, ComplexRaster):
        raise ValidationError("decompose needs a c64 SLC raster")
    window = None
    if args.hamming is not None:
        if args.hamming == "none":
            window = WindowSpec("none")
        else:
            window = WindowSpec("generalized_hamming", float(args.hamming))
    spec = make_spec(slc, args.looks, deweight_window=window)
    subset = decompose(slc, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    for k, look in enumerate(subset.looks):
        grdf.write_grdf(look, os.path.join(args.out_dir, f"look_{k}.grdf"),
                        extra_header={"subaperture": spec.to_dict(),
                                      "band_index": k})
    with open(os.path.join(args.out_dir, "subaperture_spec.json"), "w",
              encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
    print(os.path.join(args.out_dir, "subaperture_spec.json"))
    return EXIT_OK


def _raster_to_db(path) -> IntensityRaster:
    raster = grdf.read_grdf(path)
    if isinstance(raster, ComplexRaster):
        raster = preprocess.to_intensity(raster)
    if raster.state is RadiometricState.LINEAR_POWER:
        raster = preprocess.to_db(raster)
    if raster.state is not RadiometricState.DECIBEL:
        raise ValidationError(f"{path}: expected linear or dB raster")
    return raster


def cmd_fit_clip(args) -> int:
    manifest = _load_json(args.manifest)
    paths = manifest["rasters"] if isinstance(manifest, dict) else manifest
    rasters = [_raster_to_db(p) for p in paths]
    spec = preprocess.ClipSpec(low_percentile=args.low,
                               high_percentile=args.high)
    spec = preprocess.fit_clip(rasters, spec)
    spec.save(args.out)
    print(args.out)
    return EXIT_OK


def cmd_apply_clip(args) -> int:
    spec = preprocess.ClipSpec.load(args.clipspec)
    raster = _raster_to_db(args.input)
    normalized = preprocess.clip_and_normalize(raster, spec)
    grdf.write_grdf(normalized, args.out)
    print(args.out)
    return EXIT_OK


def cmd_pairs_build(args) -> int:
    scenes_doc = _load_json(args.scenes)
    manifest = pairs.SplitManifest(
        assignments=scenes_doc["assignments"],
        patch_size=scenes_doc.get("patch_size", pairs.PATCH_SIZE),
    )
    manifest.assert_leakage_free()
    collected = []
    for scene in scenes_doc["scenes"]:
        full = grdf.read_grdf(scene["full"])
        looks = [grdf.read_grdf(p) for p in scene["looks"]]
        if len(looks) != args.looks:
            raise ValidationError(
                f"scene {scene['scene_id']!r} lists {len(looks)} looks, "
                f"expected {args.looks}"
            )
        collected.extend(pairs.extract_pairs(full, looks, manifest,
                                             scene["scene_id"]))
    index = pairs.write_pair_records(collected, args.out,
                                     num_looks=args.looks,
                                     patch_size=manifest.patch_size)
    manifest.counts = {}
    for record in index["records"]:
        split = record["split"]
        manifest.counts[split] = manifest.counts.get(split, 0) + 1
    manifest.save(os.path.join(args.out, "split_manifest.json"))
    print(f"{index['num_records']} pairs -> {args.out}")
    return EXIT_OK


def _run_enhance(args, passes: int) -> int:
    input_paths = args.inputs.split(",")
    rasters = [grdf.read_grdf(p) for p in input_paths]
    for raster, path in zip(rasters, input_paths):
        if not isinstance(raster, IntensityRaster):
            raise ValidationError(f"{path}: enhancement needs f32 rasters")
    binding = _binding_from_args(args)
    plan = TilingPlan(tile_size=args.tile, overlap_fraction=args.overlap)
    os.makedirs(args.out_dir, exist_ok=True)
    if passes == 0 and binding.arity == "MF":
        stages = [enhance_tiled(rasters, binding, plan)]
    else:
        si_binding = binding
        if binding.arity != "SI":
            si_binding = EnhancerBinding(
                kind="lee_filter" if args.enhancer == "multilook"
                else binding.kind,
                arity="SI", params=binding.params,
                external_command=binding.external_command,
                workdir=binding.workdir, batch_size=binding.batch_size,
            )
        stages = iterate_refine(rasters, binding, si_binding, passes, plan)
    outputs = []
    for t, stage in enumerate(stages):
        path = os.path.join(args.out_dir, f"enhanced_pass{t}.grdf")
        grdf.write_grdf(stage, path)
        outputs.append(path)
    print("\n".join(outputs))
    return EXIT_OK


def cmd_enhance(args) -> int:
    return _run_enhance(args, args.passes)


def cmd_refine(args) -> int:
    if args.passes < 1:
        raise ValidationError("refine needs --passes >= 1")
    return _run_enhance(args, args.passes)


def _collect_grdf(path) -> dict[str, str]:
    if os.path.isdir(path):
        return {name: os.path.join(path, name)
                for name in sorted(os.listdir(path))
                if name.endswith(".grdf")}
    return {os.path.basename(path): path}


def cmd_evaluate(args) -> int:
    preds = _collect_grdf(args.pred)
    refs = _collect_grdf(args.ref)
    if len(preds) == 1 and len(refs) == 1:
        matched = [(next(iter(preds.values())), next(iter(refs.values())))]
    else:
        common = sorted(set(preds) & set(refs))
        if not common:
            raise ValidationError("no matching .grdf names in pred and ref")
        matched = [(preds[name], refs[name]) for name in common]

    rois = RoiSet.load(args.rois) if args.rois else None
    clipspec = (preprocess.ClipSpec.load(args.clipspec)
                if args.clipspec else None)
    report = EvalReport()
    for pred_path, ref_path in matched:
        pred = grdf.read_grdf(pred_path)
        ref = grdf.read_grdf(ref_path)
        psnr_db = metrics.psnr(pred, ref)
        ssim_value = metrics.ssim(pred, ref)
        kde_value = metrics.kde_distance(pred.valid_values(),
                                         ref.valid_values())
        enl_value = float("nan")
        if rois is not None:
            raster = pred
            if raster.clip_bounds is None and clipspec is not None:
                low, high = clipspec.bounds_for(raster.polarization)
                raster = raster.with_data(raster.data,
                                          clip_bounds=(low, high))
            roi_list = rois.for_scene(pred.scene_id) or rois.rois
            enl_value = metrics.enl(preprocess.to_linear(raster), roi_list)
        report.add_row(
            scene_id=pred.scene_id or os.path.basename(pred_path),
            polarization=pred.polarization,
            method=args.method,
            refinement_pass=0,
            psnr_db=psnr_db, ssim_value=ssim_value,
            enl_value=enl_value, kde_value=kde_value,
        )
    payload = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    print(payload)
    return EXIT_OK


def cmd_report(args) -> int:
    report = EvalReport.load(args.input)
    print(report.format_table())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = (PipelineConfig.load(args.config) if args.config
              else PipelineConfig())
    run_pipeline(config, args.out_dir)
    print(os.path.join(args.out_dir, "MANIFEST.json"))
    return EXIT_OK


def _register(subparser, func) -> None:
    subparser.set_defaults(func=func)
    _SUBPARSERS[func] = subparser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarlooks",
        description="Subaperture-based self-supervised SAR enhancement "
                    "toolkit",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a synthetic SLC scene")
    p.add_argument("--scene", required=True, help="SceneSpec JSON path")
    p.add_argument("--radar", help="RadarParams JSON path")
    p.add_argument("--scene-id", default="")
    p.add_argument("--polarization", default="VV")
    p.add_argument("--no-weighting", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    _register(p, cmd_simulate)

    p = sub.add_parser("decompose", help="azimuth subaperture decomposition")
    p.add_argument("--input", required=True)
    p.add_argument("--looks", type=int, default=3)
    p.add_argument("--hamming",
                   help="de-weighting coefficient, or 'none' to disable")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")
    _register(p, cmd_decompose)

    p = sub.add_parser("preprocess", help="radiometric preprocessing")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pf = psub.add_parser("fit-clip")
    pf.add_argument("--manifest", required=True,
                    help="JSON list (or {'rasters': [...]}) of GRDF paths")
    pf.add_argument("--low", type=float, default=0.1)
    pf.add_argument("--high", type=float, default=99.9)
    pf.add_argument("--out", required=True)
    pf.add_argument("--config")
    _register(pf, cmd_fit_clip)
    pa = psub.add_parser("apply")
    pa.add_argument("--clipspec", required=True)
    pa.add_argument("--input", required=True)
    pa.add_argument("--out", required=True)
    pa.add_argument("--config")
    _register(pa, cmd_apply_clip)

    p = sub.add_parser("pairs", help="build self-supervised patch pairs")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pb = psub.add_parser("build")
    pb.add_argument("--scenes", required=True,
                    help="scene list JSON with splits and raster paths")
    pb.add_argument("--looks", type=int, default=3)
    pb.add_argument("--out", required=True)
    pb.add_argument("--config")
    _register(pb, cmd_pairs_build)

    for name, func in (("enhance", cmd_enhance), ("refine", cmd_refine)):
        p = sub.add_parser(name, help=f"{name} normalized rasters")
        p.add_argument("--inputs", required=True,
                       help="comma-separated GRDF paths")
        p.add_argument("--enhancer", default="lee",
                       choices=sorted(ENHANCER_ALIASES))
        p.add_argument("--cmd", help="external command template")
        p.add_argument("--window", type=int)
        p.add_argument("--noise-cv", type=float, dest="noise_cv")
        p.add_argument("--tile", type=int, default=96)
        p.add_argument("--overlap", type=float, default=0.5)
        p.add_argument("--passes", type=int,
                       default=0 if name == "enhance" else 1)
        p.add_argument("--batch-size", type=int, default=0)
        p.add_argument("--workdir")
        p.add_argument("--out-dir", required=True)
        p.add_argument("--config")
        _register(p, func)

    p = sub.add_parser("evaluate", help="compute metrics for predictions")
    p.add_argument("--pred", required=True, help="GRDF file or directory")
    p.add_argument("--ref", required=True, help="GRDF file or directory")
    p.add_argument("--rois", help="RoiSet JSON for ENL")
    p.add_argument("--clipspec", help="ClipSpec JSON for denormalization")
    p.add_argument("--method", default="external")
    p.add_argument("--out", help="write the EvalReport JSON here too")
    p.add_argument("--config")
    _register(p, cmd_evaluate)

    p = sub.add_parser("report", help="format an EvalReport as a table")
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    _register(p, cmd_report)

    p = sub.add_parser("pipeline", help="run the full pipeline")
    p.add_argument("--config", help="PipelineConfig JSON")
    p.add_argument("--out-dir", required=True)
    _register(p, cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        _apply_config(args)
        return args.func(args)
    except SarlooksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
