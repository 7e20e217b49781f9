"""Command-line interface.

Subcommands: ``reface``, ``train``, ``render-face`` and ``evaluate
{volumes,reid,c1,tradeoff}``. Exit codes: 0 success, 2 input/validation
error, 3 runtime/numerical error. Per-stage wall-clock timings go to stderr
as ``timing,<stage>,<seconds>`` lines so runs can be compared.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import RunConfig, load_config
from .errors import Reface3dError, UsageError
from .nifti import read_nifti, reorient_asl, write_nifti
from .report import EvaluationReport, emit_svg_plots, report_json, write_tradeoff_csv
from .reid import pair_records, read_embeddings, reid_summary
from .stats import (
    CANONICAL_REGIONS,
    benjamini_hochberg,
    bland_altman,
    check_c1,
    coefficient_of_repeatability,
    ncr,
    read_volume_table,
    tradeoff_point,
    wilcoxon_signed_rank,
)


def _timing(stage: str, seconds: float) -> None:
    print(f"timing,{stage},{seconds:.3f}", file=sys.stderr)


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _parse_tile(text: str) -> tuple[int, int, int]:
    parts = [int(v) for v in text.replace("x", ",").split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or min(parts) < 1:
        raise UsageError(f"--tile must be one or three positive integers, got {text!r}")
    return tuple(parts)


def cmd_reface(args) -> int:
    import torch

    from .gan.reface import reface
    from .gan.weights import load_weights

    weights_path = _require_file(args.weights, "--weights")
    input_path = _require_file(args.input, "--input")
    if args.output is None:
        raise UsageError("--output is required")

    t0 = time.perf_counter()
    img = read_nifti(input_path)
    _timing("read", time.perf_counter() - t0)
    t0 = time.perf_counter()
    img = reorient_asl(img)
    _timing("reorient", time.perf_counter() - t0)

    weights = load_weights(weights_path)
    timings: dict[str, float] = {}
    with torch.no_grad():
        out = reface(
            img,
            weights,
            dropout_p=args.dropout,
            seed=args.seed,
            cap=args.cap,
            tile=args.tile,
            timing_sink=timings,
        )
    for stage, seconds in timings.items():
        _timing(stage, seconds)
    t0 = time.perf_counter()
    write_nifti(out, args.output)
    _timing("write", time.perf_counter() - t0)
    return 0


def cmd_train(args) -> int:
    from .gan.losses import TrainSchedule
    from .gan.networks import DiscriminatorConfig, GeneratorConfig
    from .gan.train import prepare_tile_pairs, train
    from .gan.weights import save_weights

    manifest = _require_file(args.pairs_manifest, "--pairs-manifest")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    pairs = []
    with open(manifest, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#") or row[0] == "defaced":
                continue
            if len(row) != 2:
                raise UsageError(f"{manifest}:{lineno}: expected 'defaced,original'")
            d, o = (Path(p.strip()) for p in row)
            if not d.is_file() or not o.is_file():
                raise UsageError(f"{manifest}:{lineno}: missing volume file")
            pairs.append((reorient_asl(read_nifti(d)), reorient_asl(read_nifti(o))))
    if not pairs:
        raise UsageError(f"{manifest}: no pairs listed")

    gen_cfg = GeneratorConfig(
        levels=args.levels,
        base_channels=args.base_channels,
        bottleneck_res_blocks=args.res_blocks,
        dropout_p=args.dropout,
    )
    disc_cfg = DiscriminatorConfig(layers=args.disc_layers, base_channels=args.disc_channels)
    schedule = TrainSchedule(
        epochs=args.epochs,
        validate_every=args.validate_every,
        base_lr=args.lr,
        cosine_decay_period=args.cosine_period,
        lam=args.lam,
        seed=args.seed,
    )

    t0 = time.perf_counter()
    tile_pairs, cap = prepare_tile_pairs(pairs, tile=args.tile, cap=args.cap)
    _timing("preprocess", time.perf_counter() - t0)
    t0 = time.perf_counter()
    result = train(tile_pairs, gen_cfg, disc_cfg, schedule, metadata={"winsorize_cap": cap})
    _timing("train", time.perf_counter() - t0)

    for epoch, snapshot in result.checkpoints:
        save_weights(snapshot, out_dir / f"gen_epoch{epoch}.rfkw")
    save_weights(result.final, out_dir / "gen_final.rfkw")
    with open(out_dir / "loss_log.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "loss_D", "loss_G", "loss_G_adv", "l15", "lr"])
        for row in result.loss_rows:
            writer.writerow(
                [
                    row["step"],
                    row["epoch"],
                    repr(row["loss_D"]),
                    repr(row["loss_G"]),
                    repr(row["loss_G_adv"]),
                    repr(row["l15"]),
                    repr(row["lr"]),
                ]
            )
    print(f"wrote {len(result.checkpoints)} checkpoints + final to {out_dir}")
    return 0


def cmd_render_face(args) -> int:
    from .render import (
        RenderParams,
        candidate_renders,
        marching_cubes,
        preprocess_for_render,
        render_frontal,
        save_obj,
        save_png,
    )

    input_path = _require_file(args.input, "--input")
    if (args.threshold is None) == (not args.candidates):
        raise UsageError("exactly one of --threshold or --candidates is required")
    img = preprocess_for_render(
        reorient_asl(read_nifti(input_path)), cap=args.cap, sigma=args.sigma
    )
    params = RenderParams(image_size=args.size)
    out = Path(args.output)
    if args.candidates:
        out.mkdir(parents=True, exist_ok=True)
        stem = input_path.name.split(".")[0]
        for threshold, image in candidate_renders(img, params):
            save_png(image, out / f"{stem}_t{threshold}.png")
        print(f"wrote 5 candidate renders to {out}")
        return 0
    mesh = marching_cubes(img, args.threshold)
    if args.save_mesh:
        save_obj(mesh, out.with_suffix(".obj"))
    save_png(render_frontal(mesh, params), out)
    print(f"wrote {out}")
    return 0


def _evaluate_volumes_block(report: EvaluationReport, tool: str, orig_path, anon_path) -> None:
    original = read_volume_table(orig_path, source="original")
    anonymized = read_volume_table(anon_path, source=tool)
    keys = sorted(set(original.rows) & set(anonymized.rows))
    if not keys:
        raise UsageError("no common (subject_id, session_id) rows between the tables")
    block = report.block(tool)
    regions = [r for r in CANONICAL_REGIONS if r in original.regions and r in anonymized.regions]
    if not regions:
        raise UsageError("tables share no canonical region columns")

    raw_p, tested = [], []
    for region in regions:
        before = original.column(region, keys)
        after = anonymized.column(region, keys)
        result = wilcoxon_signed_rank(before, after)
        if result.degenerate:
            block.wilcoxon_degenerate.append(region)
        else:
            raw_p.append(result.p_value)
            tested.append(region)
        diffs = before - after
        block.cr[region] = coefficient_of_repeatability(diffs)
        block.bland_altman[region] = bland_altman(before, after)
    adjusted, rejected = benjamini_hochberg(raw_p)
    block.wilcoxon_adjusted = dict(zip(tested, adjusted))
    block.wilcoxon_rejected = dict(zip(tested, rejected))
    block.ncr = ncr(original, anonymized)


def _effective_config(args) -> dict:
    """Audit-trail echo of the parsed flags (paths stringified).

    Output destinations are excluded: they do not affect the computation and
    would break byte-identity of reports across runs into different dirs.
    """
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config", "out_dir", "output") or callable(value):
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = EvaluationReport(seed=None, config=_effective_config(args))

    if args.evaluate_command == "volumes":
        _evaluate_volumes_block(
            report,
            args.tool,
            _require_file(args.original, "--original"),
            _require_file(args.anonymized, "--anonymized"),
        )
        (out_dir / "volumes_report.json").write_text(report_json(report))
        emit_svg_plots(report, out_dir)
        print(f"wrote volumes report for {args.tool} to {out_dir}")
        return 0

    if args.evaluate_command == "reid":
        records = read_embeddings(_require_file(args.embeddings, "--embeddings"))
        pairs = pair_records(records, args.tool)
        if not pairs:
            raise UsageError(f"no (original, {args.tool}) embedding pairs found")
        summary = reid_summary(pairs, threshold=args.threshold)
        if args.scale == "x100":
            summary = summary.to_x100()
        payload = json.dumps(
            {k: v for k, v in sorted(summary.__dict__.items())}, sort_keys=True, indent=2
        )
        (out_dir / f"reid_{args.tool}.json").write_text(payload + "\n")
        print(payload)
        return 0

    if args.evaluate_command == "c1":
        before = read_nifti(_require_file(args.before, "--before"))
        after = read_nifti(_require_file(args.after, "--after"))
        mask_img = read_nifti(_require_file(args.tiv_mask, "--tiv-mask"))
        result = check_c1(before, after, mask_img.data > 0)
        payload = json.dumps(
            {"changed_voxels": result.changed_voxels, "passed": result.passed}, sort_keys=True
        )
        (out_dir / "c1.json").write_text(payload + "\n")
        print(payload)
        return 0

    if args.evaluate_command == "tradeoff":
        if len(args.tool_specs) < 2:
            raise UsageError("--tool NAME=orig.csv:anon.csv:embeddings.csv needed at least twice")
        points = []
        for spec in args.tool_specs:
            try:
                name, paths = spec.split("=", 1)
                orig_csv, anon_csv, emb_csv = paths.split(":")
            except ValueError:
                raise UsageError(
                    f"bad --tool spec {spec!r}; expected NAME=orig.csv:anon.csv:embeddings.csv"
                ) from None
            _evaluate_volumes_block(report, name, _require_file(orig_csv, "--tool"),
                                    _require_file(anon_csv, "--tool"))
            records = read_embeddings(_require_file(emb_csv, "--tool"))
            pairs = pair_records(records, name)
            if not pairs:
                raise UsageError(f"no (original, {name}) embedding pairs in {emb_csv}")
            block = report.block(name)
            block.reid = reid_summary(pairs, threshold=args.threshold)
            block.tradeoff = tradeoff_point(name, block.ncr, block.reid)
            points.append(block.tradeoff)
        write_tradeoff_csv(points, out_dir / "tradeoff.csv")
        (out_dir / "tradeoff_report.json").write_text(report_json(report))
        emit_svg_plots(report, out_dir)
        print(f"wrote trade-off report for {len(points)} tools to {out_dir}")
        return 0

    raise UsageError(f"unknown evaluate subcommand {args.evaluate_command!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reface3d",
        description="Reface defaced T1w MRI with a 3D cGAN and evaluate de-identification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap torch CPU threads")
    parser.add_argument("--config", type=Path, default=None, help="INI run configuration")
    sub = parser.add_subparsers(dest="command", required=True)

    p_reface = sub.add_parser("reface", help="generate a face on a defaced volume")
    p_reface.add_argument("--input", type=Path)
    p_reface.add_argument("--weights", type=Path)
    p_reface.add_argument("--output", type=Path)
    p_reface.add_argument("--dropout", type=float, default=None)
    p_reface.add_argument("--seed", type=int, default=None)
    p_reface.add_argument("--cap", type=float, default=None, help="winsorize cap override")
    p_reface.add_argument("--tile", type=_parse_tile, default=None)
    p_reface.set_defaults(func=cmd_reface)

    p_train = sub.add_parser("train", help="train the refacing cGAN")
    p_train.add_argument("--pairs-manifest", type=Path, help="CSV of defaced,original paths")
    p_train.add_argument("--out-dir", type=Path, required=True)
    p_train.add_argument("--epochs", type=int, default=50)
    p_train.add_argument("--validate-every", type=int, default=7)
    p_train.add_argument("--lr", type=float, default=0.0002)
    p_train.add_argument("--cosine-period", type=int, default=1000)
    p_train.add_argument("--lam", type=float, default=0.015)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--tile", type=_parse_tile, default=(128, 128, 128))
    p_train.add_argument("--cap", type=float, default=None)
    p_train.add_argument("--dropout", type=float, default=0.25)
    p_train.add_argument("--levels", type=int, default=4)
    p_train.add_argument("--base-channels", type=int, default=32)
    p_train.add_argument("--res-blocks", type=int, default=4)
    p_train.add_argument("--disc-layers", type=int, default=3)
    p_train.add_argument("--disc-channels", type=int, default=32)
    p_train.set_defaults(func=cmd_train)

    p_render = sub.add_parser("render-face", help="render a frontal face image")
    p_render.add_argument("--input", type=Path)
    p_render.add_argument("--output", type=Path, required=True)
    p_render.add_argument("--threshold", type=float, default=None)
    p_render.add_argument("--candidates", action="store_true",
                          help="render at thresholds 80..120 for manual choice")
    p_render.add_argument("--size", type=int, default=512)
    p_render.add_argument("--cap", type=float, default=3000.0)
    p_render.add_argument("--sigma", type=float, default=1.0)
    p_render.add_argument("--save-mesh", action="store_true", help="also write an OBJ mesh")
    p_render.set_defaults(func=cmd_render_face)

    p_eval = sub.add_parser("evaluate", help="reproducibility / re-id statistics")
    eval_sub = p_eval.add_subparsers(dest="evaluate_command", required=True)

    pv = eval_sub.add_parser("volumes", help="Wilcoxon+BH, CR, nCR, Bland-Altman")
    pv.add_argument("--original", type=Path)
    pv.add_argument("--anonymized", type=Path)
    pv.add_argument("--tool", default="tool")
    pv.add_argument("--out-dir", type=Path, required=True)
    pv.set_defaults(func=cmd_evaluate)

    pr = eval_sub.add_parser("reid", help="re-identification risk from embeddings")
    pr.add_argument("--embeddings", type=Path)
    pr.add_argument("--tool", required=True)
    pr.add_argument("--threshold", type=float, default=None)
    pr.add_argument("--scale", choices=("raw", "x100"), default="raw")
    pr.add_argument("--out-dir", type=Path, required=True)
    pr.set_defaults(func=cmd_evaluate)

    pc = eval_sub.add_parser("c1", help="TIV-mask change check")
    pc.add_argument("--before", type=Path)
    pc.add_argument("--after", type=Path)
    pc.add_argument("--tiv-mask", type=Path)
    pc.add_argument("--out-dir", type=Path, required=True)
    pc.set_defaults(func=cmd_evaluate)

    pt = eval_sub.add_parser("tradeoff", help="nCR vs inverse-distance plane")
    pt.add_argument("--tool", dest="tool_specs", action="append", default=[],
                    metavar="NAME=orig.csv:anon.csv:embeddings.csv")
    pt.add_argument("--threshold", type=float, default=None)
    pt.add_argument("--out-dir", type=Path, required=True)
    pt.set_defaults(func=cmd_evaluate)

    return parser


def _apply_config(args) -> None:
    """Resolve flag > config file > built-in default for None-valued flags."""
    if args.config is not None:
        cfg = load_config(args.config)
        cfg.validate_paths()
    else:
        cfg = RunConfig()
    fills = [
        ("weights", "weights"),
        ("input", "input"),
        ("output", "output"),
        ("winsorize_cap", "cap"),
        ("tile", "tile"),
        ("dropout_p", "dropout"),
        ("seed", "seed"),
    ]
    if getattr(args, "command", None) == "evaluate":
        fills.append(("reid_threshold", "threshold"))
    for attr, flag in fills:
        if getattr(args, flag, "absent") is None and getattr(cfg, attr) is not None:
            setattr(args, flag, getattr(cfg, attr))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            import torch

            torch.set_num_threads(args.threads)
        _apply_config(args)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Reface3dError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
