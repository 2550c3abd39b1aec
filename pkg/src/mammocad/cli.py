"""Command-line entry points.

Subcommands: preprocess, train, classify, segment, evaluate. Exit code
0 on success, 1 for usage errors, 2 for runtime or data errors. Flags
override config-file values; the effective configuration is echoed
into the output directory for provenance.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig, apply_assignments, format_config, parse_config
from .core import mask_contour, read_pgm, write_pgm, write_ppm_overlay
from .dataset import ground_truth_mask, load_dataset, parse_info
from .cnn.network import load_checkpoint, save_checkpoint
from .cnn.train import score_dataset, stratified_split, train, write_history
from .metrics import compute_metrics, confusion, dice, roc_auc
from .pipeline import preprocess_image, segment_image


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 on usage errors instead of 2."""

    def exit(self, status=0, message=None):
        if message:
            self._print_message(message, sys.stderr)
        raise SystemExit(1 if status else 0)


def _add_config_flags(sub):
    sub.add_argument("--config", help="pipeline config file (section.key = value lines)")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE", help="override one config value")
    sub.add_argument("--sigma", type=float, help="assumed noise std on the 8-bit scale")
    sub.add_argument("--seed", type=int, help="master random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mammocad", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("preprocess", help="denoise and enhance one image")
    p.add_argument("image", help="input PGM file")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = commands.add_parser("train", help="train the normal/abnormal classifier")
    p.add_argument("--data", required=True, help="directory with <id>.pgm images")
    p.add_argument("--info", required=True, help="annotation file")
    p.add_argument("-o", "--output", required=True, help="checkpoint path (model.bin)")
    p.add_argument("--desk", action="store_true",
                   help="quarter-width 64x64 profile for desk-scale runs")
    p.add_argument("--epochs", type=int)
    p.add_argument("--augment", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("classify", help="label images with a trained model")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("images", nargs="+", help="input PGM files")
    p.set_defaults(func=cmd_classify)

    p = commands.add_parser("segment", help="segment the tumor region of one image")
    p.add_argument("image", help="input PGM file")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--gt", action="store_true",
                   help="report Dice against the annotated lesion circle")
    p.add_argument("--info", help="annotation file (needed for --gt)")
    p.add_argument("--verbose", action="store_true",
                   help="print per-iteration evolution diagnostics")
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = commands.add_parser("evaluate", help="metric report on the held-out split")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="directory with <id>.pgm images")
    p.add_argument("--info", required=True, help="annotation file")
    p.add_argument("-o", "--output", help="also write the JSON report here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def load_pipeline_config(args) -> PipelineConfig:
    config = PipelineConfig()
    if getattr(args, "config", None):
        config = parse_config(Path(args.config).read_text(), config)
    assignments = []
    for item in getattr(args, "overrides", []):
        if "=" not in item:
            raise ValueError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        dotted, value = item.split("=", 1)
        assignments.append((dotted.strip(), value.strip()))
    if getattr(args, "sigma", None) is not None:
        assignments.append(("pipeline.sigma", str(args.sigma)))
    if getattr(args, "seed", None) is not None:
        assignments.append(("pipeline.seed", str(args.seed)))
    if getattr(args, "desk", False):
        assignments.append(("network.desk", "true"))
    if getattr(args, "epochs", None) is not None:
        assignments.append(("train.epochs", str(args.epochs)))
    if getattr(args, "augment", False):
        assignments.append(("train.augment", "true"))
    return apply_assignments(config, assignments)


def _echo_config(config: PipelineConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(format_config(config))


def _read_image(path) -> np.ndarray:
    return read_pgm(Path(path).read_bytes())


def cmd_preprocess(args) -> int:
    config = load_pipeline_config(args)
    out_dir = Path(args.output)
    _echo_config(config, out_dir)
    image = _read_image(args.image)
    result = preprocess_image(image, config)
    (out_dir / "denoised.pgm").write_bytes(write_pgm(result.denoised))
    (out_dir / "enhanced.pgm").write_bytes(write_pgm(result.enhanced))
    (out_dir / "pectoral_removed.pgm").write_bytes(write_pgm(result.final))
    print(f"wrote 3 stages to {out_dir}")
    return 0


def cmd_train(args) -> int:
    config = load_pipeline_config(args)
    model_path = Path(args.output)
    _echo_config(config, model_path.parent)
    items = load_dataset(args.data, args.info)
    dataset = [(item.image, item.label) for item in items]
    network, history = train(dataset, config.network_config(), config.train_config())
    save_checkpoint(network, model_path)
    write_history(history, model_path.with_suffix(".history.jsonl"))
    last = history[-1]
    print(json.dumps({"model": str(model_path), "epochs": len(history),
                      "final_train_loss": last["train_loss"],
                      "test_accuracy": last["test_accuracy"]}, sort_keys=True))
    return 0


def cmd_classify(args) -> int:
    network = load_checkpoint(args.model)
    for path in args.images:
        image = _read_image(path)
        scored = score_dataset(network, [(image, 0)])
        p_abnormal = scored[0][0]
        label = "abnormal" if p_abnormal >= 0.5 else "normal"
        print(json.dumps({"path": str(path), "label": label,
                          "p_abnormal": p_abnormal,
                          "p_normal": 1.0 - p_abnormal}, sort_keys=True))
    return 0


def cmd_segment(args) -> int:
    if args.gt and not args.info:
        raise ValueError("--gt needs --info to locate the annotated circle")
    config = load_pipeline_config(args)
    out_dir = Path(args.output)
    _echo_config(config, out_dir)
    image = _read_image(args.image)

    log = None
    if args.verbose:
        def log(step, area, mean_dphi):
            print(json.dumps({"iter": step, "area": area,
                              "mean_dphi": mean_dphi}, sort_keys=True))

    result = segment_image(image, config, on_iteration=log)
    (out_dir / "mask.pgm").write_bytes(write_pgm(result.mask))
    (out_dir / "overlay.ppm").write_bytes(
        write_ppm_overlay(image, mask_contour(result.mask)))
    (out_dir / "membership.pgm").write_bytes(write_pgm(result.membership))
    span = np.ptp(result.phi)
    phi_view = (result.phi - result.phi.min()) / span if span > 0 else np.zeros_like(result.phi)
    (out_dir / "phi.pgm").write_bytes(write_pgm(phi_view))

    summary = {
        "image": str(args.image),
        "mask_area": int(result.mask.sum()),
        "sfcm_iterations": result.sfcm_iterations,
        "levelset_iterations": result.levelset_iterations,
    }
    if args.gt:
        stem = Path(args.image).stem
        records = [r for r in parse_info(Path(args.info).read_text()) if r.id == stem]
        if not records:
            raise ValueError(f"no annotation for image id {stem!r}")
        truth = np.zeros(image.shape, dtype=bool)
        for record in records:
            if record.center is not None:
                truth |= ground_truth_mask(record, image.shape)
        summary["dice"] = dice(result.mask, truth)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    config = load_pipeline_config(args)
    network = load_checkpoint(args.model)
    items = load_dataset(args.data, args.info)
    labels = [item.label for item in items]
    rng = np.random.default_rng(config.train_config().seed)
    _, test_idx = stratified_split(labels, 0.2, rng)
    test_items = [(items[i].image, items[i].label) for i in test_idx]
    scored = score_dataset(network, test_items)
    predictions = [(p >= 0.5, truth) for p, truth in scored]
    report = compute_metrics(confusion(predictions))
    report = dataclasses.replace(report, auc=roc_auc(scored))
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {getattr(args, 'command', 'mammocad')}: {exc}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())
