"""Command-line surface.

Subcommands: ``stats`` (label-raster distribution/entropy reports),
``gradcheck`` (finite-difference verification suite), ``train`` /
``eval`` (toy segmentation runs), ``attn`` (attention-map dumps), and
``synth`` (materialize a banded dataset).  Every run resolves one
key=value configuration, logs it, and derives all randomness from its
single seed.  Exit codes: 0 success, 1 validation or data error, 2
numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import attention as attn_mod
from . import config as cfgmod
from . import stats as statsmod
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Sample, nominal_bands, synth_banded
from .errors import NumericalError, RowGateError
from .gradcheck import gradcheck
from .metrics import evaluate
from .net import ToySegModel
from .rasters import (
    load_label_dir,
    read_label_map,
    read_ppm,
    unit_to_u8,
    write_attention_csv,
    write_attention_pgm,
    write_csv_rows,
    write_heatmap_pgm,
    write_matrix_csv,
    write_pgm,
    write_ppm,
)
from .tensor import mul, parameter, sub, tensor
from .train import train

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _resolve_and_log(args, out_dir: Path | None) -> dict[str, str]:
    values = cfgmod.resolve(args.config, args.set)
    text = cfgmod.render(values)
    print(text, end="")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "resolved.cfg").write_text(text)
    return values


def _parse_bands(spec: str) -> list[tuple[float, float]]:
    spec = spec.strip()
    if "," not in spec:
        return statsmod.equal_bands(int(spec))
    fractions = [float(v) for v in spec.split(",")]
    edges = np.concatenate([[0.0], np.cumsum(fractions)])
    return [(float(edges[i]), float(edges[i + 1])) for i in range(len(fractions))]


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------


def cmd_stats(args) -> int:
    label_maps = load_label_dir(args.label_dir)
    bands = _parse_bands(args.bands)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    report = statsmod.region_report(label_maps, args.classes, bands)
    text = statsmod.render_report_text(report)
    print(text)
    (out / "report.txt").write_text(text + "\n")
    write_csv_rows(out / "report.csv", statsmod.report_to_csv_rows(report))

    axis = "height" if args.axis == "h" else "width"
    per_bin, per_class = statsmod.axis_distribution(label_maps, args.classes, axis=axis, bins=args.bins)
    write_matrix_csv(out / f"{axis}_distribution.csv", per_bin)
    write_heatmap_pgm(out / f"{axis}_distribution.pgm", per_bin)
    write_matrix_csv(out / f"{axis}_distribution_per_class.csv", per_class)
    write_heatmap_pgm(out / f"{axis}_distribution_per_class.pgm", per_class)

    h_bin, _ = statsmod.axis_distribution(label_maps, args.classes, axis="height", bins=args.bins)
    w_bin, _ = statsmod.axis_distribution(label_maps, args.classes, axis="width", bins=args.bins)
    h_spread, w_spread = statsmod.distribution_divergence(h_bin, w_bin)
    summary = (
        f"unconditional_entropy={report.unconditional_entropy:.6g}\n"
        f"average_conditional_entropy={report.average_conditional_entropy:.6g}\n"
        f"height_spread={h_spread:.6g}\nwidth_spread={w_spread:.6g}\n"
    )
    print(summary, end="")
    (out / "summary.txt").write_text(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def _gradcheck_suite(values: dict[str, str], eps: float) -> tuple[str, bool]:
    from .tensor import relu_input_margin

    tol = cfgmod.get_float(values, "gradcheck.tolerance")
    model_tol = cfgmod.get_float(values, "gradcheck.model_tolerance")
    seed = cfgmod.get_int(values, "seed")
    rngs = _spawn(seed, 4)
    lines: list[str] = []
    ok = True

    def record(name: str, report) -> None:
        nonlocal ok
        ok = ok and report.passed
        lines.append(
            f"[{'PASS' if report.passed else 'FAIL'}] {name}: max relative error "
            f"{report.max_rel_error:.3e} (tolerance {report.tolerance:g})"
        )

    # gate module, one configuration per positional mode
    for i, pe_mode in enumerate(("none", "sinusoidal", "learnable")):
        cfg = attn_mod.RowGateConfig(
            in_channels=8, out_channels=6, coarse_height=4, reduction=2,
            pe_mode=pe_mode, jitter_max=0, dropout_p=0.0,
        )
        rng = np.random.default_rng(seed + i)
        params = attn_mod.init_params(cfg, rng)
        x_l = parameter(rng.normal(size=(8, 8, 6)))
        x_h = parameter(rng.normal(size=(6, 8, 6)))
        target = rng.normal(size=(6, 8, 6))

        def f():
            out, _ = attn_mod.forward(x_l, x_h, params, cfg, training=True)
            d = sub(out, tensor(target))
            return mul(d, d).mean()

        report = gradcheck(f, [("x_l", x_l), ("x_h", x_h)] + params.named(), eps=eps, tol=tol)
        record(f"gate-module pe={pe_mode}", report)

    # full toy model with every gate site attached
    model_cfg = cfgmod.build_model_config(
        {
            **values,
            "model.widths": "4,6,6",
            "model.num_classes": "3",
            "model.in_channels": "2",
            "model.gate_layers": "1,2,3,4,5",
            "gate.coarse_height": "2",
            "gate.reduction": "2",
            "gate.jitter": "0",
            "gate.dropout": "0.0",
        }
    )
    model = ToySegModel.build(model_cfg)
    rng = rngs[3]
    image = rng.normal(size=(2, 16, 16))
    labels = rng.integers(0, 3, size=(16, 16))

    from .tensor import softmax_cross_entropy

    def f_model():
        return softmax_cross_entropy(model.forward(image, training=True), labels)

    report = gradcheck(f_model, model.named_parameters(), eps=eps, tol=model_tol)
    record("toy-model all-gates", report)
    lines.append(f"relu margin (toy model): {relu_input_margin(f_model()):.3e}")
    return "\n".join(lines), ok


def cmd_gradcheck(args) -> int:
    values = _resolve_and_log(args, Path(args.out) if args.out else None)
    eps = args.epsilon if args.epsilon is not None else cfgmod.get_float(values, "gradcheck.epsilon")
    text, ok = _gradcheck_suite(values, eps)
    print(text)
    if args.out:
        (Path(args.out) / "gradcheck.txt").write_text(text + "\n")
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def _dataset_from_config(values: dict[str, str], split: str) -> list[Sample]:
    if values["data.source"] == "dir":
        root = Path(values["data.dir"]) / split
        images = sorted((root / "images").glob("*.ppm"))
        if not images:
            raise RowGateError(f"{root}/images: no .ppm images found")
        samples = []
        for img_path in images:
            label_path = root / "labels" / (img_path.stem + ".pgm")
            image = read_ppm(img_path).astype(np.float64) / 255.0
            label = read_label_map(label_path).ids.astype(np.uint8)
            samples.append(Sample(image=image, label=label))
        return samples
    if values["data.source"] != "synth":
        raise RowGateError(f"data.source must be synth or dir, got {values['data.source']!r}")
    data_seed = cfgmod.get_int(values, "data.seed")
    n = cfgmod.get_int(values, "data.n_train" if split == "train" else "data.n_val")
    # disjoint seed streams per split
    seed = data_seed * 2 + (0 if split == "train" else 1)
    return synth_banded(
        seed=seed,
        n_images=n,
        height=cfgmod.get_int(values, "data.height"),
        width=cfgmod.get_int(values, "data.width"),
        num_classes=cfgmod.get_int(values, "data.classes"),
        noise=cfgmod.get_float(values, "data.noise"),
    )


def cmd_synth(args) -> int:
    values = _resolve_and_log(args, Path(args.out))
    out = Path(args.out)
    for split in ("train", "val"):
        samples = _dataset_from_config({**values, "data.source": "synth"}, split)
        img_dir = out / split / "images"
        lab_dir = out / split / "labels"
        img_dir.mkdir(parents=True, exist_ok=True)
        lab_dir.mkdir(parents=True, exist_ok=True)
        for i, sample in enumerate(samples):
            u8 = np.clip(np.rint(sample.image * 255.0), 0, 255).astype(np.uint8)
            write_ppm(img_dir / f"{i:05d}.ppm", u8)
            write_pgm(lab_dir / f"{i:05d}.pgm", sample.label)
        print(f"wrote {len(samples)} {split} samples under {out / split}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval / attn
# ---------------------------------------------------------------------------


def _eval_report_text(report) -> str:
    per_region = " ".join(f"{v:.6f}" for v in report.per_region_miou)
    per_class = " ".join(
        "nan" if np.isnan(v) else f"{v:.6f}" for v in report.per_class_iou
    )
    return (
        f"miou={report.miou:.6f}\n"
        f"pixel_accuracy={report.pixel_accuracy:.6f}\n"
        f"per_region_miou={per_region}\n"
        f"per_class_iou={per_class}\n"
    )


def cmd_train(args) -> int:
    out = Path(args.out)
    values = _resolve_and_log(args, out)
    if args.data:
        values = {**values, "data.source": "dir", "data.dir": args.data}
    model_cfg = cfgmod.build_model_config(values)
    train_cfg = cfgmod.build_train_config(values)
    model = ToySegModel.build(model_cfg)
    train_set = _dataset_from_config(values, "train")
    val_set = _dataset_from_config(values, "val")
    (train_rng,) = _spawn(cfgmod.get_int(values, "seed"), 1)

    log = train(model, train_set, train_cfg, train_rng)
    log.to_csv(out / "train_log.csv")
    save_checkpoint(out / "model.ckpt", model.state_arrays(), cfgmod.render(values))
    report = evaluate(model, val_set)
    text = _eval_report_text(report)
    print(text, end="")
    (out / "eval.txt").write_text(text)
    return EXIT_OK


def _load_model(values: dict[str, str], checkpoint_path) -> ToySegModel:
    model = ToySegModel.build(cfgmod.build_model_config(values))
    arrays = load_checkpoint(checkpoint_path, cfgmod.render(values))
    model.load_state(arrays)
    return model


def cmd_eval(args) -> int:
    out = Path(args.out)
    values = _resolve_and_log(args, out)
    if args.data:
        values = {**values, "data.source": "dir", "data.dir": args.data}
    model = _load_model(values, args.checkpoint)
    val_set = _dataset_from_config(values, "val")
    report = evaluate(model, val_set)
    text = _eval_report_text(report)
    print(text, end="")
    (out / "eval.txt").write_text(text)
    return EXIT_OK


def cmd_attn(args) -> int:
    out = Path(args.out)
    values = _resolve_and_log(args, out)
    model = _load_model(values, args.checkpoint)
    sites = sorted(model.gates) if args.layer == "all" else [int(args.layer.lstrip("L"))]
    for site in sites:
        if site not in model.gates:
            raise RowGateError(f"layer L{site} has no gate in this model")
    image = read_ppm(args.image).astype(np.float64) / 255.0
    _, maps = model.forward(image, training=False, collect_attention=True)
    for site in sites:
        amap = maps[site]
        write_attention_csv(out / f"attention_L{site}.csv", amap)
        write_attention_pgm(out / f"attention_L{site}.pgm", amap)
        print(f"L{site}: attention {amap.shape[0]} channels x {amap.shape[1]} rows -> "
              f"{out / f'attention_L{site}.csv'}")
    if 5 in sites and args.labels:
        label_maps = load_label_dir(args.labels)
        per_bin, _ = statsmod.axis_distribution(
            label_maps, model.config.num_classes, axis="height", bins=maps[5].shape[1]
        )
        write_matrix_csv(out / "height_class_distribution.csv", per_bin)
        write_heatmap_pgm(out / "height_class_distribution.pgm", per_bin)
        print(f"height-wise class distribution -> {out / 'height_class_distribution.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rowgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p, with_out=True):
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if with_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stats", help="label-raster class distribution and entropy report")
    p.add_argument("label_dir", help="directory of .pgm/.png label rasters")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--bands", default="3", help="band count or comma-separated fractions")
    p.add_argument("--axis", choices=["h", "w"], default="h")
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification suite")
    add_config_flags(p, with_out=False)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("train", help="train the toy segmentation model")
    add_config_flags(p)
    p.add_argument("--data", default=None, help="dataset directory (PPM/PGM splits)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    add_config_flags(p)
    p.add_argument("--data", default=None, help="dataset directory (PPM/PGM splits)")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("attn", help="dump attention maps for an image")
    add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True, help="input image (.ppm)")
    p.add_argument("--layer", default="all", help="L1..L5 or 'all'")
    p.add_argument("--labels", default=None,
                   help="label dir for the L5 class-distribution side-by-side")
    p.set_defaults(fn=cmd_attn)

    p = sub.add_parser("synth", help="materialize a synthetic banded dataset")
    add_config_flags(p)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RowGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
