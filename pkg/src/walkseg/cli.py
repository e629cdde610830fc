"""Command-line front end.

Subcommands: generate, train, infer, eval, ablate, bench. Exit codes:
0 success, 1 usage error, 2 data/format error, 3 numerical failure.
All binary outputs (PPM/PGM rasters, probability dumps, checkpoints) are
little-endian.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import metrics, pnm, synth
from .errors import (ConvergenceError, DataFormatError, DivergenceError,
                     InvalidInputError)
from .graph import dump_edges
from .pipeline import (diffuse, model_transition, oracle_scene,
                       oracle_transition, predict)
from .solver import SolverConfig, bench_step_vs_solve
from .training import load_checkpoint, save_checkpoint, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_cfg(args) -> cfgmod.Config:
    cfg = cfgmod.Config()
    if getattr(args, "config", None):
        cfgmod.load_config(args.config, cfg)
    if getattr(args, "preset", None):
        cfgmod.apply_preset(cfg, args.preset)
    cfgmod.apply_overrides(cfg, getattr(args, "set", None) or [])
    return cfg


def _read_manifest(path):
    """Manifest lines are "image.ppm labels.pgm", relative to the manifest."""
    base = Path(path).parent
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 'image labels'")
            pairs.append((base / parts[0], base / parts[1]))
    for img, lab in pairs:
        for member in (img, lab):
            if not member.exists():
                raise DataFormatError(f"manifest entry missing on disk: {member}")
    return pairs


def _load_dataset(manifest_path):
    return [(pnm.read_ppm(img), pnm.read_pgm(lab))
            for img, lab in _read_manifest(manifest_path)]


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out_dir)
    counts = {"train": cfg.generate.train_count, "test": cfg.generate.test_count}
    start = 0
    for split, count in counts.items():
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        scenes = synth.generate(cfg.scene, count, start_index=start)
        start += count
        lines = []
        for i, (image, labels) in enumerate(scenes):
            img_name = f"img{i:03d}.ppm"
            lab_name = f"lab{i:03d}.pgm"
            pnm.write_ppm(split_dir / img_name, image)
            pnm.write_pgm(split_dir / lab_name, labels)
            lines.append(f"{split}/{img_name} {split}/{lab_name}")
        manifest = out / f"{split}.txt"
        manifest.write_text("".join(line + "\n" for line in lines),
                            encoding="utf-8")
        print(f"wrote {count} {split} pairs under {split_dir} "
              f"(manifest {manifest})")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    dataset = _load_dataset(args.manifest)
    checkpoint, history = train(dataset, cfg.train, cfg.bank,
                                num_classes=cfg.scene.num_classes)
    save_checkpoint(args.out_checkpoint, checkpoint)
    loss_csv = args.loss_csv or str(Path(args.out_checkpoint).with_suffix(".loss.csv"))
    with open(loss_csv, "w", encoding="utf-8") as fh:
        for line in cfgmod.serialize_config(cfg).splitlines():
            fh.write(f"# {line}\n")
        fh.write("iter,seg_loss,aff_loss\n")
        for iteration, seg, aff in history:
            fh.write(f"{iteration},{seg!r},{aff!r}\n")
    print(f"trained {cfg.train.iterations} iterations; "
          f"checkpoint {args.out_checkpoint}, loss log {loss_csv}")
    return 0


def _parse_steps(text: str):
    if text == "converge":
        return text
    try:
        steps = int(text)
    except ValueError as exc:
        raise UsageError(f"--steps takes an integer or 'converge': {exc}")
    if steps < 0:
        raise UsageError("--steps must be >= 0")
    return steps


def cmd_infer(args) -> int:
    cfg = _load_cfg(args)
    ckpt = load_checkpoint(args.checkpoint)
    image = pnm.read_ppm(args.image)
    solver_cfg = SolverConfig(
        alpha=args.alpha if args.alpha is not None else cfg.solver.alpha,
        tolerance=cfg.solver.tolerance,
        max_iterations=cfg.solver.max_iterations,
        mode=args.mode or cfg.solver.mode)
    radius = args.radius if args.radius is not None else cfg.infer.radius
    steps = _parse_steps(args.steps)
    labels, scores = predict(ckpt, image, steps=steps, radius=radius,
                             solver_cfg=solver_cfg, metric=cfg.infer.metric)
    pnm.write_pgm(args.out_labels, labels)
    if args.out_probs:
        shifted = scores - scores.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        with open(args.out_probs, "wb") as fh:
            fh.write(probs.astype("<f8").tobytes())
        sidecar = Path(args.out_probs).with_suffix(
            Path(args.out_probs).suffix + ".txt")
        sidecar.write_text(
            f"{image.shape[0]} {image.shape[1]} {ckpt.num_classes}\n",
            encoding="utf-8")
    if args.dump_affinity:
        a = model_transition(ckpt, image, radius, cfg.infer.metric)
        from .graph import affinity_forward, channel_distances
        from .pipeline import prepare_stack
        stack = prepare_stack(image, ckpt.bank)
        w = affinity_forward(channel_distances(stack, a.pattern), ckpt.theta)
        with open(args.dump_affinity + ".W.txt", "w", encoding="utf-8") as fh:
            dump_edges(a.pattern, w, fh)
        with open(args.dump_affinity + ".A.txt", "w", encoding="utf-8") as fh:
            dump_edges(a.pattern, a.values, fh)
    print(f"wrote {args.out_labels}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    gt_dir, pred_dir = Path(args.gt_dir), Path(args.pred_dir)
    gt_files = sorted(gt_dir.glob("*.pgm"))
    if not gt_files:
        raise DataFormatError(f"no .pgm label maps under {gt_dir}")
    pairs = []
    for gt_path in gt_files:
        pred_path = pred_dir / gt_path.name
        if not pred_path.exists():
            raise DataFormatError(f"missing prediction for {gt_path.name}: "
                                  f"{pred_path}")
        pairs.append((pred_path, gt_path))

    num_classes = args.classes
    maps = [(pnm.read_pgm(p), pnm.read_pgm(g)) for p, g in pairs]
    if num_classes is None:
        num_classes = 1 + max(max(int(p.max()), int(g.max())) for p, g in maps)

    widths = range(1, cfg.eval.trimap_max_width + 1)
    rows = []
    band_hits = {w: [0, 0] for w in widths}
    pooled = {}
    for (pred_path, _), (pred, gt) in zip(pairs, maps):
        strength = metrics.extract_boundary_strength(
            metrics.onehot_probabilities(pred, num_classes), pred.shape)
        mf, ap, curve = metrics.boundary_pr(
            strength, metrics.label_boundary_mask(gt),
            tolerance=cfg.eval.boundary_tolerance,
            thresholds=cfg.eval.thresholds)
        rows.append((pred_path.name, metrics.mean_iou(pred, gt, num_classes),
                     metrics.overall_iou(pred, gt), mf, ap))
        for tau, precision, recall in curve:
            agg = pooled.setdefault(tau, [0.0, 0.0, 0])
            agg[0] += precision
            agg[1] += recall
            agg[2] += 1
        boundary = metrics.label_boundary_mask(gt)
        if boundary.any():
            from scipy.ndimage import distance_transform_edt
            dist = distance_transform_edt(~boundary)
            wrong = pred != gt
            for w in widths:
                band = dist < w
                band_hits[w][0] += int(wrong[band].sum())
                band_hits[w][1] += int(band.sum())

    with open(args.out_csv, "w", encoding="utf-8") as fh:
        fh.write("image,mean_iou,overall_iou,mf,ap\n")
        for name, miou, oiou, mf, ap in rows:
            fh.write(f"{name},{miou:.6f},{oiou:.6f},{mf:.6f},{ap:.6f}\n")
    if args.trimap_csv:
        with open(args.trimap_csv, "w", encoding="utf-8") as fh:
            fh.write("width,error\n")
            for w in widths:
                wrong, total = band_hits[w]
                rate = wrong / total if total else 0.0
                fh.write(f"{w},{rate:.6f}\n")
    if args.pr_csv:
        with open(args.pr_csv, "w", encoding="utf-8") as fh:
            fh.write("threshold,precision,recall\n")
            for tau in sorted(pooled, reverse=True):
                psum, rsum, count = pooled[tau]
                fh.write(f"{tau:.6f},{psum / count:.6f},{rsum / count:.6f}\n")
    mean_of_means = np.mean([row[1] for row in rows])
    print(f"evaluated {len(rows)} maps; mean IOU {mean_of_means:.4f} "
          f"-> {args.out_csv}")
    return 0


def _oracle_iou(dataset_labels, cfg, steps, radius):
    scores = []
    solver_cfg = SolverConfig(alpha=cfg.solver.alpha,
                              tolerance=cfg.solver.tolerance,
                              max_iterations=cfg.solver.max_iterations,
                              mode=cfg.solver.mode)
    for labels in dataset_labels:
        damaged, _ = oracle_scene(labels, cfg.corrupt,
                                  num_classes=cfg.scene.num_classes)
        a = oracle_transition(labels, radius, cfg.infer.metric)
        y = diffuse(a, damaged, steps, solver_cfg)
        pred = np.argmax(y, axis=1).reshape(labels.shape)
        scores.append(metrics.mean_iou(pred, labels, cfg.scene.num_classes))
    return float(np.mean(scores))


def cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    labels_list = [pnm.read_pgm(lab) for _, lab in _read_manifest(args.manifest)]
    lines = []
    if args.sweep == "steps":
        tokens = (args.steps or "0,1,2,4,8,16,converge").split(",")
        lines.append("steps,mean_iou")
        for token in tokens:
            steps = token if token == "converge" else int(token)
            iou = _oracle_iou(labels_list, cfg, steps,
                              args.radius or cfg.infer.radius)
            lines.append(f"{token},{iou:.6f}")
    else:
        radii = [int(r) for r in (args.radii or "3,5,10,20").split(",")]
        lines.append("radius,mean_iou")
        for radius in radii:
            iou = _oracle_iou(labels_list, cfg, "converge", radius)
            lines.append(f"{radius},{iou:.6f}")
    text = "".join(line + "\n" for line in lines)
    if args.out_csv:
        Path(args.out_csv).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _parse_sizes(text: str):
    sizes = []
    for token in text.split(","):
        token = token.strip().lower()
        if "x" not in token:
            raise UsageError(f"size {token!r} is not HxW")
        h, w = token.split("x")
        sizes.append((int(h), int(w)))
    return sizes


def cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    sizes = _parse_sizes(args.sizes)
    report = bench_step_vs_solve(sizes, args.radius or cfg.infer.radius,
                                 cfg.solver, repeats=args.repeats,
                                 workers=args.workers)
    text = report.to_csv()
    if args.out_csv:
        Path(args.out_csv).write_text(text, encoding="utf-8")
    print(text, end="")
    for row in report.rows:
        if np.isfinite(row.dense_ms) and row.step_ms > 0:
            print(f"# {row.n_pixels} px: dense/step ratio "
                  f"{row.dense_ms / row.step_ms:.1f}x")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="walkseg",
                     description="random-walk label diffusion pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (section.key = value)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config entry")
        p.add_argument("--preset", choices=sorted(cfgmod.PRESETS),
                       help="apply a named config preset")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    common(p)
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train from a dataset manifest")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--loss-csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="label one image with a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-probs")
    p.add_argument("--steps", default="converge",
                   help="walk steps, or 'converge'")
    p.add_argument("--radius", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", choices=("iterate", "neumann", "dense_oracle"))
    p.add_argument("--dump-affinity", metavar="PREFIX",
                   help="write W and A as 'i j value' text triplets")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    common(p)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--trimap-csv")
    p.add_argument("--pr-csv")
    p.add_argument("--classes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep steps or radius on oracle affinities")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--sweep", choices=("steps", "radius"), required=True)
    p.add_argument("--steps", help="comma list for --sweep steps")
    p.add_argument("--radii", help="comma list for --sweep radius")
    p.add_argument("--radius", type=int, help="fixed radius for --sweep steps")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="time sparse steps vs solves")
    common(p)
    p.add_argument("--sizes", default="32x32,64x64")
    p.add_argument("--radius", type=int)
    p.add_argument("--repeats", type=int, default=9)
    p.add_argument("--workers", type=int, default=1,
                   help="class-column threads for the step timing")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, DivergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
