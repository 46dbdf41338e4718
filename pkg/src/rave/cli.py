"""Command-line entry points: rave edit / invert / eval / dataset.

The CLI runs entirely on the built-in toy adapters (identity or
block-average codec, toy denoisers, Sobel edge conditions, toy embedder,
synthetic flows). Real diffusion/CLIP/flow backends are library-level
adapters; plug them in through the Python API.
"""

from __future__ import annotations

import argparse
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import conditioning, dataset, metrics, sampler, video_io
from .diffusion import (
    ConstantNoisePredictor,
    GridMeanCouplingPredictor,
    PointwisePredictor,
    ZeroNoisePredictor,
    make_schedule,
)

PREDICTORS = {
    "zero": ZeroNoisePredictor,
    "constant": ConstantNoisePredictor,
    "separable": lambda: PointwisePredictor(embedding_gain=0.05),
    "grid-mean": GridMeanCouplingPredictor,
}


def _parse_pair(text: str, name: str, sep: str = "x") -> tuple[int, int]:
    try:
        a, b = text.lower().split(sep)
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must look like '3{sep}3', got {text!r}")


def _grid(text: str) -> tuple[int, int]:
    return _parse_pair(text, "grid")


def _resolution(text: str) -> tuple[int, int]:
    return _parse_pair(text, "resolution")


def _make_adapters(args: argparse.Namespace) -> sampler.Adapters:
    if args.condition != "toy-edge":
        sys.exit(
            f"condition {args.condition!r} requires an external extractor adapter; "
            "the built-in CLI supports 'toy-edge' (use the Python API to plug adapters in)"
        )
    codec = (
        video_io.IdentityCodec()
        if args.codec == "identity"
        else video_io.BlockAverageCodec(scale_factor=args.codec_scale)
    )
    return sampler.Adapters(
        codec=codec,
        predictor=PREDICTORS[args.predictor](),
        extractor=conditioning.SobelEdgeExtractor(),
        text_embedder=metrics.ToyEmbedder(),
    )


def _edit_config(args: argparse.Namespace) -> sampler.EditConfig:
    rows, cols = args.grid if args.grid else (None, None)
    return sampler.EditConfig(
        prompt=args.prompt,
        seed=args.seed,
        rows=rows,
        cols=cols,
        steps=args.steps,
        guidance=args.guidance,
        shuffle=not args.no_shuffle,
        shuffle_inversion=args.shuffle_inversion,
        inversion_prompt=args.inversion_prompt,
        condition=args.condition.replace("-", "_"),
        train_steps=args.train_steps,
        beta_start=args.beta_start,
        beta_end=args.beta_end,
    )


def _add_edit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="directory of input frames")
    p.add_argument("--prompt", required=True, help="target text prompt")
    p.add_argument("--inversion-prompt", default="", help="prompt used during inversion")
    p.add_argument("--grid", type=_grid, default=None, metavar="NxM",
                   help="grid layout (default: 2x2 for 8 frames, 3x3 otherwise)")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--guidance", type=float, default=7.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-shuffle", action="store_true", help="disable per-step shuffling")
    p.add_argument("--shuffle-inversion", action="store_true",
                   help="also shuffle grids during inversion (off by default)")
    p.add_argument("--condition", default="toy-edge",
                   choices=["depth", "lineart", "softedge", "toy-edge"])
    p.add_argument("--resolution", type=_resolution, default=None, metavar="WxH")
    p.add_argument("--train-steps", type=int, default=1000)
    p.add_argument("--beta-start", type=float, default=0.00085)
    p.add_argument("--beta-end", type=float, default=0.012)
    p.add_argument("--predictor", default="grid-mean", choices=sorted(PREDICTORS),
                   help="built-in toy denoiser to drive the run")
    p.add_argument("--codec", default="identity", choices=["identity", "block-average"])
    p.add_argument("--codec-scale", type=int, default=8, help="block-average downscale factor")


def _load_input(args: argparse.Namespace) -> video_io.Video:
    return video_io.load_frames(args.input, target_resolution=args.resolution)


def _cmd_edit(args: argparse.Namespace) -> int:
    video = _load_input(args)
    adapters = _make_adapters(args)
    config = _edit_config(args)
    conditions = conditioning.get_conditions(args.input, video, adapters.extractor)

    edited, manifest = sampler.edit_video(video, config, adapters, conditions=conditions)

    out = Path(args.output)
    video_io.save_frames(edited, out)
    manifest.artifacts = {"input": str(Path(args.input).resolve()), "output": str(out.resolve())}
    manifest.save(out / "run.json")
    print(f"edited {video.frame_count} frames -> {out} (manifest: {out / 'run.json'})")

    if args.mux:
        _mux(out, args.mux)
    return 0


def _mux(frames_dir: Path, target: str) -> None:
    # Container muxing is delegated to ffmpeg; the library itself only
    # reads and writes frame directories.
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None:
        sys.exit("--mux requires ffmpeg on PATH")
    cmd = [ffmpeg, "-y", "-framerate", "12", "-i", str(frames_dir / "frame_%04d.png"), target]
    subprocess.run(cmd, check=True)
    print(f"muxed -> {target}")


def _cmd_invert(args: argparse.Namespace) -> int:
    video = _load_input(args)
    adapters = _make_adapters(args)
    config = _edit_config(args)
    conditions = conditioning.get_conditions(args.input, video, adapters.extractor)

    sched = make_schedule(
        train_steps=config.train_steps,
        sampling_steps=config.steps,
        beta_start=config.beta_start,
        beta_end=config.beta_end,
        spacing=config.spacing,
    )
    latents = video_io.encode(video, adapters.codec)
    rng = np.random.default_rng(config.seed)
    log: list[dict] = []
    noisy = sampler.invert_video(
        latents, conditions, adapters.predictor, sched, config,
        embedding=adapters.text_embedder.embed_text(config.inversion_prompt),
        rng=rng, permutation_log=log,
    )

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "latents.npz", **{f"frame_{k:04d}": v for k, v in sorted(noisy.items())})
    meta = {
        "config": config.to_dict(),
        "adapters": adapters.ids(),
        "frame_count": video.frame_count,
        "permutations": log,
    }
    (out / "inversion.json").write_text(json.dumps(meta, indent=2))
    print(f"inverted {video.frame_count} frames -> {out / 'latents.npz'}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    source = video_io.load_frames(args.source)
    edited = video_io.load_frames(args.edited)
    flow = metrics.ConstantFlow(args.flow_dx, args.flow_dy)
    report = metrics.evaluate(source, edited, args.prompt, metrics.ToyEmbedder(), flow)
    Path(args.report).write_text(json.dumps(report.to_dict(), indent=2))
    print(f"report -> {args.report}")
    if args.table:
        # Metric values scaled by 100 for display.
        print("method      CLIP-F  WarpSSIM  CLIP-T  Q_edit")
        print(
            f"{'toy-run':<10} {report.clip_f * 100:7.2f} {report.warp_ssim * 100:9.2f} "
            f"{report.clip_t * 100:7.2f} {report.q_edit * 100:7.2f}"
        )
    return 0


def _cmd_dataset(args: argparse.Namespace) -> int:
    try:
        manifest = dataset.load_manifest(args.manifest)
    except dataset.ManifestValidationError as exc:
        print(exc, file=sys.stderr)
        return 1
    if args.dataset_command == "validate":
        print(f"{args.manifest}: OK ({len(manifest.entries)} entries)")
        return 0
    print(json.dumps(dataset.summarize(manifest).to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rave", description="grid-shuffled video editing on toy adapters")
    sub = parser.add_subparsers(dest="command", required=True)

    p_edit = sub.add_parser("edit", help="run a full edit")
    _add_edit_flags(p_edit)
    p_edit.add_argument("--output", required=True, help="directory for edited frames + run.json")
    p_edit.add_argument("--mux", default=None, metavar="FILE",
                        help="also mux the edited frames into a container via ffmpeg")
    p_edit.set_defaults(func=_cmd_edit)

    p_invert = sub.add_parser("invert", help="run DDIM inversion only")
    _add_edit_flags(p_invert)
    p_invert.add_argument("--output", required=True, help="directory for latents.npz + inversion.json")
    p_invert.set_defaults(func=_cmd_invert)

    p_eval = sub.add_parser("eval", help="compute metrics for an edited video")
    p_eval.add_argument("--source", required=True)
    p_eval.add_argument("--edited", required=True)
    p_eval.add_argument("--prompt", required=True)
    p_eval.add_argument("--report", required=True, help="output JSON path")
    p_eval.add_argument("--table", action="store_true", help="print a x100-scaled metric row")
    p_eval.add_argument("--flow-dx", type=float, default=0.0, help="synthetic flow dx (toy provider)")
    p_eval.add_argument("--flow-dy", type=float, default=0.0, help="synthetic flow dy (toy provider)")
    p_eval.set_defaults(func=_cmd_eval)

    p_data = sub.add_parser("dataset", help="validate or summarize a dataset manifest")
    data_sub = p_data.add_subparsers(dest="dataset_command", required=True)
    for name in ("validate", "summarize"):
        p = data_sub.add_parser(name)
        p.add_argument("manifest")
        p.set_defaults(func=_cmd_dataset)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
