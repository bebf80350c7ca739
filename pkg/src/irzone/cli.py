"""Command-line surface. Exit codes: 0 success, 1 usage error, 2 data error."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io_formats as io
from .models.cascade import CascadeConfig
from .models.rf import RFConfig
from .models.sdae import SDAEConfig
from .pipeline import (
    E2EConfig,
    auto_zpr,
    calibrate_thresholds,
    infer_sequence,
    make_dataset,
    preprocess_sequence,
    run_e2e,
    train_from_manifest,
    zpr_from_reference,
)
from .postprocess import DecisionThresholds
from .zones import LEAF_LABELS, Mode, ZoneMask


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_mode_mix(text: str) -> dict[str, int]:
    mix = {}
    for part in text.split(","):
        name, _, count = part.partition("=")
        mix[Mode.parse(name).value] = int(count)
    return mix


def _build_parser() -> _Parser:
    p = _Parser(prog="irzone", description="Zone identification for active IR-thermal sequences")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labeled phantom dataset")
    g.add_argument("--n", type=int, default=None, help="number of sequences (single mode)")
    g.add_argument("--mode", default="On")
    g.add_argument("--mode-mix", default=None, help="e.g. On=28,In=42,Off=1")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--width", type=int, default=320)
    g.add_argument("--height", type=int, default=240)
    g.add_argument("--frames", type=int, default=60)

    pp = sub.add_parser("preprocess", help="register, clean, and fit one sequence")
    pp.add_argument("--in", dest="input", required=True)
    pp.add_argument("--report", default=None, help="write the stage report here")

    t = sub.add_parser("train", help="train a cascade on a dataset manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--backend", choices=("rf", "sdae"), default="rf")
    t.add_argument("--mode", default="On")
    t.add_argument("--config", default=None, help="key=value overrides file")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--model-out", required=True)

    i = sub.add_parser("infer", help="predict a zone mask for one sequence")
    i.add_argument("--model", required=True)
    i.add_argument("--in", dest="input", required=True)
    i.add_argument("--zpr", default="auto", help="a priori mask file or 'auto'")
    i.add_argument("--alpha", type=float, default=0.05)
    i.add_argument("--beta", type=float, default=0.05)
    i.add_argument("--calib", default=None, help="labeled manifest for threshold fitting")
    i.add_argument("--out-mask", required=True)
    i.add_argument("--out-probs", default=None)

    e = sub.add_parser("eval", help="compare predicted and reference masks")
    e.add_argument("--pred", required=True)
    e.add_argument("--ref", required=True)
    e.add_argument("--format", choices=("table", "kv"), default="table")

    r = sub.add_parser("render", help="overlay mask boundaries on a mean frame")
    r.add_argument("--seq", required=True)
    r.add_argument("--ref", default=None)
    r.add_argument("--alg", default=None)
    r.add_argument("--out", required=True)

    z = sub.add_parser("e2e", help="full pipeline on seeded phantoms, with report")
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--out", required=True)
    z.add_argument("--n-train", type=int, default=8)
    z.add_argument("--n-test", type=int, default=4)
    z.add_argument("--backends", default="rf,sdae")
    return p


def _read_config_overrides(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def _cmd_gen(args) -> int:
    from .phantom import default_config_sampler

    if args.mode_mix:
        mix = _parse_mode_mix(args.mode_mix)
        entries = []
        # a shared sampler would fix the mode; sample per mode instead
        rest = dict(mix)
        out = Path(args.out)
        all_entries = []
        seed = args.seed
        from .pipeline import write_manifest

        idx_offset = 0
        for mode_name, count in rest.items():
            if count == 0:
                continue
            mode = Mode.parse(mode_name)
            sampler = default_config_sampler(
                mode, width=args.width, height=args.height, n_frames=args.frames
            )
            sub_entries = make_dataset(
                out / mode_name.lower(), mode_mix={mode_name: count},
                config_sampler=sampler, seed=seed + idx_offset,
            )
            all_entries.extend(sub_entries)
            idx_offset += count
        write_manifest(out / "manifest.txt", all_entries)
        print(f"wrote {len(all_entries)} sequences to {out}")
        return 0
    n = args.n if args.n is not None else 1
    mode = Mode.parse(args.mode)
    sampler = default_config_sampler(
        mode, width=args.width, height=args.height, n_frames=args.frames
    )
    entries = make_dataset(args.out, mode_mix={mode.value: n},
                           config_sampler=sampler, seed=args.seed)
    print(f"wrote {len(entries)} sequences to {args.out}")
    return 0


def _cmd_preprocess(args) -> int:
    seq = io.read_sequence(args.input)
    sf = preprocess_sequence(seq)
    lines = sf.report.lines()
    text = "\n".join(lines) + "\n"
    if args.report:
        io._atomic_write(args.report, text.encode())
    else:
        sys.stdout.write(text)
    return 0


def _cmd_train(args) -> int:
    mode = Mode.parse(args.mode)
    overrides = _read_config_overrides(args.config) if args.config else {}
    rf = RFConfig(
        n_trees=int(overrides.get("rf.n_trees", 100)),
        max_depth=int(overrides.get("rf.max_depth", 12)),
        min_leaf=int(overrides.get("rf.min_leaf", 5)),
    )
    sdae = SDAEConfig(
        corruption=float(overrides.get("sdae.corruption", 0.2)),
        lr=float(overrides.get("sdae.lr", 0.05)),
        finetune_epochs=int(overrides.get("sdae.finetune_epochs", 200)),
    )
    config = CascadeConfig(
        backend=args.backend, rf=rf, sdae=sdae,
        max_train_pixels=int(overrides.get("max_train_pixels", 20000)),
    )
    model = train_from_manifest(
        args.manifest, mode, config, seed=args.seed,
        max_pixels_per_seq=int(overrides.get("pixels_per_seq", 0)),
    )
    io.write_model(args.model_out, model,
                   header_extra={"mode": mode.value, "seed": args.seed})
    print(f"wrote model to {args.model_out}")
    return 0


def _cmd_infer(args) -> int:
    model = io.load_cascade(args.model)
    seq = io.read_sequence(args.input)
    h, w = seq.frame_shape
    if args.zpr == "auto":
        z_pr = auto_zpr((h, w), seq.pixel_size, model.mode)
    else:
        z_pr, _ = io.read_mask(args.zpr)
    if args.calib:
        thresholds = calibrate_thresholds(model, args.calib, args.alpha, args.beta)
    else:
        # no calibration data: neutral threshold, no achieved-rate estimates
        thresholds = DecisionThresholds(alpha=args.alpha, beta=args.beta,
                                        theta_ha=0.5, achieved_alpha=0.0,
                                        achieved_beta=0.0)
    res = infer_sequence(model, seq, z_pr, thresholds)
    io.write_mask(args.out_mask, res.z_ps, model.mode)
    if args.out_probs:
        from .phantom import ThermalSequence

        # leaf probability planes stored in the sequence container,
        # one plane per leaf label in LEAF_LABELS order
        planes = np.stack([res.prob_maps[l] for l in LEAF_LABELS]).astype(np.float32)
        probs_seq = ThermalSequence(planes, np.arange(len(LEAF_LABELS), dtype=float),
                                    seq.pixel_size)
        io.write_sequence(args.out_probs, probs_seq)
    print(f"wrote mask to {args.out_mask}")
    return 0


def _cmd_eval(args) -> int:
    from .evaluation import report, report_kv

    pred, _ = io.read_mask(args.pred)
    ref, _ = io.read_mask(args.ref)
    results = {"MODEL": [(Path(args.pred).stem, pred, ref)]}
    text = report(results) if args.format == "table" else report_kv(results)
    sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    seq = io.read_sequence(args.seq)
    background = seq.data.mean(axis=0)
    ref = io.read_mask(args.ref)[0] if args.ref else None
    alg = io.read_mask(args.alg)[0] if args.alg else None
    img = io.render_overlay(background, ref, alg)
    io.write_ppm(args.out, img)
    print(f"wrote overlay to {args.out}")
    return 0


def _cmd_e2e(args) -> int:
    config = E2EConfig(
        n_train=args.n_train,
        n_test=args.n_test,
        backends=tuple(b.strip() for b in args.backends.split(",") if b.strip()),
    )
    out = run_e2e(args.out, seed=args.seed, config=config)
    sys.stdout.write(out["report"])
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "preprocess": _cmd_preprocess,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval": _cmd_eval,
    "render": _cmd_render,
    "e2e": _cmd_e2e,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (io.FormatError, OSError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
