"""Batch command-line front end.

Commands: enhance, simulate, evaluate, selftest.  Exit codes: 0 success,
1 input error, 2 verification failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import MODES, RunConfig, default_config_text, load_config
from .dsp import Waveform, resample
from .errors import SefusionError
from .metrics import evaluate_pair
from .pipeline import (
    EnhancerModels,
    disc_enhance_wave,
    gen_enhance,
    hybrid_enhance,
)
from .simulate import NoiseStep, apply_recipe
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2
EXIT_INTERNAL = 3

_WORKER_STATE: dict = {}


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "mode", None) is not None:
        config = replace(config, mode=args.mode)
    if getattr(args, "workers", None) is not None:
        config = replace(config, workers=args.workers)
    return config


def _enhance_wave(wave: Waveform, models: EnhancerModels, mode: str) -> Waveform:
    if mode == "disc":
        return disc_enhance_wave(wave, models)
    if mode == "gen":
        return gen_enhance(wave, models)
    return hybrid_enhance(wave, models)


def _worker_init(config: RunConfig) -> None:
    _WORKER_STATE["models"] = EnhancerModels.build(config.pipeline())
    _WORKER_STATE["mode"] = config.mode


def _worker_enhance(task: tuple[str, str, str]) -> tuple[str, str]:
    in_path, out_path, fmt = task
    try:
        wave = read_wav(in_path)
        out = _enhance_wave(wave, _WORKER_STATE["models"], _WORKER_STATE["mode"])
        write_wav(out_path, out, fmt=fmt)
        return in_path, ""
    except SefusionError as exc:
        return in_path, str(exc)


def cmd_enhance(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [Path(p) for p in args.inputs]
    if not inputs:
        print("enhance: no input files", file=sys.stderr)
        return EXIT_INPUT
    fmt = "pcm16" if args.pcm16 else "float32"
    tasks = [(str(p), str(out_dir / p.name), fmt) for p in inputs]
    if config.workers > 1:
        with ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_worker_init,
            initargs=(config,),
        ) as pool:
            results = list(pool.map(_worker_enhance, tasks))
    else:
        _worker_init(config)
        results = [_worker_enhance(t) for t in tasks]
    failures = [(path, err) for path, err in results if err]
    for path, err in failures:
        print(f"enhance: {path}: {err}", file=sys.stderr)
    if failures:
        return EXIT_INPUT
    if args.reference:
        code = _write_metrics(
            [(out_dir / p.name, Path(args.reference) / p.name) for p in inputs],
            out_dir / "metrics.csv",
        )
        if code != EXIT_OK:
            return code
    print(f"enhanced {len(inputs)} file(s) -> {out_dir}")
    return EXIT_OK


def _write_metrics(pairs: list[tuple[Path, Path]], out_csv: Path) -> int:
    rows = []
    missing = [str(ref) for _, ref in pairs if not ref.exists()]
    if missing:
        for path in missing:
            print(f"evaluate: missing reference {path}", file=sys.stderr)
        return EXIT_INPUT
    for est_path, ref_path in pairs:
        est = read_wav(est_path)
        ref = read_wav(ref_path)
        if ref.sample_rate_hz != est.sample_rate_hz:
            ref = resample(ref, est.sample_rate_hz)
        n = min(len(est), len(ref))
        est = Waveform(est.samples[:n], est.sample_rate_hz)
        ref = Waveform(ref.samples[:n], ref.sample_rate_hz)
        rows.append((est_path.name, evaluate_pair(est, ref)))
    _dump_metric_csv(rows, out_csv)
    return EXIT_OK


def _dump_metric_csv(rows: list[tuple[str, dict]], out_csv: Path) -> None:
    names = ["si_sdr_db", "lsd_db", "seg_snr_db"]
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file"] + names)
        for fname, metrics in rows:
            writer.writerow([fname] + [repr(metrics[k]) for k in names])
        if rows:
            means = [float(np.mean([m[k] for _, m in rows])) for k in names]
            writer.writerow(["mean"] + [repr(v) for v in means])


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    if not config.recipes:
        print("simulate: config defines no [recipe:*] sections", file=sys.stderr)
        return EXIT_INPUT
    clean_dir = Path(args.clean_dir)
    clean_files = sorted(clean_dir.glob("*.wav"))
    if not clean_files:
        print(f"simulate: no WAV files in {clean_dir}", file=sys.stderr)
        return EXIT_INPUT
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = []
    for clean_path in clean_files:
        clean = read_wav(clean_path)
        for recipe in config.recipes:
            degraded = apply_recipe(clean, recipe)
            out_name = f"{clean_path.stem}__{recipe.name}.wav"
            write_wav(out_dir / out_name, degraded)
            noise_steps = [s for s in recipe.steps if isinstance(s, NoiseStep)]
            snr = repr(noise_steps[0].snr_db) if len(noise_steps) == 1 else ""
            manifest_rows.append(
                [str(clean_path), str(out_dir / out_name), recipe.name,
                 recipe.seed, snr]
            )
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clean", "degraded", "recipe", "seed", "snr_db"])
        writer.writerows(manifest_rows)
    print(f"simulated {len(manifest_rows)} file(s); manifest at {manifest}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est_dir = Path(args.est_dir)
    ref_dir = Path(args.ref_dir)
    est_files = sorted(est_dir.glob("*.wav"))
    if not est_files:
        print(f"evaluate: no WAV files in {est_dir}", file=sys.stderr)
        return EXIT_INPUT
    pairs = [(p, ref_dir / p.name) for p in est_files]
    out_csv = Path(args.out) if args.out else est_dir / "metrics.csv"
    code = _write_metrics(pairs, out_csv)
    if code == EXIT_OK:
        print(f"wrote {out_csv}")
    return code


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    config = _resolve_config(args)
    checks = run_selftest(config, grad_only=args.grad_only)
    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sefusion",
        description="Hybrid speech enhancement: enhance, simulate, evaluate, selftest.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration file (INI)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="parallel workers")

    p_enh = sub.add_parser("enhance", help="enhance WAV files")
    common(p_enh)
    p_enh.add_argument("--mode", choices=MODES, help="disc | gen | hybrid")
    p_enh.add_argument("--out", required=True, help="output directory")
    p_enh.add_argument("--reference", help="directory of matching clean files")
    p_enh.add_argument("--pcm16", action="store_true", help="write PCM 16-bit")
    p_enh.add_argument("inputs", nargs="*", help="input WAV files")
    p_enh.set_defaults(func=cmd_enhance)

    p_sim = sub.add_parser("simulate", help="apply degradation recipes")
    common(p_sim)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("clean_dir", help="directory of clean WAV files")
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="score estimates against references")
    p_eval.add_argument("--out", help="metrics CSV path")
    p_eval.add_argument("est_dir", help="directory of estimates")
    p_eval.add_argument("ref_dir", help="directory of references")
    p_eval.set_defaults(func=cmd_evaluate)

    p_test = sub.add_parser("selftest", help="run the verification suite")
    common(p_test)
    p_test.add_argument("--grad-only", action="store_true",
                        help="run only the gradient checks")
    p_test.set_defaults(func=cmd_selftest)

    p_cfg = sub.add_parser("print-config", help="print the default configuration")
    p_cfg.set_defaults(func=lambda args: (print(default_config_text(), end=""), 0)[1])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SefusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
