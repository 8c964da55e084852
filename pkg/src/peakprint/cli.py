"""Command-line entry point: ``peakprint <subcommand> ...``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error
(bad flags, invalid parameters, missing or empty inputs).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .audio import read_wav, resample
from .deconv import PRESETS, predict_peaks, run_stack, stack_from_config
from .detector import (
    FingerprintDataset,
    LinearModel,
    TrainConfig,
    evaluate,
    export_weights,
    import_weights,
    predict,
    train,
)
from .dsp import Signal, average_frame_spectrum, half_spectrum_frequencies, log_magnitude
from .errors import (
    IncompatibleFingerprintError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    PeakprintError,
)
from .experiments import noise_latent
from .fingerprint import FingerprintConfig, extract_fingerprint
from .synth import MANIFEST_NAME, ManifestEntry, SynthSpec, generate_synth_dataset, read_manifest

log = logging.getLogger("peakprint")

THREADS_ENV = "PEAKPRINT_THREADS"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Raised for invalid command-line input; maps to exit code 2."""


@dataclass(frozen=True)
class GlobalConfig:
    log_level: str = "WARNING"
    output_format: str = "json"
    threads: int = 1


def resolve_threads(value: str | None) -> int:
    value = value or os.environ.get(THREADS_ENV, "1")
    if value == "auto":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise UsageError(f"threads must be an integer or 'auto', got {value!r}") from None
    if threads < 1:
        raise UsageError("threads must be >= 1")
    return threads


def _load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _emit(data, cfg: GlobalConfig, rows=None, header=None, stream=None) -> None:
    stream = stream or sys.stdout
    if cfg.output_format == "csv" and rows is not None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    else:
        json.dump(data, stream, indent=2)
        stream.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fingerprint_config(path, sample_rate: float | None = None) -> FingerprintConfig:
    if path:
        return FingerprintConfig.from_dict(_load_json(path))
    if sample_rate is not None:
        return FingerprintConfig.for_rate(sample_rate)
    return FingerprintConfig()


# -- predict-peaks ---------------------------------------------------------

def cmd_predict_peaks(args, cfg: GlobalConfig) -> int:
    strides = list(args.strides)
    if args.preset:
        strides = list(PRESETS[args.preset]) + strides
    if not strides:
        raise UsageError("give strides or --preset")
    prediction = predict_peaks(strides, output_rate=args.rate)
    freqs = prediction.absolute_frequencies or [None] * prediction.peak_count
    rows = [
        (n, repr(f), "" if hz is None else repr(hz))
        for n, (f, hz) in enumerate(zip(prediction.normalized_frequencies, freqs))
    ]
    _emit(prediction.to_dict(), cfg, rows, ("n", "normalized_frequency", "frequency_hz"))
    return EXIT_OK


# -- simulate --------------------------------------------------------------

def _stage_frame(frame_len: int, rate: float, out_rate: float, length: int) -> int:
    target = max(2, int(frame_len * rate / out_rate))
    frame = 1 << (target.bit_length() - 1)
    while frame > length and frame > 2:
        frame //= 2
    return frame


def cmd_simulate(args, cfg: GlobalConfig) -> int:
    stack = stack_from_config(_load_json(args.config))
    if args.input:
        source = read_wav(args.input)
        latent = resample(source, stack.input_rate)
    else:
        n = math.ceil(args.frames * args.frame_len / stack.total_stride)
        latent = noise_latent(n, stack.input_rate, args.seed, args.latent_mean, args.latent_std)
    _, stages = run_stack(latent, stack, record=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files, panels = [], []
    strides = stack.strides
    for index, stage in enumerate(stages):
        frame = _stage_frame(args.frame_len, stage.sample_rate, stack.output_rate, len(stage))
        spectrum = log_magnitude(average_frame_spectrum(stage, frame, window=args.window))
        freqs = half_spectrum_frequencies(frame, stage.sample_rate)
        path = out_dir / f"layer_{index}.csv"
        _write_csv(path, ("bin_hz", "log_magnitude", "layer_index"),
                   [(repr(float(f)), repr(float(v)), index) for f, v in zip(freqs, spectrum)])
        files.append(str(path))
        # Replicas of the previous stages' DC: multiples of the stage-0 rate.
        peaks = predict_peaks(strides[:index], stage.sample_rate).absolute_frequencies if index else [0.0]
        title = "latent" if index == 0 else f"layer {index} (stride {strides[index - 1]})"
        panels.append({"freqs": freqs, "log_magnitude": spectrum, "title": title, "peaks": peaks})
    summary = {"files": files, "output_rate": stack.output_rate, "strides": strides,
               "peak_count": predict_peaks(strides).peak_count}
    if args.plot:
        from .plotting import plot_layer_spectra

        summary["figure"] = str(plot_layer_spectra(panels, out_dir / "layer_spectra.png"))
    _emit(summary, cfg)
    return EXIT_OK


# -- fingerprint -----------------------------------------------------------

def _collect_inputs(path: Path, default_label: str) -> list[ManifestEntry]:
    if path.is_dir():
        manifest = path / MANIFEST_NAME
        if manifest.is_file():
            return read_manifest(manifest)
        return [ManifestEntry(str(p), default_label) for p in sorted(path.glob("*.wav"))]
    if path.suffix == ".jsonl":
        return read_manifest(path)
    if path.is_file():
        return [ManifestEntry(str(path), default_label)]
    raise UsageError(f"input not found: {path}")


def _fingerprint_entries(entries, config_path, threads: int, fixed_config=None):
    if not entries:
        raise UsageError("no audio inputs found")

    def work(entry):
        audio = read_wav(entry.path)
        config = fixed_config or _fingerprint_config(config_path, audio.sample_rate)
        return extract_fingerprint(audio, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, entries))
    return [work(e) for e in entries]


def cmd_fingerprint(args, cfg: GlobalConfig) -> int:
    entries = _collect_inputs(Path(args.input), args.label)
    fps = _fingerprint_entries(entries, args.config, cfg.threads)
    out = Path(args.out)
    if out.suffix == ".csv":
        if len(fps) != 1:
            raise UsageError("CSV output holds one fingerprint; use a .jsonl output for batches")
        fp = fps[0]
        _write_csv(out, ("frequency_hz", "value"),
                   [(repr(float(f)), repr(float(v))) for f, v in zip(fp.bin_frequencies, fp.values)])
        if args.plot:
            from .plotting import plot_fingerprint

            predicted = None
            if args.strides:
                prediction = predict_peaks(args.strides, fp.source_rate)
                predicted = [f for f in prediction.absolute_frequencies
                             if fp.bin_frequencies[0] <= f <= fp.bin_frequencies[-1]]
            plot_fingerprint(fp.bin_frequencies, fp.values, out.with_suffix(".png"),
                             predicted=predicted, title=Path(entries[0].path).name)
    else:
        dataset = FingerprintDataset.from_fingerprints(
            fps, [e.label for e in entries], [e.path for e in entries]
        )
        dataset.to_jsonl(out)
    _emit({"fingerprints": len(fps), "bins": len(fps[0]), "out": str(out)}, cfg)
    return EXIT_OK


# -- train / classify / eval / weights -----------------------------------

def _load_dataset(path, model: LinearModel | None, threads: int) -> FingerprintDataset:
    """Fingerprint JSONL as-is, or an audio manifest fingerprinted with the model's settings."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    lines = [line for line in path.read_text().splitlines() if line.strip()]
    if not lines:
        raise UsageError(f"{path}: no records")
    if "values" in json.loads(lines[0]):
        return FingerprintDataset.from_jsonl(path)
    entries = read_manifest(path)
    fixed = model.config if model is not None else None
    fps = _fingerprint_entries(entries, None, threads, fixed)
    return FingerprintDataset.from_fingerprints(fps, [e.label for e in entries],
                                                [e.path for e in entries])


def _load_model(path) -> LinearModel:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    return LinearModel.load(path)


def cmd_train(args, cfg: GlobalConfig) -> int:
    dataset = _load_dataset(args.data, None, cfg.threads)
    tc = TrainConfig(learning_rate=args.lr, max_epochs=args.epochs, l2_lambda=args.l2,
                     tolerance=args.tol, seed=args.seed)
    summary = {}
    if args.holdout > 0:
        dataset, held = dataset.split(args.holdout, args.seed)
    model = train(dataset, tc)
    model.save(args.out)
    summary.update(model=str(args.out), epochs=model.epochs, bins=model.dimension,
                   train=evaluate(model, dataset).to_dict())
    if args.holdout > 0:
        summary["holdout"] = evaluate(model, held).to_dict()
    _emit(summary, cfg)
    return EXIT_OK


def cmd_classify(args, cfg: GlobalConfig) -> int:
    model = _load_model(args.model)
    path = Path(args.input)
    if path.suffix == ".jsonl":
        dataset = _load_dataset(path, model, cfg.threads)
        paths, labels, features = dataset.paths, dataset.labels, dataset.features
        if dataset.config != model.config or dataset.sample_rate != model.sample_rate:
            raise IncompatibleFingerprintError("fingerprints do not match the model settings")
        probs = model.probabilities(features).tolist()
    else:
        entries = _collect_inputs(path, "unknown")
        fps = _fingerprint_entries(entries, None, cfg.threads, model.config)
        paths = [e.path for e in entries]
        labels = [e.label for e in entries]
        probs = [predict(model, fp) for fp in fps]
    results = [
        {"path": p, "label": lab, "probability": prob,
         "predicted": "synthetic" if prob >= args.threshold else "real"}
        for p, lab, prob in zip(paths, labels, probs)
    ]
    report = {"threshold": args.threshold, "results": results}
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    rows = [(r["path"], r["label"], repr(r["probability"]), r["predicted"]) for r in results]
    _emit(report, cfg, rows, ("path", "label", "probability", "predicted"))
    return EXIT_OK


def cmd_eval(args, cfg: GlobalConfig) -> int:
    model = _load_model(args.model)
    dataset = _load_dataset(args.data, model, cfg.threads)
    report = evaluate(model, dataset, args.threshold)
    data = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(data, indent=2) + "\n")
        if args.plot:
            from .plotting import plot_breakdown

            data["figure"] = str(plot_breakdown(report.rows(), Path(args.out).with_suffix(".png"),
                                                title="detection accuracy by class"))
    rows = [(label, count, repr(acc)) for label, count, acc in report.rows()]
    _emit(data, cfg, rows, ("label", "count", "accuracy"))
    return EXIT_OK


def cmd_export_weights(args, cfg: GlobalConfig) -> int:
    model = _load_model(args.model)
    out = Path(args.out)
    out.write_text(export_weights(model))
    summary = {"weights": str(out), "bins": model.dimension}
    if args.plot:
        from .plotting import plot_weights

        predicted = None
        if args.strides:
            band = (model.bin_frequencies[0], model.bin_frequencies[-1])
            predicted = [f for f in predict_peaks(args.strides, model.sample_rate).absolute_frequencies
                         if band[0] <= f <= band[1]]
        summary["figure"] = str(plot_weights(model.bin_frequencies, model.weights,
                                             out.with_suffix(".png"), predicted=predicted,
                                             title="learned logistic-regression weights"))
    _emit(summary, cfg)
    return EXIT_OK


def cmd_import_weights(args, cfg: GlobalConfig) -> int:
    model = _load_model(args.model)
    weights = Path(args.weights)
    if not weights.is_file():
        raise UsageError(f"weights file not found: {weights}")
    import_weights(model, weights.read_text()).save(args.out)
    _emit({"model": str(args.out)}, cfg)
    return EXIT_OK


def cmd_gen_data(args, cfg: GlobalConfig) -> int:
    spec = SynthSpec.from_dict(_load_json(args.spec))
    entries = generate_synth_dataset(spec, args.out, threads=cfg.threads)
    counts = {}
    for entry in entries:
        counts[entry.label] = counts.get(entry.label, 0) + 1
    _emit({"files": len(entries), "per_label": counts,
           "manifest": str(Path(args.out) / MANIFEST_NAME)}, cfg)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peakprint",
        description="Predict, simulate, fingerprint and detect deconvolution peak artifacts.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging verbosity")
    parser.add_argument("--format", dest="output_format", default="json", choices=["json", "csv"],
                        help="stdout format for tabular results")
    parser.add_argument("--threads", default=None,
                        help=f"worker threads or 'auto' (default: ${THREADS_ENV} or 1)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("predict-peaks", help="artifact peak frequencies for a stride schedule")
    p.add_argument("strides", nargs="*", type=_positive_int, help="layer strides, e.g. 8 5 4 2")
    p.add_argument("--rate", type=float, default=None, help="output sample rate in Hz")
    p.add_argument("--preset", choices=sorted(PRESETS), help="prepend a named stride schedule")
    p.set_defaults(func=cmd_predict_peaks)

    p = sub.add_parser("simulate", help="run a deconvolution stack and dump per-layer spectra")
    p.add_argument("--config", required=True, help="stack JSON (layers, input_rate, activation)")
    p.add_argument("--out", required=True, help="output directory for layer_<i>.csv")
    p.add_argument("--input", help="WAV to use as latent (resampled to input_rate)")
    p.add_argument("--frames", type=int, default=200, help="output frames to simulate")
    p.add_argument("--frame-len", type=int, default=8192, help="output frame length (samples)")
    p.add_argument("--window", choices=["rect", "hann"], default="rect", help="frame taper")
    p.add_argument("--seed", type=int, default=0, help="latent noise seed")
    p.add_argument("--latent-mean", type=float, default=1.0, help="latent DC level")
    p.add_argument("--latent-std", type=float, default=0.25, help="latent noise level")
    p.add_argument("--plot", action="store_true", help="also render layer_spectra.png")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fingerprint", help="extract artifact fingerprints from WAV audio")
    p.add_argument("--config", help="fingerprint JSON (frame_len, band_low, band_high, min_window)")
    p.add_argument("--in", dest="input", required=True, help="WAV file, directory or manifest")
    p.add_argument("--out", required=True, help=".csv for one file, .jsonl for a batch")
    p.add_argument("--label", default="unknown", help="label for inputs without a manifest")
    p.add_argument("--plot", action="store_true", help="render <out>.png (CSV output only)")
    p.add_argument("--strides", nargs="+", type=_positive_int, help="mark predicted peaks in the plot")
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("train", help="train the logistic-regression detector")
    p.add_argument("--data", required=True, help="fingerprint JSONL (or audio manifest)")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate, help="learning rate")
    p.add_argument("--epochs", type=int, default=TrainConfig.max_epochs, help="maximum epochs")
    p.add_argument("--l2", type=float, default=TrainConfig.l2_lambda, help="L2 penalty")
    p.add_argument("--tol", type=float, default=TrainConfig.tolerance, help="loss-plateau tolerance")
    p.add_argument("--seed", type=int, default=0, help="initialisation and split seed")
    p.add_argument("--holdout", type=float, default=0.0, help="fraction held out and reported")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="probability of synthetic origin per input")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--in", dest="input", required=True, help="WAV, directory, manifest or fingerprint JSONL")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="accuracy per class (real and each generator)")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--data", required=True, help="fingerprint JSONL or audio manifest")
    p.add_argument("--breakdown-by", choices=["label"], default="label", help="grouping key")
    p.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--plot", action="store_true", help="render <out>.png next to the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-weights", help="write learned weights as frequency_hz,weight CSV")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--plot", action="store_true", help="render <out>.png")
    p.add_argument("--strides", nargs="+", type=_positive_int, help="mark predicted peaks in the plot")
    p.set_defaults(func=cmd_export_weights)

    p = sub.add_parser("import-weights", help="load an edited weights CSV back into a model")
    p.add_argument("--model", required=True, help="model JSON providing config and normalization")
    p.add_argument("--weights", required=True, help="CSV from export-weights")
    p.add_argument("--out", required=True, help="new model JSON path")
    p.set_defaults(func=cmd_import_weights)

    p = sub.add_parser("gen-data", help="generate the synthetic desk-scale dataset")
    p.add_argument("--spec", required=True, help="dataset spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = GlobalConfig(args.log_level, args.output_format, resolve_threads(args.threads))
        return args.func(args, cfg)
    except (UsageError, InvalidParameterError, InvalidInputError, InsufficientDataError,
            IncompatibleFingerprintError) as exc:
        print(f"peakprint {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PeakprintError, OSError, ValueError) as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"peakprint {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
