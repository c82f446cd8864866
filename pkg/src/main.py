#!/usr/bin/env python3
"""
CardioVAE - command-line driver
Five subcommands string the pipeline together: synth, train, project, separate
and evaluate. Every run logs its resolved configuration; failures print one
``cardiovae: error[<kind>]: <message>`` line and exit with the error's code.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from . import __version__
from .config import RunConfig, load_config
from .dsp.spectral import ComplexSpectrogram, fit_stats, log_mag, normalize, stft
from .exceptions import CardioVAEError, InvalidArgumentError, UsageError
from .latent.clustering import kmeans, purity, silhouette
from .latent.tsne import LatentCloud, tsne
from .separation.masking import AssignmentMode, SeparatedSources, assign_frames, reconstruct
from .separation.metrics import evaluate, format_report
from .signals.siggen import SourceKind, SourceSignal, dominance_labels, gen_heart, gen_lung, mix
from .storage.atomic import atomic_write_text, make_dirs, output_transaction, read_bytes
from .storage.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .storage.csv_export import export_csv, latent_table, read_csv
from .storage.wav import read_wav, write_wav
from .utils.logger import setup_logging
from .vae.model import LossBreakdown, VAEModel, encode
from .vae.trainer import train

logger = logging.getLogger(__name__)
events = structlog.get_logger("cardiovae")

PROG = "cardiovae"
# Analysis settings a checkpoint's features depend on.
ANALYSIS_FIELDS = ("sample_rate", "n_fft", "hop", "floor")
PROVENANCE_FILE = "provenance.json"


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors share the exit-code table."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _start(command: str, cfg: RunConfig) -> None:
    setup_logging(cfg.log_level, cfg.log_format)
    events.info("run_config", command=command, seed=cfg.seed, config=cfg.model_dump())


def _read_mixture(path: Path, cfg: RunConfig) -> SourceSignal:
    mixture = read_wav(path)
    if mixture.sample_rate != cfg.sample_rate:
        raise InvalidArgumentError(
            f"mixture sample rate {mixture.sample_rate} Hz does not match "
            f"configured sample rate {cfg.sample_rate} Hz"
        )
    return mixture


def _features(mixture: SourceSignal, cfg: RunConfig) -> Tuple[ComplexSpectrogram, np.ndarray]:
    spec = stft(mixture, cfg.n_fft, cfg.hop, cfg.sample_rate)
    return spec, log_mag(spec, cfg.floor)


def _checkpoint_config(ckpt: Checkpoint, config_path: Optional[Path]) -> RunConfig:
    """The checkpoint's config, or an explicit one whose analysis settings agree with it."""
    if config_path is None:
        return ckpt.config
    cfg = load_config(config_path)
    for name in ANALYSIS_FIELDS:
        trained, requested = getattr(ckpt.config, name), getattr(cfg, name)
        if trained != requested:
            raise InvalidArgumentError(
                f"checkpoint {name} {trained} does not match analysis {name} {requested}"
            )
    return cfg


def _normalized_frames(ckpt: Checkpoint, features: np.ndarray) -> np.ndarray:
    if features.shape[1] != ckpt.stats.dim:
        raise InvalidArgumentError(
            f"mixture features have {features.shape[1]} bins, checkpoint expects {ckpt.stats.dim}"
        )
    return normalize(features, ckpt.stats)


def _read_labels(path: Path, n_frames: int) -> np.ndarray:
    table = read_csv(path)
    if "label" not in table.columns:
        raise InvalidArgumentError(f"{path} has no 'label' column")
    try:
        labels = table["label"].to_numpy(dtype=np.int64)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{path} has non-integer labels: {exc}") from exc
    if labels.size != n_frames:
        raise InvalidArgumentError(f"{path} holds {labels.size} labels for {n_frames} frames")
    return labels


def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    out_dir = make_dirs(Path(args.out_dir))
    heart = gen_heart(cfg.heart_params, cfg.duration, cfg.sample_rate, cfg.seed)
    lung = gen_lung(cfg.lung_params, cfg.duration, cfg.sample_rate, cfg.seed + 1)
    mixture = mix([heart, lung], [cfg.heart_gain, cfg.lung_gain])

    # References are the components exactly as they enter the mixture.
    components = []
    for source, gain in zip((heart, lung), mixture.component_gains):
        scaled = source.samples * gain
        if np.max(np.abs(scaled)) > 1.0:
            raise InvalidArgumentError(
                f"{source.kind.value} gain {gain:g} pushes the component past full scale"
            )
        components.append(SourceSignal(scaled, cfg.sample_rate, source.kind))

    labels = dominance_labels(components, cfg.n_fft, cfg.hop)
    write_wav(out_dir / "heart.wav", components[0], cfg.wav_encoding)
    write_wav(out_dir / "lung.wav", components[1], cfg.wav_encoding)
    write_wav(out_dir / "mixture.wav", mixture, cfg.wav_encoding)
    export_csv("labels", labels, out_dir / "labels.csv")
    events.info(
        "synth_done",
        out_dir=str(out_dir),
        samples=len(mixture),
        frames=int(labels.size),
        heart_fraction=float(np.mean(labels == 0)),
        rescale=mixture.rescale,
    )
    return 0


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    out = Path(args.out)
    out_dir = make_dirs(out.parent if str(out.parent) else Path("."))
    mixture = _read_mixture(Path(args.mixture), cfg)
    _, features = _features(mixture, cfg)

    stats = fit_stats(features)
    frames = normalize(features, stats)
    model = VAEModel.create(cfg.architecture, np.random.default_rng(cfg.seed), cfg.beta)

    def on_epoch_end(epoch: int, model: VAEModel, epoch_loss: LossBreakdown) -> None:
        events.info(
            "epoch_end", epoch=epoch, recon=epoch_loss.recon, kl=epoch_loss.kl,
            total=epoch_loss.total, beta=epoch_loss.beta,
        )
        if epoch % cfg.checkpoint_stride == 0 and epoch < cfg.epochs:
            save_checkpoint(out, model, stats, cfg, epoch)
            events.info("checkpoint_saved", path=str(out), epoch=epoch)

    result = train(model, frames, cfg.training_config, on_epoch_end)
    save_checkpoint(out, result.model, stats, cfg, cfg.epochs)
    events.info("checkpoint_saved", path=str(out), epoch=cfg.epochs)

    export_csv("losses", result.history, out_dir / "losses.csv")
    for snapshot in result.snapshots:
        export_csv("latent", latent_table([snapshot]), out_dir / f"latent_epoch_{snapshot.epoch:04d}.csv")
    return 0


def cmd_project(args: argparse.Namespace, cfg: Optional[RunConfig]) -> int:
    ckpt = load_checkpoint(args.ckpt)
    cfg = _checkpoint_config(ckpt, args.config)
    _start("project", cfg)
    mixture = _read_mixture(Path(args.mixture), cfg)
    _, features = _features(mixture, cfg)
    means = encode(ckpt.model, _normalized_frames(ckpt, features)).mu
    n_frames = means.shape[0]

    clustering = kmeans(means, cfg.cluster_count, restarts=cfg.restarts, seed=cfg.seed)
    stride = int(np.ceil(n_frames / cfg.tsne_max_points))
    idx = np.arange(0, n_frames, stride)
    cloud = LatentCloud(means[idx], epoch=ckpt.epoch, frame_indices=idx)
    embedding = tsne(cloud, cfg.perplexity, cfg.tsne_iters, cfg.seed, cfg.tsne_learning_rate)

    labels = None
    if args.labels is not None:
        labels = _read_labels(Path(args.labels), n_frames)
        events.info(
            "projection_quality",
            purity=purity(clustering.assignments, labels),
            silhouette=silhouette(embedding.coords, labels[idx]) if np.unique(labels[idx]).size > 1 else None,
        )

    export_csv(
        "embedding",
        {
            "coords": embedding.coords,
            "clusters": clustering.assignments[idx],
            "true_labels": None if labels is None else labels[idx],
            "frame_indices": idx,
            "epoch": ckpt.epoch,
        },
        args.out,
    )
    events.info("project_done", points=len(cloud), final_kl=embedding.final_kl, inertia=clustering.inertia)
    return 0


def cmd_separate(args: argparse.Namespace, cfg: Optional[RunConfig]) -> int:
    ckpt = load_checkpoint(args.ckpt)
    cfg = _checkpoint_config(ckpt, args.config)
    _start("separate", cfg)
    out_dir = make_dirs(Path(args.out_dir))
    mode = AssignmentMode(args.mode or cfg.separation_mode)

    mixture = _read_mixture(Path(args.mixture), cfg)
    spec, features = _features(mixture, cfg)
    frames = _normalized_frames(ckpt, features)
    assignment = assign_frames(ckpt.model, frames, cfg.cluster_count, cfg.seed, cfg.restarts, mode)
    separated = reconstruct(spec, ckpt.model, assignment, ckpt.stats)

    # Samples past the last full frame are not analysed; they stay silent.
    signals = []
    for sig in separated.signals:
        padded = np.zeros(len(mixture))
        padded[:sig.size] = sig[:len(mixture)]
        signals.append(padded)
    peak = max(float(np.max(np.abs(s))) for s in signals)
    if peak > 1.0:
        logger.warning(f"Separated sources peak at {peak:.4f}; scaling all by {1.0 / peak:.6f}")
        signals = [s / peak for s in signals]

    for i, sig in enumerate(signals):
        write_wav(out_dir / f"source_{i}.wav", sig, cfg.wav_encoding, cfg.sample_rate)
    export_csv("masks", separated, out_dir / "masks.csv")
    provenance = dict(separated.provenance, epoch=ckpt.epoch, seed=cfg.seed)
    atomic_write_text(out_dir / PROVENANCE_FILE, json.dumps(provenance, sort_keys=True) + "\n")
    events.info("separate_done", mode=mode.value, sources=len(signals), model=separated.provenance["model"])
    return 0


def _reference_paths(ref_dir: Path) -> List[Path]:
    named = [ref_dir / "heart.wav", ref_dir / "lung.wav"]
    if all(p.exists() for p in named):
        return named
    return sorted(p for p in ref_dir.glob("*.wav") if p.name != "mixture.wav")


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    est_dir, ref_dir, out = Path(args.est_dir), Path(args.ref_dir), Path(args.out)
    est_paths = sorted(est_dir.glob("source_*.wav"))
    ref_paths = _reference_paths(ref_dir)
    if not est_paths:
        raise InvalidArgumentError(f"no source_*.wav estimates in {est_dir}")
    if not ref_paths:
        raise InvalidArgumentError(f"no reference WAV files in {ref_dir}")

    estimates = [read_wav(p) for p in est_paths]
    kinds = {"heart.wav": SourceKind.HEART, "lung.wav": SourceKind.LUNG}
    references = [read_wav(p, kinds.get(p.name, SourceKind.OTHER)) for p in ref_paths]
    mixture_path = ref_dir / "mixture.wav"
    mixture = read_wav(mixture_path) if mixture_path.exists() else None

    rates = {s.sample_rate for s in estimates + references + ([mixture] if mixture else [])}
    if len(rates) > 1:
        raise InvalidArgumentError(f"estimates and references disagree on sample rate: {sorted(rates)}")

    provenance = {}
    if (est_dir / PROVENANCE_FILE).exists():
        try:
            recorded = json.loads(read_bytes(est_dir / PROVENANCE_FILE))
        except ValueError as exc:
            raise InvalidArgumentError(f"unreadable {est_dir / PROVENANCE_FILE}: {exc}") from exc
        if not isinstance(recorded, dict):
            raise InvalidArgumentError(f"{est_dir / PROVENANCE_FILE} must hold a JSON object")
        provenance = {k: str(v) for k, v in recorded.items()}

    length = min(len(s) for s in estimates)
    separated = SeparatedSources(
        [s.samples[:length] for s in estimates], estimates[0].sample_rate, provenance=provenance
    )
    report = evaluate(separated, references, mixture, cfg.n_fft, cfg.hop)

    out_dir = make_dirs(out.parent if str(out.parent) else Path("."))
    export_csv("report", report, out)
    atomic_write_text(out.with_suffix(".txt"), format_report(report))
    if args.spectrograms:
        for i, sig in enumerate(estimates):
            export_csv("spectrogram", stft(sig, cfg.n_fft, cfg.hop), out_dir / f"spectrogram_estimate_{i}.csv")
        for i, sig in enumerate(references):
            export_csv("spectrogram", stft(sig, cfg.n_fft, cfg.hop), out_dir / f"spectrogram_reference_{i}.csv")
        if mixture is not None:
            export_csv("spectrogram", stft(mixture, cfg.n_fft, cfg.hop), out_dir / "spectrogram_mixture.csv")

    events.info(
        "evaluate_done",
        permutation=list(report.permutation),
        mean_si_sdr=report.mean_si_sdr,
        mean_si_sdr_improvement=report.mean_si_sdr_improvement,
    )
    return 0


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog=PROG, description="VAE-based heart/lung sound separation")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("synth", help="generate synthetic heart, lung and mixture WAVs")
    p.add_argument("--config", type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.set_defaults(handler=cmd_synth, uses_config=True)

    p = sub.add_parser("train", help="train the VAE on a mixture")
    p.add_argument("--config", type=Path)
    p.add_argument("--mixture", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="checkpoint path")
    p.set_defaults(handler=cmd_train, uses_config=True)

    p = sub.add_parser("project", help="cluster and t-SNE embed the latent means")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--mixture", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--labels", type=Path, help="labels.csv with per-frame ground truth")
    p.add_argument("--config", type=Path)
    p.set_defaults(handler=cmd_project, uses_config=False)

    p = sub.add_parser("separate", help="separate a mixture with a trained checkpoint")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--mixture", required=True, type=Path)
    p.add_argument("--mode", choices=[m.value for m in AssignmentMode])
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.set_defaults(handler=cmd_separate, uses_config=False)

    p = sub.add_parser("evaluate", help="score separated sources against references")
    p.add_argument("--est-dir", required=True, type=Path)
    p.add_argument("--ref-dir", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--spectrograms", action="store_true", help="also export spectrogram CSVs")
    p.add_argument("--config", type=Path)
    p.set_defaults(handler=cmd_evaluate, uses_config=True)
    return parser


def _fail(exc: BaseException, kind: str, code: int) -> int:
    message = str(exc).splitlines()[0] if str(exc) else exc.__class__.__name__
    events.error("command_failed", kind=kind, exit_code=code, error=message)
    print(f"{PROG}: error[{kind}]: {message}", file=sys.stderr)
    return code


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(exc, exc.kind, exc.exit_code)
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)

    try:
        cfg = None
        if args.uses_config:
            cfg = load_config(args.config)
            _start(args.command, cfg)
        with output_transaction():
            return args.handler(args, cfg)
    except CardioVAEError as exc:
        return _fail(exc, exc.kind, exc.exit_code)
    except OSError as exc:
        return _fail(exc, "io", 3)


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
