#!/usr/bin/env python3
"""
Command-line entry point.

stdout carries only machine-readable output (JSON or JSONL); diagnostics and
progress go to stderr. Exit codes: 0 success, 1 internal error, 2
configuration or checkpoint error, 3 data or IO error.
"""

import functools
import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

import click

from src.engine.gradcheck import run_gradcheck
from src.exceptions import CheckpointError, ConfigurationError, DataValidationError, ParameterError
from src.logging_config import load_config, log_error, setup_logging
from src.models.config_models import DataConfig, ModelConfig, RunSpec, TrainConfig
from src.models.data_models import Manifest, Split, WindowedDataset
from src.network.params import param_count
from src.repositories.manifest_repository import ManifestRepository
from src.repositories.repository_factory import RepositoryFactory
from src.services.corpus_adapters import CORPUS_ADAPTERS
from src.services.preprocessing_service import PreprocessingService, resolve_threads
from src.services.synth_service import synth_dataset
from src.services.training_service import TrainingService, build_network, evaluate, network_from_checkpoint

logger = logging.getLogger("wadenet.cli")

DEFAULT_SETTINGS = "config/wadenet_config.yaml"
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


# ANSI color codes for stderr status lines
class Colors:
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'


def colorize(text, color):
    """Add color to text if stderr is a terminal"""
    if os.getenv('NO_COLOR') or not os.isatty(2):
        return text
    return f"{color}{text}{Colors.ENDC}"


def status(text, color=Colors.GREEN):
    click.echo(colorize(text, color), err=True)


def format_json_output(data):
    """Format JSON output with consistent indentation"""
    return json.dumps(data, indent=2, ensure_ascii=False)


class CommandError(click.ClickException):
    """One-line diagnostic on stderr with a documented exit code."""

    def __init__(self, message: str, exit_code: int = EXIT_INTERNAL):
        super().__init__(message)
        self.exit_code = exit_code


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (ConfigurationError, CheckpointError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(error, (DataValidationError, OSError)):
        return EXIT_DATA
    return EXIT_INTERNAL


def reports_errors(command):
    """Map exceptions escaping a command onto exit codes."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as e:
            log_error(logger, e, {"command": command.__name__}, level=logging.DEBUG)
            raise CommandError(f"{type(e).__name__}: {e}", exit_code_for(e))
    return wrapper


class Settings:
    """One settings profile plus typed accessors."""

    def __init__(self, profile: Dict[str, Any]):
        self.profile = profile or {}

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.profile.get(name) or {})

    @property
    def data(self) -> DataConfig:
        return DataConfig.from_settings(self.section("audio"), self.section("split"))

    @property
    def training(self) -> TrainConfig:
        return TrainConfig.from_settings(self.section("training"))

    def threads(self, explicit: Optional[int] = None) -> int:
        return resolve_threads(explicit, self.section("app").get("threads"))

    @property
    def output_root(self) -> str:
        return self.section("app").get("output_root", "runs")


def load_settings(path: Optional[str], profile: str) -> Settings:
    if path is None:
        if not Path(DEFAULT_SETTINGS).exists():
            return Settings({})
        path = DEFAULT_SETTINGS
    return Settings(load_config(path, profile))


def run_directory(settings: Settings, output: Optional[str], seed: int) -> Path:
    if output:
        return Path(output)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path(settings.output_root) / f"{stamp}_seed{seed}"


def relocate_manifest(manifest: Manifest, source, target_dir: Path) -> Manifest:
    """Rewrite clip paths so they resolve from ``target_dir``."""
    frame = manifest.frame.copy()
    frame["path"] = [
        os.path.relpath(ManifestRepository.resolve(source, p).resolve(), target_dir.resolve())
        for p in frame["path"]
    ]
    return Manifest(frame, list(manifest.rejects))


def cached_windows(cache_path: str, split: Manifest, window_len: int) -> WindowedDataset:
    """
    Windows read back from a ``preprocess`` cache, labelled with the manifest's vocabulary.

    Raises:
        ConfigurationError: the cache was cut for another window length
        DataValidationError: a cached label has no class in the manifest
    """
    dataset = RepositoryFactory.get_repository("window_cache").load(cache_path)
    if dataset.window_len != window_len:
        raise ConfigurationError(f"cache {cache_path} holds {dataset.window_len}-sample windows, "
                                 f"the model expects {window_len}", {"cache": cache_path})
    if len(dataset) and int(dataset.labels.max()) >= len(split.vocabulary):
        raise DataValidationError(f"cache {cache_path} has label {int(dataset.labels.max())} but the manifest "
                                  f"has {len(split.vocabulary)} classes", {"cache": cache_path})
    dataset.vocabulary = list(split.vocabulary)
    return dataset


@click.group()
@click.option('--settings', default=None, help=f'Path to settings file (default {DEFAULT_SETTINGS})')
@click.option('--profile', default='default', help='Settings profile to use')
@click.option('--log-level', default=None, help='Override the profile log level')
@click.pass_context
def cli(ctx, settings: Optional[str], profile: str, log_level: Optional[str]):
    """WaDeNet speech classification tool"""
    try:
        ctx.obj = load_settings(settings, profile)
        app = ctx.obj.section("app")
        setup_logging(log_level or app.get("log_level", "INFO"), app.get("log_dir"))
    except ConfigurationError as e:
        raise CommandError(f"ConfigurationError: {e}", EXIT_CONFIG)


@cli.command()
@click.option('--output', required=True, help='Directory for the WAVs and manifest.csv')
@click.option('--classes', default=3, show_default=True, help='Number of classes')
@click.option('--clips', default=60, show_default=True, help='Clips per class')
@click.option('--seconds', default=2.0, show_default=True, help='Clip duration')
@click.option('--rate', default=None, type=int, help='Sample rate (default from settings)')
@click.option('--snr', default=10.0, show_default=True, help='Signal-to-noise ratio in dB')
@click.option('--seed', default=0, show_default=True, help='Generator seed')
@click.pass_obj
@reports_errors
def synth(settings: Settings, output: str, classes: int, clips: int, seconds: float, rate: Optional[int],
          snr: float, seed: int):
    """Write a synthetic band-limited sinusoid corpus."""
    rate = rate or settings.data.sample_rate
    manifest = synth_dataset(output, classes, clips, seconds, rate, seed, snr)
    status(f"✓ Wrote {len(manifest)} clips to {output}")
    click.echo(format_json_output({
        "manifest": str(Path(output) / "manifest.csv"),
        "clips": len(manifest),
        "classes": manifest.vocabulary,
    }))


@cli.command()
@click.option('--corpus', required=True, type=click.Choice(sorted(CORPUS_ADAPTERS)), help='Filename convention')
@click.option('--audio-dir', required=True, help='Directory holding the corpus WAVs')
@click.option('--output', required=True, help='Manifest CSV to write')
@reports_errors
def manifest(corpus: str, audio_dir: str, output: str):
    """Build a manifest from a corpus directory."""
    built = CORPUS_ADAPTERS[corpus](audio_dir)
    RepositoryFactory.get_repository("manifest").save(built, output)
    if built.rejects:
        status(f"⚠️  {len(built.rejects)} file(s) rejected", Colors.YELLOW)
    click.echo(format_json_output({
        "manifest": output,
        "clips": len(built),
        "class_counts": built.class_counts(),
        "rejects": built.rejects,
    }))


@cli.command()
@click.option('--manifest', 'manifest_path', required=True, help='Manifest CSV')
@click.option('--config', 'config_path', default=None, help='Model config JSON; fixes the window length')
@click.option('--output', default=None, help='Output directory (default: the manifest directory)')
@click.option('--seed', default=None, type=int, help='Split seed (default from settings)')
@click.option('--threads', default=None, type=int, help='Decoding threads (default WADENET_THREADS or cores)')
@click.pass_obj
@reports_errors
def preprocess(settings: Settings, manifest_path: str, config_path: Optional[str], output: Optional[str],
               seed: Optional[int], threads: Optional[int]):
    """Split a manifest and write the windowed binary cache."""
    spec = RunSpec("preprocess", config_path=config_path, manifest_path=manifest_path, seed=seed,
                   output_dir=output)
    logger.debug(f"Running {spec}")
    train_config = spec.apply(settings.training)
    window_len = ModelConfig.from_json(spec.config_path).window_len if spec.config_path else None
    service = PreprocessingService(settings.data, window_len, settings.threads(threads), show_progress=True)

    repository = RepositoryFactory.get_repository("manifest")
    split = service.ensure_split(repository.load(spec.manifest_path), train_config.seed)
    out_dir = Path(spec.output_dir) if spec.output_dir else Path(spec.manifest_path).parent
    dataset = service.build_dataset(split, spec.manifest_path)

    split_path = out_dir / f"{Path(spec.manifest_path).stem}_split.csv"
    repository.save(relocate_manifest(split, spec.manifest_path, out_dir), split_path)
    cache_path = RepositoryFactory.get_repository("window_cache").save(dataset, out_dir / "windows.wdnw")
    counts = {s.value: int((dataset.splits == s.code).sum()) for s in Split}
    status(f"✓ Wrote {len(dataset)} windows to {cache_path}")
    click.echo(format_json_output({
        "cache": str(cache_path),
        "manifest": str(split_path),
        "windows": len(dataset),
        "window_len": service.window_len,
        "windows_per_split": counts,
        "vocabulary": dataset.vocabulary,
    }))


@cli.command()
@click.option('--config', 'config_path', required=True, help='Model config JSON')
@click.option('--manifest', 'manifest_path', required=True, help='Manifest CSV (split if unsplit)')
@click.option('--seed', default=None, type=int, help='Run seed (default from settings)')
@click.option('--output', default=None, help='Run directory (default <output_root>/<timestamp>_seed<seed>)')
@click.option('--epochs', default=None, type=int, help='Override the number of epochs')
@click.option('--lr', default=None, type=float, help='Override the initial learning rate')
@click.option('--batch-size', default=None, type=int, help='Override the batch size')
@click.option('--stop-at-acc', default=None, type=float, help='Stop after the first epoch reaching this val accuracy')
@click.option('--cache', 'cache_path', default=None, help='WDNW window cache from preprocess; skips decoding')
@click.option('--threads', default=None, type=int, help='Decoding threads')
@click.option('--no-timing', is_flag=True, help='Write seconds=0.0 so metrics are byte-reproducible')
@click.pass_obj
@reports_errors
def train(settings: Settings, config_path: str, manifest_path: str, seed: Optional[int], output: Optional[str],
          epochs: Optional[int], lr: Optional[float], batch_size: Optional[int], threads: Optional[int],
          stop_at_acc: Optional[float], cache_path: Optional[str], no_timing: bool):
    """Train a model; write metrics.jsonl and final/best checkpoints."""
    spec = RunSpec("train", config_path=config_path, manifest_path=manifest_path, seed=seed, output_dir=output,
                   overrides={"epochs": epochs, "lr": lr, "batch_size": batch_size})
    logger.debug(f"Running {spec}")
    config = ModelConfig.from_json(spec.config_path)
    train_config = spec.apply(settings.training)
    run_dir = run_directory(settings, spec.output_dir, train_config.seed)

    service = PreprocessingService(settings.data, config.window_len, settings.threads(threads), show_progress=True)
    repository = RepositoryFactory.get_repository("manifest")
    split = service.ensure_split(repository.load(spec.manifest_path), train_config.seed)
    if len(split.vocabulary) != config.num_classes:
        raise ConfigurationError(f"model has {config.num_classes} classes, manifest has {len(split.vocabulary)}",
                                 {"vocabulary": split.vocabulary})
    if cache_path:
        dataset = cached_windows(cache_path, split, config.window_len)
    else:
        dataset = service.build_dataset(split, spec.manifest_path)

    run_dir.mkdir(parents=True, exist_ok=True)
    repository.save(relocate_manifest(split, spec.manifest_path, run_dir), run_dir / "manifest.csv")
    trainer = TrainingService(build_network(config, train_config.seed), train_config,
                              record_timing=not no_timing, show_progress=True)
    metrics_path = run_dir / "metrics.jsonl"
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as metrics_file:
        def emit(metrics):
            line = metrics.to_json_line()
            metrics_file.write(line + "\n")
            metrics_file.flush()
            click.echo(line)

        result = trainer.run(dataset, progress_callback=emit, stop_at_accuracy=stop_at_acc)

    checkpoints = RepositoryFactory.get_repository("checkpoint")
    checkpoints.save(trainer.checkpoint(), run_dir / "final.wdn1")
    checkpoints.save(trainer.checkpoint(best=True), run_dir / "best.wdn1")
    status(f"✓ Trained {result.epochs_completed} epochs in {result.duration:.1f}s; "
           f"best epoch {result.best_epoch + 1}; run in {run_dir}")


@cli.command(name="eval")
@click.option('--checkpoint', 'checkpoint_path', required=True, help='WDN1 checkpoint')
@click.option('--manifest', 'manifest_path', required=True, help='Manifest CSV')
@click.option('--config', 'config_path', default=None, help='Model config JSON the checkpoint must match')
@click.option('--split', 'split_name', default='test', show_default=True,
              type=click.Choice([s.value for s in Split]), help='Split to evaluate')
@click.option('--vote', is_flag=True, help='Report clip-level majority-vote metrics')
@click.option('--threads', default=None, type=int, help='Decoding threads')
@click.option('--cache', 'cache_path', default=None, help='WDNW window cache from preprocess; skips decoding')
@click.pass_obj
@reports_errors
def evaluate_command(settings: Settings, checkpoint_path: str, manifest_path: str, config_path: Optional[str],
                     split_name: str, vote: bool, threads: Optional[int], cache_path: Optional[str]):
    """Evaluate a checkpoint; print accuracy, macro F1 and confusion as JSON."""
    spec = RunSpec("eval", config_path=config_path, manifest_path=manifest_path, checkpoint_path=checkpoint_path)
    logger.debug(f"Running {spec}")
    if vote and cache_path:
        raise ConfigurationError("--vote needs clip ids, which a window cache does not store; drop --cache")
    expected = ModelConfig.from_json(spec.config_path) if spec.config_path else None
    checkpoint = RepositoryFactory.get_repository("checkpoint").load(spec.checkpoint_path, expected)
    config = checkpoint.model_config

    service = PreprocessingService(settings.data, config.window_len, settings.threads(threads))
    split = service.ensure_split(RepositoryFactory.get_repository("manifest").load(spec.manifest_path),
                                 checkpoint.train_config.seed)
    if checkpoint.vocabulary and split.vocabulary != checkpoint.vocabulary:
        raise DataValidationError(f"manifest labels {split.vocabulary} differ from the checkpoint's "
                                  f"{checkpoint.vocabulary}")
    if cache_path:
        dataset = cached_windows(cache_path, split, config.window_len)
    else:
        dataset = service.build_dataset(split, spec.manifest_path)
    dataset = dataset.subset(Split(split_name))
    if len(dataset) == 0:
        raise DataValidationError(f"the {split_name} split has no windows", {"split": split_name})

    report = evaluate(network_from_checkpoint(checkpoint), dataset, vote=vote)
    click.echo(format_json_output(report.to_dict()))


@cli.command()
@click.option('--config', 'config_path', required=True, help='Model config JSON')
@click.option('--baseline', 'baseline_path', default=None, help='Second config to compare totals against')
@reports_errors
def params(config_path: str, baseline_path: Optional[str]):
    """Print the per-layer parameter table and total."""
    report = param_count(ModelConfig.from_json(config_path)).to_dict()
    if baseline_path:
        baseline = param_count(ModelConfig.from_json(baseline_path)).total
        report["baseline_total"] = baseline
        report["reduction_pct"] = 100.0 * (baseline - report["total"]) / baseline
    click.echo(format_json_output(report))


@cli.command()
@click.option('--seed', default=0, show_default=True, help='Seed for the random test inputs')
@click.option('--skip-models', is_flag=True, help='Check registered ops only')
@reports_errors
def gradcheck(seed: int, skip_models: bool):
    """Finite-difference check of every differentiable op and toy models."""
    report = run_gradcheck(seed=seed, include_models=not skip_models)
    click.echo(format_json_output({
        "results": [r.to_dict() for r in report.results],
        "passed": report.passed,
    }))
    if not report.passed:
        raise CommandError(f"gradient check failed for: {', '.join(report.failures)}", EXIT_INTERNAL)
    status("✓ All gradient checks passed")


if __name__ == "__main__":
    cli()
