"""
Командная строка: simulate, decode, track, eval, grad-check, bench-pgg, train-toy, presets
"""
import logging
import os
from dataclasses import replace
from typing import List, Optional, Sequence

import click

from ..config.run_config import RunConfig, load_run_config
from ..core.errors import EXIT_INVALID_INPUT, EXIT_OK, InvalidInputError, PggTrackError, exit_code_for
from ..core.grid import GridShape
from ..evaluation.gradients import LOSS_NAMES, run_grad_checks
from ..evaluation.metrics import EvaluationReport, evaluate_frames
from ..evaluation.runner import evaluate_sequences
from ..graph.pipeline import FramePipeline, SequencePipeline
from ..grouping.bench import bench_pgg
from ..simulator.fields import NoiseConfig, simulate
from ..simulator.presets import PRESET_NAMES, list_presets, scenario_preset
from ..simulator.scene import random_scene
from ..storage.files import atomic_write, write_json
from ..storage.sequence import (
    load_ground_truth,
    load_sequence,
    read_predictions,
    save_sequence,
    write_poses,
    write_tracks,
)
from ..temporal.tracker import MetricMode, Trajectory
from ..training.toy import TrainConfig, paired_training
from . import plots
from .console import frame_table, rows_table, setup_logging, show

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.6f'


def _config(path: Optional[str]) -> RunConfig:
    return load_run_config(path)


def _write_table(frame, path: str):
    atomic_write(path, frame.to_csv(float_format=CSV_FLOAT_FORMAT))
    logger.info(f"[IO] wrote {path}")


def _ground_truth_tracks(frames) -> List[Trajectory]:
    tracks = {}
    for t, poses in enumerate(frames):
        for pose in poses:
            tracks.setdefault(pose.person_id, Trajectory(pose.person_id)).add(t, pose)
    return [tracks[k] for k in sorted(tracks)]


@click.group()
@click.option('--quiet', is_flag=True, help='Only warnings and errors')
@click.option('--log-level', default=None, help='Overrides PGGTRACK_LOG_LEVEL')
def cli(quiet: bool, log_level: Optional[str]):
    """Pose-guided grouping and multi-person articulated tracking"""
    setup_logging(quiet, log_level)


@cli.command('simulate')
@click.option('--preset', type=click.Choice(PRESET_NAMES), default=None, help='Failure scenario; random scene if omitted')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@click.option('--frames', type=int, default=None, help='Overrides the frame count')
@click.option('--persons', type=(int, int), default=(2, 5), show_default=True,
              help='Person count range of a random scene')
@click.option('--zero-noise', is_flag=True, help='Exact fields everywhere')
@click.option('--plot', 'plot_dir', type=click.Path(file_okay=False), default=None)
def simulate_cmd(preset, seed, out_dir, frames, persons, zero_noise, plot_dir):
    """Synthesizes a sequence directory"""
    if preset:
        scene, noise = scenario_preset(preset, seed)
    else:
        scene, noise = random_scene(seed, persons), NoiseConfig()
    if frames is not None:
        scene = replace(scene, frame_count=frames)
    if zero_noise:
        noise = NoiseConfig.zero(he_dim=noise.he_dim)
    generated, bundles = simulate(scene, noise)
    sequence_id = f"{preset or 'random'}-{seed}"
    save_sequence(out_dir, bundles, generated.skeleton, sequence_id, scene.to_dict(), noise.to_dict(), preset, seed)
    if plot_dir:
        plots.plot_tracks(_ground_truth_tracks(generated.frames), plots.plot_path(plot_dir, 'ground_truth_tracks.svg'),
                          title=sequence_id)
    click.echo(f"{sequence_id}: {len(bundles)} frames, {scene.person_count} persons → {out_dir}")


@cli.command('decode')
@click.option('--in', 'in_dir', type=click.Path(exists=True, file_okay=False), required=True)
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), required=True)
@click.option('--no-pgg', is_flag=True, help='Decode raw KE/SIE')
@click.option('--plot', 'plot_dir', type=click.Path(file_okay=False), default=None)
def decode_cmd(in_dir, config_path, out_path, no_pgg, plot_dir):
    """Decodes poses frame by frame"""
    config = _config(config_path)
    loaded = load_sequence(in_dir)
    pipeline = FramePipeline(config, loaded.skeleton, use_pgg=False if no_pgg else None)
    frames, first = [], None
    for bundle in loaded.bundles:
        state = pipeline.run(bundle, until='decode')
        if first is None:
            first = state
        frames.append((bundle.time_index, state['poses']))
    write_poses(out_path, frames, loaded.skeleton, sequence_id=loaded.manifest.sequence_id,
                config=config.to_dict())
    if plot_dir and first is not None:
        plots.plot_embeddings(first, plots.plot_path(plot_dir, 'embeddings.svg'), config.heatmap.sigma)
    click.echo(f"{sum(len(p) for _, p in frames)} poses over {len(frames)} frames → {out_path}")


@cli.command('track')
@click.option('--in', 'in_dir', type=click.Path(exists=True, file_okay=False), required=True)
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), required=True)
@click.option('--mode', type=click.Choice([m.value for m in MetricMode]), default=None,
              help='Overrides tracker.mode')
@click.option('--plot', 'plot_dir', type=click.Path(file_okay=False), default=None)
def track_cmd(in_dir, config_path, out_path, mode, plot_dir):
    """Decodes and tracks online"""
    config = _config(config_path)
    if mode:
        config = config.with_overrides(tracker={'mode': mode})
    loaded = load_sequence(in_dir)
    noise = NoiseConfig.from_dict(loaded.manifest.noise) if loaded.manifest.noise else None
    pipeline = SequencePipeline(loaded.manifest.sequence_id, config, loaded.skeleton, noise)
    trajectories = pipeline.run(loaded.bundles)
    write_tracks(out_path, trajectories, loaded.skeleton, sequence_id=loaded.manifest.sequence_id,
                 tracker=pipeline.tracker.cfg.to_dict())
    if plot_dir:
        plots.plot_tracks(trajectories, plots.plot_path(plot_dir, 'tracks.svg'), title=loaded.manifest.sequence_id)
    click.echo(f"{len(trajectories)} tracks → {out_path}")


def _evaluate_file(pred_path: str, gt_dir: str, config: RunConfig) -> EvaluationReport:
    manifest, skeleton, gt_frames = load_ground_truth(gt_dir)
    predicted = read_predictions(pred_path, skeleton)
    pred_frames = [predicted.get(entry.t, []) for entry in manifest.frames]
    return evaluate_frames(pred_frames, gt_frames, skeleton, config.eval.pckh_factor)


@cli.command('eval')
@click.option('--pred', 'pred_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='tracks.json or poses.json; sequences are decoded and tracked when omitted')
@click.option('--gt', 'gt_dirs', type=click.Path(exists=True, file_okay=False), multiple=True, required=True)
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), required=True)
@click.option('--workers', type=int, default=None, help='Overrides PGGTRACK_WORKERS')
@click.option('--mode', type=click.Choice([m.value for m in MetricMode]), default=None,
              help='Overrides tracker.mode when sequences are tracked here')
@click.option('--plot', 'plot_dir', type=click.Path(file_okay=False), default=None)
def eval_cmd(pred_path, gt_dirs, config_path, out_path, workers, mode, plot_dir):
    """AP and MOTA per joint group; writes metrics.csv and metrics.json"""
    config = _config(config_path)
    if pred_path:
        if len(gt_dirs) != 1:
            raise InvalidInputError("--pred evaluates against exactly one --gt directory")
        report = _evaluate_file(pred_path, gt_dirs[0], config)
    else:
        report, _ = evaluate_sequences(list(gt_dirs), config, workers, mode=mode)
    frame = report.table()
    _write_table(frame, out_path)
    write_json(os.path.splitext(out_path)[0] + '.json', report.to_dict())
    if plot_dir:
        plots.plot_metrics(frame, plots.plot_path(plot_dir, 'metrics.svg'))
    show(frame_table(frame, 'metrics'))


@cli.command('grad-check')
@click.option('--loss', type=click.Choice(('all',) + LOSS_NAMES), default='all', show_default=True)
@click.option('--instances', type=int, default=20, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--tolerance', type=float, default=1e-4, show_default=True)
@click.pass_context
def grad_check_cmd(ctx, loss, instances, seed, tolerance):
    """Analytic gradients against central finite differences"""
    checks = run_grad_checks(loss, instances, seed)
    show(rows_table('gradient check', ['loss', 'max rel err', 'checked', 'kinks', 'status'], [
        (c.loss, f"{c.max_relative_error:.3e}", c.checked, c.excluded, 'ok' if c.passed(tolerance) else 'FAIL')
        for c in checks
    ]))
    failed = [c.loss for c in checks if not c.passed(tolerance)]
    if failed:
        logger.error(f"[GRADCHECK] above tolerance {tolerance}: {', '.join(failed)}")
        ctx.exit(EXIT_INVALID_INPUT)


@cli.command('bench-pgg')
@click.option('--occupancy', type=float, default=0.10, show_default=True)
@click.option('--shape', default='128x128', show_default=True, help='WxH')
@click.option('--seed', type=int, default=0, show_default=True)
def bench_pgg_cmd(occupancy, shape, seed):
    """Affinity element ratio and peak memory of masked PGG"""
    report = bench_pgg(occupancy, GridShape.parse(shape), seed=seed)
    data = report.to_dict()
    show(rows_table('bench-pgg', ['quantity', 'value'], [(k, v) for k, v in data.items()]))


@cli.command('train-toy')
@click.option('--steps', type=int, default=200, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--lr', 'learning_rate', type=float, default=0.02, show_default=True)
@click.option('--scenes', type=int, default=4, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@click.option('--plot', 'plot_dir', type=click.Path(file_okay=False), default=None)
@click.option('--no-progress', is_flag=True)
def train_toy_cmd(steps, seed, learning_rate, scenes, out_dir, plot_dir, no_progress):
    """Paired runs with and without PGG, then the held-out ablation"""
    cfg = TrainConfig(learning_rate=learning_rate, steps=steps, scenes=scenes, seed=seed)
    with_run, without_run, ablation = paired_training(cfg, progress=not no_progress)
    os.makedirs(out_dir, exist_ok=True)
    _write_table(with_run.loss_curve(), os.path.join(out_dir, 'loss_with_pgg.csv'))
    _write_table(without_run.loss_curve(), os.path.join(out_dir, 'loss_without_pgg.csv'))
    table = ablation.table()
    _write_table(table, os.path.join(out_dir, 'ablation.csv'))
    write_json(os.path.join(out_dir, 'predictors.json'), {
        'config': cfg.to_dict(),
        'with_pgg': with_run.predictor.to_dict(),
        'without_pgg': without_run.predictor.to_dict(),
    })
    if plot_dir:
        plots.plot_loss_curves({'with PGG': with_run.losses, 'without PGG': without_run.losses},
                               plots.plot_path(plot_dir, 'loss.svg'))
    show(frame_table(table, 'held-out AP'))


@cli.command('presets')
def presets_cmd():
    """Lists the calibrated failure scenarios"""
    show(rows_table('presets', ['name', 'persons', 'frames', 'zoom', 'pan', 'description'], [
        (p.name, p.scene.person_count, p.scene.frame_count, p.scene.zoom,
         f"{p.scene.pan[0]:g},{p.scene.pan[1]:g}", p.description)
        for p in list_presets()
    ]))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; maps errors to exit codes"""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name='pggtrack',
                          standalone_mode=False)
    except click.exceptions.Abort:
        click.echo('aborted', err=True)
        return EXIT_INVALID_INPUT
    except click.ClickException as e:
        e.show()
        return EXIT_INVALID_INPUT
    except PggTrackError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    return result if isinstance(result, int) else EXIT_OK
