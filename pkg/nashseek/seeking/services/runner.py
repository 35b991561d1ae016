"""解決済みの設定から1回の探索を実行し、成果物とサマリを作る

バッチ実行はワーカースレッドで計算だけを行い、SeekingRun の保存は呼び出し側のスレッドで行う。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from django.utils import timezone
from django.utils.text import slugify

from .analysis import (
    LyapunovMonitor, assumption_report, estimate_monotonicity, lyapunov_along_trajectory,
    search_working_delta, trajectory_rate,
)
from .dynamics import integrate, integrate_reduced
from .exceptions import Diverged, SeekingError
from .reporting import write_json, write_plot_script, write_trajectory_csv
from .run_config import load_config_file, resolve_config

logger = logging.getLogger(__name__)

# リアプノフ診断を「合格」とみなす V̇ < 0 の割合
LYAPUNOV_PASS_FRACTION = 0.99


@dataclass
class RunResult:
    name: str
    status: str
    summary: dict
    checks_passed: bool = True
    artifacts: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == 'completed' and self.checks_passed


def default_run_name(resolved):
    return slugify(f'{resolved.game.name} {resolved.graph.label}') or 'run'


def output_dir_for(resolved):
    return Path(resolved.config['output'].get('dir') or settings.SEEKING_OUTPUT_DIR)


def _write_artifacts(resolved, traj, summary, name):
    out = output_dir_for(resolved)
    output = resolved.config['output']
    csv_path = out / f'{name}.csv'
    plot_path = out / f'{name}_plot.py'
    summary_path = out / f'{name}_summary.json'
    artifacts = {'csv': str(csv_path), 'summary': str(summary_path)}
    if traj is not None:
        write_trajectory_csv(traj, csv_path, include_estimates=output.get('include_estimates'))
        write_plot_script(csv_path, plot_path, resolved.game.n, x_star=resolved.x_star,
                          title=f'{resolved.game.name} @ {resolved.graph.label}')
        artifacts['plot'] = str(plot_path)
    else:
        artifacts['csv'] = None
    summary['artifacts'] = artifacts
    write_json(summary, summary_path)
    return artifacts


def _analyses(resolved, traj, summary):
    """要求された解析を実行し、要求されたチェックがすべて通ったかを返す"""
    analysis = resolved.config['analysis']
    game, graph, params = resolved.game, resolved.graph, resolved.params
    passed = True

    if analysis.get('rate') and traj.action_error is not None:
        try:
            summary['rate'] = trajectory_rate(traj, window=analysis['window']).to_dict()
        except SeekingError as e:
            summary['rate'] = {'error': str(e)}

    if analysis.get('assumptions'):
        point = resolved.x_star if resolved.x_star is not None else traj.final_state.x
        report = assumption_report(game, point, kbar=params.kbar,
                                   step=analysis['fd_step'], tol=analysis['tol'])
        summary['assumptions'] = report.to_dict()
        passed = passed and report.passed

    if analysis.get('lyapunov'):
        if resolved.x_star is None:
            summary['lyapunov'] = {'error': 'x* が未知です'}
            passed = False
        else:
            try:
                monitor = LyapunovMonitor.build(graph, params.kbar, c=analysis['c'], gains=params.gains)
                series = lyapunov_along_trajectory(monitor, traj, resolved.x_star,
                                                   burn_in=analysis['burn_in'])
                summary['lyapunov'] = {**series.to_dict(), 'c': monitor.c, 'Q1': 'identity',
                                        'residual': monitor.residual}
                passed = passed and series.decreasing_fraction >= LYAPUNOV_PASS_FRACTION
            except SeekingError as e:
                summary['lyapunov'] = {'error': str(e)}
                passed = False

    if analysis.get('reduced'):
        try:
            reduced = integrate_reduced(game, params, resolved.x0, x_star=resolved.x_star)
            summary['reduced'] = {
                'final_x': reduced.final_state.x.tolist(),
                'final_error': reduced.final_error,
                'max_gap': float(np.max(np.abs(reduced.xs - traj.xs))),
            }
        except Diverged as e:
            summary['reduced'] = {'diverged': e.to_dict(), 'max_gap': float('inf')}
    return passed


def execute_run(resolved, name=None):
    """1回分の探索。Diverged は status='diverged' の結果として返す（DB には触れない）"""
    name = name or resolved.config['output'].get('name') or default_run_name(resolved)
    game, graph = resolved.game, resolved.graph
    summary = {
        'name': name,
        'game': game.name,
        'graph': graph.label,
        'config': resolved.config,
    }

    if resolved.config['analysis'].get('search_delta'):
        if resolved.x_star is None:
            logger.warning('x* が未知なので δ 探索を省略します')
        else:
            search = search_working_delta(game, graph, resolved.params, resolved.x0,
                                          resolved.x_star, Y0=resolved.Y0)
            summary['delta_search'] = search.to_dict()
            if search.delta is not None:
                resolved.params = resolved.params.with_delta(search.delta)
                resolved.config['seeker']['delta'] = search.delta

    try:
        traj = integrate(game, graph, resolved.params, resolved.x0, Y0=resolved.Y0, x_star=resolved.x_star)
    except Diverged as e:
        summary.update({'status': 'diverged', 'diverged': e.to_dict()})
        artifacts = _write_artifacts(resolved, None, summary, name)
        return RunResult(name=name, status='diverged', summary=summary,
                         checks_passed=False, artifacts=artifacts)

    final = traj.final_state
    summary.update({
        'status': 'completed',
        't_final': float(traj.times[-1]),
        'final_x': final.x.tolist(),
        'x_star': None if resolved.x_star is None else resolved.x_star.tolist(),
        'final_error': traj.final_error,
        'final_error_inf': (None if resolved.x_star is None
                            else float(np.max(np.abs(final.x - resolved.x_star)))),
        'consensus_residual': float(traj.consensus_residual[-1]),
    })
    passed = _analyses(resolved, traj, summary)
    summary['checks_passed'] = passed
    artifacts = _write_artifacts(resolved, traj, summary, name)
    return RunResult(name=name, status='completed', summary=summary,
                     checks_passed=passed, artifacts=artifacts)


def failed_result(resolved, error, name=None):
    """execute_run が例外で止まった実行を status='failed' の結果にする（成果物なし）"""
    name = name or resolved.config['output'].get('name') or default_run_name(resolved)
    logger.error(f'実行失敗 {name}: {error}')
    summary = {
        'name': name,
        'game': resolved.game.name,
        'graph': resolved.graph.label,
        'config': resolved.config,
        'status': 'failed',
        'error': str(error),
    }
    return RunResult(name=name, status='failed', summary=summary, checks_passed=False)


def record_run(result):
    """実行結果を SeekingRun として保存する（設定で無効化できる）"""
    from ..models import SeekingRun

    if not getattr(settings, 'SEEKING_RECORD_RUNS', True):
        return None
    summary = result.summary
    rate = summary.get('rate') or {}
    return SeekingRun.objects.create(
        name=result.name,
        game_name=summary.get('game', ''),
        graph_label=summary.get('graph', ''),
        status=result.status,
        checks_passed=result.checks_passed,
        config=summary.get('config') or {},
        summary={k: v for k, v in summary.items() if k != 'config'},
        final_error=summary.get('final_error'),
        rate=rate.get('rate'),
        csv_path=result.artifacts.get('csv') or '',
        summary_path=result.artifacts.get('summary') or '',
        plot_path=result.artifacts.get('plot') or '',
        error_message=summary.get('error') or (summary.get('diverged') or {}).get('message', ''),
        finished_at=timezone.now(),
    )


def _batch_worker(path, overrides):
    try:
        resolved = resolve_config(load_config_file(path), overrides)
    except SeekingError as e:
        logger.error(f'バッチ実行エラー {path}: {e}')
        return path, e
    name = resolved.config['output'].get('name') or Path(path).stem
    try:
        return path, execute_run(resolved, name=name)
    except SeekingError as e:
        return path, failed_result(resolved, e, name=name)


def run_batch(directory, overrides=None, max_workers=None):
    """ディレクトリ内の *.json を並列に実行し、(path, RunResult または例外) をファイル名順に返す"""
    paths = sorted(Path(directory).glob('*.json'))
    max_workers = max_workers or int(getattr(settings, 'SEEKING_MAX_CONCURRENT_RUNS', 2))
    logger.info(f'バッチ実行: {len(paths)} 件 (max_workers={max_workers})')
    with ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix='seek-run') as executor:
        futures = [executor.submit(_batch_worker, path, overrides) for path in paths]
        return [f.result() for f in futures]
