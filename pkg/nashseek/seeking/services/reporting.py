"""成果物の書き出し（軌道 CSV・サマリ JSON・プロットスクリプト）と読み込み"""
import csv
import json
import logging
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatch

logger = logging.getLogger(__name__)


def _fmt(value):
    """倍精度を落とさない17桁表記"""
    return f'{float(value):.17g}'


def csv_header(n, include_estimates=False):
    header = ['t'] + [f'x_{i}' for i in range(1, n + 1)] + ['err', 'consensus_residual']
    if include_estimates:
        header += [f'y_{i}{j}' for i in range(1, n + 1) for j in range(1, n + 1)]
    return header


def write_trajectory_csv(traj, path, include_estimates=False):
    """1サンプル1行。x* が未知のとき err 列は空欄"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = traj.xs.shape[1]
    with path.open('w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(csv_header(n, include_estimates))
        for k, t in enumerate(traj.times):
            row = [_fmt(t)] + [_fmt(v) for v in traj.xs[k]]
            row.append('' if traj.action_error is None else _fmt(traj.action_error[k]))
            row.append(_fmt(traj.consensus_residual[k]))
            if include_estimates:
                row += [_fmt(v) for v in traj.Ys[k].reshape(-1)]
            writer.writerow(row)
    logger.info(f'軌道 CSV を書き出しました: {path} ({len(traj)} 行)')
    return path


def read_trajectory_csv(path):
    """(times, xs, errors) を返す。err が空欄なら errors は None"""
    with Path(path).open(newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        rows = [row for row in reader if row]
    if not header or header[0] != 't' or 'err' not in header:
        raise DimensionMismatch(f'軌道 CSV のヘッダが不正です: {path}')
    n = header.index('err') - 1
    times = np.array([float(r[0]) for r in rows])
    xs = np.array([[float(v) for v in r[1:n + 1]] for r in rows]).reshape(len(rows), n)
    err_col = [r[n + 1] for r in rows]
    errors = None if any(v == '' for v in err_col) else np.array([float(v) for v in err_col])
    return times, xs, errors


def write_json(data, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
    return path


PLOT_TEMPLATE = '''"""{title} の x_i(t) を描画する（生成スクリプト）

使い方:
  python {script_name}
"""
import csv

import matplotlib.pyplot as plt

CSV_PATH = {csv_path!r}
N_PLAYERS = {n}

with open(CSV_PATH, newline='') as f:
    rows = list(csv.DictReader(f))

t = [float(r['t']) for r in rows]
fig, ax = plt.subplots(figsize=(6.0, 3.8))
for i in range(1, N_PLAYERS + 1):
    ax.plot(t, [float(r[f'x_{{i}}']) for r in rows], label=f'$x_{{i}}$')
{star_lines}ax.set_xlabel('time')
ax.set_ylabel('action')
ax.legend(loc='best', fontsize=8)
ax.grid(True, alpha=0.3)
fig.tight_layout()
fig.savefig({png_path!r}, dpi=150)
plt.show()
'''


def write_plot_script(csv_path, path, n, x_star=None, title='trajectory'):
    """CSV を読んで各プレイヤーの行動の推移を描く matplotlib スクリプト"""
    path = Path(path)
    star_lines = ''
    if x_star is not None:
        star_lines = ''.join(
            f"ax.axhline({float(v)!r}, color='gray', linestyle=':', linewidth=0.8)\n" for v in x_star
        )
    script = PLOT_TEMPLATE.format(
        title=title,
        script_name=path.name,
        csv_path=str(csv_path),
        n=n,
        star_lines=star_lines,
        png_path=str(Path(csv_path).with_suffix('.png')),
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(script, encoding='utf-8')
    return path


def _vector(values, digits=6):
    return '[' + ', '.join(f'{v:.{digits}f}' for v in values) + ']'


def format_run_summary(summary):
    """seek_run の標準出力用テキスト"""
    lines = [
        '=' * 60,
        f'均衡探索: {summary["game"]} @ {summary["graph"]}',
        '=' * 60,
        f'状態: {summary["status"]}',
        f'最終時刻: {summary["t_final"]:g}',
        f'最終行動 x: {_vector(summary["final_x"])}',
    ]
    if summary.get('x_star') is not None:
        lines.append(f'x*: {_vector(summary["x_star"])}')
    if summary.get('final_error') is not None:
        lines.append(f'最終誤差 ‖x − x*‖: {summary["final_error"]:.3e}（∞ノルム {summary["final_error_inf"]:.3e}）')
    lines.append(f'合意残差: {summary["consensus_residual"]:.3e}')
    rate = summary.get('rate')
    if rate:
        if 'error' in rate:
            lines.append(f'収束レート: 計算できません（{rate["error"]}）')
        else:
            lines.append(f'収束レート: {rate["rate"]:.6g}（r² = {rate["r_squared"]:.4f}）')
    if summary.get('assumptions'):
        lines.append(f'仮定チェック: {"合格" if summary["assumptions"]["passed"] else "不合格"}')
    if summary.get('lyapunov'):
        lyap = summary['lyapunov']
        if 'error' in lyap:
            lines.append(f'リアプノフ診断: 計算できません（{lyap["error"]}）')
        else:
            lines.append(f'リアプノフ診断: V̇ < 0 の割合 {lyap["decreasing_fraction"]:.4f}'
                         f'（方程式の残差 {lyap.get("residual", 0.0):.1e}）')
    if summary.get('reduced'):
        lines.append(f'縮約系との最大差: {summary["reduced"]["max_gap"]:.3e}')
    for key, label in (('csv', '軌道 CSV'), ('summary', 'サマリ JSON'), ('plot', 'プロット')):
        if summary.get('artifacts', {}).get(key):
            lines.append(f'{label}: {summary["artifacts"][key]}')
    return '\n'.join(lines)


def format_check_report(report, monotonicity=None):
    """seek_check の標準出力用テキスト"""
    mark = {True: 'OK', False: 'NG', None: '-'}
    lines = [
        '=' * 60,
        f'候補点: {_vector(report.point)}',
        '=' * 60,
        f'[{mark[report.stationary]}] 停留性  残差 {report.stationarity_residual:.3e}',
        f'[{mark[report.own_hessian_negative]}] 自分の行動について凹  ∂²f_i/∂x_i² = '
        f'{_vector(report.own_hessian_values, 4)}',
        f'[{mark[report.B_diag_dominant]}] B の狭義対角優位',
        f'[{mark[report.B_hurwitz]}] B がフルビッツ  max Re λ = {report.B_max_real_eig:.4g}',
    ]
    if report.kbar_B_hurwitz is not None:
        lines.append(f'[{mark[report.kbar_B_hurwitz]}] k̄B がフルビッツ  max Re λ = {report.kbar_B_max_real_eig:.4g}')
    if report.quadratic:
        q = report.quadratic
        lines.append(f'[{mark[q["H_diag_dominant"]]}] H の狭義対角優位')
        lines.append(f'[{mark[q["H_hurwitz"]]}] H がフルビッツ  max Re λ = {q["H_max_real_eig"]:.4g}')
        lines.append(f'[{mark[q["potential"]]}] ポテンシャルゲーム（H が対称）')
    if monotonicity is not None:
        lines.append(
            f'[{mark[not monotonicity.violated]}] 強単調性  m̂ = {monotonicity.m_hat:.6g}'
            f'（{monotonicity.n_samples} 組, seed={monotonicity.seed}）'
        )
    return '\n'.join(lines)
