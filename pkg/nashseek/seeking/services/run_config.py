"""実行設定の解決（フラグ > 設定ファイル > ゲームのプリセット > 既定値）

解決済みの設定は JSON にそのまま書き出せる辞書で、それを読み戻すと同じ実行を再現する。
"""
import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    DEFAULT_DELTA, DEFAULT_DT, DEFAULT_GAIN, DEFAULT_KBAR, DEFAULT_RECORD_EVERY,
    DEFAULT_T_END, SeekerParams,
)
from .analysis import DEFAULT_BURN_IN, DEFAULT_C, DEFAULT_FD_STEP, DEFAULT_RATE_WINDOW, DEFAULT_TOL
from .exceptions import ConfigError, SeekingError
from .games import QuadraticGame, get_game, get_game_preset, quadratic_nash
from .graph import CommGraph, graph_from_config, parse_graph_spec

logger = logging.getLogger(__name__)

DEFAULT_GAME = 'example3'

DEFAULT_CONFIG = {
    'game': {'name': DEFAULT_GAME, 'params': {}},
    'graph': {'preset': 'cycle', 'n': None, 'edges': None},
    'seeker': {
        'delta': DEFAULT_DELTA,
        'kbar': DEFAULT_KBAR,
        'gains': DEFAULT_GAIN,
        'dt': DEFAULT_DT,
        't_end': DEFAULT_T_END,
        'record_every': DEFAULT_RECORD_EVERY,
    },
    'initial': {'x0': 0.0, 'Y0': None},
    'x_star': None,
    'analysis': {
        'assumptions': False,
        'lyapunov': False,
        'rate': True,
        'reduced': False,
        'search_delta': False,
        'c': DEFAULT_C,
        'burn_in': DEFAULT_BURN_IN,
        'window': list(DEFAULT_RATE_WINDOW),
        'fd_step': DEFAULT_FD_STEP,
        'tol': DEFAULT_TOL,
        'monotonicity': None,
    },
    'output': {'dir': None, 'name': None, 'include_estimates': False},
}

# 組み込みゲームごとの単調性チェックの既定の箱
MONOTONICITY_PRESETS = {
    'example2': {'box': [-25.0, 25.0], 'samples': 1000, 'seed': 0},
    'example3': {'box': [-50.0, 50.0], 'samples': 1000, 'seed': 0},
}


def deep_merge(base, override):
    """override の値（None 以外）で base を再帰的に上書きした新しい辞書"""
    result = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = deep_merge(result[key], value)
        elif value is not None:
            result[key] = copy.deepcopy(value)
    return result


def load_config_file(path):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError({'config': [f'ファイルが見つかりません: {path}']})
    except json.JSONDecodeError as e:
        raise ConfigError({'config': [f'JSON の読み込みに失敗しました: {e}']})
    if not isinstance(data, dict):
        raise ConfigError({'config': ['設定のトップレベルはオブジェクトが必要です']})
    return data


def parse_vector(text):
    """"20,20,20" や "-10" を数値リスト/スカラーに"""
    items = [item.strip() for item in str(text).split(',') if item.strip()]
    try:
        values = [float(item) for item in items]
    except ValueError:
        raise ConfigError({'vector': [f'数値のリストとして解釈できません: {text}']})
    if not values:
        raise ConfigError({'vector': [f'空のベクトルです: {text}']})
    return values[0] if len(values) == 1 else values


def parse_player_vector(text, n, field):
    """スカラーなら n 個に複製、リストなら長さ n を要求して ndarray に"""
    value = parse_vector(text)
    if isinstance(value, list) and len(value) != n:
        raise ConfigError({field: [f'長さ {n} のベクトルが必要です（{len(value)} 個指定されています）']})
    return np.array(np.broadcast_to(np.asarray(value, dtype=float), (n,)))


def graph_section_from_spec(spec):
    try:
        graph = parse_graph_spec(spec)
    except SeekingError as e:
        raise ConfigError({'graph': [str(e)]})
    if graph.label.startswith('edges:'):
        return {'preset': None, 'n': graph.n, 'edges': [list(e) for e in graph.edges()]}
    return {'preset': graph.label.split(':')[0], 'n': graph.n, 'edges': None}


def flags_to_overrides(options):
    """管理コマンドのオプションを設定の上書き辞書に変換する（未指定は None）"""
    get = options.get
    overrides = {
        'game': {'name': get('game')},
        'seeker': {
            'delta': get('delta'),
            'kbar': parse_vector(get('kbar')) if get('kbar') else None,
            'dt': get('dt'),
            't_end': get('t_end'),
            'record_every': get('record_every'),
        },
        'initial': {'x0': parse_vector(get('x0')) if get('x0') else None},
        'x_star': parse_vector(get('x_star')) if get('x_star') else None,
        'analysis': {
            'assumptions': True if get('assumptions') else None,
            'lyapunov': True if get('lyapunov') else None,
            'reduced': True if get('reduced') else None,
            'search_delta': True if get('search_delta') else None,
        },
        'output': {
            'dir': get('output_dir'),
            'name': get('name'),
            'include_estimates': True if get('include_estimates') else None,
        },
    }
    if get('graph'):
        overrides['graph'] = graph_section_from_spec(get('graph'))
    return overrides


def _validate_section(form_class, section, data):
    form = form_class(data=data)
    if form.is_valid():
        return form.cleaned_data
    raise ConfigError({f'{section}.{field}': list(msgs) for field, msgs in form.errors.items()})


def _as_list(value, n):
    """スカラー/リストを長さ n の float リストに（JSON に書ける形）"""
    return [float(v) for v in np.broadcast_to(np.asarray(value, dtype=float), (n,))]


@dataclass
class ResolvedRun:
    """解決済みの設定と、そこから作ったオブジェクト"""
    config: dict
    game: object
    graph: CommGraph
    params: SeekerParams
    x0: np.ndarray
    Y0: np.ndarray = None
    x_star: np.ndarray = None

    def dump(self):
        return json.dumps(self.config, ensure_ascii=False, indent=2)


def _build_game(section):
    try:
        if section['name'] == 'quadratic':
            return QuadraticGame.from_config(section)
        return get_game(section['name'], section.get('params') or {})
    except SeekingError as e:
        raise ConfigError({'game': [str(e)]})
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError({'game': [f'ゲームを構築できません: {e}']})


def resolve_config(file_config=None, overrides=None):
    """既定値・プリセット・設定ファイル・フラグを重ねて ResolvedRun を作る"""
    from ..forms import (
        AnalysisSectionForm, GameSectionForm, GraphSectionForm, InitialSectionForm,
        MonotonicitySectionForm, OutputSectionForm, SeekerSectionForm,
    )

    file_config = file_config or {}
    overrides = overrides or {}
    name = ((overrides.get('game') or {}).get('name')
            or (file_config.get('game') or {}).get('name')
            or DEFAULT_GAME)
    preset = get_game_preset(name)
    if name in MONOTONICITY_PRESETS:
        preset = deep_merge(preset, {'analysis': {'monotonicity': MONOTONICITY_PRESETS[name]}})

    # ゲームが変わるときはファイル側のゲーム固有設定を持ち込まない
    file_game = file_config.get('game') or {}
    if file_game.get('name') not in (None, name):
        file_config = {k: v for k, v in file_config.items() if k != 'game'}

    config = deep_merge(deep_merge(deep_merge(DEFAULT_CONFIG, preset), file_config), overrides)
    config['game']['name'] = name
    # グラフ指定は部分的に混ぜず丸ごと置き換える（ファイル側の edges を残さない）
    if overrides.get('graph'):
        config['graph'] = {'preset': None, 'n': None, 'edges': None, **copy.deepcopy(overrides['graph'])}

    game_data = _validate_section(GameSectionForm, 'game', config['game'])
    game = _build_game({**config['game'], **{k: v for k, v in game_data.items() if v is not None}})
    n = game.n

    if config['graph'].get('n') is None:
        config['graph']['n'] = n
    graph_data = _validate_section(GraphSectionForm, 'graph', config['graph'])
    try:
        graph = graph_from_config({
            'preset': graph_data['preset'] or 'cycle',
            'n': graph_data['n'],
            'edges': graph_data['edges'],
        })
    except SeekingError as e:
        raise ConfigError({'graph': [str(e)]})
    if graph.n != n:
        raise ConfigError({'graph.n': [f'グラフのプレイヤー数 {graph.n} がゲームの {n} と一致しません']})

    seeker = _validate_section(SeekerSectionForm, 'seeker', config['seeker'])
    try:
        params = SeekerParams(
            n=n, delta=seeker['delta'], kbar=seeker['kbar'], gains=seeker['gains'],
            dt=seeker['dt'], t_end=seeker['t_end'], record_every=seeker['record_every'],
        )
    except SeekingError as e:
        raise ConfigError({'seeker': [str(e)]})

    initial = _validate_section(InitialSectionForm, 'initial', config['initial'])
    try:
        x0 = np.array(_as_list(initial['x0'], n))
    except ValueError:
        raise ConfigError({'initial.x0': [f'長さ {n} のベクトルが必要です']})
    Y0 = None
    if initial.get('Y0') is not None:
        Y0 = np.array(initial['Y0'], dtype=float)
        if Y0.shape != (n, n):
            raise ConfigError({'initial.Y0': [f'{n}×{n} の行列が必要です: {Y0.shape}']})

    analysis = _validate_section(AnalysisSectionForm, 'analysis', config['analysis'])
    if config['analysis'].get('monotonicity') is not None:
        _validate_section(MonotonicitySectionForm, 'analysis.monotonicity', config['analysis']['monotonicity'])
    _validate_section(OutputSectionForm, 'output', config['output'])

    x_star = None
    if config.get('x_star') is not None:
        try:
            x_star = np.array(_as_list(config['x_star'], n))
        except ValueError:
            raise ConfigError({'x_star': [f'長さ {n} のベクトルが必要です']})
    elif isinstance(game, QuadraticGame):
        try:
            x_star = quadratic_nash(game)
        except SeekingError as e:
            logger.warning(f'x* を閉形式で求められません: {e}')

    # 解決済みの値をそのまま書き出せる形にそろえる
    config['seeker'] = {**params.to_dict()}
    config['initial'] = {'x0': x0.tolist(), 'Y0': None if Y0 is None else Y0.tolist()}
    config['x_star'] = None if x_star is None else [float(v) for v in x_star]
    config['graph'] = {
        'preset': None if graph_data['edges'] else (graph_data['preset'] or 'cycle'),
        'n': graph.n,
        'edges': graph_data['edges'],
    }
    config['analysis']['window'] = analysis['window']
    return ResolvedRun(config=config, game=game, graph=graph, params=params,
                       x0=x0, Y0=Y0, x_star=x_star)
