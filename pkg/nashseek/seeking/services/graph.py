"""通信グラフとラプラシアン・推定系行列

推定値の並びはリポジトリ全体で行優先（プレイヤー優先、対象は内側）に固定:
    vec(Y) = (y_11, y_12, ..., y_1N, y_21, ..., y_NN)
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .exceptions import InvalidParams

logger = logging.getLogger(__name__)

GRAPH_PRESETS = ('cycle', 'path', 'complete', 'star')

# λ_min(M) がこれ以下なら −M はフルビッツでないとみなす
HURWITZ_THRESHOLD = 1e-10


@dataclass(frozen=True, eq=False)
class CommGraph:
    """無向・重みなしの通信グラフ

    Attributes:
        n: プレイヤー数
        adj: n×n 隣接行列（要素は0/1、対称、対角0）
        label: レポート用の表記（例: "cycle:5"）
    """
    n: int
    adj: np.ndarray
    label: str = ''

    def __post_init__(self):
        adj = np.array(self.adj, dtype=float)
        if self.n < 1:
            raise InvalidParams(f'プレイヤー数は1以上が必要です: n={self.n}')
        if adj.shape != (self.n, self.n):
            raise InvalidParams(f'隣接行列の形が不正です: {adj.shape} (n={self.n})')
        if not np.all((adj == 0) | (adj == 1)):
            raise InvalidParams('隣接行列の要素は0か1のみ（重み付きグラフは未対応）')
        if not np.array_equal(adj, adj.T):
            raise InvalidParams('隣接行列が対称ではありません（有向グラフは未対応）')
        if np.any(np.diag(adj) != 0):
            raise InvalidParams('隣接行列の対角成分は0である必要があります')
        adj.setflags(write=False)
        object.__setattr__(self, 'adj', adj)
        if not self.label:
            object.__setattr__(self, 'label', f'edges:{self.n}:{self.edge_string()}')

    @classmethod
    def from_edges(cls, n, edges, label=''):
        """1始まりの辺リスト [(i, j), ...] からグラフを作る"""
        adj = np.zeros((n, n))
        for edge in edges:
            i, j = (int(v) for v in edge)
            if not (1 <= i <= n and 1 <= j <= n):
                raise InvalidParams(f'辺 ({i}, {j}) の頂点番号が範囲外です (1..{n})')
            if i == j:
                raise InvalidParams(f'自己ループ ({i}, {j}) は使えません')
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1
        return cls(n=n, adj=adj, label=label)

    @classmethod
    def preset(cls, name, n):
        """名前付きプリセット（cycle / path / complete / star）"""
        name = (name or '').strip().lower()
        n = int(n)
        if name not in GRAPH_PRESETS:
            raise InvalidParams(f'未知のグラフプリセット: {name} (使用可能: {", ".join(GRAPH_PRESETS)})')
        if name == 'cycle':
            if n < 3:
                edges = [(1, 2)] if n == 2 else []
            else:
                edges = [(i, i % n + 1) for i in range(1, n + 1)]
        elif name == 'path':
            edges = [(i, i + 1) for i in range(1, n)]
        elif name == 'complete':
            edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        else:
            edges = [(1, j) for j in range(2, n + 1)]
        return cls.from_edges(n, edges, label=f'{name}:{n}')

    def edges(self):
        """1始まりの辺リスト（i < j）"""
        rows, cols = np.nonzero(np.triu(self.adj))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(rows, cols)]

    def edge_string(self):
        return ','.join(f'{i}-{j}' for i, j in self.edges())

    @property
    def degrees(self):
        return self.adj.sum(axis=1)

    def to_dict(self):
        return {'n': self.n, 'edges': [list(e) for e in self.edges()], 'label': self.label}


def parse_graph_spec(spec):
    """"cycle:5" や "edges:4:1-2,2-3,3-4" 形式の文字列からグラフを作る"""
    text = (spec or '').strip()
    parts = text.split(':')
    if len(parts) == 2 and parts[0].lower() in GRAPH_PRESETS:
        try:
            n = int(parts[1])
        except ValueError:
            raise InvalidParams(f'グラフ指定のプレイヤー数が不正です: {spec}')
        return CommGraph.preset(parts[0], n)
    if len(parts) == 3 and parts[0].lower() == 'edges':
        try:
            n = int(parts[1])
            edges = [tuple(int(v) for v in item.split('-')) for item in parts[2].split(',') if item.strip()]
        except ValueError:
            raise InvalidParams(f'辺リストの書式が不正です: {spec}')
        return CommGraph.from_edges(n, edges)
    raise InvalidParams(f'グラフ指定を解釈できません: {spec}（例: cycle:5, edges:4:1-2,2-3）')


def graph_from_config(section):
    """設定の graph セクション {"preset", "n"} / {"n", "edges"} から生成"""
    if section.get('edges') is not None:
        return CommGraph.from_edges(int(section['n']), section['edges'])
    return CommGraph.preset(section.get('preset', 'cycle'), section['n'])


def laplacian(g):
    """L = D − A"""
    return np.diag(g.adj.sum(axis=1)) - g.adj


def is_connected(g):
    """幅優先探索で全頂点に到達できるか"""
    if g.n == 1:
        return True
    order = breadth_first_order(csr_matrix(g.adj), 0, directed=False, return_predecessors=False)
    return len(order) == g.n


def estimation_matrix(g):
    """推定系の行列 M = L⊗I_N + B₀（B₀ = diag{a_ij}、行優先）"""
    n = g.n
    return np.kron(laplacian(g), np.eye(n)) + np.diag(g.adj.reshape(n * n))


def gained_estimation_matrix(g, gains):
    """ゲイン付き推定系の行列 diag{m_ij}·M"""
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (g.n, g.n):
        raise InvalidParams(f'推定ゲインの形が不正です: {gains.shape}')
    return np.diag(gains.reshape(g.n * g.n)) @ estimation_matrix(g)


def estimation_is_hurwitz(g, gains=None):
    """−M（ゲイン付きなら −diag{m}M）がフルビッツか"""
    if gains is None:
        eigs = np.linalg.eigvalsh(estimation_matrix(g))
        return bool(eigs.min() > HURWITZ_THRESHOLD)
    eigs = np.linalg.eigvals(gained_estimation_matrix(g, gains))
    return bool(eigs.real.min() > HURWITZ_THRESHOLD)


def algebraic_connectivity(g):
    """ラプラシアンの2番目に小さい固有値（n=1 なら 0）"""
    if g.n == 1:
        return 0.0
    return float(np.linalg.eigvalsh(laplacian(g))[1])


def random_connected_graph(n, rng, p=0.3):
    """ランダムな全域木に辺を足した連結グラフ"""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        edges.add(tuple(sorted((int(order[k]) + 1, int(parent) + 1))))
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if rng.random() < p:
                edges.add((i, j))
    return CommGraph.from_edges(n, sorted(edges))


def random_disconnected_graph(n, rng, p=0.5):
    """頂点を2つの組に分け、組をまたぐ辺を持たないグラフ（n ≥ 2）"""
    if n < 2:
        raise InvalidParams('非連結グラフには2頂点以上が必要です')
    cut = int(rng.integers(1, n))
    order = [int(v) + 1 for v in rng.permutation(n)]
    groups = (order[:cut], order[cut:])
    edges = []
    for group in groups:
        for a in range(len(group)):
            for b in range(a + 1, len(group)):
                if rng.random() < p:
                    edges.append((group[a], group[b]))
    return CommGraph.from_edges(n, edges)
