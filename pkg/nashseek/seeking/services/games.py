"""ゲーム定義（利得関数・自分の行動に関する偏微分）と二次ゲームの閉形式解

プレイヤー番号はコード上0始まり（プレイヤー i はインデックス i−1）。
勾配は各ゲームで解析的に与え、grad_check で差分と突き合わせて転記ミスを防ぐ。
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, InvalidParams, NotQuadratic, SingularMatrix

logger = logging.getLogger(__name__)

# cond(H) がこれを超えたら特異とみなす
SINGULAR_CONDITION = 1e12


class Game:
    """N人ゲームの基底クラス

    サブクラスは payoff(i, z) と grad(i, z) を実装する。
    grad(i, z) は ∂f_i/∂x_i を z（ダイナミクスではプレイヤー i の推定ベクトル y_i）で評価した値。
    """
    name = 'game'

    def __init__(self, n):
        self.n = int(n)

    def payoff(self, i, z):
        raise NotImplementedError

    def grad(self, i, z):
        raise NotImplementedError

    def estimate_gradients(self, Y):
        """各行 Y[i] で grad(i, ·) を評価したベクトル（ダイナミクスのホットパス）"""
        return np.array([self.grad(i, Y[i]) for i in range(self.n)])

    def second_partial(self, i, j, z):
        """∂²f_i/∂x_i∂x_j の解析値（未提供なら None で差分にフォールバック）"""
        return None

    def to_dict(self):
        return {'name': self.name}

    def __repr__(self):
        return f'{type(self).__name__}(n={self.n})'


class FunctionGame(Game):
    """任意の利得関数・勾配関数のリストから作るゲーム（ユーザー登録用）"""

    def __init__(self, n, payoffs, grads, name='custom'):
        if not (len(payoffs) == len(grads) == n):
            raise DimensionMismatch(f'payoffs/grads の数がプレイヤー数と一致しません (n={n})')
        super().__init__(n)
        self._payoffs = list(payoffs)
        self._grads = list(grads)
        self.name = name

    def payoff(self, i, z):
        return float(self._payoffs[i](np.asarray(z, dtype=float)))

    def grad(self, i, z):
        return float(self._grads[i](np.asarray(z, dtype=float)))


class QuadraticGame(Game):
    """二次ゲーム f_i(x) = ½ΣΣ h^i_jk x_j x_k + Σ v^i_j x_j + g_i

    Attributes:
        h: n×n×n テンソル（h[i][j][k] = h^i_jk、各 h[i] は対称）
        v: n×n 行列（v[i][j] = v^i_j）
        g: 定数項ベクトル
    """
    name = 'quadratic'

    def __init__(self, h, v, g=None, name=None):
        h = np.array(h, dtype=float)
        v = np.array(v, dtype=float)
        n = h.shape[0]
        super().__init__(n)
        if h.shape != (n, n, n):
            raise DimensionMismatch(f'h の形が不正です: {h.shape}')
        if v.shape != (n, n):
            raise DimensionMismatch(f'v の形が不正です: {v.shape}')
        g = np.zeros(n) if g is None else np.array(g, dtype=float)
        if g.shape != (n,):
            raise DimensionMismatch(f'g の形が不正です: {g.shape}')
        for i in range(n):
            if not np.allclose(h[i], h[i].T, rtol=0.0, atol=1e-12):
                raise InvalidParams(f'h^{i + 1} が対称ではありません（h^i_jk = h^i_kj が必要）')
            if not h[i, i, i] < 0:
                raise InvalidParams(f'h^{i + 1}_{i + 1}{i + 1} は負である必要があります: {h[i, i, i]}')
        for arr in (h, v, g):
            arr.setflags(write=False)
        self.h = h
        self.v = v
        self.g = g
        if name:
            self.name = name
        # H の行 i = [h^i_i1 ... h^i_iN]、v ベクトル = [v^1_1, ..., v^N_N]
        self.H = np.array([h[i, i, :] for i in range(n)])
        self.v_vector = np.diag(v).copy()

    @classmethod
    def from_matrices(cls, H, v, g=None, name=None):
        """H と v ベクトルから、勾配が H x + v になる最小のテンソル表現を作る"""
        H = np.array(H, dtype=float)
        v = np.array(v, dtype=float).reshape(-1)
        n = H.shape[0]
        if H.shape != (n, n) or v.shape != (n,):
            raise DimensionMismatch(f'H/v の形が不正です: {H.shape}, {v.shape}')
        h = np.zeros((n, n, n))
        for i in range(n):
            h[i, i, :] = H[i]
            h[i, :, i] = H[i]
        return cls(h, np.diag(v), g, name=name)

    @classmethod
    def from_config(cls, section):
        """設定の {"h": [n個の行列], "v": 行列, "g": ベクトル} または {"H", "v"} から生成"""
        if 'H' in section:
            return cls.from_matrices(section['H'], section['v'], section.get('g'))
        return cls(section['h'], section['v'], section.get('g'))

    def payoff(self, i, z):
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.h[i] @ z + self.v[i] @ z + self.g[i])

    def grad(self, i, z):
        z = np.asarray(z, dtype=float)
        return float(self.H[i] @ z + self.v_vector[i])

    def second_partial(self, i, j, z):
        return float(self.H[i, j])

    def estimate_gradients(self, Y):
        return np.einsum('ij,ij->i', self.H, Y) + self.v_vector

    def is_potential(self, tol=1e-12):
        """H が対称なら自分の行動に関する偏微分が共通のポテンシャルから導かれる"""
        return bool(np.allclose(self.H, self.H.T, rtol=0.0, atol=tol))

    def to_dict(self):
        return {
            'name': self.name,
            'h': self.h.tolist(),
            'v': self.v.tolist(),
            'g': self.g.tolist(),
        }


class Example1Game(Game):
    """非二次ゲーム（局所収束の例）

    f_1 = −x_1³ + 3x_1x_2
    f_2 = −(−2x_1 + 4x_2 + ½x_4 + x_5)² + 48x_2
    f_3 = −(x_1 + 4x_3 − x_4 − x_5)²
    f_4 = −(2x_1 + 4x_3 + 8x_4 − x_5)²
    f_5 = −(x_1 + 4x_3 + 8x_4 + 17x_5)²
    """
    name = 'example1'

    # プレイヤー2〜5の二乗項の係数（行0は未使用）
    COEFFS = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [-2.0, 4.0, 0.0, 0.5, 1.0],
        [1.0, 0.0, 4.0, -1.0, -1.0],
        [2.0, 0.0, 4.0, 8.0, -1.0],
        [1.0, 0.0, 4.0, 8.0, 17.0],
    ])
    LINEAR = np.array([0.0, 48.0, 0.0, 0.0, 0.0])

    def __init__(self):
        super().__init__(5)

    def payoff(self, i, z):
        z = np.asarray(z, dtype=float)
        if i == 0:
            return float(-z[0] ** 3 + 3.0 * z[0] * z[1])
        s = self.COEFFS[i] @ z
        return float(-s * s + self.LINEAR[i] * z[i])

    def grad(self, i, z):
        z = np.asarray(z, dtype=float)
        if i == 0:
            return float(-3.0 * z[0] ** 2 + 3.0 * z[1])
        return float(-2.0 * self.COEFFS[i, i] * (self.COEFFS[i] @ z) + self.LINEAR[i])

    def estimate_gradients(self, Y):
        s = np.einsum('ij,ij->i', self.COEFFS, Y)
        out = -2.0 * np.diag(self.COEFFS) * s + self.LINEAR
        out[0] = -3.0 * Y[0, 0] ** 2 + 3.0 * Y[0, 1]
        return out


class Example2Game(Game):
    """共通の関数 f に重みをかけたポテンシャル型ゲーム f_i = m_i f + d_i

    f(x) = −(x_1⁴/12 + 5x_1² + 2x_1x_2 + 5x_2² + x_2x_3 + x_2x_5
             + 5/2 x_3² + x_3x_4 + 5x_4² + 2x_4x_5 + 3x_5²)
    x = 0 で最大。4次項のため勾配は大域リプシッツではない（収束は半大域的）。
    """
    name = 'example2'

    DEFAULT_M = (1.0, 5.0, 2.0, 3.0, 2.0)

    # f の二次部分のヘッセ行列の符号反転（½xᵀQx が括弧内の二次部分）
    Q = np.array([
        [10.0, 2.0, 0.0, 0.0, 0.0],
        [2.0, 10.0, 1.0, 0.0, 1.0],
        [0.0, 1.0, 5.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 10.0, 2.0],
        [0.0, 1.0, 0.0, 2.0, 6.0],
    ])

    def __init__(self, m=None, d=None):
        super().__init__(5)
        m = np.array(self.DEFAULT_M if m is None else m, dtype=float)
        d = np.zeros(5) if d is None else np.array(d, dtype=float)
        if m.shape != (5,) or d.shape != (5,):
            raise DimensionMismatch('m と d は長さ5のベクトルが必要です')
        if np.any(m <= 0):
            raise InvalidParams(f'm_i は正である必要があります: {m.tolist()}')
        self.m = m
        self.d = d

    @classmethod
    def potential(cls, z):
        z = np.asarray(z, dtype=float)
        return float(-(z[0] ** 4 / 12.0 + 0.5 * z @ cls.Q @ z))

    def payoff(self, i, z):
        return float(self.m[i] * self.potential(z) + self.d[i])

    def grad(self, i, z):
        z = np.asarray(z, dtype=float)
        partial = -(self.Q[i] @ z)
        if i == 0:
            partial -= z[0] ** 3 / 3.0
        return float(self.m[i] * partial)

    def estimate_gradients(self, Y):
        partial = -np.einsum('ij,ij->i', self.Q, Y)
        partial[0] -= Y[0, 0] ** 3 / 3.0
        return self.m * partial

    def to_dict(self):
        return {'name': self.name, 'params': {'m': self.m.tolist(), 'd': self.d.tolist()}}


EXAMPLE3_DEFAULTS = {
    'rho': [1.0, 1.0, 1.0, 1.0, 1.0],
    'p0': 0.1,
    'q0': 10.0,
    'xd': [10.0, 15.0, 20.0, 25.0, 30.0],
}


def make_example1():
    return Example1Game()


def make_example2(m=None, d=None):
    return Example2Game(m=m, d=d)


def make_example3(params=None):
    """空調のエネルギー消費ゲーム f_i = −ρ_i(x_i − x_i^d)² − (p₀Σx_j + q₀)x_i

    二次ゲームなので QuadraticGame として返す。
    """
    params = {**EXAMPLE3_DEFAULTS, **(params or {})}
    rho = np.array(params['rho'], dtype=float)
    xd = np.array(params['xd'], dtype=float)
    p0 = float(params['p0'])
    q0 = float(params['q0'])
    n = len(rho)
    if xd.shape != (n,):
        raise DimensionMismatch(f'rho と xd の長さが一致しません: {n} vs {xd.shape}')
    if np.any(rho <= 0):
        raise InvalidParams(f'ρ_i は正である必要があります: {rho.tolist()}')
    if p0 <= 0:
        raise InvalidParams(f'p₀ は正である必要があります: {p0}')

    h = np.zeros((n, n, n))
    v = np.zeros((n, n))
    g = np.zeros(n)
    for i in range(n):
        h[i, i, :] = -p0
        h[i, :, i] = -p0
        h[i, i, i] = -2.0 * rho[i] - 2.0 * p0
        v[i, i] = 2.0 * rho[i] * xd[i] - q0
        g[i] = -rho[i] * xd[i] ** 2
    return QuadraticGame(h, v, g, name='example3')


def pseudogradient(game, x):
    """∂G(x)/∂x = [∂f_1/∂x_1(x), ..., ∂f_N/∂x_N(x)]"""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n,):
        raise DimensionMismatch(f'x の次元が不正です: {x.shape} (n={game.n})')
    return np.array([game.grad(i, x) for i in range(game.n)])


def grad_check(game, x, step=1e-5):
    """解析勾配と中心差分の最大相対誤差"""
    if step <= 0:
        raise InvalidParams(f'差分ステップは正である必要があります: {step}')
    x = np.asarray(x, dtype=float)
    worst = 0.0
    for i in range(game.n):
        plus = x.copy()
        minus = x.copy()
        plus[i] += step
        minus[i] -= step
        fd = (game.payoff(i, plus) - game.payoff(i, minus)) / (2.0 * step)
        analytic = game.grad(i, x)
        worst = max(worst, abs(analytic - fd) / max(1.0, abs(analytic)))
    return worst


def quadratic_nash(qg):
    """唯一のナッシュ均衡 x* = −H⁻¹v"""
    if not isinstance(qg, QuadraticGame):
        raise NotQuadratic(f'{qg.name} は二次ゲームではありません')
    condition = np.linalg.cond(qg.H)
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        raise SingularMatrix(f'H が特異です (cond={condition:.3e})', condition=condition)
    return -np.linalg.solve(qg.H, qg.v_vector)


@dataclass
class NashCandidate:
    """均衡候補点と停留性の残差"""
    x_star: np.ndarray
    stationarity_residual: float
    report: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'x_star': [float(v) for v in self.x_star],
            'stationarity_residual': self.stationarity_residual,
            'report': self.report,
        }


def nash_candidate(game, x, report=None):
    x = np.asarray(x, dtype=float)
    residual = float(np.max(np.abs(pseudogradient(game, x)))) if game.n else 0.0
    return NashCandidate(x_star=x, stationarity_residual=residual, report=report or {})


# ========================================
# ゲームのレジストリとプリセット
# ========================================
# プリセットは組み込み例を1コマンドで回すための推奨設定。
# δ・k̄ は実験的に収束を確認した値（δ* の解析値ではない）。

GAME_REGISTRY = {}


def register_game(name, factory, preset=None):
    """ゲームを名前で登録する（factory は params dict を受け取る）"""
    GAME_REGISTRY[name] = {'factory': factory, 'preset': preset or {}}
    logger.debug(f'ゲームを登録しました: {name}')


def available_games():
    return sorted(GAME_REGISTRY)


def get_game(name, params=None):
    try:
        entry = GAME_REGISTRY[name]
    except KeyError:
        raise InvalidParams(f'未知のゲーム: {name} (使用可能: {", ".join(available_games())})')
    return entry['factory'](params or {})


def get_game_preset(name):
    entry = GAME_REGISTRY.get(name)
    return dict(entry['preset']) if entry else {}


register_game('example1', lambda params: make_example1(), preset={
    'graph': {'preset': 'cycle', 'n': 5},
    'seeker': {
        'delta': 0.02,
        'kbar': [1.0, 0.25, 0.25, 0.0625, 0.015625],
        'dt': 0.05,
        't_end': 800.0,
        'record_every': 10,
    },
    'initial': {'x0': [1.0, 2.0, 0.0, 0.0, 0.0]},
    'x_star': [1.5, 2.25, -19.0 / 48.0, -1.0 / 6.0, 1.0 / 12.0],
})

register_game('example2', lambda params: make_example2(params.get('m'), params.get('d')), preset={
    'graph': {'preset': 'cycle', 'n': 5},
    'seeker': {
        'delta': 1e-3,
        'kbar': [1.0, 0.2, 0.5, 1.0 / 3.0, 0.5],
        'dt': 0.1,
        't_end': 5000.0,
        'record_every': 20,
    },
    'initial': {'x0': [20.0, 20.0, 20.0, 20.0, 20.0]},
    'x_star': [0.0, 0.0, 0.0, 0.0, 0.0],
})

register_game('example3', lambda params: make_example3(params), preset={
    'graph': {'preset': 'cycle', 'n': 5},
    'seeker': {
        'delta': 0.02,
        'kbar': [1.0, 1.0, 1.0, 1.0, 1.0],
        'dt': 0.05,
        't_end': 500.0,
        'record_every': 10,
    },
    'initial': {'x0': [-10.0, -10.0, -10.0, -10.0, -10.0]},
})

register_game('quadratic', QuadraticGame.from_config)
