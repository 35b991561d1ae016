"""均衡探索ダイナミクス（行動の勾配更新 + リーダー追従型の合意推定）と固定ステップ RK4 積分

    dx_i/dt  = δ k̄_i ∂f_i/∂x_i(y_i)
    dy_ij/dt = −m_ij (Σ_k a_ik (y_ij − y_kj) + a_ij (y_ij − x_j))

状態は内部で z = [x, vec(Y)]（行優先）の1本のベクトルとして積分する。
"""
import logging
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DimensionMismatch, Diverged, InvalidParams
from .graph import is_connected

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e12

DEFAULT_DELTA = 0.05
DEFAULT_KBAR = 1.0
DEFAULT_GAIN = 1.0
DEFAULT_DT = 1e-3
DEFAULT_T_END = 100.0
DEFAULT_RECORD_EVERY = 10


def _positive_vector(name, value, shape):
    try:
        arr = np.array(np.broadcast_to(np.asarray(value, dtype=float), shape))
    except ValueError:
        raise DimensionMismatch(f'{name} の形が不正です: {np.shape(value)} (期待: {shape})')
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidParams(f'{name} の要素はすべて正である必要があります')
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SeekerParams:
    """探索パラメータ

    Attributes:
        n: プレイヤー数
        delta: 時間スケール分離 δ > 0
        kbar: k̄_i（スカラーなら全員同じ値）
        gains: 推定ゲイン m_ij（スカラーなら全要素同じ値）
        dt: 積分ステップ
        t_end: 積分区間の終端
        record_every: 何ステップごとにサンプルを記録するか
    """
    n: int
    delta: float = DEFAULT_DELTA
    kbar: np.ndarray = DEFAULT_KBAR
    gains: np.ndarray = DEFAULT_GAIN
    dt: float = DEFAULT_DT
    t_end: float = DEFAULT_T_END
    record_every: int = DEFAULT_RECORD_EVERY

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParams(f'プレイヤー数は1以上が必要です: n={self.n}')
        if not (np.isfinite(self.delta) and self.delta > 0):
            raise InvalidParams(f'δ は正である必要があります: {self.delta}')
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidParams(f'dt は正である必要があります: {self.dt}')
        if not (np.isfinite(self.t_end) and self.t_end >= self.dt):
            raise InvalidParams(f't_end は dt 以上が必要です: t_end={self.t_end}, dt={self.dt}')
        if int(self.record_every) < 1:
            raise InvalidParams(f'record_every は1以上が必要です: {self.record_every}')
        object.__setattr__(self, 'kbar', _positive_vector('k̄', self.kbar, (self.n,)))
        object.__setattr__(self, 'gains', _positive_vector('推定ゲイン m', self.gains, (self.n, self.n)))
        object.__setattr__(self, 'record_every', int(self.record_every))

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))

    def with_delta(self, delta):
        return replace(self, delta=delta)

    def to_dict(self):
        return {
            'delta': self.delta,
            'kbar': self.kbar.tolist(),
            'gains': self.gains.tolist(),
            'dt': self.dt,
            't_end': self.t_end,
            'record_every': self.record_every,
        }


@dataclass(eq=False)
class SeekerState:
    """行動 x と推定 Y（Y[i][j] はプレイヤー i によるプレイヤー j の行動の推定）"""
    x: np.ndarray
    Y: np.ndarray

    @property
    def n(self):
        return self.x.shape[0]

    def flat(self):
        return np.concatenate([self.x, self.Y.reshape(-1)])

    @classmethod
    def from_flat(cls, z, n):
        return cls(x=z[:n].copy(), Y=z[n:].reshape(n, n).copy())

    @classmethod
    def consensus(cls, x):
        """Y = 1⊗x（準定常状態）"""
        x = np.asarray(x, dtype=float)
        return cls(x=x.copy(), Y=np.tile(x, (x.shape[0], 1)))


def consensus_residual(state, x=None):
    """max_ij |Y_ij − x_j|"""
    x = state.x if x is None else np.asarray(x, dtype=float)
    if state.Y.size == 0:
        return 0.0
    return float(np.max(np.abs(state.Y - x[np.newaxis, :])))


@dataclass(eq=False)
class Trajectory:
    """記録されたサンプル列（時刻は等間隔）"""
    times: np.ndarray
    xs: np.ndarray
    Ys: np.ndarray
    consensus_residual: np.ndarray
    action_error: np.ndarray = None
    x_star: np.ndarray = None

    @property
    def states(self):
        return [SeekerState(x=x, Y=Y) for x, Y in zip(self.xs, self.Ys)]

    @property
    def final_state(self):
        return SeekerState(x=self.xs[-1], Y=self.Ys[-1])

    @property
    def final_error(self):
        return None if self.action_error is None else float(self.action_error[-1])

    @property
    def x_matrix(self):
        """(サンプル数, n) の行動行列"""
        return self.xs

    @property
    def horizon(self):
        return float(self.times[-1] - self.times[0])

    def __len__(self):
        return len(self.times)


def _check_state(game, graph, params, x, Y):
    n = game.n
    if graph.n != n or params.n != n:
        raise DimensionMismatch(f'プレイヤー数が一致しません: game={n}, graph={graph.n}, params={params.n}')
    if x.shape != (n,) or Y.shape != (n, n):
        raise DimensionMismatch(f'状態の次元が不正です: x={x.shape}, Y={Y.shape} (n={n})')


def _estimation_rhs(adj, gains, x, Y):
    # diff[i, k, j] = Y_ij − Y_kj（Y = 1⊗x なら各項が厳密に0）
    diff = Y[:, np.newaxis, :] - Y[np.newaxis, :, :]
    return -gains * (np.einsum('ik,ikj->ij', adj, diff) + adj * (Y - x[np.newaxis, :]))


def _action_rhs(game, params, x, Y):
    grads = game.estimate_gradients(Y)
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        i = int(bad[0])
        raise Diverged(f'プレイヤー {i + 1} の勾配が非有限です', player=i, x=x.copy(), Y=Y.copy())
    return params.delta * params.kbar * grads


def rhs(game, graph, params, state):
    """(dx, dY) を返す"""
    x = np.asarray(state.x, dtype=float)
    Y = np.asarray(state.Y, dtype=float)
    _check_state(game, graph, params, x, Y)
    return _action_rhs(game, params, x, Y), _estimation_rhs(graph.adj, params.gains, x, Y)


def _first_bad_player(z, n):
    with np.errstate(invalid='ignore'):
        bad = ~np.isfinite(z) | (np.abs(z) > DIVERGENCE_THRESHOLD)
    idx = int(np.flatnonzero(bad)[0])
    return idx if idx < n else (idx - n) // n


def _rk4(f, z, h):
    k1 = f(z)
    k2 = f(z + 0.5 * h * k1)
    k3 = f(z + 0.5 * h * k2)
    k4 = f(z + h * k3)
    return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run_rk4(f, z0, n, params, label):
    """固定ステップ RK4。record_every ステップごとに状態を記録し、発散したら Diverged"""
    steps = params.n_steps
    dt = params.dt
    n_samples = steps // params.record_every + 1
    samples = np.empty((n_samples, z0.shape[0]))
    samples[0] = z0
    progress_every = max(1, steps // 10)

    z = z0
    k = 0
    try:
        with np.errstate(over='ignore', invalid='ignore'):
            for k in range(1, steps + 1):
                z = _rk4(f, z, dt)
                if not np.all(np.abs(z) <= DIVERGENCE_THRESHOLD):
                    player = _first_bad_player(z, n)
                    raise Diverged(
                        f'{k * dt:g} で状態が発散しました（プレイヤー {player + 1}）',
                        player=player, x=z[:n].copy(), Y=z[n:].reshape(n, n).copy(),
                    )
                if k % params.record_every == 0:
                    samples[k // params.record_every] = z
                if k % progress_every == 0:
                    logger.debug(f'{label}: t={k * dt:g}/{params.t_end:g}')
    except Diverged as e:
        e.time = k * dt
        e.step = k
        logger.warning(f'{label}: 発散 t={e.time:g} step={k} player={e.player}')
        raise
    times = np.arange(n_samples) * (params.record_every * dt)
    return times, samples


def _build_trajectory(times, samples, n, x_star):
    xs = samples[:, :n]
    Ys = samples[:, n:].reshape(-1, n, n)
    residual = np.max(np.abs(Ys - xs[:, np.newaxis, :]), axis=(1, 2))
    error = None
    if x_star is not None:
        x_star = np.asarray(x_star, dtype=float)
        error = np.linalg.norm(xs - x_star, axis=1)
    return Trajectory(times=times, xs=xs, Ys=Ys, consensus_residual=residual,
                      action_error=error, x_star=x_star)


def integrate(game, graph, params, x0, Y0=None, x_star=None):
    """(x0, Y0) から [0, t_end] を古典的4次ルンゲ=クッタで積分する

    Y0 を省略すると各行を x0 にする。同じ入力からはビット単位で同じ軌道になる。
    """
    n = game.n
    x0 = np.asarray(x0, dtype=float)
    Y0 = np.tile(x0, (n, 1)) if Y0 is None else np.asarray(Y0, dtype=float)
    _check_state(game, graph, params, x0, Y0)
    if x_star is not None and np.shape(x_star) != (n,):
        raise DimensionMismatch(f'x* の次元が不正です: {np.shape(x_star)} (n={n})')
    if not np.all(np.isfinite(x0)) or not np.all(np.isfinite(Y0)):
        raise InvalidParams('初期状態に非有限の値があります')
    if not is_connected(graph):
        logger.warning(f'通信グラフ {graph.label} が非連結です（推定は合意しません）')

    adj = graph.adj
    gains = params.gains

    def f(z):
        x = z[:n]
        Y = z[n:].reshape(n, n)
        dY = _estimation_rhs(adj, gains, x, Y)
        return np.concatenate([_action_rhs(game, params, x, Y), dY.reshape(-1)])

    label = f'{game.name}@{graph.label}'
    logger.info(f'積分開始: {label} δ={params.delta:g} dt={params.dt:g} t_end={params.t_end:g}')
    times, samples = _run_rk4(f, np.concatenate([x0, Y0.reshape(-1)]), n, params, label)
    traj = _build_trajectory(times, samples, n, x_star)
    logger.info(f'積分終了: {label} samples={len(traj)} 合意残差={traj.consensus_residual[-1]:.3e}')
    return traj


def reduced_rhs(game, params, x):
    """δ → 0 の縮約系（遅い時間 τ = δt）: dx_i/dτ = k̄_i ∂f_i/∂x_i(x)"""
    x = np.asarray(x, dtype=float)
    return params.kbar * game.estimate_gradients(np.tile(x, (game.n, 1)))


def integrate_reduced(game, params, x0, x_star=None):
    """縮約系を元の時間軸 dx/dt = δ·reduced_rhs で積分する（比較用のベースライン）"""
    n = game.n
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,) or params.n != n:
        raise DimensionMismatch(f'x0 の次元が不正です: {x0.shape} (n={n})')

    def f(x):
        grads = reduced_rhs(game, params, x)
        if not np.all(np.isfinite(grads)):
            i = int(np.flatnonzero(~np.isfinite(grads))[0])
            raise Diverged(f'プレイヤー {i + 1} の勾配が非有限です', player=i, x=x.copy())
        return params.delta * grads

    times, samples = _run_rk4(f, x0.copy(), n, params, f'{game.name}@reduced')
    xs = samples
    Ys = np.repeat(xs[:, np.newaxis, :], n, axis=1)
    error = None if x_star is None else np.linalg.norm(xs - np.asarray(x_star, dtype=float), axis=1)
    return Trajectory(times=times, xs=xs, Ys=Ys, consensus_residual=np.zeros(len(times)),
                      action_error=error, x_star=None if x_star is None else np.asarray(x_star, dtype=float))
