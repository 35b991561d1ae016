"""仮定チェック・フルビッツ判定・リアプノフ診断・収束レート推定

数値的に確認できる範囲だけを扱う:
- 強単調性は箱の中のサンプル対で確認する（証明ではない）
- δ* は解析的に求めず、search_working_delta で経験的に探す
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .exceptions import (
    DimensionMismatch, Diverged, EmptyWindow, InaccurateSolution, InvalidParams, NonpositiveError,
    NotHurwitz, SingularMatrix,
)
from .dynamics import integrate
from .games import QuadraticGame, pseudogradient, quadratic_nash
from .graph import HURWITZ_THRESHOLD, estimation_matrix, gained_estimation_matrix

logger = logging.getLogger(__name__)

DEFAULT_FD_STEP = 1e-4
DEFAULT_TOL = 1e-6
DEFAULT_C = 0.5
DEFAULT_BURN_IN = 0.05
DEFAULT_RATE_WINDOW = (0.2, 0.8)
LYAPUNOV_RESIDUAL_TOL = 1e-8
# 誤差がこの相対値（最大誤差比）を下回ったら浮動小数点の床とみなす
RELATIVE_ERROR_FLOOR = 1e-9
MIN_FIT_POINTS = 3


# ========================================
# 二階微分と仮定3〜4
# ========================================

def numeric_B(game, x, step=DEFAULT_FD_STEP):
    """B[i][j] = ∂²f_i/∂x_i∂x_j を grad(i, ·) の j 方向中心差分で近似"""
    if step <= 0:
        raise InvalidParams(f'差分ステップは正である必要があります: {step}')
    x = np.asarray(x, dtype=float)
    if x.shape != (game.n,):
        raise DimensionMismatch(f'x の次元が不正です: {x.shape} (n={game.n})')
    n = game.n
    B = np.empty((n, n))
    for j in range(n):
        plus = x.copy()
        minus = x.copy()
        plus[j] += step
        minus[j] -= step
        for i in range(n):
            B[i, j] = (game.grad(i, plus) - game.grad(i, minus)) / (2.0 * step)
    return B


def hessian_B(game, x, step=DEFAULT_FD_STEP):
    """解析的な二階偏微分があれば使い、なければ numeric_B"""
    n = game.n
    values = [[game.second_partial(i, j, x) for j in range(n)] for i in range(n)]
    if all(v is not None for row in values for v in row):
        return np.array(values, dtype=float)
    return numeric_B(game, x, step)


def check_assumption3(game, x_star, tol=DEFAULT_TOL, step=DEFAULT_FD_STEP):
    """(停留しているか, 自分の行動について狭義凹か)"""
    if tol <= 0:
        raise InvalidParams(f'tol は正である必要があります: {tol}')
    residual = float(np.max(np.abs(pseudogradient(game, x_star))))
    own = np.diag(hessian_B(game, x_star, step))
    return residual <= tol, bool(np.all(own < -tol))


def is_strictly_diag_dominant(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f'正方行列が必要です: {M.shape}')
    diag = np.abs(np.diag(M))
    off = np.abs(M).sum(axis=1) - diag
    return bool(np.all(diag > off))


def max_real_eigenvalue(M):
    return float(np.max(np.linalg.eigvals(np.asarray(M, dtype=float)).real))


def is_hurwitz(M, margin=0.0):
    """全固有値の実部が −margin 未満か"""
    if margin < 0:
        raise InvalidParams(f'margin は0以上が必要です: {margin}')
    return max_real_eigenvalue(M) < -margin


def check_potential_structure(game, points, step=DEFAULT_FD_STEP, tol=DEFAULT_TOL):
    """擬似勾配のヤコビアンが全サンプル点で対称か（厳密なポテンシャルゲームの数値判定）"""
    for x in points:
        B = numeric_B(game, x, step)
        scale = max(1.0, float(np.max(np.abs(B))))
        if not np.allclose(B, B.T, rtol=0.0, atol=tol * scale):
            return False
    return True


@dataclass
class AssumptionReport:
    point: np.ndarray
    stationary: bool
    stationarity_residual: float
    own_hessian_negative: bool
    own_hessian_values: np.ndarray
    B_matrix: np.ndarray
    B_diag_dominant: bool
    B_hurwitz: bool
    B_max_real_eig: float
    kbar_B_hurwitz: bool = None
    kbar_B_max_real_eig: float = None
    quadratic: dict = None

    @property
    def passed(self):
        """仮定3（停留・自己凹性）と仮定4（B の狭義対角優位）、B のフルビッツ性"""
        return bool(self.stationary and self.own_hessian_negative
                    and self.B_diag_dominant and self.B_hurwitz)

    def to_dict(self):
        return {
            'point': self.point.tolist(),
            'stationary': self.stationary,
            'stationarity_residual': self.stationarity_residual,
            'own_hessian_negative': self.own_hessian_negative,
            'own_hessian_values': self.own_hessian_values.tolist(),
            'B_matrix': self.B_matrix.tolist(),
            'B_diag_dominant': self.B_diag_dominant,
            'B_hurwitz': self.B_hurwitz,
            'B_max_real_eig': self.B_max_real_eig,
            'kbar_B_hurwitz': self.kbar_B_hurwitz,
            'kbar_B_max_real_eig': self.kbar_B_max_real_eig,
            'quadratic': self.quadratic,
            'passed': self.passed,
        }


def _quadratic_checks(game):
    H = game.H
    checks = {
        'H_diag_dominant': is_strictly_diag_dominant(H),
        'H_negative_diagonal': bool(np.all(np.diag(H) < 0)),
        'H_hurwitz': is_hurwitz(H),
        'H_max_real_eig': max_real_eigenvalue(H),
        'potential': game.is_potential(),
        'x_star': None,
    }
    try:
        checks['x_star'] = quadratic_nash(game).tolist()
    except SingularMatrix as e:
        checks['singular'] = str(e)
    return checks


def assumption_report(game, x, kbar=None, step=DEFAULT_FD_STEP, tol=DEFAULT_TOL):
    """候補点 x での仮定チェックをまとめる

    kbar を渡すと局所条件を緩めた k̄B のフルビッツ性も報告する。
    二次ゲームでは H の対角優位・フルビッツ性・ポテンシャル構造も付ける。
    """
    x = np.asarray(x, dtype=float)
    residual = float(np.max(np.abs(pseudogradient(game, x))))
    B = hessian_B(game, x, step)
    own = np.diag(B).copy()
    B_max = max_real_eigenvalue(B)
    report = AssumptionReport(
        point=x,
        stationary=residual <= tol,
        stationarity_residual=residual,
        own_hessian_negative=bool(np.all(own < -tol)),
        own_hessian_values=own,
        B_matrix=B,
        B_diag_dominant=is_strictly_diag_dominant(B),
        B_hurwitz=B_max < 0,
        B_max_real_eig=B_max,
    )
    if kbar is not None:
        kB = np.diag(np.broadcast_to(np.asarray(kbar, dtype=float), (game.n,))) @ B
        report.kbar_B_max_real_eig = max_real_eigenvalue(kB)
        report.kbar_B_hurwitz = report.kbar_B_max_real_eig < 0
    if isinstance(game, QuadraticGame):
        report.quadratic = _quadratic_checks(game)
    logger.debug(f'仮定チェック: passed={report.passed} residual={residual:.3e}')
    return report


# ========================================
# 強単調性（仮定5）のサンプリング
# ========================================

@dataclass
class MonotonicityEstimate:
    m_hat: float
    violated: bool
    worst_pair: tuple
    box: tuple = None
    n_samples: int = 0
    seed: int = 0

    def to_dict(self):
        return {
            'm_hat': self.m_hat,
            'violated': self.violated,
            'worst_pair': [p.tolist() for p in self.worst_pair],
            'box': [np.asarray(b).tolist() for b in self.box],
            'n_samples': self.n_samples,
            'seed': self.seed,
        }


def estimate_monotonicity(game, box, n_samples=1000, seed=0):
    """箱から一様に取った点対で m̂ = min −(x−z)ᵀ(∂G(x)−∂G(z))/‖x−z‖² を求める"""
    if n_samples < 2:
        raise InvalidParams(f'サンプル数は2以上が必要です: {n_samples}')
    low, high = (np.broadcast_to(np.asarray(b, dtype=float), (game.n,)) for b in box)
    if np.any(high <= low):
        raise InvalidParams(f'箱が空です: low={low.tolist()} high={high.tolist()}')
    rng = np.random.default_rng(seed)
    X = rng.uniform(low, high, size=(n_samples, game.n))
    Z = rng.uniform(low, high, size=(n_samples, game.n))

    m_hat = np.inf
    worst = (X[0], Z[0])
    for x, z in zip(X, Z):
        d = x - z
        norm2 = float(d @ d)
        if norm2 == 0.0:
            continue
        m = -float(d @ (pseudogradient(game, x) - pseudogradient(game, z))) / norm2
        if m < m_hat:
            m_hat = m
            worst = (x, z)
    return MonotonicityEstimate(
        m_hat=float(m_hat), violated=bool(m_hat <= 0), worst_pair=worst,
        box=(low, high), n_samples=n_samples, seed=seed,
    )


# ========================================
# リアプノフ方程式と V の監視
# ========================================

def lyapunov_residual(P, M, Q):
    return float(np.linalg.norm(P @ M + M.T @ P - Q, 'fro'))


def solve_lyapunov(M, Q):
    """P·M + Mᵀ·P = Q を解く（−M がフルビッツであること）"""
    M = np.asarray(M, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or Q.shape != M.shape:
        raise DimensionMismatch(f'M と Q は同じ形の正方行列が必要です: {M.shape}, {Q.shape}')
    if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() <= 0:
        raise InvalidParams('Q は対称正定値である必要があります')
    worst = max_real_eigenvalue(-M)
    if worst >= -HURWITZ_THRESHOLD:
        raise NotHurwitz(f'−M がフルビッツではありません (max Re λ = {worst:.3e})', max_real_part=worst)

    # scipy は A X + X Aᴴ = Q を解くので A = Mᵀ
    P = linalg.solve_continuous_lyapunov(M.T, Q)
    P = 0.5 * (P + P.T)
    residual = lyapunov_residual(P, M, Q)
    if residual > LYAPUNOV_RESIDUAL_TOL * max(1.0, np.linalg.norm(Q, 'fro')):
        raise InaccurateSolution(f'リアプノフ方程式の残差が大きすぎます: {residual:.3e}', residual=residual)
    logger.debug(f'リアプノフ方程式の残差: {residual:.3e}')
    return P


@dataclass
class LyapunovMonitor:
    """V = (c/2)(x−x*)ᵀk̄⁻¹(x−x*) + (1−c)ȳᵀP₁ȳ、ȳ = vec(Y) − 1⊗x"""
    c: float
    P1: np.ndarray
    Q1: np.ndarray
    kbar_inv: np.ndarray
    residual: float = 0.0

    @classmethod
    def build(cls, graph, kbar, c=DEFAULT_C, Q1=None, gains=None):
        if not 0 < c < 1:
            raise InvalidParams(f'c は (0, 1) の範囲が必要です: {c}')
        n = graph.n
        kbar = np.broadcast_to(np.asarray(kbar, dtype=float), (n,))
        M = estimation_matrix(graph) if gains is None else gained_estimation_matrix(graph, gains)
        Q1 = np.eye(n * n) if Q1 is None else np.asarray(Q1, dtype=float)
        P1 = solve_lyapunov(M, Q1)
        return cls(c=c, P1=P1, Q1=Q1, kbar_inv=np.diag(1.0 / kbar), residual=lyapunov_residual(P1, M, Q1))

    @property
    def n(self):
        return self.kbar_inv.shape[0]

    def value(self, x, Y, x_star):
        e = x - x_star
        ybar = Y.reshape(-1) - np.tile(x, self.n)
        return 0.5 * self.c * float(e @ self.kbar_inv @ e) + (1.0 - self.c) * float(ybar @ self.P1 @ ybar)


@dataclass
class LyapunovSeries:
    times: np.ndarray
    V: np.ndarray
    V_dot: np.ndarray
    burn_in_time: float
    decreasing_fraction: float

    def to_dict(self):
        return {
            'burn_in_time': self.burn_in_time,
            'decreasing_fraction': self.decreasing_fraction,
            'V_initial': float(self.V[0]),
            'V_final': float(self.V[-1]),
        }


def lyapunov_along_trajectory(mon, traj, x_star, burn_in=DEFAULT_BURN_IN):
    """各サンプルの V と中心差分の V̇、バーンイン後に V̇ < 0 となる割合"""
    x_star = np.asarray(x_star, dtype=float)
    n = mon.n
    if x_star.shape != (n,) or traj.xs.shape[1:] != (n,) or traj.Ys.shape[1:] != (n, n):
        raise DimensionMismatch(
            f'モニタ (n={n}) と軌道 {traj.xs.shape}/{traj.Ys.shape}・x* {x_star.shape} の次元が一致しません'
        )
    if len(traj.times) < 2:
        raise DimensionMismatch('V̇ の計算には2サンプル以上が必要です')
    V = np.array([mon.value(x, Y, x_star) for x, Y in zip(traj.xs, traj.Ys)])
    V_dot = np.gradient(V, traj.times)
    t0, t1 = traj.times[0], traj.times[-1]
    burn_in_time = t0 + burn_in * (t1 - t0)
    mask = traj.times >= burn_in_time
    fraction = float(np.mean(V_dot[mask] < 0)) if mask.any() else 0.0
    return LyapunovSeries(
        times=traj.times, V=V, V_dot=V_dot,
        burn_in_time=float(burn_in_time), decreasing_fraction=fraction,
    )


# ========================================
# 指数収束レート
# ========================================

@dataclass
class RateFit:
    rate: float
    r_squared: float
    t_start: float
    t_end: float
    n_points: int
    floor: float = None

    def to_dict(self):
        return {
            'rate': self.rate,
            'r_squared': self.r_squared,
            'window': [self.t_start, self.t_end],
            'n_points': self.n_points,
            'floor': self.floor,
        }


def _fit_window(times, errors, window):
    lo, hi = window
    if not 0 <= lo < hi <= 1:
        raise InvalidParams(f'窓は 0 ≤ lo < hi ≤ 1 が必要です: {window}')
    if len(times) == 0:
        raise EmptyWindow('サンプルがありません')
    span = times[-1] - times[0]
    t_start = times[0] + lo * span
    t_end = times[0] + hi * span
    mask = (times >= t_start) & (times <= t_end)
    if mask.sum() < MIN_FIT_POINTS:
        raise EmptyWindow(f'窓 [{t_start:g}, {t_end:g}] のサンプルが {int(mask.sum())} 点しかありません')
    t, e = times[mask], errors[mask]
    if np.any(~(e > 0)):
        raise NonpositiveError('窓内に0以下（または非有限）の誤差があります')
    fit = stats.linregress(t, np.log(e))
    rate = 0.0 - float(fit.slope)
    return RateFit(rate=rate, r_squared=float(fit.rvalue ** 2), t_start=float(t_start),
                   t_end=float(t_end), n_points=int(mask.sum()))


def fit_exponential_rate(times, errors, window=DEFAULT_RATE_WINDOW):
    """窓内で ln(誤差) を t に最小二乗直線で当てはめ (rate, r²) を返す"""
    times = np.asarray(times, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if times.shape != errors.shape:
        raise DimensionMismatch(f'times と errors の長さが一致しません: {times.shape}, {errors.shape}')
    fit = _fit_window(times, errors, window)
    return fit.rate, fit.r_squared


def effective_horizon(errors, floor):
    """誤差が初めて floor 以下になるサンプル位置（届かなければ全長）"""
    hits = np.flatnonzero(errors <= floor)
    return int(hits[0]) if hits.size else len(errors)


def fit_window_rate(times, errors, window=DEFAULT_RATE_WINDOW, floor=None):
    """浮動小数点の床に届いた以降を除いた区間の [20%, 80%] 窓でレートを当てはめる"""
    times = np.asarray(times, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptyWindow('サンプルがありません')
    if floor is None:
        floor = RELATIVE_ERROR_FLOOR * float(np.max(errors))
    end = effective_horizon(errors, floor)
    fit = _fit_window(times[:end], errors[:end], window)
    fit.floor = floor
    return fit


def trajectory_rate(traj, window=DEFAULT_RATE_WINDOW, floor=None):
    if traj.action_error is None:
        raise InvalidParams('x* が未知なのでレートを当てはめられません')
    return fit_window_rate(traj.times, traj.action_error, window, floor)


# ========================================
# 経験的な δ 探索
# ========================================

@dataclass
class DeltaSearch:
    delta: float
    attempts: list = field(default_factory=list)

    def to_dict(self):
        return {'delta': self.delta, 'attempts': self.attempts}


def search_working_delta(game, graph, params, x0, x_star, Y0=None, tol=1e-3, max_halvings=10):
    """params.delta から半分ずつ下げ、発散せず最終誤差 ≤ tol となる最初の δ を返す

    見つからなければ delta=None。
    """
    x_star = np.asarray(x_star, dtype=float)
    delta = params.delta
    attempts = []
    for _ in range(max_halvings + 1):
        trial = params.with_delta(delta)
        try:
            traj = integrate(game, graph, trial, x0, Y0=Y0, x_star=x_star)
        except Diverged as e:
            attempts.append({'delta': delta, 'status': 'diverged', 'time': e.time})
        else:
            final = float(np.max(np.abs(traj.final_state.x - x_star)))
            attempts.append({'delta': delta, 'status': 'completed', 'final_error': final})
            if final <= tol:
                logger.info(f'動作する δ を発見: {delta:g}（{len(attempts)} 回目）')
                return DeltaSearch(delta=delta, attempts=attempts)
        delta *= 0.5
    logger.warning(f'{max_halvings} 回半減しても収束する δ が見つかりませんでした')
    return DeltaSearch(delta=None, attempts=attempts)
