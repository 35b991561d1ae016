import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from .models import SeekingRun
from .services.analysis import (
    LyapunovMonitor, assumption_report, check_assumption3, check_potential_structure,
    estimate_monotonicity, fit_exponential_rate, fit_window_rate, hessian_B, is_hurwitz,
    is_strictly_diag_dominant, lyapunov_along_trajectory, lyapunov_residual, numeric_B,
    search_working_delta, solve_lyapunov, trajectory_rate,
)
from .services.dynamics import (
    SeekerParams, SeekerState, Trajectory, consensus_residual, integrate, integrate_reduced,
    reduced_rhs, rhs,
)
from .services.exceptions import (
    ConfigError, DimensionMismatch, Diverged, EmptyWindow, InaccurateSolution, InvalidParams,
    NonpositiveError, NotHurwitz, NotQuadratic, SingularMatrix,
)
from .services.games import (
    GAME_REGISTRY, Example2Game, FunctionGame, QuadraticGame, available_games, get_game,
    grad_check, make_example1, make_example2, make_example3, nash_candidate, pseudogradient,
    quadratic_nash, register_game,
)
from .services.graph import (
    CommGraph, algebraic_connectivity, estimation_is_hurwitz, estimation_matrix,
    gained_estimation_matrix, is_connected, laplacian, parse_graph_spec,
    random_connected_graph, random_disconnected_graph,
)
from .services.reporting import csv_header, read_trajectory_csv, write_trajectory_csv
from .services.run_config import deep_merge, flags_to_overrides, parse_vector, resolve_config
from .services.runner import execute_run

EXAMPLE1_X_STAR = np.array([1.5, 2.25, -19.0 / 48.0, -1.0 / 6.0, 1.0 / 12.0])
EXAMPLE1_SECOND_POINT = np.array([-1.0, 1.0, 19.0 / 72.0, 1.0 / 9.0, -1.0 / 18.0])
EXAMPLE3_X_STAR = np.array([2.0147, 6.7766, 11.5385, 16.3004, 21.0623])


def two_player_game(v=(0.0, 0.0)):
    """∂f_1/∂x_1 = −2x_1 + x_2、∂f_2/∂x_2 = x_1 − 2x_2 の二次ゲーム"""
    return QuadraticGame.from_matrices([[-2.0, 1.0], [1.0, -2.0]], list(v))


def integrate_preset(name, **initial):
    """プリセット設定をそのまま積分する"""
    overrides = {'game': {'name': name}}
    if initial:
        overrides['initial'] = initial
    resolved = resolve_config(None, overrides)
    traj = integrate(resolved.game, resolved.graph, resolved.params, resolved.x0, x_star=resolved.x_star)
    return resolved, traj


# ========================================
# 通信グラフ
# ========================================

class CommGraphTest(SimpleTestCase):
    """CommGraph とラプラシアンのテスト"""

    def test_single_node_laplacian(self):
        """1頂点のラプラシアンが [[0]] であること"""
        g = CommGraph(n=1, adj=[[0]])
        np.testing.assert_array_equal(laplacian(g), [[0.0]])
        self.assertTrue(is_connected(g))

    def test_path2_laplacian(self):
        """2頂点パスのラプラシアン"""
        g = CommGraph.from_edges(2, [(1, 2)])
        np.testing.assert_array_equal(laplacian(g), [[1.0, -1.0], [-1.0, 1.0]])

    def test_cycle5_spectrum(self):
        """5頂点サイクルの固有値が 2 − 2cos(2πk/5) であること"""
        g = CommGraph.preset('cycle', 5)
        expected = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(5) / 5.0))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(laplacian(g))), expected, atol=1e-12)
        self.assertAlmostEqual(algebraic_connectivity(g), 2.0 - 2.0 * np.cos(2.0 * np.pi / 5.0), places=12)

    def test_two_components_disconnected(self):
        """{1,2} と {3,4} に分かれたグラフは非連結"""
        g = CommGraph.from_edges(4, [(1, 2), (3, 4)])
        self.assertFalse(is_connected(g))
        self.assertTrue(is_connected(CommGraph.preset('cycle', 5)))

    def test_invalid_adjacency(self):
        """非対称・非0/1・自己ループの隣接行列は InvalidParams"""
        with self.assertRaises(InvalidParams):
            CommGraph(n=2, adj=[[0, 1], [0, 0]])
        with self.assertRaises(InvalidParams):
            CommGraph(n=2, adj=[[0, 2], [2, 0]])
        with self.assertRaises(InvalidParams):
            CommGraph(n=2, adj=[[1, 1], [1, 0]])
        with self.assertRaises(InvalidParams):
            CommGraph.from_edges(3, [(1, 4)])

    def test_parse_graph_spec(self):
        """プリセット表記と辺リスト表記の解釈"""
        g = parse_graph_spec('cycle:5')
        self.assertEqual(g.label, 'cycle:5')
        self.assertEqual(len(g.edges()), 5)
        g = parse_graph_spec('edges:4:1-2,2-3,3-4')
        self.assertEqual(g.edges(), [(1, 2), (2, 3), (3, 4)])
        self.assertEqual(g.label, 'edges:4:1-2,2-3,3-4')
        for spec in ('foo', 'cycle:x', 'edges:3:1-x'):
            with self.assertRaises(InvalidParams):
                parse_graph_spec(spec)

    def test_random_graph_laplacian_rows_sum_to_zero(self):
        """ランダムグラフのラプラシアンは行和0・対称・半正定値"""
        rng = np.random.default_rng(7)
        for _ in range(20):
            g = random_connected_graph(int(rng.integers(2, 8)), rng)
            L = laplacian(g)
            self.assertTrue(np.all(L.sum(axis=1) == 0))
            np.testing.assert_array_equal(L, L.T)
            self.assertGreaterEqual(np.linalg.eigvalsh(L).min(), -1e-12)


class EstimationMatrixTest(SimpleTestCase):
    """推定系の行列 M のテスト"""

    def test_path2_matrix(self):
        """2頂点パスの M = L⊗I₂ + diag(0, 1, 1, 0)"""
        M = estimation_matrix(CommGraph.from_edges(2, [(1, 2)]))
        expected = np.array([
            [1.0, 0.0, -1.0, 0.0],
            [0.0, 2.0, 0.0, -1.0],
            [-1.0, 0.0, 2.0, 0.0],
            [0.0, -1.0, 0.0, 1.0],
        ])
        np.testing.assert_array_equal(M, expected)

    def test_cycle5_positive_definite(self):
        """連結グラフでは M が対称正定値"""
        M = estimation_matrix(CommGraph.preset('cycle', 5))
        np.testing.assert_array_equal(M, M.T)
        self.assertGreater(np.linalg.eigvalsh(M).min(), 0.0)
        self.assertTrue(estimation_is_hurwitz(CommGraph.preset('cycle', 5)))

    def test_disconnected_has_zero_eigenvalue(self):
        """非連結グラフでは M が固有値0を持つ"""
        g = CommGraph.from_edges(4, [(1, 2), (3, 4)])
        self.assertLess(abs(np.linalg.eigvalsh(estimation_matrix(g)).min()), 1e-12)
        self.assertFalse(estimation_is_hurwitz(g))

    def test_random_connected_graphs_are_hurwitz(self):
        """ランダムな連結グラフ50個で −M がフルビッツ"""
        rng = np.random.default_rng(2024)
        for _ in range(50):
            g = random_connected_graph(int(rng.integers(2, 7)), rng)
            self.assertTrue(is_connected(g))
            self.assertTrue(estimation_is_hurwitz(g), g.label)

    def test_random_disconnected_graphs_are_not_hurwitz(self):
        """ランダムな非連結グラフ20個で −M がフルビッツでない"""
        rng = np.random.default_rng(2025)
        for _ in range(20):
            g = random_disconnected_graph(int(rng.integers(2, 7)), rng)
            self.assertFalse(is_connected(g))
            self.assertTrue(np.all(laplacian(g).sum(axis=1) == 0))
            self.assertFalse(estimation_is_hurwitz(g), g.label)

    def test_gained_matrix(self):
        """一様ゲイン2なら diag{m}M = 2M"""
        g = CommGraph.preset('cycle', 4)
        np.testing.assert_allclose(gained_estimation_matrix(g, np.full((4, 4), 2.0)), 2.0 * estimation_matrix(g))
        self.assertTrue(estimation_is_hurwitz(g, gains=np.full((4, 4), 2.0)))


# ========================================
# ゲーム
# ========================================

class GameTest(SimpleTestCase):
    """組み込みゲームと擬似勾配のテスト"""

    def test_example2_pseudogradient_at_origin(self):
        """Example 2 の擬似勾配は原点で0"""
        np.testing.assert_array_equal(pseudogradient(make_example2(), np.zeros(5)), np.zeros(5))

    def test_example1_stationary_at_x_star(self):
        """Example 1 の既知の均衡点で擬似勾配が0"""
        self.assertLessEqual(np.max(np.abs(pseudogradient(make_example1(), EXAMPLE1_X_STAR))), 1e-12)

    def test_example1_second_stationary_point(self):
        """Example 1 のもう1つの停留点でも擬似勾配が0"""
        self.assertLessEqual(np.max(np.abs(pseudogradient(make_example1(), EXAMPLE1_SECOND_POINT))), 1e-12)

    def test_two_player_pseudogradient(self):
        """2人二次ゲームの (1, 1) での擬似勾配は [−1, −1]"""
        np.testing.assert_array_equal(pseudogradient(two_player_game(), [1.0, 1.0]), [-1.0, -1.0])

    def test_example1_grad_value(self):
        """Example 1 で ∂f_1/∂x_1(1, 2, 0, 0, 0) = 3"""
        self.assertEqual(make_example1().grad(0, [1.0, 2.0, 0.0, 0.0, 0.0]), 3.0)

    def test_pseudogradient_dimension_mismatch(self):
        """次元違いの x は DimensionMismatch"""
        with self.assertRaises(DimensionMismatch):
            pseudogradient(make_example3(), np.zeros(4))

    def test_grad_check_examples(self):
        """解析勾配と中心差分が一致すること"""
        self.assertLessEqual(grad_check(make_example3(), np.arange(1.0, 6.0)), 1e-6)
        self.assertLessEqual(grad_check(make_example1(), [1.0, 2.0, 0.0, 0.0, 0.0]), 1e-5)
        one_player = QuadraticGame(h=[[[-2.0]]], v=[[0.0]])
        self.assertLessEqual(grad_check(one_player, [3.7]), 1e-8)

    def test_grad_check_random_points(self):
        """各組み込みゲームで [−10, 10]ⁿ のランダム100点"""
        rng = np.random.default_rng(0)
        for game in (make_example1(), make_example2(), make_example3(), two_player_game()):
            for _ in range(100):
                x = rng.uniform(-10.0, 10.0, size=game.n)
                self.assertLessEqual(grad_check(game, x), 1e-4, game.name)

    def test_estimate_gradients_matches_grad(self):
        """ベクトル化した推定勾配が行ごとの grad と一致すること"""
        rng = np.random.default_rng(1)
        for game in (make_example1(), make_example2(), make_example3()):
            Y = rng.uniform(-5.0, 5.0, size=(game.n, game.n))
            expected = [game.grad(i, Y[i]) for i in range(game.n)]
            np.testing.assert_allclose(game.estimate_gradients(Y), expected, rtol=1e-12, atol=1e-12)

    def test_quadratic_gradient_is_affine(self):
        """二次ゲームの勾配はアフィン"""
        game = make_example3()
        rng = np.random.default_rng(3)
        for _ in range(20):
            x, z = rng.uniform(-10.0, 10.0, size=(2, 5))
            alpha = rng.uniform()
            for i in range(5):
                mixed = game.grad(i, alpha * x + (1.0 - alpha) * z)
                self.assertAlmostEqual(mixed, alpha * game.grad(i, x) + (1.0 - alpha) * game.grad(i, z), delta=1e-10)

    def test_example3_gradient_formula(self):
        """Example 3 の勾配 −2ρ(z_i − x_i^d) − p₀Σz − p₀z_i − q₀"""
        game = make_example3()
        z = np.array([3.0, -1.0, 4.0, 1.0, 5.0])
        xd = np.array([10.0, 15.0, 20.0, 25.0, 30.0])
        for i in range(5):
            expected = -2.0 * (z[i] - xd[i]) - 0.1 * z.sum() - 0.1 * z[i] - 10.0
            self.assertAlmostEqual(game.grad(i, z), expected, places=10)

    def test_example3_validation(self):
        """ρ_i ≤ 0 や p₀ ≤ 0 は InvalidParams"""
        with self.assertRaises(InvalidParams):
            make_example3({'rho': [1.0, 0.0, 1.0, 1.0, 1.0]})
        with self.assertRaises(InvalidParams):
            make_example3({'p0': 0.0})
        with self.assertRaises(DimensionMismatch):
            make_example3({'xd': [1.0, 2.0]})

    def test_quadratic_game_invariants(self):
        """h^i の非対称や h^i_ii ≥ 0 は InvalidParams"""
        h = np.zeros((2, 2, 2))
        h[0] = [[-1.0, 1.0], [0.0, 0.0]]
        h[1] = [[0.0, 0.0], [0.0, -1.0]]
        with self.assertRaises(InvalidParams):
            QuadraticGame(h, np.zeros((2, 2)))
        with self.assertRaises(InvalidParams):
            QuadraticGame.from_matrices([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])

    def test_example2_payoff_is_weighted_potential(self):
        """Example 2 の f_i = m_i f"""
        game = Example2Game()
        x = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
        for i in range(5):
            self.assertAlmostEqual(game.payoff(i, x), game.m[i] * Example2Game.potential(x), places=10)
        self.assertEqual(game.payoff(0, np.zeros(5)), 0.0)
        with self.assertRaises(InvalidParams):
            Example2Game(m=[1.0, 0.0, 1.0, 1.0, 1.0])

    def test_registry(self):
        """レジストリから組み込みゲームとユーザー登録のゲームを取り出せること"""
        for name in ('example1', 'example2', 'example3', 'quadratic'):
            self.assertIn(name, available_games())
        with self.assertRaises(InvalidParams):
            get_game('nope')
        register_game('one-player', lambda params: FunctionGame(
            1, [lambda z: -z[0] ** 2], [lambda z: -2.0 * z[0]], name='one-player'))
        self.addCleanup(GAME_REGISTRY.pop, 'one-player')
        game = get_game('one-player')
        self.assertEqual(game.grad(0, [2.0]), -4.0)
        with self.assertRaises(DimensionMismatch):
            FunctionGame(2, [lambda z: 0.0], [lambda z: 0.0])


class QuadraticNashTest(SimpleTestCase):
    """二次ゲームの閉形式解のテスト"""

    def test_example3(self):
        """Example 3 の均衡が小数4桁で一致すること"""
        np.testing.assert_allclose(quadratic_nash(make_example3()), EXAMPLE3_X_STAR, atol=5e-5)

    def test_negative_identity(self):
        """H = −I, v = 0 なら x* = 0"""
        game = QuadraticGame.from_matrices(-np.eye(3), np.zeros(3))
        np.testing.assert_allclose(quadratic_nash(game), np.zeros(3), atol=1e-15)

    def test_two_player(self):
        """H = [[−2, 1], [1, −2]], v = [1, 1] なら x* = [1, 1]"""
        np.testing.assert_allclose(quadratic_nash(two_player_game(v=(1.0, 1.0))), [1.0, 1.0], atol=1e-12)

    def test_singular(self):
        """特異な H は SingularMatrix"""
        game = QuadraticGame.from_matrices([[-1.0, 1.0], [1.0, -1.0]], [0.0, 0.0])
        with self.assertRaises(SingularMatrix):
            quadratic_nash(game)

    def test_not_quadratic(self):
        """二次でないゲームは NotQuadratic"""
        with self.assertRaises(NotQuadratic):
            quadratic_nash(make_example1())

    def test_solution_is_stationary(self):
        """閉形式解で擬似勾配が0（ランダムな対角優位の二次ゲーム）"""
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            H = rng.uniform(-1.0, 1.0, size=(n, n))
            np.fill_diagonal(H, -(np.abs(H).sum(axis=1) + 1.0))
            game = QuadraticGame.from_matrices(H, rng.uniform(-10.0, 10.0, size=n))
            candidate = nash_candidate(game, quadratic_nash(game))
            self.assertLessEqual(candidate.stationarity_residual, 1e-9)

    def test_potential_detection(self):
        """H が対称ならポテンシャルゲーム"""
        self.assertTrue(make_example3().is_potential())
        self.assertFalse(QuadraticGame.from_matrices([[-2.0, 1.0], [0.0, -2.0]], [0.0, 0.0]).is_potential())


# ========================================
# 仮定チェック
# ========================================

class AssumptionCheckTest(SimpleTestCase):
    """二階微分・対角優位・フルビッツ判定のテスト"""

    def test_numeric_B_example1(self):
        """Example 1 の x* で B[0][0] = −9, B[0][1] = 3"""
        B = numeric_B(make_example1(), EXAMPLE1_X_STAR)
        self.assertAlmostEqual(B[0, 0], -9.0, delta=1e-6)
        self.assertAlmostEqual(B[0, 1], 3.0, delta=1e-6)

    def test_numeric_B_equals_H_for_quadratic(self):
        """二次ゲームでは数値 B が H と一致すること"""
        rng = np.random.default_rng(5)
        for game in (make_example3(), two_player_game()):
            for _ in range(10):
                x = rng.uniform(-10.0, 10.0, size=game.n)
                np.testing.assert_allclose(numeric_B(game, x), game.H, atol=1e-6)

    def test_example3_B(self):
        """Example 3 の B は対角 −2.2、非対角 −0.1"""
        B = hessian_B(make_example3(), np.zeros(5))
        expected = np.full((5, 5), -0.1)
        np.fill_diagonal(expected, -2.2)
        np.testing.assert_allclose(B, expected, atol=1e-12)
        np.testing.assert_allclose(numeric_B(make_example3(), np.zeros(5)), expected, atol=1e-6)

    def test_numeric_B_invalid_step(self):
        with self.assertRaises(InvalidParams):
            numeric_B(make_example3(), np.zeros(5), step=0.0)

    def test_check_assumption3(self):
        """Example 1 は x* で合格、もう1つの停留点では自己凹性が不合格"""
        self.assertEqual(check_assumption3(make_example1(), EXAMPLE1_X_STAR), (True, True))
        self.assertEqual(check_assumption3(make_example1(), EXAMPLE1_SECOND_POINT), (True, False))
        self.assertEqual(check_assumption3(make_example2(), np.zeros(5)), (True, True))

    def test_diag_dominance(self):
        self.assertTrue(is_strictly_diag_dominant([[-3.0, 1.0], [1.0, -3.0]]))
        self.assertFalse(is_strictly_diag_dominant([[-1.0, 1.0], [1.0, -1.0]]))
        with self.assertRaises(DimensionMismatch):
            is_strictly_diag_dominant(np.zeros((2, 3)))

    def test_is_hurwitz(self):
        """−M（連結グラフ）と Example 3 の H はフルビッツ、零行列は違う"""
        self.assertTrue(is_hurwitz(-estimation_matrix(CommGraph.preset('cycle', 5))))
        self.assertTrue(is_hurwitz(make_example3().H))
        self.assertFalse(is_hurwitz(np.zeros((2, 2))))
        self.assertFalse(is_hurwitz(-np.eye(2), margin=2.0))

    def test_dominant_negative_diagonal_is_hurwitz(self):
        """対角が負で狭義対角優位な行列はフルビッツ（ランダム100個）"""
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            A = rng.uniform(-1.0, 1.0, size=(n, n))
            np.fill_diagonal(A, 0.0)
            np.fill_diagonal(A, -(np.abs(A).sum(axis=1) + rng.uniform(0.1, 1.0, size=n)))
            self.assertTrue(is_strictly_diag_dominant(A))
            self.assertTrue(is_hurwitz(A))

    def test_potential_structure(self):
        """重み1の Example 2 と Example 3 はヤコビアンが対称、Example 1 は非対称"""
        points = np.random.default_rng(17).uniform(-3.0, 3.0, size=(5, 5))
        self.assertTrue(check_potential_structure(make_example3(), points))
        self.assertTrue(check_potential_structure(Example2Game(m=[1.0] * 5), points))
        self.assertFalse(check_potential_structure(make_example1(), points))

    def test_assumption_report_example3(self):
        """Example 3 の均衡点でのレポート"""
        game = make_example3()
        report = assumption_report(game, quadratic_nash(game), kbar=1.0)
        self.assertTrue(report.passed)
        self.assertTrue(report.kbar_B_hurwitz)
        self.assertTrue(report.quadratic['H_diag_dominant'])
        self.assertTrue(report.quadratic['potential'])
        data = report.to_dict()
        self.assertTrue(data['passed'])
        json.dumps(data)

    def test_assumption_report_example1_second_point(self):
        """Example 1 のもう1つの停留点は不合格"""
        report = assumption_report(make_example1(), EXAMPLE1_SECOND_POINT)
        self.assertTrue(report.stationary)
        self.assertFalse(report.own_hessian_negative)
        self.assertFalse(report.passed)


class MonotonicityTest(SimpleTestCase):
    """強単調性のサンプリング推定のテスト"""

    def test_example2_not_violated(self):
        """Example 2 は [−25, 25]⁵ で強単調"""
        estimate = estimate_monotonicity(make_example2(), (-25.0, 25.0), n_samples=1000, seed=0)
        self.assertFalse(estimate.violated)
        self.assertGreater(estimate.m_hat, 0.0)

    def test_convex_game_violated(self):
        """f_1 = x_1² は強単調でない"""
        game = FunctionGame(1, [lambda z: z[0] ** 2], [lambda z: 2.0 * z[0]])
        estimate = estimate_monotonicity(game, (-1.0, 1.0), n_samples=100, seed=0)
        self.assertTrue(estimate.violated)
        self.assertAlmostEqual(estimate.m_hat, -2.0, places=9)

    def test_example3_bounds(self):
        """Example 3 の m̂ は [2.1, 2.6]（−λ_max(H) = 2.1 以上）"""
        estimate = estimate_monotonicity(make_example3(), (-50.0, 50.0), n_samples=1000, seed=0)
        self.assertGreaterEqual(estimate.m_hat, 2.1 - 1e-9)
        self.assertLessEqual(estimate.m_hat, 2.6 + 1e-9)

    def test_deterministic(self):
        """同じシードなら同じ結果"""
        a = estimate_monotonicity(make_example3(), (-50.0, 50.0), n_samples=200, seed=42)
        b = estimate_monotonicity(make_example3(), (-50.0, 50.0), n_samples=200, seed=42)
        self.assertEqual(a.m_hat, b.m_hat)
        np.testing.assert_array_equal(a.worst_pair[0], b.worst_pair[0])

    def test_invalid_box(self):
        with self.assertRaises(InvalidParams):
            estimate_monotonicity(make_example3(), (1.0, 1.0))
        with self.assertRaises(InvalidParams):
            estimate_monotonicity(make_example3(), (-1.0, 1.0), n_samples=1)


class LyapunovTest(SimpleTestCase):
    """リアプノフ方程式と V の監視のテスト"""

    def test_identity(self):
        """M = I, Q = 2I なら P = I"""
        np.testing.assert_allclose(solve_lyapunov(np.eye(2), 2.0 * np.eye(2)), np.eye(2), atol=1e-12)

    def test_diagonal(self):
        """M = diag(1, 2), Q = diag(2, 8) なら P = diag(1, 2)"""
        P = solve_lyapunov(np.diag([1.0, 2.0]), np.diag([2.0, 8.0]))
        np.testing.assert_allclose(P, np.diag([1.0, 2.0]), atol=1e-12)

    def test_cycle5_estimation_matrix(self):
        """5頂点サイクルの M で残差が小さく P が正定値"""
        M = estimation_matrix(CommGraph.preset('cycle', 5))
        Q = np.eye(25)
        P = solve_lyapunov(M, Q)
        self.assertLessEqual(lyapunov_residual(P, M, Q), 1e-8)
        self.assertGreater(np.linalg.eigvalsh(P).min(), 0.0)

    def test_random_hurwitz_matrices(self):
        """ランダムな −M フルビッツ行列20個で P が対称正定値"""
        rng = np.random.default_rng(19)
        for _ in range(20):
            A = rng.normal(size=(4, 4))
            shift = max(0.0, -np.linalg.eigvals(A).real.min()) + 0.5
            M = A + shift * np.eye(4)
            P = solve_lyapunov(M, np.eye(4))
            self.assertLessEqual(lyapunov_residual(P, M, np.eye(4)), 1e-8)
            np.testing.assert_allclose(P, P.T, atol=1e-12)
            self.assertGreater(np.linalg.eigvalsh(P).min(), 0.0)

    def test_not_hurwitz(self):
        """−M がフルビッツでなければ NotHurwitz"""
        with self.assertRaises(NotHurwitz):
            solve_lyapunov(np.zeros((2, 2)), np.eye(2))
        with self.assertRaises(NotHurwitz):
            solve_lyapunov(estimation_matrix(CommGraph.from_edges(4, [(1, 2), (3, 4)])), np.eye(16))

    def test_value_zero_at_equilibrium(self):
        """均衡点・合意状態にとどまる軌道では V ≡ 0"""
        graph = CommGraph.preset('cycle', 3)
        monitor = LyapunovMonitor.build(graph, kbar=[1.0, 2.0, 0.5])
        x_star = np.array([1.0, -2.0, 3.0])
        traj = Trajectory(
            times=np.arange(4) * 0.5,
            xs=np.tile(x_star, (4, 1)),
            Ys=np.tile(x_star, (4, 3, 1)),
            consensus_residual=np.zeros(4),
        )
        series = lyapunov_along_trajectory(monitor, traj, x_star)
        np.testing.assert_array_equal(series.V, np.zeros(4))
        with self.assertRaises(DimensionMismatch):
            lyapunov_along_trajectory(monitor, traj, np.zeros(2))

    def test_monitor_parameters(self):
        with self.assertRaises(InvalidParams):
            LyapunovMonitor.build(CommGraph.preset('cycle', 3), kbar=1.0, c=1.0)

    def test_monitor_reports_residual(self):
        """モニタはリアプノフ方程式の残差を保持する"""
        monitor = LyapunovMonitor.build(CommGraph.preset('cycle', 5), kbar=1.0)
        self.assertLessEqual(monitor.residual, 1e-8)

    def test_inaccurate_solution(self):
        """ソルバの解が方程式を満たさなければ InaccurateSolution"""
        with patch('seeking.services.analysis.linalg.solve_continuous_lyapunov', return_value=5.0 * np.eye(2)):
            with self.assertRaises(InaccurateSolution) as ctx:
                solve_lyapunov(np.eye(2), 2.0 * np.eye(2))
        self.assertAlmostEqual(ctx.exception.residual, 8.0 * np.sqrt(2.0), places=9)


class RateFitTest(SimpleTestCase):
    """指数収束レート推定のテスト"""

    def test_pure_exponential(self):
        """e^{−2t} のレートは 2"""
        t = np.arange(51) * 0.1
        rate, r2 = fit_exponential_rate(t, np.exp(-2.0 * t))
        self.assertAlmostEqual(rate, 2.0, delta=1e-6)
        self.assertGreaterEqual(r2, 0.999999)

    def test_constant_errors(self):
        """誤差が一定ならレート0"""
        t = np.arange(20, dtype=float)
        rate, _ = fit_exponential_rate(t, np.full(20, 0.5))
        self.assertEqual(rate, 0.0)

    def test_empty_window(self):
        """窓内のサンプルが足りなければ EmptyWindow"""
        with self.assertRaises(EmptyWindow):
            fit_exponential_rate([0.0, 1.0], [1.0, 0.5])

    def test_nonpositive(self):
        """窓内に0の誤差があれば NonpositiveError"""
        t = np.arange(20, dtype=float)
        with self.assertRaises(NonpositiveError):
            fit_exponential_rate(t, np.zeros(20))

    def test_invalid_window(self):
        with self.assertRaises(InvalidParams):
            fit_exponential_rate(np.arange(10.0), np.ones(10), window=(0.8, 0.2))

    def test_floor_truncation(self):
        """浮動小数点の床に届いた後のサンプルは当てはめから除く"""
        t = np.arange(1001) * 0.1
        errors = np.exp(-t)
        errors[t > 30.0] = 1e-20
        fit = fit_window_rate(t, errors)
        self.assertAlmostEqual(fit.rate, 1.0, delta=1e-6)
        self.assertLess(fit.t_end, 20.0)
        self.assertGreaterEqual(fit.r_squared, 0.999999)


# ========================================
# ダイナミクスと積分
# ========================================

class DynamicsTest(SimpleTestCase):
    """右辺と積分のテスト"""

    def setUp(self):
        self.path2 = CommGraph.from_edges(2, [(1, 2)])
        self.cycle5 = CommGraph.preset('cycle', 5)

    def test_rhs_two_player(self):
        """2人ゲームで δ=0.1, x = (1, 0), Y = [[1, 0], [1, 0]] のとき dx = [−0.2, 0.1], dY = 0"""
        params = SeekerParams(n=2, delta=0.1)
        state = SeekerState(x=np.array([1.0, 0.0]), Y=np.array([[1.0, 0.0], [1.0, 0.0]]))
        dx, dY = rhs(two_player_game(), self.path2, params, state)
        np.testing.assert_allclose(dx, [-0.2, 0.1], atol=1e-15)
        np.testing.assert_array_equal(dY, np.zeros((2, 2)))

    def test_rhs_estimation_example(self):
        """y_1 = (0, 0), y_2 = (1, 1), x = (0, 1) の推定の右辺"""
        params = SeekerParams(n=2, delta=0.1)
        state = SeekerState(x=np.array([0.0, 1.0]), Y=np.array([[0.0, 0.0], [1.0, 1.0]]))
        dx, dY = rhs(two_player_game(), self.path2, params, state)
        # y_12: −((0 − 1) + (0 − 1)) = 2、y_21: −((1 − 0) + (1 − 0)) = −2
        np.testing.assert_allclose(dY, [[1.0, 2.0], [-2.0, -1.0]])
        np.testing.assert_allclose(dx, [0.0, -0.1], atol=1e-15)

    def test_quasi_steady_state_is_invariant(self):
        """Y = 1⊗x なら dY は厳密に0（ランダムなグラフと状態）"""
        rng = np.random.default_rng(23)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            graph = random_connected_graph(n, rng)
            params = SeekerParams(n=n, gains=rng.uniform(0.5, 2.0, size=(n, n)))
            game = QuadraticGame.from_matrices(-np.eye(n), np.zeros(n))
            _, dY = rhs(game, graph, params, SeekerState.consensus(rng.uniform(-10.0, 10.0, size=n)))
            self.assertTrue(np.all(dY == 0))

    def test_equilibrium_is_fixed_point(self):
        """(x*, 1⊗x*) で右辺が0"""
        cases = (
            (make_example3(), quadratic_nash(make_example3()), self.cycle5),
            (make_example1(), EXAMPLE1_X_STAR, self.cycle5),
            (make_example2(), np.zeros(5), self.cycle5),
            (two_player_game(v=(1.0, 1.0)), np.ones(2), self.path2),
        )
        for game, x_star, graph in cases:
            dx, dY = rhs(game, graph, SeekerParams(n=game.n, delta=0.05), SeekerState.consensus(x_star))
            self.assertLessEqual(np.max(np.abs(dx)), 1e-10, game.name)
            self.assertTrue(np.all(dY == 0), game.name)

    def test_time_scale(self):
        """δ を半分にすると dx が半分になり dY は変わらない"""
        rng = np.random.default_rng(29)
        state = SeekerState(x=rng.normal(size=5), Y=rng.normal(size=(5, 5)))
        game = make_example3()
        dx_full, dY_full = rhs(game, self.cycle5, SeekerParams(n=5, delta=0.2), state)
        dx_half, dY_half = rhs(game, self.cycle5, SeekerParams(n=5, delta=0.1), state)
        np.testing.assert_array_equal(dx_full, 2.0 * dx_half)
        np.testing.assert_array_equal(dY_full, dY_half)

    def test_gains_keep_fixed_points(self):
        """正のゲイン m_ij を入れても dY が0になる成分は変わらない"""
        rng = np.random.default_rng(31)
        Y = rng.normal(size=(5, 5))
        Y[:, 2] = 0.5
        state = SeekerState(x=np.full(5, 0.5), Y=Y)
        game = make_example3()
        _, dY_plain = rhs(game, self.cycle5, SeekerParams(n=5), state)
        _, dY_gain = rhs(game, self.cycle5, SeekerParams(n=5, gains=rng.uniform(0.1, 3.0, size=(5, 5))), state)
        np.testing.assert_array_equal(dY_plain == 0, dY_gain == 0)
        self.assertTrue(np.all(dY_gain[:, 2] == 0))

    def test_nonfinite_gradient_diverges(self):
        """勾配が非有限なら Diverged（プレイヤーを特定）"""
        game = FunctionGame(2, [lambda z: 0.0] * 2, [lambda z: 0.0, lambda z: float('nan')])
        with self.assertRaises(Diverged) as ctx:
            rhs(game, self.path2, SeekerParams(n=2), SeekerState.consensus([0.0, 0.0]))
        self.assertEqual(ctx.exception.player, 1)

    def test_params_validation(self):
        """δ ≤ 0・k̄ ≤ 0・t_end < dt・record_every < 1 は InvalidParams"""
        for kwargs in ({'delta': 0.0}, {'kbar': [1.0, -1.0]}, {'gains': 0.0},
                       {'dt': 0.1, 't_end': 0.05}, {'record_every': 0}):
            with self.assertRaises(InvalidParams):
                SeekerParams(n=2, **kwargs)
        with self.assertRaises(DimensionMismatch):
            SeekerParams(n=2, kbar=[1.0, 1.0, 1.0])

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            rhs(make_example3(), self.path2, SeekerParams(n=5), SeekerState.consensus(np.zeros(5)))
        with self.assertRaises(DimensionMismatch):
            integrate(make_example3(), self.cycle5, SeekerParams(n=5, t_end=1.0), np.zeros(4))

    def test_consensus_residual(self):
        state = SeekerState(x=np.array([1.0, 2.0]), Y=np.array([[1.0, 2.5], [0.0, 2.0]]))
        self.assertEqual(consensus_residual(state), 1.0)
        self.assertEqual(consensus_residual(SeekerState.consensus([1.0, 2.0])), 0.0)
        self.assertEqual(SeekerState.from_flat(state.flat(), 2).Y.tolist(), state.Y.tolist())


class IntegrationTest(SimpleTestCase):
    """積分器のテスト"""

    def setUp(self):
        self.game = make_example3()
        self.graph = CommGraph.preset('cycle', 5)
        self.x_star = quadratic_nash(self.game)

    def test_equilibrium_does_not_drift(self):
        """均衡点から出発した軌道はほとんど動かない"""
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=20.0)
        traj = integrate(self.game, self.graph, params, self.x_star)
        self.assertLessEqual(np.max(np.abs(traj.xs - self.x_star)), 1e-9)
        self.assertLessEqual(np.max(traj.consensus_residual), 1e-9)

    def test_deterministic(self):
        """同じ入力からはビット単位で同じ軌道"""
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=10.0)
        a = integrate(self.game, self.graph, params, np.full(5, -10.0))
        b = integrate(self.game, self.graph, params, np.full(5, -10.0))
        np.testing.assert_array_equal(a.xs, b.xs)
        np.testing.assert_array_equal(a.Ys, b.Ys)

    def test_sampling(self):
        """サンプルは等間隔で、Y0 の既定は各行 x0"""
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=10.0, record_every=4)
        x0 = np.arange(5.0)
        traj = integrate(self.game, self.graph, params, x0, x_star=self.x_star)
        self.assertEqual(len(traj), 51)
        np.testing.assert_allclose(np.diff(traj.times), 0.2)
        np.testing.assert_array_equal(traj.Ys[0], np.tile(x0, (5, 1)))
        self.assertEqual(traj.consensus_residual[0], 0.0)
        self.assertEqual(len(traj.states), len(traj))
        self.assertAlmostEqual(traj.final_error, float(np.linalg.norm(traj.xs[-1] - self.x_star)))

    def test_large_delta_diverges(self):
        """Example 1 で δ = 100 は発散する"""
        params = SeekerParams(n=5, delta=100.0, dt=0.05, t_end=100.0)
        with self.assertRaises(Diverged) as ctx:
            integrate(make_example1(), self.graph, params, [1.0, 2.0, 0.0, 0.0, 0.0])
        self.assertIsNotNone(ctx.exception.player)
        self.assertGreater(ctx.exception.time, 0.0)
        self.assertEqual(ctx.exception.to_dict()['player'], ctx.exception.player + 1)

    def test_disconnected_graph_warns(self):
        """非連結グラフでは警告を出す（積分自体は行う）"""
        graph = CommGraph.from_edges(5, [(1, 2), (3, 4), (4, 5)])
        params = SeekerParams(n=5, dt=0.05, t_end=1.0)
        with self.assertLogs('seeking.services.dynamics', level='WARNING'):
            integrate(self.game, graph, params, np.zeros(5))

    def test_reduced_system(self):
        """縮約系も x* に収束し、x* で右辺が0"""
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=200.0)
        self.assertLessEqual(np.max(np.abs(reduced_rhs(self.game, params, self.x_star))), 1e-10)
        traj = integrate_reduced(self.game, params, np.full(5, -10.0), x_star=self.x_star)
        self.assertLessEqual(traj.final_error, 1e-3)

    def test_search_working_delta_keeps_working_value(self):
        """収束する δ はそのまま採用される"""
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=200.0)
        search = search_working_delta(self.game, self.graph, params, np.full(5, -10.0), self.x_star)
        self.assertEqual(search.delta, 0.05)
        self.assertEqual(len(search.attempts), 1)

    def test_search_working_delta_gives_up(self):
        """半減しても発散し続ければ delta=None"""
        params = SeekerParams(n=5, delta=100.0, dt=0.05, t_end=50.0)
        search = search_working_delta(make_example1(), self.graph, params,
                                      [1.0, 2.0, 0.0, 0.0, 0.0], EXAMPLE1_X_STAR, max_halvings=1)
        self.assertIsNone(search.delta)
        self.assertEqual([a['status'] for a in search.attempts], ['diverged', 'diverged'])


class ConvergenceTest(SimpleTestCase):
    """組み込みゲームのプリセットでの収束"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.example1 = integrate_preset('example1')
        cls.example2 = integrate_preset('example2')
        cls.example3 = integrate_preset('example3')
        cls.example3_high = integrate_preset('example3', x0=50.0)

    def assertConverged(self, run, tol=1e-3):
        resolved, traj = run
        self.assertLessEqual(float(np.max(np.abs(traj.xs[-1] - resolved.x_star))), tol, resolved.game.name)
        self.assertLessEqual(traj.consensus_residual[-1], tol, resolved.game.name)

    def test_example1_converges_locally(self):
        """Example 1 は (1, 2, 0, 0, 0) から x* に収束"""
        self.assertConverged(self.example1)

    def test_example2_converges_from_far(self):
        """Example 2 は 20 から出発しても原点に収束"""
        self.assertConverged(self.example2)

    def test_example3_converges(self):
        """Example 3 は −10 からも +50 からも閉形式の x* に収束"""
        self.assertConverged(self.example3)
        self.assertConverged(self.example3_high)
        resolved, traj = self.example3
        np.testing.assert_allclose(traj.xs[-1], EXAMPLE3_X_STAR, atol=1e-3)

    def test_positive_rates(self):
        """誤差は指数的に減少する（レート > 0、r² ≥ 0.95）"""
        for resolved, traj in (self.example1, self.example2, self.example3):
            fit = trajectory_rate(traj)
            self.assertGreater(fit.rate, 0.0, resolved.game.name)
            self.assertGreaterEqual(fit.r_squared, 0.95, resolved.game.name)

    def test_example3_lyapunov_decreasing(self):
        """Example 3 では −10 からも +50 からもバーンイン後の 99% 以上のサンプルで V̇ < 0"""
        for resolved, traj in (self.example3, self.example3_high):
            monitor = LyapunovMonitor.build(resolved.graph, resolved.params.kbar, gains=resolved.params.gains)
            series = lyapunov_along_trajectory(monitor, traj, resolved.x_star)
            self.assertGreaterEqual(series.decreasing_fraction, 0.99, float(traj.xs[0, 0]))
            self.assertLess(series.V[-1], series.V[0])

    def test_large_delta_flagged_by_lyapunov(self):
        """δ が大きすぎると V̇ < 0 の割合が 99% を下回る"""
        resolved = resolve_config(None, {'game': {'name': 'example3'},
                                         'seeker': {'delta': 0.5, 't_end': 200.0}})
        traj = integrate(resolved.game, resolved.graph, resolved.params, resolved.x0, x_star=resolved.x_star)
        monitor = LyapunovMonitor.build(resolved.graph, resolved.params.kbar)
        series = lyapunov_along_trajectory(monitor, traj, resolved.x_star)
        self.assertLess(series.decreasing_fraction, 0.99)


# ========================================
# 設定と成果物
# ========================================

class RunConfigTest(SimpleTestCase):
    """実行設定の解決のテスト"""

    def test_defaults_follow_preset(self):
        """既定のゲームは example3 でプリセットの値が入る"""
        resolved = resolve_config()
        self.assertEqual(resolved.game.name, 'example3')
        self.assertEqual(resolved.graph.label, 'cycle:5')
        self.assertEqual(resolved.params.dt, 0.05)
        np.testing.assert_allclose(resolved.x_star, EXAMPLE3_X_STAR, atol=5e-5)
        self.assertEqual(resolved.config['analysis']['monotonicity']['box'], [-50.0, 50.0])

    def test_precedence(self):
        """フラグ > 設定ファイル > プリセット"""
        file_config = {'game': {'name': 'example3'}, 'seeker': {'delta': 0.01, 'dt': 0.1}}
        resolved = resolve_config(file_config)
        self.assertEqual(resolved.params.delta, 0.01)
        self.assertEqual(resolved.params.dt, 0.1)
        resolved = resolve_config(file_config, {'seeker': {'delta': 0.02}})
        self.assertEqual(resolved.params.delta, 0.02)
        self.assertEqual(resolved.params.dt, 0.1)

    def test_quadratic_game(self):
        """設定から二次ゲームを作り x* を閉形式で埋める"""
        resolved = resolve_config({
            'game': {'name': 'quadratic', 'H': [[-2.0, 1.0], [1.0, -2.0]], 'v': [1.0, 1.0]},
            'graph': {'preset': 'path', 'n': 2},
        })
        np.testing.assert_allclose(resolved.x_star, [1.0, 1.0], atol=1e-12)
        np.testing.assert_array_equal(resolved.x0, [0.0, 0.0])

    def test_edge_list_graph(self):
        resolved = resolve_config(None, {'graph': {'preset': None, 'n': 5,
                                                   'edges': [[1, 2], [2, 3], [3, 4], [4, 5]]}})
        self.assertEqual(resolved.graph.edges(), [(1, 2), (2, 3), (3, 4), (4, 5)])

    def test_graph_flag_replaces_file_edges(self):
        """--graph はファイルの辺リストを丸ごと置き換える"""
        file_config = {'graph': {'preset': None, 'n': 5, 'edges': [[1, 2], [2, 3], [3, 4], [4, 5]]}}
        resolved = resolve_config(file_config, flags_to_overrides({'graph': 'cycle:5'}))
        self.assertEqual(resolved.graph.label, 'cycle:5')
        self.assertIn((1, 5), resolved.graph.edges())
        self.assertIsNone(resolved.config['graph']['edges'])

    def test_dump_round_trip(self):
        """書き出した設定を読み戻すと同じ設定になる"""
        resolved = resolve_config(None, {'game': {'name': 'example1'}, 'seeker': {'t_end': 10.0}})
        again = resolve_config(json.loads(resolved.dump()))
        self.assertEqual(again.config, resolved.config)

    def test_config_errors(self):
        """不正な値はフィールド名つきの ConfigError"""
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(None, {'seeker': {'delta': -1.0}})
        self.assertIn('seeker.delta', ctx.exception.errors)
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(None, {'graph': {'preset': 'cycle', 'n': 4}})
        self.assertIn('graph.n', ctx.exception.errors)
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(None, {'initial': {'x0': [1.0, 2.0]}})
        self.assertIn('initial.x0', ctx.exception.errors)
        with self.assertRaises(ConfigError):
            resolve_config({'game': {'name': 'quadratic'}})
        with self.assertRaises(ConfigError):
            resolve_config(None, {'game': {'name': 'nope'}})
        with self.assertRaises(ConfigError) as ctx:
            resolve_config(None, {'analysis': {'window': [0.9, 0.1]}})
        self.assertIn('analysis.window', ctx.exception.errors)

    def test_parse_vector(self):
        self.assertEqual(parse_vector('20,20'), [20.0, 20.0])
        self.assertEqual(parse_vector('-10'), -10.0)
        with self.assertRaises(ConfigError):
            parse_vector('a,b')

    def test_deep_merge_skips_none(self):
        merged = deep_merge({'a': {'b': 1, 'c': 2}}, {'a': {'b': None, 'c': 3}})
        self.assertEqual(merged, {'a': {'b': 1, 'c': 3}})


class ReportingTest(SimpleTestCase):
    """軌道 CSV の書き出しと読み込みのテスト"""

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmpdir, ignore_errors=True)

    def test_header(self):
        self.assertEqual(csv_header(2), ['t', 'x_1', 'x_2', 'err', 'consensus_residual'])
        self.assertEqual(csv_header(2, include_estimates=True)[-4:], ['y_11', 'y_12', 'y_21', 'y_22'])

    def test_error_column_empty_without_x_star(self):
        """x* が未知なら err 列は空欄で、読み込むと errors=None"""
        params = SeekerParams(n=2, delta=0.1, dt=0.1, t_end=1.0, record_every=2)
        traj = integrate(two_player_game(), CommGraph.from_edges(2, [(1, 2)]), params, [0.5, -0.5])
        path = write_trajectory_csv(traj, self.tmpdir / 'run.csv', include_estimates=True)
        times, xs, errors = read_trajectory_csv(path)
        self.assertIsNone(errors)
        self.assertEqual(len(times), 6)
        np.testing.assert_array_equal(xs, traj.xs)


class RunnerTest(SimpleTestCase):
    """execute_run のテスト（DB には触れない）"""

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.tmpdir, ignore_errors=True)

    def test_completed_run_writes_artifacts(self):
        resolved = resolve_config(None, {'seeker': {'t_end': 50.0}, 'output': {'dir': self.tmpdir},
                                         'analysis': {'reduced': True}})
        result = execute_run(resolved, name='short')
        self.assertEqual(result.status, 'completed')
        self.assertTrue(result.ok)
        for key in ('csv', 'summary', 'plot'):
            self.assertTrue(Path(result.artifacts[key]).exists())
        with open(result.artifacts['summary'], encoding='utf-8') as f:
            summary = json.load(f)
        self.assertEqual(summary['status'], 'completed')
        self.assertIn('max_gap', summary['reduced'])

    def test_diverged_run(self):
        resolved = resolve_config(None, {'game': {'name': 'example1'}, 'seeker': {'delta': 100.0},
                                         'output': {'dir': self.tmpdir}})
        result = execute_run(resolved, name='blowup')
        self.assertEqual(result.status, 'diverged')
        self.assertFalse(result.ok)
        self.assertIsNone(result.artifacts['csv'])
        self.assertGreater(result.summary['diverged']['time'], 0.0)


# ========================================
# 管理コマンド
# ========================================

class CommandTestMixin:
    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmpdir, ignore_errors=True)

    def call(self, name, /, *args, **options):
        out = StringIO()
        call_command(name, *args, stdout=out, **options)
        return out.getvalue()


@override_settings(SEEKING_RECORD_RUNS=True)
class SeekRunCommandTest(CommandTestMixin, TestCase):
    """seek_run コマンドのテスト"""

    def test_example3_run(self):
        """Example 3 を実行して成果物と SeekingRun を作る"""
        output = self.call('seek_run', game='example3', graph='cycle:5', output_dir=str(self.tmpdir))
        self.assertIn('✓ 完了しました', output)
        csv_path = self.tmpdir / 'example3-cycle5.csv'
        self.assertTrue(csv_path.exists())
        self.assertTrue((self.tmpdir / 'example3-cycle5_summary.json').exists())
        plot = (self.tmpdir / 'example3-cycle5_plot.py').read_text(encoding='utf-8')
        self.assertIn('matplotlib', plot)

        run = SeekingRun.objects.get()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.game_name, 'example3')
        self.assertLessEqual(run.final_error, 1e-3)
        self.assertGreater(run.rate, 0.0)
        np.testing.assert_allclose(run.summary['final_x'], EXAMPLE3_X_STAR, atol=1e-3)
        self.assertIn('完了', str(run))

    def test_example2_from_far(self):
        """Example 2 を x0 = 20 から実行"""
        self.call('seek_run', game='example2', x0='20,20,20,20,20', output_dir=str(self.tmpdir), no_record=True)
        with open(self.tmpdir / 'example2-cycle5_summary.json', encoding='utf-8') as f:
            summary = json.load(f)
        self.assertLessEqual(summary['final_error_inf'], 1e-3)
        self.assertFalse(SeekingRun.objects.exists())

    def test_divergence(self):
        """δ = 100 の Example 1 は発散を報告して失敗する"""
        with self.assertRaises(CommandError) as ctx:
            self.call('seek_run', game='example1', delta=100.0, output_dir=str(self.tmpdir))
        self.assertIn('発散', str(ctx.exception))
        run = SeekingRun.objects.get()
        self.assertEqual(run.status, 'diverged')
        self.assertFalse(run.checks_passed)

    def test_failed_run_is_recorded(self):
        """積分が例外で止まった実行は status='failed' で記録される"""
        with patch('seeking.services.runner.integrate', side_effect=InvalidParams('勾配が有限ではありません')):
            with self.assertRaises(CommandError) as ctx:
                self.call('seek_run', game='example3', output_dir=str(self.tmpdir))
        self.assertIn('実行に失敗しました', str(ctx.exception))
        run = SeekingRun.objects.get()
        self.assertEqual(run.status, 'failed')
        self.assertFalse(run.checks_passed)
        self.assertIn('勾配が有限ではありません', run.error_message)
        self.assertIn('失敗', str(run))

    def test_dump_config_reproduces_run(self):
        """--dump-config で書き出した設定から同じ CSV が再現できる"""
        dumped = self.call('seek_run', game='example1', t_end=20.0, output_dir=str(self.tmpdir / 'first'),
                           name='run', dump_config=True)
        config_path = self.tmpdir / 'resolved.json'
        config_path.write_text(dumped, encoding='utf-8')

        self.call('seek_run', game='example1', t_end=20.0, output_dir=str(self.tmpdir / 'first'),
                  name='run', no_record=True)
        self.call('seek_run', config=str(config_path), output_dir=str(self.tmpdir / 'second'), no_record=True)
        first = (self.tmpdir / 'first' / 'run.csv').read_bytes()
        second = (self.tmpdir / 'second' / 'run.csv').read_bytes()
        self.assertEqual(first, second)

    def test_assumptions_and_lyapunov(self):
        """--assumptions --lyapunov のチェックが Example 3 で通る"""
        output = self.call('seek_run', game='example3', assumptions=True, lyapunov=True,
                           output_dir=str(self.tmpdir), no_record=True)
        self.assertIn('仮定チェック: 合格', output)
        self.assertIn('リアプノフ診断', output)

    def test_batch(self):
        """--batch でディレクトリ内の設定をすべて実行する"""
        configs = self.tmpdir / 'configs'
        configs.mkdir()
        (configs / 'a.json').write_text(json.dumps({
            'game': {'name': 'example3'},
            'seeker': {'t_end': 20.0},
            'output': {'dir': str(self.tmpdir / 'out')},
        }), encoding='utf-8')
        (configs / 'b.json').write_text(json.dumps({
            'game': {'name': 'quadratic', 'H': [[-2.0, 1.0], [1.0, -2.0]], 'v': [1.0, 1.0]},
            'graph': {'preset': 'path', 'n': 2},
            'seeker': {'delta': 0.05, 'dt': 0.05, 't_end': 400.0},
            'output': {'dir': str(self.tmpdir / 'out')},
        }), encoding='utf-8')

        output = self.call('seek_run', batch=str(configs))
        self.assertIn('✓ a.json', output)
        self.assertIn('✓ b.json', output)
        self.assertEqual(SeekingRun.objects.count(), 2)
        run = SeekingRun.objects.get(name='b')
        self.assertLessEqual(run.final_error, 1e-3)

    def test_batch_empty_directory(self):
        with self.assertRaises(CommandError):
            self.call('seek_run', batch=str(self.tmpdir))

    def test_config_error(self):
        """不正な設定は CommandError"""
        with self.assertRaises(CommandError):
            self.call('seek_run', delta=-1.0, output_dir=str(self.tmpdir))
        with self.assertRaises(CommandError):
            self.call('seek_run', config=str(self.tmpdir / 'missing.json'))
        with self.assertRaises(CommandError):
            self.call('seek_run', graph='cycle:4', output_dir=str(self.tmpdir))


class SeekCheckCommandTest(CommandTestMixin, SimpleTestCase):
    """seek_check コマンドのテスト"""

    def test_example1_at_x_star(self):
        output = self.call('seek_check', game='example1')
        self.assertIn('✓ すべてのチェックに合格しました', output)

    def test_example1_second_point_fails(self):
        """もう1つの停留点では自己凹性が NG"""
        out = StringIO()
        with self.assertRaises(CommandError):
            call_command('seek_check', game='example1',
                         at='-1,1,0.263888888888889,0.111111111111111,-0.0555555555555556', stdout=out)
        self.assertIn('NG', out.getvalue())

    def test_example3_json(self):
        """Example 3 は単調性も含めて合格し、JSON を出力できる"""
        report_path = self.tmpdir / 'check.json'
        output = self.call('seek_check', game='example3', json=True, output=str(report_path))
        data = json.loads(output)
        self.assertTrue(data['passed'])
        self.assertFalse(data['monotonicity']['violated'])
        self.assertTrue(report_path.exists())

    def test_example2_with_box(self):
        output = self.call('seek_check', game='example2', box='-25,25', samples=500)
        self.assertIn('強単調性', output)

    def test_missing_candidate(self):
        """x* が未知で --at もなければ CommandError"""
        register_game('one-player', lambda params: FunctionGame(
            1, [lambda z: -z[0] ** 2], [lambda z: -2.0 * z[0]], name='one-player'))
        self.addCleanup(GAME_REGISTRY.pop, 'one-player')
        with self.assertRaises(CommandError):
            self.call('seek_check', game='one-player')
        output = self.call('seek_check', game='one-player', at='0')
        self.assertIn('✓', output)

    def test_candidate_wrong_length(self):
        """--at の長さがプレイヤー数と違えばフィールド付きの CommandError"""
        with self.assertRaises(CommandError) as ctx:
            self.call('seek_check', game='example3', at='1,2,3')
        self.assertIn('at: 長さ 5', str(ctx.exception))

    def test_invalid_box(self):
        with self.assertRaises(CommandError):
            self.call('seek_check', game='example3', box='1')


class SeekNashCommandTest(CommandTestMixin, SimpleTestCase):
    """seek_nash コマンドのテスト"""

    def test_example3(self):
        output = self.call('seek_nash', game='example3')
        values = [float(line.split('=')[1]) for line in output.splitlines() if line.startswith('x*_')]
        np.testing.assert_allclose(values, EXAMPLE3_X_STAR, atol=5e-5)

    def test_quadratic_config(self):
        config_path = self.tmpdir / 'quadratic.json'
        config_path.write_text(json.dumps({
            'game': {'name': 'quadratic', 'H': [[-1.0, 0.0], [0.0, -1.0]], 'v': [0.0, 0.0]},
            'graph': {'preset': 'path', 'n': 2},
        }), encoding='utf-8')
        data = json.loads(self.call('seek_nash', config=str(config_path), json=True))
        self.assertEqual([abs(v) for v in data['x_star']], [0.0, 0.0])

    def test_not_quadratic(self):
        with self.assertRaises(CommandError):
            self.call('seek_nash', game='example1')


class SeekRateCommandTest(CommandTestMixin, SimpleTestCase):
    """seek_rate コマンドのテスト"""

    def write_csv(self, x_star=None):
        game = make_example3()
        params = SeekerParams(n=5, delta=0.05, dt=0.05, t_end=100.0)
        traj = integrate(game, CommGraph.preset('cycle', 5), params, np.full(5, -10.0), x_star=x_star)
        return write_trajectory_csv(traj, self.tmpdir / 'run.csv')

    def test_rate_from_csv(self):
        path = self.write_csv(x_star=quadratic_nash(make_example3()))
        output = self.call('seek_rate', str(path))
        line = next(line for line in output.splitlines() if line.startswith('収束レート'))
        self.assertGreater(float(line.split(':')[1]), 0.0)

    def test_x_star_flag(self):
        """err 列が空なら --x-star が必要"""
        path = self.write_csv()
        with self.assertRaises(CommandError):
            self.call('seek_rate', str(path))
        x_star = ','.join(repr(float(v)) for v in quadratic_nash(make_example3()))
        output = self.call('seek_rate', str(path), x_star=x_star, window='0.1,0.9')
        self.assertIn('r²', output)

    def test_bad_input(self):
        with self.assertRaises(CommandError):
            self.call('seek_rate', str(self.tmpdir / 'missing.csv'))
        path = self.write_csv(x_star=quadratic_nash(make_example3()))
        with self.assertRaises(CommandError):
            self.call('seek_rate', str(path), window='0.5')
        with self.assertRaises(CommandError) as ctx:
            self.call('seek_rate', str(path), x_star='1,2')
        self.assertIn('x_star: 長さ 5', str(ctx.exception))
