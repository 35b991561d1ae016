# seeking/services/: 均衡探索の計算モジュール
#
# graph: 通信グラフと推定系行列 / games: ゲーム定義と閉形式解
# analysis: 仮定チェック・リアプノフ診断・レート推定 / dynamics: 探索ダイナミクスと積分
# run_config / reporting / runner: 管理コマンドから使う設定解決・成果物・実行

from .exceptions import (
    ConfigError,
    DimensionMismatch,
    Diverged,
    EmptyWindow,
    InaccurateSolution,
    InvalidParams,
    NonpositiveError,
    NotHurwitz,
    NotQuadratic,
    SeekingError,
    SingularMatrix,
)
from .graph import (
    GRAPH_PRESETS,
    CommGraph,
    algebraic_connectivity,
    estimation_is_hurwitz,
    estimation_matrix,
    gained_estimation_matrix,
    is_connected,
    laplacian,
    parse_graph_spec,
    random_connected_graph,
    random_disconnected_graph,
)
from .games import (
    Example1Game,
    Example2Game,
    FunctionGame,
    Game,
    NashCandidate,
    QuadraticGame,
    available_games,
    get_game,
    grad_check,
    make_example1,
    make_example2,
    make_example3,
    nash_candidate,
    pseudogradient,
    quadratic_nash,
    register_game,
)
from .dynamics import (
    SeekerParams,
    SeekerState,
    Trajectory,
    consensus_residual,
    integrate,
    integrate_reduced,
    reduced_rhs,
    rhs,
)
from .analysis import (
    AssumptionReport,
    LyapunovMonitor,
    MonotonicityEstimate,
    assumption_report,
    check_assumption3,
    check_potential_structure,
    estimate_monotonicity,
    fit_exponential_rate,
    fit_window_rate,
    is_hurwitz,
    is_strictly_diag_dominant,
    lyapunov_along_trajectory,
    numeric_B,
    search_working_delta,
    solve_lyapunov,
)

__all__ = [
    'ConfigError',
    'DimensionMismatch',
    'Diverged',
    'EmptyWindow',
    'InaccurateSolution',
    'InvalidParams',
    'NonpositiveError',
    'NotHurwitz',
    'NotQuadratic',
    'SeekingError',
    'SingularMatrix',
    'GRAPH_PRESETS',
    'CommGraph',
    'algebraic_connectivity',
    'estimation_is_hurwitz',
    'estimation_matrix',
    'gained_estimation_matrix',
    'is_connected',
    'laplacian',
    'parse_graph_spec',
    'random_connected_graph',
    'random_disconnected_graph',
    'Example1Game',
    'Example2Game',
    'FunctionGame',
    'Game',
    'NashCandidate',
    'QuadraticGame',
    'available_games',
    'get_game',
    'grad_check',
    'make_example1',
    'make_example2',
    'make_example3',
    'nash_candidate',
    'pseudogradient',
    'quadratic_nash',
    'register_game',
    'SeekerParams',
    'SeekerState',
    'Trajectory',
    'consensus_residual',
    'integrate',
    'integrate_reduced',
    'reduced_rhs',
    'rhs',
    'AssumptionReport',
    'LyapunovMonitor',
    'MonotonicityEstimate',
    'assumption_report',
    'check_assumption3',
    'check_potential_structure',
    'estimate_monotonicity',
    'fit_exponential_rate',
    'fit_window_rate',
    'is_hurwitz',
    'is_strictly_diag_dominant',
    'lyapunov_along_trajectory',
    'numeric_B',
    'search_working_delta',
    'solve_lyapunov',
]
