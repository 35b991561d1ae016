"""均衡探索シミュレーションで使う例外クラス"""


class SeekingError(Exception):
    """seeking アプリの例外の基底クラス"""


class InvalidParams(SeekingError, ValueError):
    """パラメータ検証エラー（δ・ゲイン・ゲーム係数など）"""


class DimensionMismatch(SeekingError, ValueError):
    """ベクトル/行列の次元が一致しない"""


class SingularMatrix(SeekingError, ArithmeticError):
    """H が数値的に特異（均衡の一意性が保証されない）"""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NotHurwitz(SeekingError, ArithmeticError):
    """−M がフルビッツでない（リアプノフ方程式が解けない）"""

    def __init__(self, message, max_real_part=None):
        super().__init__(message)
        self.max_real_part = max_real_part


class NotQuadratic(SeekingError, TypeError):
    """閉形式の均衡計算は二次ゲームのみ対応"""


class Diverged(SeekingError, ArithmeticError):
    """積分中に状態が発散した（δ が大きすぎる、または仮定違反）

    Attributes:
        time: 発散を検出した時刻
        step: ステップ番号
        player: 原因となったプレイヤー（0始まり、特定できない場合None）
        x, Y: 発散直前/直後の状態スナップショット
    """

    def __init__(self, message, time=None, step=None, player=None, x=None, Y=None):
        super().__init__(message)
        self.time = time
        self.step = step
        self.player = player
        self.x = x
        self.Y = Y

    def to_dict(self):
        return {
            'message': str(self),
            'time': self.time,
            'step': self.step,
            'player': None if self.player is None else self.player + 1,
        }


class EmptyWindow(SeekingError, ValueError):
    """レートフィットの窓にサンプルが足りない"""


class NonpositiveError(SeekingError, ValueError):
    """誤差が0以下のサンプルを含む（対数が取れない）"""


class ConfigError(SeekingError, ValueError):
    """実行設定の検証エラー（フィールド単位のメッセージ付き）"""

    def __init__(self, errors):
        self.errors = errors
        lines = [f'{field}: {"; ".join(msgs)}' for field, msgs in errors.items()]
        super().__init__('設定エラー: ' + ' / '.join(lines))


class InaccurateSolution(SeekingError, ArithmeticError):
    """線形方程式の解の残差が許容値を超えた"""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
