"""
既存の軌道 CSV から指数収束レートを当てはめ直すコマンド

使い方:
  python manage.py seek_rate outputs/example3-cycle5.csv
  python manage.py seek_rate run.csv --window 0.1,0.9 --x-star 2.0147,6.7766,11.5385,16.3004,21.0623
"""
import numpy as np
from django.core.management.base import BaseCommand, CommandError

from seeking.services.analysis import DEFAULT_RATE_WINDOW, fit_window_rate
from seeking.services.exceptions import SeekingError
from seeking.services.reporting import read_trajectory_csv
from seeking.services.run_config import parse_player_vector, parse_vector


class Command(BaseCommand):
    help = '軌道 CSV の ln(誤差) を窓内で直線当てはめして収束レートを表示する'

    def add_arguments(self, parser):
        parser.add_argument('csv_path', help='seek_run が書き出した軌道 CSV')
        parser.add_argument('--window', help='当てはめ窓（区間に対する割合 "lo,hi"）')
        parser.add_argument('--floor', type=float, help='これ以下の誤差を浮動小数点の床とみなす')
        parser.add_argument('--x-star', dest='x_star', help='err 列が空のときに使う均衡点')

    def handle(self, *args, **options):
        try:
            times, xs, errors = read_trajectory_csv(options['csv_path'])
        except FileNotFoundError:
            raise CommandError(f'ファイルが見つかりません: {options["csv_path"]}')
        except (SeekingError, ValueError) as e:
            raise CommandError(f'CSV を読み込めません: {e}')

        if options.get('x_star'):
            try:
                x_star = parse_player_vector(options['x_star'], xs.shape[1], 'x_star')
            except SeekingError as e:
                raise CommandError(str(e))
            errors = np.linalg.norm(xs - x_star, axis=1)
        if errors is None:
            raise CommandError('CSV に err 列の値がありません。--x-star を指定してください。')

        window = DEFAULT_RATE_WINDOW
        if options.get('window'):
            try:
                window = parse_vector(options['window'])
            except SeekingError as e:
                raise CommandError(str(e))
            if not isinstance(window, list) or len(window) != 2:
                raise CommandError('--window は "lo,hi" で指定してください。')
        try:
            fit = fit_window_rate(times, errors, window=window, floor=options.get('floor'))
        except SeekingError as e:
            raise CommandError(str(e))

        self.stdout.write(f'サンプル数: {len(times)}（窓内 {fit.n_points}）')
        self.stdout.write(f'窓: [{fit.t_start:g}, {fit.t_end:g}]')
        self.stdout.write(f'収束レート: {fit.rate:.6g}')
        self.stdout.write(f'r²: {fit.r_squared:.6f}')
