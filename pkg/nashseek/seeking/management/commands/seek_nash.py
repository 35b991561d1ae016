"""
二次ゲームの唯一のナッシュ均衡 x* = −H⁻¹v を全精度で表示するコマンド

使い方:
  python manage.py seek_nash --game example3
  python manage.py seek_nash --config quadratic.json
"""
import json

from django.core.management.base import BaseCommand, CommandError

from seeking.services.exceptions import SeekingError
from seeking.services.games import nash_candidate, quadratic_nash
from seeking.services.run_config import flags_to_overrides, load_config_file, resolve_config


class Command(BaseCommand):
    help = '二次ゲームの閉形式の均衡と停留性の残差を表示する'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='実行設定の JSON ファイル')
        parser.add_argument('--game', help='ゲーム名')
        parser.add_argument('--json', action='store_true', help='機械可読の JSON を表示する')

    def handle(self, *args, **options):
        try:
            file_config = load_config_file(options['config']) if options.get('config') else None
            resolved = resolve_config(file_config, flags_to_overrides(options))
            x_star = quadratic_nash(resolved.game)
        except SeekingError as e:
            raise CommandError(str(e))

        candidate = nash_candidate(resolved.game, x_star)
        if options['json']:
            self.stdout.write(json.dumps({'game': resolved.game.name, **candidate.to_dict()}, indent=2))
            return
        self.stdout.write(f'ゲーム: {resolved.game.name}')
        for i, value in enumerate(candidate.x_star, start=1):
            self.stdout.write(f'x*_{i} = {float(value)!r}')
        self.stdout.write(f'停留性の残差: {candidate.stationarity_residual:.3e}')
