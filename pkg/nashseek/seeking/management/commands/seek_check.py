"""
候補点で均衡の仮定（停留性・自己凹性・B の対角優位/フルビッツ性・強単調性）を確認するコマンド

候補点は --at、設定の x_star、ゲームの既知の均衡、二次ゲームの閉形式の順で決まる。

使い方:
  python manage.py seek_check --game example1
  python manage.py seek_check --game example1 --at -1,1,0.263888888888889,0.111111111111111,-0.0555555555555556
  python manage.py seek_check --game example2 --box -25,25 --samples 1000 --json
"""
import json

from django.core.management.base import BaseCommand, CommandError

from seeking.services.analysis import assumption_report, estimate_monotonicity
from seeking.services.exceptions import SeekingError
from seeking.services.reporting import format_check_report, write_json
from seeking.services.run_config import (
    flags_to_overrides, load_config_file, parse_player_vector, parse_vector, resolve_config,
)

from .seek_run import add_run_arguments


class Command(BaseCommand):
    help = '候補点での仮定チェック（AssumptionReport + 強単調性）を表示する'

    def add_arguments(self, parser):
        add_run_arguments(parser)
        parser.add_argument('--at', help='チェックする候補点（カンマ区切り）')
        parser.add_argument('--box', help='強単調性を調べる箱 "下限,上限"')
        parser.add_argument('--samples', type=int, help='強単調性のサンプル対の数')
        parser.add_argument('--seed', type=int, help='強単調性の乱数シード')
        parser.add_argument('--json', action='store_true', help='機械可読の JSON を表示する')
        parser.add_argument('--output', help='JSON レポートの保存先')

    def handle(self, *args, **options):
        try:
            file_config = load_config_file(options['config']) if options.get('config') else None
            resolved = resolve_config(file_config, flags_to_overrides(options))
            point = self._candidate(resolved, options)
            analysis = resolved.config['analysis']
            report = assumption_report(resolved.game, point, kbar=resolved.params.kbar,
                                       step=analysis['fd_step'], tol=analysis['tol'])
            monotonicity = None
            mono_config = self._monotonicity_config(analysis.get('monotonicity'), options)
            if mono_config:
                monotonicity = estimate_monotonicity(
                    resolved.game, mono_config['box'], n_samples=mono_config['samples'], seed=mono_config['seed'],
                )
        except SeekingError as e:
            raise CommandError(str(e))

        passed = report.passed and (monotonicity is None or not monotonicity.violated)
        data = {
            'game': resolved.game.name,
            'assumptions': report.to_dict(),
            'monotonicity': None if monotonicity is None else monotonicity.to_dict(),
            'passed': passed,
        }
        if options['json']:
            self.stdout.write(json.dumps(data, ensure_ascii=False, indent=2))
        else:
            self.stdout.write(format_check_report(report, monotonicity))
        if options.get('output'):
            write_json(data, options['output'])

        if not passed:
            raise CommandError('仮定チェックに合格しませんでした。')
        if not options['json']:
            self.stdout.write(self.style.SUCCESS('✓ すべてのチェックに合格しました'))

    def _candidate(self, resolved, options):
        if options.get('at'):
            return parse_player_vector(options['at'], resolved.game.n, 'at')
        if resolved.x_star is not None:
            return resolved.x_star
        raise CommandError(
            f'{resolved.game.name} の候補点がありません。--at か設定の x_star で指定してください。'
        )

    def _monotonicity_config(self, preset, options):
        if not (preset or options.get('box')):
            return None
        config = dict(preset or {'samples': 1000, 'seed': 0})
        if options.get('box'):
            box = parse_vector(options['box'])
            if not isinstance(box, list) or len(box) != 2:
                raise CommandError('--box は "下限,上限" で指定してください。')
            config['box'] = box
        if options.get('samples') is not None:
            config['samples'] = options['samples']
        if options.get('seed') is not None:
            config['seed'] = options['seed']
        return config
