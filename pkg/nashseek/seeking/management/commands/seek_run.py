"""
均衡探索ダイナミクスを積分し、軌道 CSV・サマリ JSON・プロットスクリプトを書き出すコマンド

使い方:
  python manage.py seek_run --game example3 --graph cycle:5
  python manage.py seek_run --game example2 --x0 20,20,20,20,20 --assumptions
  python manage.py seek_run --config run.json --dump-config > resolved.json
  python manage.py seek_run --batch configs/
"""
from django.core.management.base import BaseCommand, CommandError

from seeking.services.exceptions import SeekingError
from seeking.services.reporting import format_run_summary
from seeking.services.run_config import flags_to_overrides, load_config_file, resolve_config
from seeking.services.runner import execute_run, failed_result, record_run, run_batch


def add_run_arguments(parser):
    """seek_run / seek_check で共通の設定フラグ"""
    parser.add_argument('--config', help='実行設定の JSON ファイル')
    parser.add_argument('--game', help='ゲーム名（example1 / example2 / example3 / quadratic）')
    parser.add_argument('--graph', help='通信グラフ（例: cycle:5, edges:4:1-2,2-3,3-4）')
    parser.add_argument('--delta', type=float, help='時間スケール分離 δ')
    parser.add_argument('--kbar', help='k̄_i（カンマ区切り、1つなら全員同じ）')
    parser.add_argument('--dt', type=float, help='積分ステップ')
    parser.add_argument('--t-end', type=float, dest='t_end', help='積分の終端時刻')
    parser.add_argument('--record-every', type=int, dest='record_every', help='記録の間引き間隔（ステップ数）')
    parser.add_argument('--x0', help='初期行動（カンマ区切り、1つなら全員同じ）')
    parser.add_argument('--x-star', dest='x_star', help='既知の均衡点（カンマ区切り）')


class Command(BaseCommand):
    help = '合意ベースの均衡探索ダイナミクスを積分して成果物を書き出す'

    def add_arguments(self, parser):
        add_run_arguments(parser)
        parser.add_argument('--output-dir', dest='output_dir', help='成果物の出力先（既定: SEEKING_OUTPUT_DIR）')
        parser.add_argument('--name', help='成果物のファイル名の接頭辞')
        parser.add_argument('--include-estimates', action='store_true', dest='include_estimates',
                            help='CSV に推定値 y_ij の列も出力する')
        parser.add_argument('--assumptions', action='store_true', help='仮定チェックを実行する')
        parser.add_argument('--lyapunov', action='store_true', help='リアプノフ関数の診断を実行する')
        parser.add_argument('--reduced', action='store_true', help='縮約系（δ → 0）との比較を行う')
        parser.add_argument('--search-delta', action='store_true', dest='search_delta',
                            help='発散しない δ を半減しながら探してから実行する')
        parser.add_argument('--dump-config', action='store_true', dest='dump_config',
                            help='解決済みの設定を表示して終了する')
        parser.add_argument('--batch', help='このディレクトリ内の *.json をすべて実行する')
        parser.add_argument('--no-record', action='store_true', dest='no_record',
                            help='SeekingRun に記録しない')

    def handle(self, *args, **options):
        try:
            overrides = flags_to_overrides(options)
            if options.get('batch'):
                return self._handle_batch(options['batch'], overrides, options)
            file_config = load_config_file(options['config']) if options.get('config') else None
            resolved = resolve_config(file_config, overrides)
        except SeekingError as e:
            raise CommandError(str(e))

        if options['dump_config']:
            self.stdout.write(resolved.dump())
            return

        try:
            result = execute_run(resolved)
        except SeekingError as e:
            if not options['no_record']:
                record_run(failed_result(resolved, e))
            raise CommandError(f'実行に失敗しました: {e}')
        if not options['no_record']:
            record_run(result)

        if result.status == 'diverged':
            info = result.summary['diverged']
            raise CommandError(
                f'発散しました: t={info["time"]:g} step={info["step"]} player={info["player"]} '
                f'（δ={resolved.params.delta:g} が大きすぎる可能性があります）'
            )

        self.stdout.write(format_run_summary(result.summary))
        if not result.checks_passed:
            raise CommandError('要求されたチェックに合格しませんでした。')
        self.stdout.write(self.style.SUCCESS('✓ 完了しました'))

    def _handle_batch(self, directory, overrides, options):
        results = run_batch(directory, overrides)
        if not results:
            raise CommandError(f'{directory} に *.json がありません。')
        failures = 0
        for path, result in results:
            if isinstance(result, Exception):
                failures += 1
                self.stdout.write(self.style.ERROR(f'✗ {path.name}: {result}'))
                continue
            if not options['no_record']:
                record_run(result)
            if result.ok:
                error = result.summary.get('final_error')
                detail = f'最終誤差 {error:.3e}' if error is not None else '完了'
                self.stdout.write(self.style.SUCCESS(f'✓ {path.name}: {detail}'))
            else:
                failures += 1
                self.stdout.write(self.style.ERROR(f'✗ {path.name}: {result.status}'))
        self.stdout.write(f'合計 {len(results)} 件中 {len(results) - failures} 件成功')
        if failures:
            raise CommandError(f'{failures} 件の実行が失敗しました。')
