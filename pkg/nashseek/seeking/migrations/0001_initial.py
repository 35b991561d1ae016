# Generated by Django 5.2.7 on 2026-10-16 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SeekingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=200, verbose_name='実行名')),
                ('game_name', models.CharField(max_length=100, verbose_name='ゲーム')),
                ('graph_label', models.CharField(blank=True, max_length=200, verbose_name='通信グラフ')),
                ('status', models.CharField(choices=[('completed', '完了'), ('diverged', '発散'), ('failed', '失敗')], default='completed', max_length=20, verbose_name='ステータス')),
                ('checks_passed', models.BooleanField(default=True, verbose_name='チェック合格')),
                ('config', models.JSONField(blank=True, default=dict, verbose_name='解決済み設定')),
                ('summary', models.JSONField(blank=True, default=dict, verbose_name='サマリ')),
                ('final_error', models.FloatField(blank=True, null=True, verbose_name='最終誤差')),
                ('rate', models.FloatField(blank=True, null=True, verbose_name='収束レート')),
                ('csv_path', models.CharField(blank=True, max_length=500, verbose_name='軌道CSV')),
                ('summary_path', models.CharField(blank=True, max_length=500, verbose_name='サマリJSON')),
                ('plot_path', models.CharField(blank=True, max_length=500, verbose_name='プロットスクリプト')),
                ('error_message', models.TextField(blank=True, verbose_name='エラー')),
                ('created_at', models.DateTimeField(auto_now_add=True, verbose_name='作成日時')),
                ('finished_at', models.DateTimeField(blank=True, null=True, verbose_name='完了日時')),
            ],
            options={
                'verbose_name': '探索実行',
                'verbose_name_plural': '探索実行',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['game_name', '-created_at'], name='seeking_run_game_created_idx')],
            },
        ),
    ]
