from django.db import models


class SeekingRun(models.Model):
    """seek_run の実行記録"""
    STATUS_CHOICES = [
        ('completed', '完了'),
        ('diverged', '発散'),
        ('failed', '失敗'),
    ]

    name = models.CharField(max_length=200, verbose_name='実行名')
    game_name = models.CharField(max_length=100, verbose_name='ゲーム')
    graph_label = models.CharField(max_length=200, blank=True, verbose_name='通信グラフ')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='completed', verbose_name='ステータス')
    checks_passed = models.BooleanField(default=True, verbose_name='チェック合格')
    config = models.JSONField(default=dict, blank=True, verbose_name='解決済み設定')
    summary = models.JSONField(default=dict, blank=True, verbose_name='サマリ')
    final_error = models.FloatField(null=True, blank=True, verbose_name='最終誤差')
    rate = models.FloatField(null=True, blank=True, verbose_name='収束レート')
    csv_path = models.CharField(max_length=500, blank=True, verbose_name='軌道CSV')
    summary_path = models.CharField(max_length=500, blank=True, verbose_name='サマリJSON')
    plot_path = models.CharField(max_length=500, blank=True, verbose_name='プロットスクリプト')
    error_message = models.TextField(blank=True, verbose_name='エラー')
    created_at = models.DateTimeField(auto_now_add=True, verbose_name='作成日時')
    finished_at = models.DateTimeField(null=True, blank=True, verbose_name='完了日時')

    class Meta:
        verbose_name = '探索実行'
        verbose_name_plural = '探索実行'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['game_name', '-created_at'], name='seeking_run_game_created_idx'),
        ]

    def __str__(self):
        return f"{self.name} ({self.get_status_display()})"
