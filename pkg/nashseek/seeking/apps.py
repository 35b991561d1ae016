from django.apps import AppConfig


class SeekingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'seeking'
    verbose_name = '均衡探索'
