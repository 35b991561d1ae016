"""
URL configuration for nashseek project.

実行記録（SeekingRun）を閲覧する管理画面のみ。
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
