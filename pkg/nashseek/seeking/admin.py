from django.contrib import admin

from .models import SeekingRun


@admin.register(SeekingRun)
class SeekingRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'name', 'game_name', 'graph_label', 'status', 'checks_passed', 'final_error', 'rate', 'created_at')
    list_filter = ('status', 'checks_passed', 'game_name')
    search_fields = ('name', 'game_name', 'graph_label')
    readonly_fields = ('created_at', 'finished_at')
    ordering = ('-created_at',)
    list_per_page = 50
