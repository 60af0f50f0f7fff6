from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("strategy", "policy", "sync", "seed", "aru", "art_s", "completed", "created_at")
    list_filter = ("sync", "strategy", "policy", "created_at")
    search_fields = ("config_digest",)
    date_hierarchy = "created_at"
