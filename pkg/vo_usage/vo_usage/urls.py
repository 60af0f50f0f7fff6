"""
URL configuration for the vo_usage project.

The simulator has no HTTP API; the admin site is exposed only to browse
experiment runs archived with `--record`.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
