"""
WSGI config for the vo_usage project (serves the results admin).
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'vo_usage.settings')

application = get_wsgi_application()
