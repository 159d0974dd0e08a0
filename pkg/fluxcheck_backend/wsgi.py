"""
WSGI config for fluxcheck_backend project.

It exposes the WSGI callable as a module-level variable named ``application``;
serve it with ``gunicorn fluxcheck_backend.wsgi``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "fluxcheck_backend.settings")

application = get_wsgi_application()
