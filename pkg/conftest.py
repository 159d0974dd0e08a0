"""Configure Django for pytest the way `manage.py test` does."""
import os

import django
from django.test.utils import setup_test_environment

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "fluxcheck_backend.settings")
django.setup()
setup_test_environment()
