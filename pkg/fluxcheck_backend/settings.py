"""
Django settings for fluxcheck_backend project.

For more information on this file, see
https://docs.djangoproject.com/en/5.0/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.0/ref/settings/
"""

import os
from pathlib import Path


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# Quick-start development settings - unsuitable for production
# See https://docs.djangoproject.com/en/5.0/howto/deployment/checklist/

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv(
    "DJANGO_SECRET_KEY",
    "django-insecure-fluxcheck-development-key-change-me",
)

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.getenv("DJANGO_DEBUG", "1") == "1"

ALLOWED_HOSTS = [os.getenv("RENDER_EXTERNAL_HOSTNAME", "localhost")]


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "rest_framework",
    "corsheaders",

    #custom apps
    "messageformat",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "corsheaders.middleware.CorsMiddleware",
    "django.middleware.common.CommonMiddleware",
]

ROOT_URLCONF = "fluxcheck_backend.urls"

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [
                "django.template.context_processors.request",
            ],
        },
    },
]

WSGI_APPLICATION = "fluxcheck_backend.wsgi.application"


# Database
# The toolchain keeps no persistent state; specifications and buffers
# arrive with each request or command invocation.

DATABASES = {}


# REST framework
# The API is stateless and unauthenticated, like the CLI it mirrors.

REST_FRAMEWORK = {
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": ["rest_framework.permissions.AllowAny"],
    "UNAUTHENTICATED_USER": None,
    "DEFAULT_RENDERER_CLASSES": ["rest_framework.renderers.JSONRenderer"],
    "DEFAULT_PARSER_CLASSES": ["rest_framework.parsers.JSONParser"],
}

CORS_ALLOW_ALL_ORIGINS = DEBUG
CORS_ALLOWED_ORIGINS = [
    "http://localhost:8080",
    "http://localhost:8081",
]
CORS_ALLOWED_HEADERS = [
    'accept',
    'accept-encoding',
    'content-type',
    'origin',
    'user-agent',
    'x-requested-with',
]


# Toolchain settings
# Property-test sizes are kept small by default; acceptance runs raise them
# through the environment, e.g. FLUXCHECK_FUZZ_SAMPLES=1000000.

FLUXCHECK = {
    "SPEC_DIRS": [BASE_DIR / "messageformat" / "specs"],
    "VECTOR_DIR": BASE_DIR / "messageformat" / "vectors",
    "SUPPORT_MODULE": "flux_support",
    "DEBUG_ASSERTIONS": True,
    "RANDOM_SEED": int(os.getenv("FLUXCHECK_RANDOM_SEED", "20191")),
    "ORACLE_SAMPLES": int(os.getenv("FLUXCHECK_ORACLE_SAMPLES", "2000")),
    "MUTATION_SAMPLES": int(os.getenv("FLUXCHECK_MUTATION_SAMPLES", "500")),
    "FUZZ_SAMPLES": int(os.getenv("FLUXCHECK_FUZZ_SAMPLES", "2000")),
    "MAX_FUZZ_BYTES": int(os.getenv("FLUXCHECK_MAX_FUZZ_BYTES", "2048")),
}


# Logging
# https://docs.djangoproject.com/en/5.0/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "{levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "messageformat": {
            "handlers": ["console"],
            "level": os.getenv("FLUXCHECK_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.0/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.0/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
