"""
Access to the ``FLUXCHECK`` settings dict with defaults.
"""

from pathlib import Path
from typing import Any

from django.conf import settings

_APP_DIR = Path(__file__).resolve().parent

DEFAULTS = {
    "SPEC_DIRS": [_APP_DIR / "specs"],
    "VECTOR_DIR": _APP_DIR / "vectors",
    "SUPPORT_MODULE": "flux_support",
    "DEBUG_ASSERTIONS": True,
    "RANDOM_SEED": 20191,
    "ORACLE_SAMPLES": 2000,
    "MUTATION_SAMPLES": 500,
    "FUZZ_SAMPLES": 2000,
    "MAX_FUZZ_BYTES": 2048,
}


def flux_setting(name: str) -> Any:
    """Return ``settings.FLUXCHECK[name]``, falling back to the defaults."""
    if name not in DEFAULTS:
        raise KeyError(f"unknown FLUXCHECK setting: {name}")
    configured = getattr(settings, "FLUXCHECK", {})
    return configured.get(name, DEFAULTS[name])
