"""
Django settings for polarlab_project.

The project has no web surface: it exists to host the simulation apps,
their management commands, the run registry and the test runner.
"""

from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = 'polarlab-local-only-no-web-surface'

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'core',
    'kernel',
    'engine',
    'oracle',
    'meanfield',
    'geometry',
    'experiments',
]


# Database
# Only the experiments run registry is stored here.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

TIME_ZONE = 'UTC'

USE_TZ = True


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': 'INFO', 'propagate': False}
        for app in ('core', 'kernel', 'engine', 'oracle', 'meanfield', 'geometry', 'experiments')
    },
}


# Polarlab settings

POLARLAB_VERSION = '0.3.0'

# Worker pool size for Monte-Carlo runs, read from the environment.
POLARLAB_WORKERS = config('POLARLAB_WORKERS', default=1, cast=int)

POLARLAB_OUTPUT_DIR = BASE_DIR / 'runs'

POLARLAB_RECORD_RUNS = True

POLARLAB_CSV_DIGITS = 12

# Read by the test suite only: enables the minutes-long desk-scale checks.
POLARLAB_SLOW_TESTS = config('POLARLAB_SLOW_TESTS', default=False, cast=bool)
