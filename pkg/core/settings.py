"""
Django settings for the calibration project.

Only the pieces a command-line project needs are configured: the
calibration app, its defaults and logging. There is no web surface.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Nothing is signed or served; the key only satisfies Django's startup checks.
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'calibration-cli-not-secret')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    # Local apps
    'calibration.apps.CalibrationConfig',
]


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Calibration defaults. Precedence, lowest first: these values, the config
# file (--config or CALIBRATION_CONFIG), --set overrides, explicit flags.

CALIBRATION_CONFIG = os.environ.get('CALIBRATION_CONFIG', '')

CALIBRATION = {
    'solver': {
        'alpha': 1e-2,
        'beta': 0.9,
        'tol': 1e-10,
        'max_iter': 200000,
        'escape_stall_window': 200,
        'escape_scale': 1e-3,
        'max_escapes': 10,
        'closed_form': 'auto',
        'seed': 0,
        'precondition': False,
        'cov_refresh': 50,
        'cov_eps': 1e-12,
        'trace_every': 100,
        'skip_limit': 0.5,
        'lm_lambda0': 1e-3,
        'lm_mu': 10.0,
        'lm_lambda_min': 1e-12,
        'lm_lambda_max': 1e6,
        'lm_max_iter': 100,
        'lm_tol': 1e-16,
        'eps_theta': 0.05,
        'eps_h': 0.005,
        'mean_tol': 1e-12,
        'mean_max_iter': 100,
        'si_ah_translation': 'means',
    },
    'metric': {
        'norm': 'det',
    },
    'campaign': {
        'trials': 30,
        'n_pairs': 100,
        'seed0': 0,
        'degraded_threshold': 0.2,
    },
    'workspaces': {
        'large': 1500.0,
        'small': 400.0,
    },
}


# Logging: diagnostics only, always on stderr. Results go to stdout or files.

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'calibration': {
            'handlers': ['console'],
            'level': os.environ.get('CALIBRATION_LOG_LEVEL', 'WARNING'),
            'propagate': False,
        },
    },
}
