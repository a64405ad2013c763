"""
Django settings for the phenodesk project.
"""

from pathlib import Path
import os
import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Initialize environment variables
env = environ.Env(
    DEBUG=(bool, False)
)

# Read .env file
environ.Env.read_env(os.path.join(BASE_DIR, '.env'))

# Only used for signing; the project serves no web traffic.
SECRET_KEY = env('SECRET_KEY', default='phenodesk-local-key')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=['localhost', '127.0.0.1'])

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Local apps
    'core',
    'numerics',
    'netblocks',
    'imaging',
    'augment',
    'metrics',
    'baselines',
    'synthdata',
    'phenopipe',
    'reports',
]

# Database
# https://docs.djangoproject.com/en/5.0/ref/settings/#databases
DATABASES = {
    'default': env.db('DATABASE_URL', default='sqlite:///db.sqlite3')
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Pipeline behaviour
PHENODESK_RECORD_RUNS = env.bool('PHENODESK_RECORD_RUNS', default=True)
PHENODESK_DEFAULT_JOBS = env.int('PHENODESK_DEFAULT_JOBS', default=1)
PHENODESK_LOG_LEVEL = env('PHENODESK_LOG_LEVEL', default='INFO')

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': PHENODESK_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('core', 'numerics', 'netblocks', 'imaging', 'augment', 'metrics',
                    'baselines', 'synthdata', 'phenopipe', 'reports')
    },
}

# Sentry Configuration (optional)
SENTRY_DSN = env('SENTRY_DSN', default='')
if SENTRY_DSN:
    import sentry_sdk
    from sentry_sdk.integrations.django import DjangoIntegration

    sentry_sdk.init(
        dsn=SENTRY_DSN,
        integrations=[DjangoIntegration()],
        traces_sample_rate=0.0,
        send_default_pii=False
    )
