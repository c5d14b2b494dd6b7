from pathlib import Path
from decouple import config, Csv


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config("DJANGO_SECRET_KEY", default="spectral-lab-local-only")
DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = config("ALLOWED_HOSTS", default="localhost,127.0.0.1", cast=Csv())

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Third party
    "rest_framework",
    # Local apps
    "apps.core",
    "apps.potentials",
    "apps.jost",
    "apps.scattering",
    "apps.dft",
    "apps.evolve",
    "apps.spectral_measure",
    "apps.asymptotics",
    "apps.decay_probe",
    "apps.runstore",
    "apps.lab",
]

# The laboratory persists nothing in a database; runs live on disk under LAB_OUTPUT_DIR.
DATABASES = {}

LAB_OUTPUT_DIR = Path(config("LAB_OUTPUT_DIR", default=str(BASE_DIR / "runs")))
LAB_VERSION = "0.4.0"

# Defaults applied to every run config; each can be overridden per process from the environment.
SPECTRAL_LAB = {
    "GRID": {
        "X_HALF_WIDTH": config("LAB_X_HALF_WIDTH", default=40.0, cast=float),
        "N_X": config("LAB_N_X", default=2048, cast=int),
        "K_HALF_WIDTH": config("LAB_K_HALF_WIDTH", default=16.0, cast=float),
        "N_K": config("LAB_N_K", default=2048, cast=int),
    },
    "EVOLUTION": {
        "T_END": config("LAB_T_END", default=200.0, cast=float),
        "DT": config("LAB_DT", default=0.02, cast=float),
        "ETA": config("LAB_ETA", default=0.1, cast=float),
        "SNAPSHOTS": config("LAB_SNAPSHOTS", default="1,2,5,10,20,50,100,200", cast=Csv(float)),
        "BLOWUP_FACTOR": 10.0,
        "BOUNDARY_MASS_FRACTION": 1e-8,
    },
    "EXPERIMENT": {
        "ALPHA": config("LAB_ALPHA", default=0.05, cast=float),
        "T_FIT_MIN": config("LAB_T_FIT_MIN", default=20.0, cast=float),
    },
    "TOLERANCES": {
        "VOLTERRA_RESIDUAL": 1e-8,
        "INVERSE_T_FLOOR": 1e-12,
        "GENERIC_RELATIVE": 1e-8,
        "SCATTERING_IDENTITY": 1e-6,
        "SPLIT_IDENTITY": 1e-12,
        "BARRIER_ORACLE": 1e-6,
        "PLANCHEREL": 1e-3,
        "DIAGONALIZATION": 1e-3,
        "POWER_ITERATION": 1e-10,
    },
    "CSV_SIGNIFICANT_DIGITS": 17,
}

REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": ["rest_framework.renderers.JSONRenderer"],
    "UNAUTHENTICATED_USER": None,
}

# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LOG_DIR = BASE_DIR / "logs"
LOG_DIR.mkdir(exist_ok=True)
LOG_LEVEL = config("LAB_LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {asctime} {message}",
            "style": "{",
        },
    },
    "handlers": {
        # Console output; `lab --quiet` raises this to WARNING
        "console": {
            "level": LOG_LEVEL,
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
        # Main log file
        "file": {
            "level": "INFO",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": LOG_DIR / "lab.log",
            "maxBytes": 1024 * 1024 * 10,  # 10 MB
            "backupCount": 5,
            "formatter": "verbose",
        },
        # Error log file
        "error_file": {
            "level": "ERROR",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": LOG_DIR / "errors.log",
            "maxBytes": 1024 * 1024 * 10,  # 10 MB
            "backupCount": 5,
            "formatter": "verbose",
        },
        # Long evolutions get their own file
        "evolve_file": {
            "level": "INFO",
            "class": "logging.handlers.RotatingFileHandler",
            "filename": LOG_DIR / "evolve.log",
            "maxBytes": 1024 * 1024 * 5,  # 5 MB
            "backupCount": 3,
            "formatter": "verbose",
        },
    },
    "loggers": {
        "": {
            "handlers": ["console", "file", "error_file"],
            "level": LOG_LEVEL,
        },
        "django": {
            "handlers": ["console", "file"],
            "level": "INFO",
            "propagate": False,
        },
        "apps.potentials": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.jost": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.scattering": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.dft": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.evolve": {"handlers": ["console", "evolve_file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.spectral_measure": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.asymptotics": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.decay_probe": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.runstore": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
        "apps.lab": {"handlers": ["console", "file", "error_file"], "level": LOG_LEVEL, "propagate": False},
    },
}
