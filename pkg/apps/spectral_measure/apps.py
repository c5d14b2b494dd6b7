from django.apps import AppConfig


class SpectralMeasureConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.spectral_measure"
    verbose_name = "Nonlinear spectral distribution"
