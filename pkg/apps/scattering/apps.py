from django.apps import AppConfig


class ScatteringConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.scattering"
    verbose_name = "Scattering coefficients"
