from django.apps import AppConfig


class DftConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.dft"
    verbose_name = "Distorted Fourier transform"
