from django.apps import AppConfig


class DecayProbeConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.decay_probe"
    verbose_name = "Decay rates and operator norms"
