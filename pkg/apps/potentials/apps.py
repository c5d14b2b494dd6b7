from django.apps import AppConfig


class PotentialsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.potentials"
    verbose_name = "Admissible potentials"
