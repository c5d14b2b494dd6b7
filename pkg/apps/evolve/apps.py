from django.apps import AppConfig


class EvolveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.evolve"
    verbose_name = "Linear and cubic evolution"
