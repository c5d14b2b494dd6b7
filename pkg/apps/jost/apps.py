from django.apps import AppConfig


class JostConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.jost"
    verbose_name = "Jost solutions"
