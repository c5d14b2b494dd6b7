from django.apps import AppConfig


class RunstoreConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.runstore"
    verbose_name = "Run configs and artifacts"
