from django.apps import AppConfig


class MessageformatConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "messageformat"
    verbose_name = "Message format toolchain"
