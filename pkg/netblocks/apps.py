from django.apps import AppConfig


class NetblocksConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'netblocks'
    verbose_name = 'Network blocks and models'
