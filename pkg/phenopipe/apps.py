from django.apps import AppConfig


class PhenopipeConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'phenopipe'
    verbose_name = 'Phenotyping pipelines'
