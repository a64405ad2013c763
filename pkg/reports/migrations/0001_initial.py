# Generated by Django 5.0.6 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=50)),
                ('seed', models.BigIntegerField(default=0)),
                ('build_id', models.CharField(blank=True, max_length=100)),
                ('status', models.CharField(choices=[('ok', 'Succeeded'), ('usage', 'Usage or config error'), ('data', 'Data error'), ('numeric', 'Numeric failure')], default='ok', max_length=10)),
                ('exit_code', models.PositiveSmallIntegerField(default=0)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('config_json', models.JSONField(default=dict, help_text='Resolved run configuration')),
                ('report_json', models.JSONField(default=dict, help_text='Report payload (results only)')),
                ('error', models.TextField(blank=True)),
                ('started_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Run Record',
                'ordering': ['-started_at'],
            },
        ),
    ]
