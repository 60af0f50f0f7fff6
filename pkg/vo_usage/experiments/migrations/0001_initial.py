# Generated by Django 5.2.7 on 2026-10-17 10:02

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('sync', models.CharField(choices=[('on', 'Synchronized'), ('off', 'Un-synchronized')], max_length=3)),
                ('strategy', models.CharField(choices=[('random', 'Random'), ('round-robin', 'Round Robin'), ('least-used', 'Least Used')], max_length=20)),
                ('policy', models.CharField(choices=[('no-limit', 'No-limit'), ('fixed', 'Fix-limit'), ('extensible', 'Ext-limit'), ('commitment', 'Cm-limit')], max_length=20)),
                ('seed', models.PositiveIntegerField()),
                ('aru', models.FloatField(help_text='Aggregated resource utilization, 0..1')),
                ('art_s', models.FloatField(blank=True, help_text='Aggregated response time in simulated seconds; empty when no job completed', null=True)),
                ('completed', models.FloatField(help_text='Completed jobs (seed mean for averaged rows)')),
                ('incomplete', models.FloatField()),
                ('horizon_s', models.PositiveIntegerField()),
                ('config_digest', models.CharField(blank=True, max_length=16)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', 'sync', 'strategy', 'policy', 'seed'],
            },
        ),
    ]
