"""
Shared base for the pipeline management commands.

Every command accepts --config/--out/--seed/--jobs/--channels/--no-timestamp,
resolves a RunConfig, runs, writes <out>/<command>_report.json and records the
run. Pipeline errors leave the process with the exit code of their class; bad
arguments exit 1.
"""

import logging
import sys
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.config import load_run_config
from core.exceptions import EXIT_USAGE, ConfigError, DataError, PhenoError
from reports.utils import build_report, record_run, write_report

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """Subclasses implement run(cfg, out, options) and return a JSON-ready results dict."""

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, default=None, help='RunConfig JSON file')
        parser.add_argument('--out', dest='output_dir', type=str, default=None,
                            help='Output directory (overrides output_dir)')
        parser.add_argument('--seed', type=int, default=None, help='Run seed (overrides seed)')
        parser.add_argument('--jobs', type=int, default=None, help='Worker processes (overrides jobs)')
        parser.add_argument('--channels', type=str, default=None,
                            help='Channel set such as H, RGBH or RGBNEH (overrides channel_set)')
        parser.add_argument('--no-timestamp', action='store_true',
                            help='Leave created_at out of the report')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except SystemExit as exc:
            # argparse reports usage errors with status 2
            if exc.code == 2:
                sys.exit(EXIT_USAGE)
            raise

    def run(self, cfg, out, options):
        raise NotImplementedError('subclasses of PipelineCommand must provide a run() method')

    def handle(self, *args, **options):
        name = self.command_name
        cfg = None
        try:
            cfg = load_run_config(
                options.get('config'),
                overrides={
                    'seed': options.get('seed'),
                    'output_dir': options.get('output_dir'),
                    'jobs': options.get('jobs'),
                    'channel_set': options.get('channels'),
                },
                defaults={'jobs': getattr(settings, 'PHENODESK_DEFAULT_JOBS', 1)},
            )
            out = Path(cfg.output_dir)
            try:
                out.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise DataError(f"cannot create output directory {out}: {exc}") from exc
            results = self.run(cfg, out, options)
            report = build_report(name, cfg.to_dict(), results, cfg.seed,
                                  timestamp=not options.get('no_timestamp'))
            path = write_report(out, report)
        except PhenoError as exc:
            logger.error(f"{name} failed: {exc}")
            record_run(name, cfg.seed if cfg else 0, cfg.to_dict() if cfg else {}, None,
                       exit_code=exc.exit_code, output_dir=cfg.output_dir if cfg else '', error=str(exc))
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

        record_run(name, cfg.seed, cfg.to_dict(), results, output_dir=out)
        self.stdout.write(self.style.SUCCESS(f"{name}: report written to {path}"))

    def log_epochs(self, log):
        if log:
            last = log[-1]
            self.stdout.write(f"  {len(log)} epochs, final loss {last['loss']:.6f}")

    @staticmethod
    def require(section, name, prefix='data'):
        """A config path the command cannot run without."""
        value = getattr(section, name)
        if value in (None, ''):
            raise ConfigError(f"{prefix}.{name} must be set for this command")
        return value
