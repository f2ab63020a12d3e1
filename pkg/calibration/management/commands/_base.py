"""Shared plumbing for the calibration commands."""
import io
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from calibration import conf, reports
from calibration.exceptions import NUMERICAL_ERROR, CalibrationError, InvalidArgument

VERBOSITY_LEVELS = {2: logging.INFO, 3: logging.DEBUG}


def csv_list(text):
    return [item.strip() for item in text.split(',') if item.strip()]


class CalibrationCommand(BaseCommand):
    """Adds --config/--set/--summary and maps library errors to exit codes."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # Usage errors surface as CommandError (exit 1) instead of argparse's exit 2.
        parser.called_from_command_line = False
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON or TOML config file (default: $CALIBRATION_CONFIG)')
        parser.add_argument('--set', dest='overrides', action='append', default=[],
                            metavar='KEY=VALUE', help='Override a config value, e.g. solver.alpha=0.02')
        parser.add_argument('--summary', action='store_true',
                            help='Print a human-readable summary on stderr')

    def execute(self, *args, **options):
        level = VERBOSITY_LEVELS.get(options.get('verbosity', 1))
        if level is not None:
            logging.getLogger('calibration').setLevel(level)
        return super().execute(*args, **options)

    def handle(self, *args, **options):
        self.options = options
        try:
            self.config = conf.resolve(options.get('config'), options.get('overrides'))
            self.run(**options)
        except CalibrationError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code)

    def run(self, **options):
        raise NotImplementedError

    def require_file(self, path, what='input'):
        if not Path(path).is_file():
            raise InvalidArgument(f'{what} file not found: {path}')

    def emit_json(self, document, path=None):
        if path and path != '-':
            reports.write_json(document, path)
        else:
            self.stdout.write(reports.dumps(document))

    def emit_csv(self, rows, path=None):
        if path and path != '-':
            reports.write_csv(rows, path)
        else:
            buffer = io.StringIO()
            reports.write_csv(rows, stream=buffer)
            self.stdout.write(buffer.getvalue(), ending='')

    def summary(self, message):
        if self.options.get('summary'):
            self.stderr.write(self.style.SUCCESS(message))

    def numerical_failure(self, message):
        return CommandError(message, returncode=NUMERICAL_ERROR)
