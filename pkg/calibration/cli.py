"""Process entry point: one calibration verb per invocation.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import os
import sys


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
    try:
        from django.core.management import execute_from_command_line
        from django.core.management.base import CommandError
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    try:
        execute_from_command_line(['manage.py'] + argv)
    except CommandError as exc:
        sys.stderr.write(f'{exc}\n')
        return exc.returncode
    except SystemExit as exc:
        if exc.code is None:
            return 0
        if isinstance(exc.code, int):
            return exc.code
        sys.stderr.write(f'{exc.code}\n')
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
