#!/usr/bin/env python
"""Command-line utility: calibration verbs plus Django's own commands."""
import sys

from calibration.cli import main

if __name__ == '__main__':
    sys.exit(main())
