"""Error types raised by the calibration library.

Each error carries a ``kind`` naming the failure and the process exit code the
command line uses for it: 2 for bad or insufficient data, 3 for numerical
failures.
"""

DATA_ERROR = 2
NUMERICAL_ERROR = 3


class CalibrationError(Exception):
    kind = 'calibration-error'
    exit_code = DATA_ERROR

    def __init__(self, message='', **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        message = super().__str__()
        return f'{self.kind}: {message}' if message else self.kind


class InvalidArgument(CalibrationError):
    kind = 'invalid-argument'


class InsufficientData(CalibrationError):
    kind = 'insufficient-data'


class EmptyAfterFilter(CalibrationError):
    kind = 'empty-after-filter'


class FormatError(CalibrationError):
    kind = 'format-error'

    def __init__(self, message='', record=None, **context):
        if record is not None:
            message = f'record {record}: {message}'
        super().__init__(message, record=record, **context)
        self.record = record


class ValidationError(CalibrationError):
    kind = 'validation-error'


class InvalidRange(CalibrationError):
    kind = 'invalid-range'


class InvalidWorkspace(CalibrationError):
    kind = 'invalid-workspace'


class DegenerateRotation(CalibrationError):
    kind = 'degenerate-rotation'
    exit_code = NUMERICAL_ERROR

    def __init__(self, message='', pair=None, **context):
        if pair is not None:
            message = f'pair {pair}: {message}'
        super().__init__(message, pair=pair, **context)
        self.pair = pair


class OutOfDomain(CalibrationError):
    kind = 'out-of-domain'
    exit_code = NUMERICAL_ERROR


class NoConvergence(CalibrationError):
    kind = 'no-convergence'
    exit_code = NUMERICAL_ERROR

    def __init__(self, message='', best=None, **context):
        super().__init__(message, **context)
        self.best = best


class NearSingularCovariance(CalibrationError):
    kind = 'near-singular-covariance'
    exit_code = NUMERICAL_ERROR


class DegenerateVariance(CalibrationError):
    kind = 'degenerate-variance'
    exit_code = NUMERICAL_ERROR


class RankDeficientMotion(CalibrationError):
    kind = 'rank-deficient-motion'
    exit_code = NUMERICAL_ERROR
