from calibration import reports
from calibration.dataset import FORMATS, load_pairs
from calibration.evaluation import RESIDUAL_FORMS, canonical_form, estimation_errors, residual
from calibration.exceptions import InvalidArgument

from ._base import CalibrationCommand


class Command(CalibrationCommand):
    help = 'Score an estimate against ground truth and/or by its residual on a dataset'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('-e', '--estimate', required=True, help='Estimate JSON written by solve')
        parser.add_argument('--truth', help='Ground-truth JSON written by generate')
        parser.add_argument('-i', '--input', help='Dataset for residuals')
        parser.add_argument('--format', choices=FORMATS)
        parser.add_argument('--form', action='append', default=[],
                            help=f'Residual form ({", ".join(RESIDUAL_FORMS)} or all); repeatable')
        parser.add_argument('-o', '--output', help='Result JSON (default: stdout)')

    def run(self, **options):
        if not options['truth'] and not options['input']:
            raise InvalidArgument('evaluate needs --truth, --input, or both')
        self.require_file(options['estimate'], 'estimate')
        for name in ('truth', 'input'):
            if options[name]:
                self.require_file(options[name], name)
        forms = options['form'] or ['HTM']
        if any(f.lower() == 'all' for f in forms):
            forms = list(RESIDUAL_FORMS)
        forms = [canonical_form(f) for f in forms]

        est = reports.read_xy(options['estimate'])
        document = {}
        if options['truth']:
            ex, ey = estimation_errors(est, reports.read_xy(options['truth']))
            document['errors'] = {'X': ex.as_dict(), 'Y': ey.as_dict()}
            self.summary(f'X: err_r {ex.err_r:.3e} rad, err_t {ex.err_t:.3e}; '
                         f'Y: err_r {ey.err_r:.3e} rad, err_t {ey.err_t:.3e}')
        if options['input']:
            pairs = load_pairs(options['input'], options['format'])
            document['residuals'] = {form: residual(pairs, est[0], est[1], form) for form in forms}
        document['provenance'] = reports.provenance(
            'evaluate',
            reports.input_digests(estimate=options['estimate'], truth=options['truth'],
                                  dataset=options['input']),
            {'forms': forms},
        )
        self.emit_json(document, options['output'])
