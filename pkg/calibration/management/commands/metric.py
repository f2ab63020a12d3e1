from calibration import conf, reports
from calibration.dataset import FORMATS, load_pairs
from calibration.uncertainty import MATRIX_NORMS, srm_metric

from ._base import CalibrationCommand


class Command(CalibrationCommand):
    help = 'Compute the SRM@SE(3) relative-uncertainty report of a dataset'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('-i', '--input', required=True)
        parser.add_argument('--format', choices=FORMATS)
        parser.add_argument('--norm', choices=MATRIX_NORMS,
                            help='Matrix scale used in the covariance ratios')
        parser.add_argument('-o', '--output', help='Report JSON (default: stdout)')
        parser.add_argument('--reorthonormalize', action='store_true')

    def run(self, **options):
        self.require_file(options['input'])
        cfg = conf.solver_config(self.config)
        norm = options['norm'] or self.config.get('metric', {}).get('norm', 'det')
        pairs = load_pairs(options['input'], options['format'], options['reorthonormalize'])
        report = srm_metric(pairs, norm, cfg.mean_tol, cfg.mean_max_iter)
        document = report.as_dict()
        document['provenance'] = reports.provenance('metric', {'dataset': pairs.digest()},
                                                    {'norm': norm})
        self.emit_json(document, options['output'])
        self.summary(f'SRM@SE(3) over {len(pairs)} pairs: {report.scalar_metric:.6g} '
                     f'(lambda {report.lambda_factor:.3f})')
