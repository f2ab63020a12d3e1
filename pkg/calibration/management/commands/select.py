from calibration import conf, reports
from calibration.dataset import FORMATS, load_pairs, save_pairs
from calibration.uncertainty import MATRIX_NORMS, SelectionStrategy, select_pairs, srm_metric

from ._base import CalibrationCommand


class Command(CalibrationCommand):
    help = 'Keep the pose pairs ranked lo..hi by the per-pair uncertainty metric'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('-i', '--input', required=True)
        parser.add_argument('--format', choices=FORMATS)
        parser.add_argument('--strategy', required=True,
                            metavar='LO:HI', help='1-based inclusive rank range, e.g. 50:100')
        parser.add_argument('--norm', choices=MATRIX_NORMS)
        parser.add_argument('--keep-order', action='store_true',
                            help='Write the kept pairs in input order instead of rank order')
        parser.add_argument('-o', '--output', required=True, help='Filtered dataset file')

    def run(self, **options):
        self.require_file(options['input'])
        cfg = conf.solver_config(self.config)
        norm = options['norm'] or self.config.get('metric', {}).get('norm', 'det')
        strategy = SelectionStrategy.parse(options['strategy'])
        pairs = load_pairs(options['input'], options['format'])
        report = srm_metric(pairs, norm, cfg.mean_tol, cfg.mean_max_iter)
        kept = select_pairs(pairs, report.per_pair_metric, strategy,
                            keep_order=options['keep_order'])
        save_pairs(kept, options['output'], options['format'])
        self.emit_json({
            'output': options['output'],
            'strategy': str(strategy),
            'kept': len(kept),
            'dataset_digest': kept.digest(),
            'provenance': reports.provenance('select', {'dataset': pairs.digest()},
                                             {'strategy': str(strategy), 'norm': norm}),
        })
        self.summary(f'Kept {len(kept)} of {len(pairs)} pairs (ranks {strategy})')
