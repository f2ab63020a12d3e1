from calibration import conf, reports
from calibration.dataset import FORMATS, load_pairs
from calibration.evaluation import residual
from calibration.solvers import CLOSED_FORMS, METHOD_ALIASES, solve

from ._base import CalibrationCommand


class Command(CalibrationCommand):
    help = 'Estimate X and Y from a pose-pair dataset'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('-i', '--input', required=True, help='Dataset file (.json or .csv)')
        parser.add_argument('--format', choices=FORMATS)
        parser.add_argument('--method', required=True, choices=sorted(METHOD_ALIASES),
                            type=str.lower)
        parser.add_argument('-o', '--output', help='Estimate JSON (default: stdout)')
        parser.add_argument('--init', help='Estimate JSON whose X and Y start the iterative solvers')
        parser.add_argument('--closed-form', choices=CLOSED_FORMS + ('auto',))
        parser.add_argument('--seed', type=int)
        parser.add_argument('--max-iter', type=int)
        parser.add_argument('--alpha', type=float)
        parser.add_argument('--reorthonormalize', action='store_true',
                            help='Project slightly non-orthonormal rotations onto SO(3) on load')

    def run(self, **options):
        self.require_file(options['input'])
        if options['init']:
            self.require_file(options['init'], 'init')
        cfg = conf.solver_config(self.config, closed_form=options['closed_form'],
                                 seed=options['seed'], max_iter=options['max_iter'],
                                 alpha=options['alpha'])
        pairs = load_pairs(options['input'], options['format'], options['reorthonormalize'])
        init = reports.read_xy(options['init']) if options['init'] else None
        est = solve(options['method'], pairs, cfg, init=init)
        document = est.as_dict()
        document['htm_residual'] = residual(pairs, est.x, est.y, 'HTM')
        document['provenance'] = reports.provenance(
            'solve',
            {'dataset': pairs.digest(), **reports.input_digests(init=options['init'])},
            {'method': est.method, 'solver': cfg.as_dict()},
        )
        self.emit_json(document, options['output'])
        self.summary(f'{est.method}: {est.iterations} iteration(s), objective {est.objective:.6g}, '
                     f'converged={est.converged}')
        if not est.converged:
            raise self.numerical_failure(
                f'no-convergence: {est.method} stopped after {est.iterations} iterations; '
                'best estimate written')
