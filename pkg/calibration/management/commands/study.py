from django.core.management.base import CommandError

from calibration import benchmark, conf, reports, synth
from calibration.dataset import FORMATS, load_pairs
from calibration.solvers import METHODS
from calibration.uncertainty import SelectionStrategy

from ._base import CalibrationCommand, csv_list

KINDS = ('closed-form', 'residual-forms', 'data-count', 'selection', 'metric-ladder',
         'replay', 'init-distance', 'source-grid')
DEFAULT_SCENARIOS = {
    'closed-form': 'R-AU/C-AU',
    'residual-forms': 'R-AU-EU/C-AU',
    'data-count': 'R-AU-EU/C-AU',
    'selection': 'S-HHHH',
    'init-distance': 'R-AU/C-AU',
}


class Command(CalibrationCommand):
    help = 'Run one of the seeded studies and emit its tables'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--kind', required=True, choices=KINDS)
        parser.add_argument('--scenario')
        parser.add_argument('--methods', type=csv_list)
        parser.add_argument('--trials', type=int, help='Trials per study cell')
        parser.add_argument('--seeds', type=int, help='Seeds per ladder step or closed-form study')
        parser.add_argument('--seed0', type=int)
        parser.add_argument('--n-pairs', type=int)
        parser.add_argument('--steps', type=int, default=10, help='Noise ladder steps')
        parser.add_argument('--counts', type=csv_list, help='Data counts, e.g. 10,20,50,100,150')
        parser.add_argument('--strategies', type=csv_list, help='Rank ranges, e.g. 1:10,50:100')
        parser.add_argument('--swap-translations', action='store_true')
        parser.add_argument('--magnitude', type=float, default=0.5,
                            help='Twist norm of the perturbed init (init-distance)')
        parser.add_argument('-i', '--input', help='Recorded dataset (replay)')
        parser.add_argument('--input-format', choices=FORMATS)
        parser.add_argument('--jobs', type=int, default=1)
        parser.add_argument('--format', choices=('json', 'csv'), default='json',
                            help='Format of the main output')
        parser.add_argument('-o', '--output', help='Main output file (default: stdout)')
        parser.add_argument('--csv', help='Also write the first table as CSV')
        parser.add_argument('--xlsx')
        parser.add_argument('--pdf')

    def run(self, **options):
        kind = options['kind']
        if kind == 'replay':
            if not options['input']:
                raise CommandError('replay needs --input')
            self.require_file(options['input'])
        campaign = self.config.get('campaign', {})
        self.cfg = conf.solver_config(self.config)
        self.seed0 = options['seed0'] if options['seed0'] is not None else int(campaign.get('seed0', 0))
        self.n_pairs = options['n_pairs'] or int(campaign.get('n_pairs', 100))
        self.trials = options['trials'] or int(campaign.get('trials', 30))
        self.scenario = options['scenario'] or DEFAULT_SCENARIOS.get(kind)
        self.methods = tuple(options['methods'] or METHODS)

        handler = getattr(self, 'study_' + kind.replace('-', '_'))
        tables, extra = handler(options)

        inputs = reports.input_digests(dataset=options['input'])
        parameters = {'kind': kind, 'scenario': self.scenario, 'trials': self.trials,
                      'n_pairs': self.n_pairs, 'seed0': self.seed0, 'methods': list(self.methods),
                      'solver': self.cfg.as_dict()}
        prov = reports.provenance('study', inputs, parameters)
        first = next(iter(tables.values()))
        if options['format'] == 'csv':
            self.emit_csv(first, options['output'])
        else:
            self.emit_json({'kind': kind, **extra, 'tables': tables, 'provenance': prov},
                           options['output'])
        if options['csv']:
            reports.write_csv(first, options['csv'])
        reports.write_tables(tables, f'Study: {kind}', prov,
                             xlsx=options['xlsx'], pdf=options['pdf'])
        self.summary(f'{kind}: ' + ', '.join(f'{name} ({len(rows)} rows)'
                                            for name, rows in tables.items()))

    def study_closed_form(self, options):
        seeds = options['seeds'] or 3
        records, traces = benchmark.closed_form_campaign(
            self.scenario, seeds, self.n_pairs, options['swap_translations'], self.cfg,
            self.seed0, options['jobs'])
        return {'closed_form': records, 'traces': traces}, {'swapped': options['swap_translations']}

    def study_residual_forms(self, options):
        summary, rows = benchmark.residual_form_study(
            self.scenario, self.trials, self.methods, self.n_pairs, self.cfg, self.seed0,
            options['jobs'])
        return {'fidelity': summary, 'trials': rows}, {}

    def study_data_count(self, options):
        counts = [int(c) for c in options['counts'] or (10, 20, 50, 100, 150)]
        rows = benchmark.data_count_sweep(counts, self.scenario, self.trials, self.methods,
                                          self.cfg, self.seed0, options['jobs'])
        return {'data_count': rows}, {}

    def study_selection(self, options):
        strategies = ([SelectionStrategy.parse(s) for s in options['strategies']]
                      if options['strategies'] else benchmark.SELECTION_STRATEGIES)
        methods = tuple(options['methods'] or ('DQ', 'KP'))
        self.methods = methods
        rows, records = benchmark.selection_study(
            strategies, methods, self.scenario, self.trials, self.n_pairs, self.cfg,
            self.seed0, options['jobs'])
        return {'selection': rows, 'records': records}, {}

    def study_metric_ladder(self, options):
        seeds = options['seeds'] or 50
        out = benchmark.metric_ladder_study(options['steps'], seeds, self.n_pairs, self.seed0,
                                            self.cfg, options['jobs'])
        return ({'ladder': out['ladder'], 'component_mix': out['component_mix']},
                {'spearman': out['spearman']})

    def study_replay(self, options):
        pairs = load_pairs(options['input'], options['input_format'])
        rows, report = benchmark.replay_study(pairs, self.cfg, self.methods)
        return {'residuals': rows}, {'metric': report.as_dict()}

    def study_init_distance(self, options):
        rows, traces = benchmark.init_distance_study(
            self.scenario, self.n_pairs, self.seed0, self.cfg, options['magnitude'])
        return {'inits': rows, 'traces': traces}, {}

    def study_source_grid(self, options):
        spec = benchmark.CampaignSpec(
            scenarios=tuple(synth.source_grid()), methods=self.methods, trials=self.trials,
            n_pairs=self.n_pairs, seed0=self.seed0)
        result = benchmark.run_campaign(spec, self.cfg, options['jobs'])
        return ({'aggregates': benchmark.flat_rows(result), 'records': result.records},
                {'degraded': result.degraded, 'failures': result.failures})
