from calibration import conf, reports
from calibration.benchmark import flat_rows, run_campaign

from ._base import CalibrationCommand, csv_list


class Command(CalibrationCommand):
    help = 'Run a seeded Monte Carlo campaign over scenarios and methods'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--spec', help='Campaign spec (JSON or TOML)')
        parser.add_argument('--scenarios', type=csv_list, help='Comma-separated scenario names')
        parser.add_argument('--methods', type=csv_list, help='Comma-separated method names')
        parser.add_argument('--trials', type=int)
        parser.add_argument('--n-pairs', type=int)
        parser.add_argument('--seed0', type=int)
        parser.add_argument('--jobs', type=int, default=1, help='Worker processes for trials')
        parser.add_argument('-o', '--output', help='CampaignResult JSON (default: stdout)')
        parser.add_argument('--csv', help='Flat aggregate table')
        parser.add_argument('--records-csv', help='One row per trial and method')
        parser.add_argument('--xlsx', help='Workbook with aggregates and records')
        parser.add_argument('--pdf', help='PDF summary of the aggregates')

    def run(self, **options):
        if options['spec']:
            self.require_file(options['spec'], 'campaign spec')
        spec = conf.campaign_spec(
            self.config, options['spec'],
            scenarios=options['scenarios'], methods=options['methods'],
            trials=options['trials'], n_pairs=options['n_pairs'], seed0=options['seed0'],
        )
        cfg = conf.solver_config(self.config)
        result = run_campaign(spec, cfg, jobs=options['jobs'])
        prov = reports.provenance('benchmark', reports.input_digests(spec=options['spec']),
                                  {'campaign': spec.as_dict(), 'solver': cfg.as_dict()})
        self.emit_json({**result.as_dict(), 'provenance': prov}, options['output'])
        aggregates = flat_rows(result)
        if options['csv']:
            reports.write_csv(aggregates, options['csv'])
        if options['records_csv']:
            reports.write_csv(result.records, options['records_csv'])
        reports.write_tables({'aggregates': aggregates, 'records': result.records},
                             'Calibration campaign', prov,
                             xlsx=options['xlsx'], pdf=options['pdf'])
        self.summary(f'{len(result.records)} solves, {result.failures} failed'
                     + (' (degraded)' if result.degraded else ''))
        if result.degraded:
            raise self.numerical_failure(
                f'campaign-degraded: {result.failures} of {len(result.records)} solves failed')
