from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase, tag

from calibration import benchmark
from calibration.benchmark import CampaignSpec
from calibration.exceptions import InvalidArgument
from calibration.solvers import SolverConfig
from calibration.uncertainty import SelectionStrategy

from . import factories

FAST = SolverConfig(max_iter=30)


class CampaignSpecTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(InvalidArgument):
            CampaignSpec(trials=0)
        with self.assertRaises(InvalidArgument):
            CampaignSpec(methods=())
        with self.assertRaises(InvalidArgument):
            CampaignSpec(scenarios=('R-ZZ',))
        with self.assertRaises(InvalidArgument):
            CampaignSpec(methods=('tsai',))

    def test_methods_are_canonical(self):
        spec = CampaignSpec(methods=('dq', 'kron'))
        self.assertEqual(spec.methods, ('DQ', 'KP'))
        self.assertEqual(spec.as_dict()['methods'], ['DQ', 'KP'])


class CampaignTests(SimpleTestCase):
    def test_exact_data_recovered(self):
        spec = CampaignSpec(scenarios=('NONE',), methods=('DQ', 'KP'), trials=1, n_pairs=20)
        result = benchmark.run_campaign(spec)
        self.assertEqual(result.failures, 0)
        self.assertFalse(result.degraded)
        for record in result.records:
            self.assertEqual(record['status'], 'ok')
            self.assertLess(record['x_err_t'], 1e-6)
            self.assertLess(record['y_err_r'], 1e-6)

    def test_aggregates_match_records(self):
        spec = CampaignSpec(scenarios=('R-AU',), methods=('DQ',), trials=3, n_pairs=20)
        result = benchmark.run_campaign(spec)
        row = result.aggregates[0]
        self.assertEqual((row['scenario'], row['method'], row['trials']), ('R-AU', 'DQ', 3))
        x_err_t = [r['x_err_t'] for r in result.records]
        self.assertAlmostEqual(row['X']['err_t']['mean'], np.mean(x_err_t))
        self.assertAlmostEqual(row['X']['err_t']['max'], max(x_err_t))
        self.assertAlmostEqual(row['X']['err_t']['var'], np.var(x_err_t, ddof=1))
        flat = benchmark.flat_rows(result)
        self.assertEqual([r['side'] for r in flat], ['X', 'Y'])
        self.assertAlmostEqual(flat[0]['err_t_mean'], np.mean(x_err_t))

    def test_adding_trials_keeps_earlier_ones(self):
        short = benchmark.run_campaign(CampaignSpec(scenarios=('R-AU/C-AU',), methods=('KP',),
                                                    trials=1, n_pairs=15))
        long = benchmark.run_campaign(CampaignSpec(scenarios=('R-AU/C-AU',), methods=('KP',),
                                                   trials=2, n_pairs=15))
        self.assertEqual(short.records[0], long.records[0])
        self.assertEqual(long.records[1]['seed'], 1)

    def test_degraded_campaign(self):
        spec = CampaignSpec(scenarios=('NONE',), methods=('DQ',), trials=2, n_pairs=2)
        with self.assertLogs('calibration.benchmark', level='WARNING'):
            result = benchmark.run_campaign(spec)
        self.assertTrue(result.degraded)
        self.assertEqual(result.failures, 2)
        self.assertIn('rank-deficient-motion', result.records[0]['error'])
        self.assertNotIn('X', result.aggregates[0])

    def test_shared_init_for_iterative_methods(self):
        spec = CampaignSpec(scenarios=('R-AU/C-AU',), methods=('SI-AH', 'L-HED'), trials=1,
                            n_pairs=15)
        result = benchmark.run_campaign(spec, FAST)
        self.assertEqual([r['method'] for r in result.records], ['SI-AH', 'L-HED'])
        self.assertTrue(all(r['status'] == 'ok' for r in result.records))

    @tag('slow')
    def test_parallel_matches_serial(self):
        spec = CampaignSpec(scenarios=('R-AU', 'C-AU'), methods=('DQ', 'KP'), trials=2,
                            n_pairs=20)
        serial = benchmark.run_campaign(spec, jobs=1)
        parallel = benchmark.run_campaign(spec, jobs=2)
        self.assertEqual(serial.records, parallel.records)


class StudyTests(SimpleTestCase):
    def test_data_count_sweep(self):
        rows = benchmark.data_count_sweep([5, 10], 'NONE', 1, methods=('DQ',))
        self.assertEqual([r['count'] for r in rows], [5, 10])
        self.assertLess(rows[1]['x_err_t'], 1e-6)
        with self.assertRaises(InvalidArgument):
            benchmark.data_count_sweep([10, 5], 'NONE', 1, methods=('DQ',))
        with self.assertRaises(InvalidArgument):
            benchmark.data_count_sweep([5, 5], 'NONE', 1, methods=('DQ',))

    def test_full_range_selection_equals_baseline(self):
        rows, records = benchmark.selection_study([SelectionStrategy(1, 20)], methods=('KP',),
                                                  trials=1, n_pairs=20)
        by_strategy = {r['strategy']: r for r in rows}
        self.assertEqual(set(by_strategy), {'none', '1:20'})
        self.assertEqual(by_strategy['none']['x_err_t'], by_strategy['1:20']['x_err_t'])
        self.assertEqual(len(records), 2)

    def test_top_ranked_subset(self):
        _, records = benchmark.selection_study([SelectionStrategy(1, 10)], methods=('DQ',),
                                               trials=1, n_pairs=20)
        self.assertEqual([r['pairs'] for r in records], [20, 10])

    def test_selection_range_checked(self):
        with self.assertRaises(InvalidArgument):
            benchmark.selection_study([SelectionStrategy(50, 100)], trials=1, n_pairs=20)

    def test_metric_ladder(self):
        out = benchmark.metric_ladder_study(steps=2, seeds=2, n_pairs=12)
        self.assertEqual([r['step'] for r in out['ladder']], [1, 2])
        self.assertEqual([r['kind'] for r in out['component_mix']], ['rotation', 'translation'])
        self.assertTrue(all(r['metric'] > 0 for r in out['ladder']))
        self.assertLessEqual(abs(out['spearman']), 1.0)

    def test_residual_form_study(self):
        summary, rows = benchmark.residual_form_study(
            'R-AU/C-AU', trials=2, methods=('SI-AH', 'DQ', 'KP'), n_pairs=20)
        self.assertEqual(len(rows), 2)
        self.assertEqual([s['form'] for s in summary], list(benchmark.RESIDUAL_FORMS))
        for s in summary:
            self.assertGreaterEqual(s['fidelity'], 0.0)
            self.assertLessEqual(s['fidelity'], 1.0)

    def test_closed_form_campaign(self):
        records, traces = benchmark.closed_form_campaign(seeds=1, n_pairs=20, swap=True,
                                                         cfg=FAST)
        self.assertEqual([r['form'] for r in records], ['CF1', 'CF2', 'CF3', 'CF4'])
        self.assertTrue(all(r['swapped'] and r['seed'] == 0 for r in records))
        self.assertEqual({t['form'] for t in traces}, {'CF1', 'CF2', 'CF3', 'CF4'})

    def test_init_distance(self):
        rows, traces = benchmark.init_distance_study(n_pairs=20, cfg=FAST)
        self.assertEqual([r['init'] for r in rows], ['SI-AH', 'perturbed', 'identity'])
        self.assertTrue(traces)

    def test_replay(self):
        pairs, _ = factories.noisy(n=20, seed=5)
        rows, report = benchmark.replay_study(pairs, methods=('DQ', 'KP'))
        self.assertEqual([r['status'] for r in rows], ['ok', 'ok'])
        self.assertIn('AxisAngle', rows[0])
        self.assertGreater(report.scalar_metric, 0.0)


DESK = SolverConfig(precondition=True, alpha=0.5, max_iter=5000, max_escapes=2)


@tag('slow')
class DeskScaleOutcomeTests(SimpleTestCase):
    def test_iterations_grow_with_init_distance(self):
        cfg = replace(DESK, max_iter=20000, max_escapes=0)
        rows, _ = benchmark.init_distance_study(cfg=cfg)
        by_init = {r['init']: r for r in rows}
        self.assertTrue(all(r['converged'] for r in rows))
        objectives = [r['objective'] for r in rows]
        self.assertLess(max(objectives) - min(objectives), 1e-6 * max(objectives))
        self.assertLessEqual(by_init['SI-AH']['iterations'], by_init['perturbed']['iterations'])
        self.assertLessEqual(by_init['perturbed']['iterations'], by_init['identity']['iterations'])

    def test_metric_follows_noise_ladder(self):
        out = benchmark.metric_ladder_study(steps=10, seeds=50, n_pairs=100)
        self.assertGreaterEqual(out['spearman'], 0.9)
        self.assertGreater(out['ladder'][-1]['metric'], out['ladder'][0]['metric'])

    def test_method_ordering(self):
        spec = CampaignSpec(methods=('UAL-HED', 'L-HED', 'DQ', 'KP'), trials=30, n_pairs=100)
        result = benchmark.run_campaign(spec, DESK)
        mean = {(a['scenario'], a['method']): a['X']['err_t']['mean'] for a in result.aggregates}
        lowest = 0
        for scenario in benchmark.TABLE3_SCENARIOS:
            ual = mean[scenario, 'UAL-HED']
            with self.subTest(scenario=scenario):
                self.assertLessEqual(ual, 1.05 * mean[scenario, 'L-HED'])
            if ual <= min(mean[scenario, 'DQ'], mean[scenario, 'KP']):
                lowest += 1
        self.assertGreaterEqual(lowest, 4)
        mixed = 'R-AU-EU/C-AU'
        self.assertLessEqual(mean[mixed, 'UAL-HED'], 0.6 * mean[mixed, 'DQ'])
        self.assertLessEqual(mean[mixed, 'UAL-HED'], 0.6 * mean[mixed, 'KP'])

    def test_closed_form_asymmetry_reverses_with_swap(self):
        def pair_means(swap):
            records, _ = benchmark.closed_form_campaign(seeds=3, n_pairs=100, swap=swap, cfg=DESK)
            tau = {form: np.mean([r['heuristic'] for r in records if r['form'] == form])
                   for form in ('CF1', 'CF2', 'CF3', 'CF4')}
            return (tau['CF3'] + tau['CF4']) / 2.0, (tau['CF1'] + tau['CF2']) / 2.0

        y_side, x_side = pair_means(swap=False)
        self.assertLess(y_side, x_side)
        y_side, x_side = pair_means(swap=True)
        self.assertGreater(y_side, x_side)

    def test_htm_ranks_estimates_as_well_as_any_form(self):
        summary, _ = benchmark.residual_form_study(trials=60, n_pairs=100, cfg=DESK)
        fidelity = {s['form']: s['fidelity'] for s in summary}
        others = [v for form, v in fidelity.items() if form != 'HTM']
        self.assertGreater(fidelity['HTM'], 0.5)
        self.assertGreaterEqual(fidelity['HTM'], max(others) - 0.05)

    def test_low_uncertainty_half_beats_top_ten(self):
        strategies = [SelectionStrategy(1, 10), SelectionStrategy(50, 100)]
        rows, _ = benchmark.selection_study(strategies, trials=20, n_pairs=100, cfg=DESK)
        err = {(r['strategy'], r['method']): r['x_err_t'] for r in rows}
        for method in ('DQ', 'KP'):
            with self.subTest(method=method):
                self.assertLess(err['50:100', method], err['1:10', method])

    def test_accuracy_plateaus_with_count(self):
        rows = benchmark.data_count_sweep([10, 20, 30, 50, 100, 150], 'R-AU/C-AU', 30,
                                          methods=('UAL-HED',), cfg=DESK)
        err = {r['count']: r['x_err_t'] for r in rows}
        self.assertLess(err[50], err[10])
        self.assertLess(abs(err[150] - err[100]), 0.25 * abs(err[30] - err[10]))
