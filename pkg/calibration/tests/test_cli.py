import io
import json
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from django.test import SimpleTestCase

from calibration import dataset, evaluation
from calibration.cli import main


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


class CommandLineTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.data = self.dir / 'pairs.json'
        self.truth = self.dir / 'pairs.truth.json'

    def tearDown(self):
        self.tmp.cleanup()

    def generate(self, n=20):
        code, out, _ = call('generate', '--scenario', 'R-AU/C-AU', '--n', n, '--seed', 1,
                            '-o', self.data)
        self.assertEqual(code, 0)
        return json.loads(out)

    def test_generate_solve_evaluate(self):
        info = self.generate()
        self.assertEqual(info['pairs'], 20)
        self.assertTrue(self.truth.is_file())
        self.assertEqual(info['dataset_digest'], dataset.load_pairs(self.data).digest())

        estimate = self.dir / 'est.json'
        code, _, err = call('solve', '-i', self.data, '--method', 'DQ', '-o', estimate,
                            '--summary')
        self.assertEqual(code, 0, err)
        self.assertIn('DQ', err)
        doc = json.loads(estimate.read_text())
        self.assertEqual(doc['method'], 'DQ')
        self.assertEqual(doc['provenance']['command'], 'solve')

        code, out, _ = call('evaluate', '-e', estimate, '--truth', self.truth, '-i', self.data,
                            '--form', 'all')
        self.assertEqual(code, 0)
        result = json.loads(out)
        self.assertEqual(set(result['residuals']), set(evaluation.RESIDUAL_FORMS))
        self.assertLess(result['errors']['X']['err_r'], 0.1)

    def test_generate_is_reproducible(self):
        first = self.generate()
        second = self.generate()
        self.assertEqual(first['file_digest'], second['file_digest'])
        self.assertEqual(first['truth_digest'], second['truth_digest'])

    def test_csv_dataset(self):
        path = self.dir / 'pairs.csv'
        code, _, _ = call('generate', '--scenario', 'C-AU', '--n', 8, '-o', path)
        self.assertEqual(code, 0)
        code, out, _ = call('solve', '-i', path, '--method', 'kron')
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['method'], 'KP')

    def test_unconverged_solve_still_writes(self):
        self.generate()
        estimate = self.dir / 'est.json'
        code, _, err = call('solve', '-i', self.data, '--method', 'l-hed', '--init', self.truth,
                            '--max-iter', 3, '-o', estimate)
        self.assertEqual(code, 3)
        self.assertIn('no-convergence', err)
        self.assertFalse(json.loads(estimate.read_text())['converged'])

    def test_single_motion_is_rank_deficient(self):
        self.generate(n=2)
        code, _, err = call('solve', '-i', self.data, '--method', 'dq')
        self.assertEqual(code, 3)
        self.assertIn('rank-deficient-motion', err)

    def test_usage_errors(self):
        self.generate(n=6)
        self.assertEqual(call('solve', '-i', self.data, '--method', 'tsai')[0], 1)
        self.assertEqual(call('solve', '--method', 'dq')[0], 1)
        self.assertEqual(call('calibrate')[0], 1)

    def test_data_errors(self):
        code, _, err = call('solve', '-i', self.dir / 'missing.json', '--method', 'dq')
        self.assertEqual(code, 2)
        self.assertIn('invalid-argument', err)
        self.generate(n=6)
        self.assertEqual(call('evaluate', '-e', self.truth)[0], 2)
        self.assertEqual(call('metric', '-i', self.data, '--set', 'solver.alpha=-1')[0], 2)

    def test_metric_and_select(self):
        self.generate()
        code, out, _ = call('metric', '-i', self.data)
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertEqual(len(report['per_pair_metric']), 20)

        kept = self.dir / 'kept.json'
        code, out, _ = call('select', '-i', self.data, '--strategy', '1:10', '--keep-order',
                            '-o', kept)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['kept'], 10)
        self.assertEqual(len(dataset.load_pairs(kept)), 10)
        self.assertEqual(call('select', '-i', self.data, '--strategy', '5:50', '-o', kept)[0], 2)
        self.assertEqual(call('select', '-i', self.data, '--strategy', 'top', '-o', kept)[0], 2)

    def test_benchmark_degraded(self):
        code, out, err = call('benchmark', '--scenarios', 'NONE', '--methods', 'dq',
                              '--trials', 1, '--n-pairs', 2)
        self.assertEqual(code, 3)
        self.assertTrue(json.loads(out)['degraded'])
        self.assertIn('campaign-degraded', err)

    def test_benchmark_tables(self):
        table = self.dir / 'agg.csv'
        workbook = self.dir / 'agg.xlsx'
        code, out, _ = call('benchmark', '--scenarios', 'R-AU', '--methods', 'dq,kp',
                            '--trials', 2, '--n-pairs', 12, '--csv', table, '--xlsx', workbook)
        self.assertEqual(code, 0)
        self.assertEqual(len(json.loads(out)['records']), 4)
        self.assertTrue(table.read_text().startswith('scenario,method,side'))
        self.assertTrue(workbook.is_file())

    def test_study_csv(self):
        code, out, _ = call('study', '--kind', 'metric-ladder', '--steps', 2, '--seeds', 1,
                            '--n-pairs', 8, '--format', 'csv')
        self.assertEqual(code, 0)
        self.assertEqual(out.splitlines()[0], 'step,metric,std')

    def test_study_replay_needs_input(self):
        self.assertEqual(call('study', '--kind', 'replay')[0], 1)
