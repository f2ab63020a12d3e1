import numpy as np
from django.test import SimpleTestCase

from calibration import dataset, uncertainty
from calibration.dataset import PosePairSet
from calibration.exceptions import (
    DegenerateVariance,
    InsufficientData,
    InvalidArgument,
    InvalidRange,
)
from calibration.uncertainty import SelectionStrategy

from . import factories


class SrmMetricTests(SimpleTestCase):
    def test_consistent_sources_score_zero(self):
        pairs, _ = factories.noise_free(n=30)
        report = uncertainty.srm_metric(pairs)
        self.assertLess(report.scalar_metric, 1e-6)
        self.assertLess(np.abs(report.delta_e).max(), 1e-6)

    def test_needs_six_pairs(self):
        pairs, _ = factories.noise_free(n=5)
        with self.assertRaises(InsufficientData):
            uncertainty.srm_metric(pairs)

    def test_noisy_report(self):
        pairs, _ = factories.noisy(n=40, seed=2)
        report = uncertainty.srm_metric(pairs)
        self.assertEqual(report.chi.shape, (40, 6))
        self.assertEqual(report.delta_zeta.shape, (40, 6))
        self.assertEqual(report.delta_e.shape, (40, 6))
        self.assertEqual(report.per_pair_metric.shape, (40,))
        self.assertGreaterEqual(report.lambda_factor, 0.0)
        self.assertLessEqual(report.lambda_factor, 1.0)
        self.assertGreater(report.scalar_metric, 0.0)
        self.assertAlmostEqual(report.scalar_metric, report.per_pair_metric.mean())
        doc = report.as_dict()
        self.assertEqual(len(doc['chi']), 40)
        self.assertEqual(doc['degenerate_pairs'], [])

    def test_frobenius_variant(self):
        pairs, _ = factories.noisy(n=20, seed=4)
        report = uncertainty.srm_metric(pairs, norm='fro')
        self.assertTrue(np.all(np.isfinite(report.chi)))

    def test_correction_scale_is_mean_magnitude(self):
        pairs, _ = factories.noisy(n=40, seed=3)
        report = uncertainty.srm_metric(pairs)
        stats_b = dataset.set_statistics(pairs.b)
        psi_b = dataset.whiten(pairs.b, stats_b)
        np.testing.assert_allclose(psi_b.mean(axis=0), np.zeros(6), atol=1e-8)
        np.testing.assert_allclose(report.mean_psi_b, np.abs(psi_b).mean(axis=0), rtol=1e-9)
        self.assertTrue(np.all(report.mean_psi_b > 0.1))
        np.testing.assert_allclose(
            report.delta_zeta,
            uncertainty.correction_twists(report.chi, report.sigma_a, report.mean_psi_b),
            rtol=1e-12)
        self.assertEqual(len(report.as_dict()['mean_psi_b']), 6)

    def test_left_composition_leaves_metric_unchanged(self):
        pairs, _ = factories.noisy(n=30, seed=5)
        gen = factories.rng(7)
        q, s = factories.random_pose(gen), factories.random_pose(gen)
        moved = PosePairSet(tuple((q @ a, s @ b) for a, b in pairs))
        first = uncertainty.srm_metric(pairs)
        second = uncertainty.srm_metric(moved)
        self.assertAlmostEqual(second.scalar_metric, first.scalar_metric,
                               delta=1e-8 * first.scalar_metric)
        np.testing.assert_allclose(second.per_pair_metric, first.per_pair_metric,
                                   rtol=1e-6, atol=1e-12)


class CorrectionTests(SimpleTestCase):
    def test_twists_scale_with_chi(self):
        gen = factories.rng(8)
        chi = gen.normal(size=(5, 6))
        sigma = np.diag(gen.uniform(0.1, 2.0, size=6))
        scale = gen.uniform(0.5, 1.5, size=6)
        base = uncertainty.correction_twists(chi, sigma, scale)
        np.testing.assert_allclose(uncertainty.correction_twists(-2.5 * chi, sigma, scale),
                                   -2.5 * base, rtol=1e-12)
        np.testing.assert_array_equal(uncertainty.correction_twists(np.zeros((5, 6)), sigma, scale),
                                      np.zeros((5, 6)))

    def test_error_corrections_are_linear(self):
        pairs, _ = factories.noise_free(n=8)
        gen = factories.rng(9)
        delta = gen.normal(size=(8, 6))
        other = gen.normal(size=(8, 6))
        base = uncertainty.error_corrections(pairs, delta)
        np.testing.assert_allclose(uncertainty.error_corrections(pairs, 3.0 * delta), 3.0 * base,
                                   rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(uncertainty.error_corrections(pairs, delta + other),
                                   base + uncertainty.error_corrections(pairs, other),
                                   rtol=1e-10, atol=1e-12)

    def test_error_corrections_length(self):
        pairs, _ = factories.noise_free(n=8)
        with self.assertRaises(InvalidArgument):
            uncertainty.error_corrections(pairs, np.zeros((7, 6)))


class MatrixScaleTests(SimpleTestCase):
    def test_det_is_geometric_mean_of_eigenvalues(self):
        m = np.diag([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
        self.assertAlmostEqual(uncertainty.matrix_scale(m), 2.0 ** 2.5)

    def test_fro(self):
        self.assertAlmostEqual(uncertainty.matrix_scale(np.eye(6), 'fro'), np.sqrt(6.0))

    def test_unknown_norm(self):
        with self.assertRaises(InvalidArgument):
            uncertainty.matrix_scale(np.eye(6), 'max')

    def test_not_positive_definite(self):
        with self.assertRaises(DegenerateVariance):
            uncertainty.matrix_scale(-np.eye(6))


class InfluenceFactorTests(SimpleTestCase):
    def test_clipped_to_unit_interval(self):
        eye = np.eye(6)
        lam = uncertainty.influence_factor(100.0 * eye, eye, eye, eye)
        self.assertEqual(lam, 1.0)

    def test_equal_sources(self):
        eye = np.eye(6)
        self.assertAlmostEqual(uncertainty.influence_factor(eye, eye, eye, eye), 1.0)

    def test_zero_variance(self):
        eye = np.eye(6)
        with self.assertRaises(DegenerateVariance):
            uncertainty.influence_factor(np.zeros((6, 6)), eye, eye, eye)


class ChiTests(SimpleTestCase):
    def test_zero_psi_row_is_skipped(self):
        gen = factories.rng(5)
        psi_a = gen.normal(size=(4, 6))
        psi_a[1] = 0.0
        psi_b = gen.normal(size=(4, 6))
        with self.assertLogs('calibration.uncertainty', level='WARNING'):
            chi, degenerate = uncertainty.chi_ratios(psi_a, psi_b, np.eye(6), np.eye(6), 0.0,
                                                     return_degenerate=True)
        self.assertEqual(degenerate, [1])
        np.testing.assert_array_equal(chi[1], np.zeros(6))

    def test_equal_magnitudes(self):
        gen = factories.rng(6)
        psi_a = gen.normal(size=(5, 6))
        chi = uncertainty.chi_ratios(psi_a, -psi_a, np.eye(6), np.eye(6), 0.3)
        np.testing.assert_allclose(chi, np.zeros((5, 6)), atol=1e-14)

    def test_length_mismatch(self):
        with self.assertRaises(InvalidArgument):
            uncertainty.chi_ratios(np.ones((3, 6)), np.ones((4, 6)), np.eye(6), np.eye(6), 0.5)

    def test_psi_covariance_of_ones(self):
        np.testing.assert_array_equal(uncertainty.psi_covariance(np.ones((7, 6))),
                                      np.zeros((6, 6)))


class SelectionTests(SimpleTestCase):
    def setUp(self):
        self.pairs, _ = factories.noise_free(n=6)
        self.metric = np.array([0.1, 0.5, 0.5, 0.9, 0.0, 0.3])

    def test_rank_order_ties_stable(self):
        self.assertEqual(uncertainty.rank_order(self.metric).tolist(), [3, 1, 2, 5, 0, 4])

    def test_select_top(self):
        chosen = uncertainty.select_pairs(self.pairs, self.metric, SelectionStrategy(1, 3))
        self.assertEqual(chosen.digest(), self.pairs.subset([3, 1, 2]).digest())

    def test_keep_order(self):
        chosen = uncertainty.select_pairs(self.pairs, self.metric, SelectionStrategy(1, 3),
                                          keep_order=True)
        self.assertEqual(chosen.digest(), self.pairs.subset([1, 2, 3]).digest())

    def test_full_range_keep_order_is_identity(self):
        chosen = uncertainty.select_pairs(self.pairs, self.metric, SelectionStrategy(1, 6),
                                          keep_order=True)
        self.assertEqual(chosen.digest(), self.pairs.digest())

    def test_range_checks(self):
        for lo, hi in ((0, 3), (4, 2), (1, 7)):
            with self.assertRaises(InvalidRange):
                uncertainty.select_pairs(self.pairs, self.metric, SelectionStrategy(lo, hi))

    def test_metric_length(self):
        with self.assertRaises(InvalidArgument):
            uncertainty.select_pairs(self.pairs, self.metric[:3], SelectionStrategy(1, 2))

    def test_parse(self):
        self.assertEqual(SelectionStrategy.parse('10:50'), SelectionStrategy(10, 50))
        self.assertEqual(str(SelectionStrategy(1, 10)), '1:10')
        for bad in ('10', 'a:b', '1:2:3'):
            with self.assertRaises(InvalidArgument):
                SelectionStrategy.parse(bad)
