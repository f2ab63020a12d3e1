import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from calibration import dataset, se3_core
from calibration.dataset import PosePairSet
from calibration.exceptions import (
    EmptyAfterFilter,
    FormatError,
    InsufficientData,
    InvalidArgument,
    NearSingularCovariance,
    ValidationError,
)
from calibration.se3_core import Pose

from . import factories


class RelativePairTests(SimpleTestCase):
    def test_consecutive(self):
        pairs, _ = factories.noise_free(n=5)
        rel = dataset.make_relative_pairs(pairs)
        self.assertEqual(len(rel), 4)
        first = rel.rel_pairs[0]
        expected = pairs.pairs[1][0].inverse() @ pairs.pairs[0][0]
        self.assertTrue(first.a.allclose(expected, atol=1e-12))
        self.assertEqual((first.i, first.j), (0, 1))

    def test_all_pairing(self):
        pairs, _ = factories.noise_free(n=4)
        self.assertEqual(len(dataset.make_relative_pairs(pairs, 'all')), 12)

    def test_identical_poses_give_identity(self):
        p = factories.random_pose(factories.rng(3))
        rel = dataset.make_relative_pairs(PosePairSet(((p, p), (p, p))))
        self.assertTrue(rel.rel_pairs[0].a.allclose(Pose.identity(), atol=1e-12))

    def test_unknown_pairing(self):
        pairs, _ = factories.noise_free(n=3)
        with self.assertRaises(InvalidArgument):
            dataset.make_relative_pairs(pairs, 'random')

    def test_single_pair(self):
        pairs, _ = factories.noise_free(n=1)
        with self.assertRaises(InsufficientData):
            dataset.make_relative_pairs(pairs)


class CorrespondenceFilterTests(SimpleTestCase):
    def test_exact_data_kept(self):
        pairs, _ = factories.noise_free(n=10)
        kept, report = dataset.correspondence_filter(dataset.make_relative_pairs(pairs))
        self.assertEqual(len(kept), 9)
        self.assertEqual(report.rejected, [])

    def test_mismatched_pair_rejected(self):
        robot = [Pose(se3_core.rot_z(0.2 * k) @ se3_core.rot_x(0.1 * k), np.array([0.1 * k, 0.0, 0.3]))
                 for k in range(4)]
        pairs = factories.pairs_for(robot)
        a, b = pairs.pairs[2]
        spun = b @ Pose(se3_core.rot_x(2.0), np.zeros(3))
        broken = PosePairSet(pairs.pairs[:2] + ((a, spun),) + pairs.pairs[3:])
        kept, report = dataset.correspondence_filter(dataset.make_relative_pairs(broken))
        self.assertEqual(len(kept), 1)
        self.assertEqual([(r['i'], r['j']) for r in report.rejected], [(1, 2), (2, 3)])
        self.assertEqual(report.as_dict()['kept'], 1)

    def test_everything_rejected(self):
        a = Pose(se3_core.rot_x(0.4), np.zeros(3))
        b = Pose(se3_core.rot_x(1.4), np.zeros(3))
        rel = dataset.make_relative_pairs(PosePairSet(((Pose.identity(), Pose.identity()), (a, b))))
        with self.assertRaises(EmptyAfterFilter):
            dataset.correspondence_filter(rel)

    def test_refiltering_changes_nothing(self):
        gen = factories.rng(13)
        robot = [factories.random_pose(gen) for _ in range(12)]
        pairs = factories.pairs_for(robot)
        spun = tuple((a, b @ Pose(se3_core.rot_x(0.5 if k % 3 == 1 else 0.0), np.zeros(3)))
                     for k, (a, b) in enumerate(pairs.pairs))
        kept, report = dataset.correspondence_filter(dataset.make_relative_pairs(PosePairSet(spun)))
        self.assertTrue(report.rejected)
        again, second = dataset.correspondence_filter(kept)
        self.assertEqual(second.rejected, [])
        self.assertEqual([(p.i, p.j) for p in again], [(p.i, p.j) for p in kept])

    def test_thresholds_positive(self):
        pairs, _ = factories.noise_free(n=3)
        with self.assertRaises(InvalidArgument):
            dataset.correspondence_filter(dataset.make_relative_pairs(pairs), eps_theta=0.0)


class MeanTests(SimpleTestCase):
    def cluster(self, n=40, seed=5):
        gen = factories.rng(seed)
        center = factories.random_pose(gen)
        return center, [center @ se3_core.exp_twist(0.3 * gen.normal(size=6)) for _ in range(n)]

    def test_identical_poses(self):
        p = factories.random_pose(factories.rng(6))
        mean, info = dataset.se3_mean([p] * 5, return_info=True)
        self.assertTrue(mean.allclose(p, atol=1e-12))
        self.assertTrue(info['converged'])

    def test_fixed_point(self):
        _, poses = self.cluster()
        mean = dataset.se3_mean(poses)
        r, t = se3_core.poses_to_arrays(poses)
        zetas = dataset._log_about(mean, r, t)
        self.assertLess(np.linalg.norm(zetas.mean(axis=0)), 1e-10)

    def test_left_equivariance(self):
        _, poses = self.cluster(seed=7)
        q = factories.random_pose(factories.rng(8))
        moved = dataset.se3_mean([q @ p for p in poses])
        self.assertTrue(moved.allclose(q @ dataset.se3_mean(poses), atol=1e-9))

    def test_gradient_descent_oracle(self):
        _, poses = self.cluster(n=20, seed=9)
        r, t = se3_core.poses_to_arrays(poses)
        mean = poses[0]
        for _ in range(2000):
            step = se3_core.exp_twist(0.5 * dataset._log_about(mean, r, t).mean(axis=0))
            mean = mean @ step
        self.assertTrue(dataset.se3_mean(poses).allclose(mean, atol=1e-6))

    def test_half_turn_straddle(self):
        poses = [Pose(se3_core.rot_x(np.pi - 0.05), np.zeros(3)),
                 Pose(se3_core.rot_x(-(np.pi - 0.05)), np.zeros(3))]
        mean, info = dataset.se3_mean(poses, return_info=True)
        self.assertTrue(info['converged'])
        np.testing.assert_allclose(mean.r, np.diag([1.0, -1.0, -1.0]), atol=1e-9)
        self.assertAlmostEqual(se3_core.rotation_angle(mean.r), np.pi, places=6)

    def test_cluster_around_half_turn(self):
        gen = factories.rng(14)
        center = Pose(se3_core.rot_z(np.pi - 0.02), np.array([0.3, -0.1, 0.5]))
        poses = [center @ se3_core.exp_twist(0.1 * gen.normal(size=6)) for _ in range(30)]
        mean, info = dataset.se3_mean(poses, return_info=True)
        self.assertTrue(info['converged'])
        offset = se3_core.rotation_angle(center.r.T @ mean.r)
        self.assertLess(offset, 0.1)

    def test_conjugation_equivariance(self):
        _, poses = self.cluster(seed=15)
        q = factories.random_pose(factories.rng(16))
        moved = dataset.se3_mean([q @ p @ q.inverse() for p in poses])
        self.assertTrue(moved.allclose(q @ dataset.se3_mean(poses) @ q.inverse(), atol=1e-9))

    def test_empty(self):
        with self.assertRaises(InsufficientData):
            dataset.se3_mean([])

    def test_require_mean_converges(self):
        _, poses = self.cluster(n=10, seed=10)
        self.assertTrue(dataset.require_mean(poses).is_valid())


class CovarianceTests(SimpleTestCase):
    def test_identical_poses_zero(self):
        p = factories.random_pose(factories.rng(11))
        cov = dataset.se3_covariance([p] * 4, p)
        np.testing.assert_allclose(cov, np.zeros((6, 6)), atol=1e-20)
        with self.assertRaises(NearSingularCovariance):
            dataset.inverse_sqrt(cov)

    def test_whitened_set_has_unit_covariance(self):
        gen = factories.rng(12)
        poses = [se3_core.exp_twist(gen.normal(size=6) * [0.2, 0.1, 0.3, 1.0, 2.0, 0.5])
                 for _ in range(60)]
        stats = dataset.set_statistics(poses)
        psi = dataset.whiten(poses, stats)
        np.testing.assert_allclose(psi.T @ psi / len(psi), np.eye(6), atol=1e-8)

    def test_covariance_follows_adjoint(self):
        gen = factories.rng(17)
        poses = [se3_core.exp_twist(0.2 * gen.normal(size=6)) for _ in range(25)]
        q = factories.random_pose(gen)
        stats = dataset.set_statistics(poses)
        moved = dataset.set_statistics([q @ p @ q.inverse() for p in poses])
        ad = se3_core.adjoint_group(q)
        np.testing.assert_allclose(moved.cov, ad @ stats.cov @ ad.T, atol=1e-9)

    def test_inverse_sqrt_floor(self):
        cov = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 0.0])
        with self.assertLogs('calibration.dataset', level='WARNING'):
            w = dataset.inverse_sqrt(cov)
        self.assertTrue(np.all(np.isfinite(w)))


class PairFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.pairs, _ = factories.noisy(n=8, seed=3)

    def tearDown(self):
        self.tmp.cleanup()

    def test_json_and_csv_load_identically(self):
        dataset.save_pairs(self.pairs, self.dir / 'd.json')
        dataset.save_pairs(self.pairs, self.dir / 'd.csv')
        from_json = dataset.load_pairs(self.dir / 'd.json')
        from_csv = dataset.load_pairs(self.dir / 'd.csv')
        self.assertEqual(from_json.digest(), self.pairs.digest())
        self.assertEqual(from_csv.digest(), from_json.digest())

    def test_tags_survive(self):
        tagged = PosePairSet(self.pairs.pairs, tuple(f'p{i}' for i in range(len(self.pairs))))
        for name in ('t.json', 't.csv'):
            dataset.save_pairs(tagged, self.dir / name)
            self.assertEqual(dataset.load_pairs(self.dir / name).tags, tagged.tags)

    def test_invalid_json(self):
        path = self.dir / 'bad.json'
        path.write_text('{"pairs": [')
        with self.assertRaises(FormatError):
            dataset.load_pairs(path)

    def test_missing_field_names_record(self):
        path = self.dir / 'bad.json'
        path.write_text(json.dumps({'pairs': [{'A': {'R': np.eye(3).tolist(), 't': [0, 0, 0]}}]}))
        with self.assertRaises(FormatError) as ctx:
            dataset.load_pairs(path)
        self.assertEqual(ctx.exception.record, 0)

    def test_non_orthonormal(self):
        record = {'R': (2.0 * np.eye(3)).tolist(), 't': [0.0, 0.0, 0.0]}
        path = self.dir / 'skew.json'
        path.write_text(json.dumps({'pairs': [{'A': record, 'B': record}]}))
        with self.assertRaises(ValidationError):
            dataset.load_pairs(path)

    def test_reorthonormalize_on_load(self):
        r = (se3_core.rot_z(0.3) + 1e-5).tolist()
        record = {'R': r, 't': [0.0, 0.0, 0.0]}
        path = self.dir / 'near.json'
        path.write_text(json.dumps({'pairs': [{'A': record, 'B': record}]}))
        loaded = dataset.load_pairs(path, reorthonormalize=True)
        self.assertTrue(loaded.a[0].is_valid())

    def test_csv_wrong_width(self):
        path = self.dir / 'bad.csv'
        path.write_text(','.join(dataset.CSV_HEADER) + '\n1,2,3\n')
        with self.assertRaises(FormatError) as ctx:
            dataset.load_pairs(path)
        self.assertEqual(ctx.exception.record, 0)

    def test_unknown_suffix(self):
        with self.assertRaises(InvalidArgument):
            dataset.load_pairs(self.dir / 'd.txt')

    def test_subset_and_digest(self):
        sub = self.pairs.subset([0, 2])
        self.assertEqual(len(sub), 2)
        self.assertNotEqual(sub.digest(), self.pairs.digest())
        self.assertEqual(sub.digest(), self.pairs.subset([0, 2]).digest())
