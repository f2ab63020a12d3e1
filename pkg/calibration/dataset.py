"""Pose-pair sets, SE(3) set statistics and pair-file persistence."""
import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import se3_core
from .exceptions import (
    EmptyAfterFilter,
    FormatError,
    InsufficientData,
    InvalidArgument,
    NearSingularCovariance,
    NoConvergence,
    ValidationError,
)
from .se3_core import Pose

logger = logging.getLogger(__name__)

PAIRINGS = ('consecutive', 'all')
FORMATS = ('json', 'csv')
ORTHONORMAL_TOL = 1e-6
# Covariances with a smaller trace are treated as zero.
SINGULAR_TRACE = 1e-20
CSV_HEADER = (
    [f'a_r{i}{j}' for i in range(1, 4) for j in range(1, 4)]
    + ['a_tx', 'a_ty', 'a_tz']
    + [f'b_r{i}{j}' for i in range(1, 4) for j in range(1, 4)]
    + ['b_tx', 'b_ty', 'b_tz']
)


@dataclass(frozen=True)
class PosePairSet:
    """Ordered corresponding pairs (A_i, B_i) with optional string tags."""

    pairs: tuple
    tags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'pairs', tuple((a, b) for a, b in self.pairs))
        object.__setattr__(self, 'tags', tuple(self.tags))
        if self.tags and len(self.tags) != len(self.pairs):
            raise InvalidArgument('tags must match the number of pairs')

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def a(self):
        return [a for a, _ in self.pairs]

    @property
    def b(self):
        return [b for _, b in self.pairs]

    def subset(self, indices):
        indices = list(indices)
        tags = tuple(self.tags[i] for i in indices) if self.tags else ()
        return PosePairSet(tuple(self.pairs[i] for i in indices), tags)

    def arrays(self):
        ra, ta = se3_core.poses_to_arrays(self.a)
        rb, tb = se3_core.poses_to_arrays(self.b)
        return ra, ta, rb, tb

    def digest(self):
        """SHA-256 over the raw doubles; identical sets hash identically."""
        h = hashlib.sha256()
        for a, b in self.pairs:
            for arr in (a.r, a.t, b.r, b.t):
                h.update(np.ascontiguousarray(arr, dtype='<f8').tobytes())
        for tag in self.tags:
            h.update(tag.encode('utf-8'))
        return h.hexdigest()


@dataclass(frozen=True)
class RelativePair:
    a: Pose
    b: Pose
    i: int
    j: int


@dataclass(frozen=True)
class RelativePairSet:
    rel_pairs: tuple

    def __len__(self):
        return len(self.rel_pairs)

    def __iter__(self):
        return iter(self.rel_pairs)


@dataclass(frozen=True)
class SetStatistics:
    mean: Pose
    cov: np.ndarray
    n: int


@dataclass
class FilterReport:
    kept: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    def as_dict(self):
        return {'kept': len(self.kept), 'rejected': self.rejected}


def ensure_pairs(pairs, minimum, what='pose pairs'):
    if len(pairs) < minimum:
        raise InsufficientData(f'need at least {minimum} {what}, got {len(pairs)}')


def make_relative_pairs(s, pairing='consecutive'):
    ensure_pairs(s, 2)
    if pairing == 'consecutive':
        index_pairs = [(i, i + 1) for i in range(len(s) - 1)]
    elif pairing == 'all':
        index_pairs = [(i, j) for i in range(len(s)) for j in range(len(s)) if i != j]
    else:
        raise InvalidArgument(f'unknown pairing strategy {pairing!r}; expected one of {PAIRINGS}')
    rel = []
    for i, j in index_pairs:
        (a_i, b_i), (a_j, b_j) = s.pairs[i], s.pairs[j]
        rel.append(RelativePair(a_j.inverse() @ a_i, b_j.inverse() @ b_i, i, j))
    return RelativePairSet(tuple(rel))


def correspondence_filter(r, eps_theta=0.05, eps_h=0.005):
    """Drop relative pairs whose screw angle or pitch disagree between A and B.

    Returns the kept pairs and a ``FilterReport`` listing every rejected
    ``(i, j)`` with both deltas.
    """
    if eps_theta <= 0 or eps_h <= 0:
        raise InvalidArgument('correspondence thresholds must be positive')
    report = FilterReport()
    for pair in r:
        sa = se3_core.screw_decompose(pair.a)
        sb = se3_core.screw_decompose(pair.b)
        d_theta = abs(sb.theta - sa.theta)
        d_h = abs(sb.h - sa.h)
        if d_theta < eps_theta and d_h < eps_h:
            report.kept.append(pair)
        else:
            report.rejected.append({'i': pair.i, 'j': pair.j,
                                    'd_theta': d_theta, 'd_h': d_h})
    if report.rejected:
        logger.info('correspondence filter rejected %d of %d relative pairs',
                    len(report.rejected), len(r))
    if not report.kept:
        raise EmptyAfterFilter(f'all {len(r)} relative pairs rejected')
    return RelativePairSet(tuple(report.kept)), report


def _log_about(mean, r, t):
    inv = mean.inverse()
    rr = inv.r[None] @ r
    tt = np.einsum('ij,nj->ni', inv.r, t) + inv.t
    return se3_core.log_arrays(rr, tt)


def se3_mean(poses, tol=1e-12, max_iter=100, return_info=False):
    """Iterative SE(3) mean.

    Starts from the chordal mean (projected average rotation, averaged
    translation), which stays put for sets straddling a half turn, and
    refines with ``M <- M exp(delta)`` where ``delta`` solves the
    Jacobian-weighted fixed-point equation. On non-convergence the best
    iterate is returned and a warning logged.
    """
    poses = list(poses)
    if not poses:
        raise InsufficientData('mean of an empty pose set')
    r, t = se3_core.poses_to_arrays(poses)
    mean = Pose(se3_core.project_to_so3(r.mean(axis=0)), t.mean(axis=0))
    best, best_res = mean, np.inf
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        zetas = _log_about(mean, r, t)
        residual = float(np.linalg.norm(zetas.mean(axis=0)))
        if residual < best_res:
            best, best_res = mean, residual
        if residual < tol:
            converged = True
            break
        j_inv = np.linalg.inv(se3_core.left_jacobians(zetas))
        delta = np.linalg.solve(j_inv.mean(axis=0), zetas.mean(axis=0))
        mean = mean @ se3_core.exp_twist(delta)
    else:
        zetas = _log_about(mean, r, t)
        residual = float(np.linalg.norm(zetas.mean(axis=0)))
        if residual < best_res:
            best, best_res = mean, residual
        converged = best_res < tol
    if not converged:
        logger.warning('SE(3) mean did not converge after %d iterations (residual %.3e)',
                       max_iter, best_res)
    if return_info:
        return best, {'iterations': iterations, 'residual': best_res, 'converged': converged}
    return best


def require_mean(poses, tol=1e-12, max_iter=100):
    """Like ``se3_mean`` but raises NoConvergence instead of warning."""
    mean, info = se3_mean(poses, tol, max_iter, return_info=True)
    if not info['converged']:
        raise NoConvergence(f'mean residual {info["residual"]:.3e} above {tol}', best=mean)
    return mean


def se3_covariance(poses, mean):
    poses = list(poses)
    if not poses:
        raise InsufficientData('covariance of an empty pose set')
    r, t = se3_core.poses_to_arrays(poses)
    zetas = _log_about(mean, r, t)
    cov = zetas.T @ zetas / len(poses)
    return 0.5 * (cov + cov.T)


def set_statistics(poses, tol=1e-12, max_iter=100):
    poses = list(poses)
    mean = se3_mean(poses, tol, max_iter)
    return SetStatistics(mean, se3_covariance(poses, mean), len(poses))


def inverse_sqrt(cov, floor_ratio=1e-12):
    """Symmetric inverse square root with an eigenvalue floor of ``floor_ratio * trace / 6``."""
    cov = np.asarray(cov, dtype=float)
    trace = float(np.trace(cov))
    if not trace > SINGULAR_TRACE:
        raise NearSingularCovariance('covariance has zero trace')
    floor = floor_ratio * trace / 6.0
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    clamped = w < floor
    if clamped.any():
        logger.warning('covariance regularised: %d eigenvalue(s) raised to %.3e',
                       int(clamped.sum()), floor)
        w = np.where(clamped, floor, w)
    return (v / np.sqrt(w)) @ v.T


def whiten(poses, stats):
    r, t = se3_core.poses_to_arrays(list(poses))
    zetas = _log_about(stats.mean, r, t)
    return zetas @ inverse_sqrt(stats.cov).T


def _pose_record(p):
    return {'R': p.r.tolist(), 't': p.t.tolist()}


def _pose_from(values_r, values_t, record, reorthonormalize):
    try:
        r = np.array(values_r, dtype=float)
        t = np.array(values_t, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f'non-numeric entry ({exc})', record=record)
    if r.shape != (3, 3) or t.shape != (3,):
        raise FormatError(f'expected R 3x3 and t 3, got {r.shape} and {t.shape}', record=record)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
        raise FormatError('non-finite entry', record=record)
    if not se3_core.is_rotation(r, ORTHONORMAL_TOL):
        if not reorthonormalize:
            raise ValidationError(f'record {record}: rotation is not orthonormal within '
                                  f'{ORTHONORMAL_TOL}', record=record)
        r = se3_core.project_to_so3(r)
    return Pose(r, t)


def detect_format(path):
    suffix = Path(path).suffix.lower()
    if suffix == '.csv':
        return 'csv'
    if suffix == '.json':
        return 'json'
    raise InvalidArgument(f'cannot infer pair-file format from {path!s}; use json or csv')


def save_pairs(s, path, fmt=None):
    fmt = fmt or detect_format(path)
    path = Path(path)
    if fmt == 'json':
        records = []
        for k, (a, b) in enumerate(s.pairs):
            record = {'A': _pose_record(a), 'B': _pose_record(b)}
            if s.tags:
                record['tag'] = s.tags[k]
            records.append(record)
        path.write_text(json.dumps({'pairs': records}, indent=2))
    elif fmt == 'csv':
        with path.open('w', newline='') as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER + (['tag'] if s.tags else []))
            for k, (a, b) in enumerate(s.pairs):
                row = [repr(float(v)) for v in
                       np.concatenate([a.r.ravel(), a.t, b.r.ravel(), b.t])]
                if s.tags:
                    row.append(s.tags[k])
                writer.writerow(row)
    else:
        raise InvalidArgument(f'unknown pair-file format {fmt!r}')


def load_pairs(path, fmt=None, reorthonormalize=False):
    fmt = fmt or detect_format(path)
    path = Path(path)
    if fmt == 'json':
        return _load_json(path, reorthonormalize)
    if fmt == 'csv':
        return _load_csv(path, reorthonormalize)
    raise InvalidArgument(f'unknown pair-file format {fmt!r}')


def _load_json(path, reorthonormalize):
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f'{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}')
    if not isinstance(doc, dict) or not isinstance(doc.get('pairs'), list):
        raise FormatError(f'{path.name}: expected an object with a "pairs" list')
    pairs, tags = [], []
    for k, record in enumerate(doc['pairs']):
        try:
            a = _pose_from(record['A']['R'], record['A']['t'], k, reorthonormalize)
            b = _pose_from(record['B']['R'], record['B']['t'], k, reorthonormalize)
        except (KeyError, TypeError) as exc:
            raise FormatError(f'missing field {exc}', record=k)
        pairs.append((a, b))
        if 'tag' in record:
            tags.append(str(record['tag']))
    if tags and len(tags) != len(pairs):
        raise FormatError(f'{path.name}: tags present on only some records')
    return PosePairSet(tuple(pairs), tuple(tags))


def _load_csv(path, reorthonormalize):
    with path.open(newline='') as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f'{path.name}: empty file, header row required')
    header = [h.strip() for h in rows[0]]
    has_tag = header[-1:] == ['tag']
    width = len(CSV_HEADER) + (1 if has_tag else 0)
    if len(header) != width:
        raise FormatError(f'{path.name}: header must have {len(CSV_HEADER)} numeric columns')
    pairs, tags = [], []
    for k, row in enumerate(rows[1:]):
        if not row:
            continue
        if len(row) != width:
            raise FormatError(f'expected {width} columns, got {len(row)}', record=k)
        try:
            values = np.array([float(v) for v in row[:24]])
        except ValueError as exc:
            raise FormatError(f'non-numeric entry ({exc})', record=k)
        a = _pose_from(values[0:9].reshape(3, 3), values[9:12], k, reorthonormalize)
        b = _pose_from(values[12:21].reshape(3, 3), values[21:24], k, reorthonormalize)
        pairs.append((a, b))
        if has_tag:
            tags.append(row[24])
    return PosePairSet(tuple(pairs), tuple(tags))


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
