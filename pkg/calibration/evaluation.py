"""Ground-truth errors, residual forms and the studies built on them."""
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.transform import Rotation

from . import se3_core
from .exceptions import InsufficientData, InvalidArgument
from .solvers import CLOSED_FORMS, SKIP_ANGLE, dual_quaternions, l_hed_solve

logger = logging.getLogger(__name__)

RESIDUAL_FORMS = ('HTM', 'PosEuler', 'DualQuat', 'LieAlgebra', 'AxisAngle')
FORM_ALIASES = {f.lower(): f for f in RESIDUAL_FORMS}
FORM_ALIASES.update({'pos-euler': 'PosEuler', 'dual-quat': 'DualQuat', 'lie': 'LieAlgebra',
                     'lie-algebra': 'LieAlgebra', 'axis-angle': 'AxisAngle'})


@dataclass(frozen=True)
class ErrorTriple:
    err_r: float
    err_t: float
    err_total: float

    @classmethod
    def of(cls, err_r, err_t):
        return cls(float(err_r), float(err_t), float((err_r + err_t) * 100.0))

    def as_dict(self):
        return {'err_r': self.err_r, 'err_t': self.err_t, 'err_total': self.err_total}


def pose_errors(est, truth):
    err_r = se3_core.rotation_angle(est.r.T @ truth.r)
    return ErrorTriple.of(err_r, np.linalg.norm(est.t - truth.t))


def estimation_errors(est, truth):
    """(ErrorTriple for X, ErrorTriple for Y) of ``est=(x, y)`` against ``truth=(x, y)``."""
    return pose_errors(est[0], truth[0]), pose_errors(est[1], truth[1])


def mean_errors(triples):
    triples = list(triples)
    if not triples:
        raise InsufficientData('no error records to average')
    err_r = float(np.mean([t.err_r for t in triples]))
    err_t = float(np.mean([t.err_t for t in triples]))
    return ErrorTriple(err_r, err_t, float(np.mean([t.err_total for t in triples])))


def error_variance(triples):
    triples = list(triples)
    if len(triples) < 2:
        raise InsufficientData('variance needs at least two error records')
    values = np.array([[t.err_r, t.err_t, t.err_total] for t in triples])
    var = values.var(axis=0, ddof=1)
    return float(var[0]), float(var[1]), float(var[2])


def error_summary(triples):
    """Mean, max, min and variance of each component."""
    triples = list(triples)
    if not triples:
        raise InsufficientData('no error records to summarise')
    values = np.array([[t.err_r, t.err_t, t.err_total] for t in triples])
    var = values.var(axis=0, ddof=1) if len(triples) > 1 else np.zeros(3)
    summary = {}
    for k, name in enumerate(('err_r', 'err_t', 'err_total')):
        summary[name] = {
            'mean': float(values[:, k].mean()),
            'max': float(values[:, k].max()),
            'min': float(values[:, k].min()),
            'var': float(var[k]),
        }
    return summary


def canonical_form(name):
    key = str(name).lower()
    if key in FORM_ALIASES:
        return FORM_ALIASES[key]
    raise InvalidArgument(f'unknown residual form {name!r}; expected one of {RESIDUAL_FORMS}')


def _angle_diff(a, b):
    return np.angle(np.exp(1j * (a - b)))


def residual(pairs, x, y, form='HTM'):
    """Mean discrepancy between A_i X and Y B_i in the chosen representation."""
    form = canonical_form(form)
    ra, ta, rb, tb = pairs.arrays()
    lr, lt = ra @ x.r, np.einsum('nij,j->ni', ra, x.t) + ta
    rr, rt = y.r @ rb, np.einsum('ij,nj->ni', y.r, tb) + y.t
    if form == 'HTM':
        diff = np.sqrt(np.sum((lr - rr) ** 2, axis=(1, 2)) + np.sum((lt - rt) ** 2, axis=1))
        return float(diff.mean())

    keep = np.ones(len(pairs), dtype=bool)
    if form in ('LieAlgebra', 'AxisAngle'):
        if form == 'LieAlgebra':
            angles = se3_core.rotation_angles(np.swapaxes(rr, 1, 2) @ lr)
        else:
            angles = np.maximum(se3_core.rotation_angles(lr), se3_core.rotation_angles(rr))
        keep = angles < SKIP_ANGLE
        if not keep.all():
            logger.warning('%s residual: skipping %d pair(s) near a half turn',
                           form, int((~keep).sum()))
        if not keep.any():
            return float('nan')
        lr, lt, rr, rt = lr[keep], lt[keep], rr[keep], rt[keep]

    if form == 'PosEuler':
        el = Rotation.from_matrix(lr).as_euler('ZYX')
        er = Rotation.from_matrix(rr).as_euler('ZYX')
        diff = np.concatenate([lt - rt, _angle_diff(el, er)], axis=1)
    elif form == 'DualQuat':
        ql, ql_d = dual_quaternions(lr, lt)
        qr, qr_d = dual_quaternions(rr, rt)
        sign = np.where(np.sum(ql * qr, axis=1) < 0, -1.0, 1.0)[:, None]
        diff = np.concatenate([ql - sign * qr, ql_d - sign * qr_d], axis=1)
    elif form == 'LieAlgebra':
        rel_r = np.swapaxes(rr, 1, 2) @ lr
        rel_t = np.einsum('nji,nj->ni', rr, lt - rt)
        diff = se3_core.log_arrays(rel_r, rel_t)
    else:
        vl = Rotation.from_matrix(lr).as_rotvec()
        vr = Rotation.from_matrix(rr).as_rotvec()
        diff = np.concatenate([vl - vr, lt - rt], axis=1)
    return float(np.linalg.norm(diff, axis=1).mean())


def true_translation_error(est, truth):
    ex, ey = estimation_errors(est, truth)
    return ex.err_t + ey.err_t


def concordance(scores, reference):
    """Fraction of item pairs ordered the same way by both sequences; ties count one half."""
    scores = np.asarray(scores, dtype=float)
    reference = np.asarray(reference, dtype=float)
    n = len(scores)
    if n < 2 or len(reference) != n:
        raise InsufficientData('concordance needs two or more matched scores')
    i, j = np.triu_indices(n, k=1)
    product = np.sign(scores[i] - scores[j]) * np.sign(reference[i] - reference[j])
    agree = np.where(product > 0, 1.0, np.where(product < 0, 0.0, 0.5))
    return float(agree.mean())


def ranking_fidelity(estimates, truth, pairs, form='HTM'):
    """How well ranking estimates by residual reproduces their ranking by true Err_T."""
    estimates = list(estimates)
    if len(estimates) < 2:
        raise InsufficientData('ranking fidelity needs at least two estimates')
    scores = [residual(pairs, x, y, form) for x, y in estimates]
    reference = [true_translation_error(est, truth) for est in estimates]
    return concordance(scores, reference)


def closed_form_study(pairs, init, cfg, forms=CLOSED_FORMS):
    """One L-HED run per closed form from the same init and seed."""
    results = {}
    for form in forms:
        results[form] = l_hed_solve(pairs, init[0], init[1], replace(cfg, closed_form=form))
    return results


def closed_form_records(results, pairs, truth=None):
    records = []
    for form, est in results.items():
        record = {
            'form': form,
            'iterations': est.iterations,
            'objective': est.objective,
            'heuristic': est.heuristic,
            'htm_residual': residual(pairs, est.x, est.y, 'HTM'),
            'converged': est.converged,
        }
        if truth is not None:
            ex, ey = estimation_errors((est.x, est.y), truth)
            record.update({'x_err_r': ex.err_r, 'x_err_t': ex.err_t,
                           'y_err_r': ey.err_r, 'y_err_t': ey.err_t})
        records.append(record)
    return records
