"""Solvers for AX = YB on SE(3).

``l_hed_solve`` and ``ual_hed_solve`` iterate on the Lie algebra of X and Y
at the same time. ``si_ah_solve`` is the screw-axis initialiser refined by
Levenberg-Marquardt. ``dq_solve`` and ``kron_solve`` are the closed-form
dual-quaternion and Kronecker-product baselines.
"""
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import linalg
from scipy.spatial.transform import Rotation

from . import se3_core
from .dataset import correspondence_filter, ensure_pairs, make_relative_pairs, se3_mean
from .exceptions import DegenerateRotation, InvalidArgument, RankDeficientMotion
from .se3_core import Pose
from .uncertainty import srm_metric

logger = logging.getLogger(__name__)

CLOSED_FORMS = ('CF1', 'CF2', 'CF3', 'CF4')
METHODS = ('SI-AH', 'L-HED', 'UAL-HED', 'DQ', 'KP')
ITERATIVE_METHODS = ('L-HED', 'UAL-HED')
METHOD_ALIASES = {
    'si-ah': 'SI-AH',
    'l-hed': 'L-HED',
    'ual-hed': 'UAL-HED',
    'dq': 'DQ',
    'kp': 'KP',
    'kron': 'KP',
}
# Pairs whose error rotation gets this close to a half turn are skipped.
SKIP_ANGLE = np.pi - 1e-3
RANK_TOL = 1e-9
SI_AH_TRANSLATIONS = ('means', 'stacked')
# Mean relative rotations smaller than this leave t_X to the stacked solve.
MEAN_ANGLE_MIN = 1e-3


def _as_bool(value):
    if isinstance(value, str):
        if value.lower() in ('true', '1', 'yes', 'on'):
            return True
        if value.lower() in ('false', '0', 'no', 'off'):
            return False
        raise ValueError(value)
    return bool(value)


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1e-2
    beta: float = 0.9
    tol: float = 1e-10
    max_iter: int = 200000
    escape_stall_window: int = 200
    escape_scale: float = 1e-3
    max_escapes: int = 10
    closed_form: str = 'auto'
    seed: int = 0
    precondition: bool = False
    cov_refresh: int = 50
    cov_eps: float = 1e-12
    trace_every: int = 100
    skip_limit: float = 0.5
    lm_lambda0: float = 1e-3
    lm_mu: float = 10.0
    lm_lambda_min: float = 1e-12
    lm_lambda_max: float = 1e6
    lm_max_iter: int = 100
    lm_tol: float = 1e-16
    eps_theta: float = 0.05
    eps_h: float = 0.005
    mean_tol: float = 1e-12
    mean_max_iter: int = 100
    si_ah_translation: str = 'means'

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgument('alpha must be positive')
        if not 0 <= self.beta < 1:
            raise InvalidArgument('beta must lie in [0, 1)')
        if not self.tol > 0:
            raise InvalidArgument('tol must be positive')
        if not self.lm_mu > 1:
            raise InvalidArgument('lm_mu must exceed 1')
        if not 0 < self.lm_lambda_min <= self.lm_lambda0 <= self.lm_lambda_max:
            raise InvalidArgument('L-M damping must satisfy min <= lambda0 <= max')
        if self.max_iter < 1 or self.escape_stall_window < 1 or self.cov_refresh < 1:
            raise InvalidArgument('iteration counts must be positive')
        if self.closed_form not in CLOSED_FORMS + ('auto',):
            raise InvalidArgument(f'closed_form must be one of {CLOSED_FORMS} or auto')
        if self.si_ah_translation not in SI_AH_TRANSLATIONS:
            raise InvalidArgument(f'si_ah_translation must be one of {SI_AH_TRANSLATIONS}')

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f.type for f in fields(cls)}
        unknown = sorted(set(mapping) - set(known))
        if unknown:
            raise InvalidArgument(f'unknown solver setting(s): {", ".join(unknown)}')
        casts = {float: float, int: int, str: str, bool: _as_bool}
        values = {}
        for key, value in mapping.items():
            cast = casts.get(known[key], lambda v: v)
            try:
                values[key] = cast(value)
            except (TypeError, ValueError):
                raise InvalidArgument(f'solver setting {key}={value!r} is not a {known[key]}')
        return cls(**values)

    def as_dict(self):
        return asdict(self)


@dataclass
class CalibEstimate:
    x: Pose
    y: Pose
    method: str
    iterations: int = 0
    objective: float = 0.0
    trace: list = field(default_factory=list)
    escapes: list = field(default_factory=list)
    converged: bool = True
    form: str = 'CF1'
    heuristic: float = 0.0
    extras: dict = field(default_factory=dict)

    def as_dict(self, decimate=None):
        trace = self.trace
        if decimate and decimate > 1:
            trace = [row for row in trace if row[0] % decimate == 0 or row is trace[-1]]
        return {
            'method': self.method,
            'X': {'R': self.x.r.tolist(), 't': self.x.t.tolist()},
            'Y': {'R': self.y.r.tolist(), 't': self.y.t.tolist()},
            'iterations': self.iterations,
            'objective': self.objective,
            'heuristic': self.heuristic,
            'closed_form': self.form,
            'converged': self.converged,
            'escapes': list(self.escapes),
            'trace': [{'iteration': it, 'objective': obj, 'heuristic': tau}
                      for it, obj, tau in trace],
            'extras': self.extras,
        }


def canonical_method(name):
    key = str(name).lower()
    if key in METHOD_ALIASES:
        return METHOD_ALIASES[key]
    if str(name).upper() in METHODS:
        return str(name).upper()
    raise InvalidArgument(f'unknown method {name!r}; expected one of {sorted(METHOD_ALIASES)}')


def resolve_form(form, x, y):
    """``auto`` picks CF3 when Y carries the longer translation, CF1 otherwise."""
    if form != 'auto':
        if form not in CLOSED_FORMS:
            raise InvalidArgument(f'unknown closed form {form!r}')
        return form
    return 'CF3' if np.linalg.norm(y.t) > np.linalg.norm(x.t) else 'CF1'


def _mul(r1, t1, r2, t2):
    return r1 @ r2, np.einsum('...ij,...j->...i', r1, t2) + t1


def _inverse(r, t):
    rt = np.swapaxes(r, -1, -2)
    return rt, -np.einsum('...ij,...j->...i', rt, t)


def _adjoints(r, t, n):
    if r.ndim == 2:
        return np.broadcast_to(se3_core.adjoint_arrays(r[None], t[None])[0], (n, 6, 6))
    return se3_core.adjoint_arrays(r, t)


def closed_form_error(a, b, x, y, form):
    """Per-pair error product; the identity at an exact solution for every form."""
    if form == 'CF1':
        return y.inverse() @ a @ x @ b.inverse()
    if form == 'CF2':
        return a @ x @ b.inverse() @ y.inverse()
    if form == 'CF3':
        return x @ b.inverse() @ y.inverse() @ a
    if form == 'CF4':
        return b.inverse() @ y.inverse() @ a @ x
    raise InvalidArgument(f'unknown closed form {form!r}')


class PairProblem:
    """Batched error products, residuals and linearisations for one pair set."""

    def __init__(self, pairs, form, corrections=None, skip_limit=0.5):
        if form not in CLOSED_FORMS:
            raise InvalidArgument(f'unknown closed form {form!r}')
        self.ra, self.ta, self.rb, self.tb = pairs.arrays()
        self.rb_inv, self.tb_inv = _inverse(self.rb, self.tb)
        self.n = len(pairs)
        self.form = form
        self.skip_limit = skip_limit
        if corrections is None:
            self.corrections = np.zeros((self.n, 6))
        else:
            self.corrections = np.asarray(corrections, dtype=float)
            if self.corrections.shape != (self.n, 6):
                raise InvalidArgument('corrections must be one 6-vector per pair')
        self._skipped = 0

    def errors(self, x, y):
        """Error products and the adjoints mapping X / Y perturbations onto them."""
        yi_r, yi_t = _inverse(y.r, y.t)
        if self.form == 'CF1':
            p = _mul(yi_r, yi_t, self.ra, self.ta)
            e = _mul(*_mul(*p, x.r, x.t), self.rb_inv, self.tb_inv)
            d_a, d_b = _adjoints(*p, self.n), _adjoints(yi_r, yi_t, self.n)
        elif self.form == 'CF2':
            e = _mul(*_mul(*_mul(self.ra, self.ta, x.r, x.t), self.rb_inv, self.tb_inv), yi_r, yi_t)
            d_a, d_b = _adjoints(self.ra, self.ta, self.n), _adjoints(*e, self.n)
        elif self.form == 'CF3':
            q = _mul(*_mul(x.r, x.t, self.rb_inv, self.tb_inv), yi_r, yi_t)
            e = _mul(*q, self.ra, self.ta)
            d_a, d_b = np.broadcast_to(np.eye(6), (self.n, 6, 6)), _adjoints(*q, self.n)
        else:
            s = _mul(self.rb_inv, self.tb_inv, yi_r, yi_t)
            sa = _mul(*s, self.ra, self.ta)
            e = _mul(*sa, x.r, x.t)
            d_a, d_b = _adjoints(*sa, self.n), _adjoints(*s, self.n)
        return e, d_a, d_b

    def _logs(self, e):
        keep = se3_core.rotation_angles(e[0]) < SKIP_ANGLE
        skipped = self.n - int(keep.sum())
        if skipped > self.skip_limit * self.n:
            raise DegenerateRotation(f'{skipped} of {self.n} pairs have near half-turn errors')
        if skipped != self._skipped:
            if skipped:
                logger.warning('skipping %d pair(s) with near half-turn error rotation', skipped)
            self._skipped = skipped
        eps = np.zeros((self.n, 6))
        eps[keep] = se3_core.log_arrays(e[0][keep], e[1][keep])
        return eps, keep

    def residuals(self, x, y):
        """Corrected residuals of the kept pairs and the kept-pair mask."""
        e, _, _ = self.errors(x, y)
        eps, keep = self._logs(e)
        return (eps - self.corrections)[keep], keep

    def linearize(self, zeta_x, zeta_y):
        """Residuals ``r`` and Jacobians ``G`` with ``log e(zeta + d) ~ r + G d``."""
        x, y = se3_core.exp_twist(zeta_x), se3_core.exp_twist(zeta_y)
        e, d_a, d_b = self.errors(x, y)
        eps, keep = self._logs(e)
        jl_inv = np.linalg.inv(se3_core.left_jacobians(eps[keep], strict=False))
        jx = se3_core.left_jacobians(zeta_x[None], strict=False)[0]
        jy = se3_core.left_jacobians(zeta_y[None], strict=False)[0]
        blocks = np.concatenate([d_a[keep] @ jx, -(d_b[keep] @ jy)], axis=2)
        return (eps - self.corrections)[keep], jl_inv @ blocks


def error_weights(r, eps=1e-12):
    """Inverse of the diagonal residual covariance (sample variance about the mean)."""
    return 1.0 / (np.var(r, axis=0, ddof=1) + eps)


def objective(pairs, x, y, form='CF1', corrections=None, weights=None, eps=1e-12):
    """Mahalanobis objective at (x, y); weights default to the residual variance there."""
    problem = PairProblem(pairs, resolve_form(form, x, y), corrections)
    r, _ = problem.residuals(x, y)
    w = error_weights(r, eps) if weights is None else np.asarray(weights, dtype=float)
    return float(np.sum(r * r * w))


def heuristic_metric(pairs, x, y, form='CF1', corrections=None):
    """Mean Lie-algebra norm of the per-pair errors."""
    problem = PairProblem(pairs, resolve_form(form, x, y), corrections)
    r, _ = problem.residuals(x, y)
    return float(np.linalg.norm(r, axis=1).mean())


def _wrap(zeta, v):
    for block in (slice(0, 6), slice(6, 12)):
        if np.linalg.norm(zeta[block][:3]) > np.pi:
            zeta[block] = se3_core.wrap_twist(zeta[block])
            v[block] = 0.0


def l_hed_solve(pairs, init_x, init_y, cfg=None, corrections=None, method='L-HED'):
    """Synchronised momentum descent on (X, Y) with stall-triggered escapes.

    Each iteration linearises the per-pair errors at the current iterate,
    takes a momentum step along the gradient of the Mahalanobis objective and
    retracts through ``exp(zeta + delta)``. The residual weights, and the
    scalar gain that puts the gradient at unit mean curvature, are refreshed
    every ``cfg.cov_refresh`` iterations. With ``cfg.precondition`` the
    gradient is replaced by the Gauss-Newton step. When the heuristic metric
    has not improved for ``cfg.escape_stall_window`` iterations a random term
    is added to the gradient; if that does not lead to a new best within
    another window the iterate rolls back to the best checkpoint.
    """
    cfg = cfg or SolverConfig()
    ensure_pairs(pairs, 3)
    form = resolve_form(cfg.closed_form, init_x, init_y)
    problem = PairProblem(pairs, form, corrections, cfg.skip_limit)
    rng = np.random.default_rng(cfg.seed)

    zeta = np.concatenate([se3_core.wrap_twist(se3_core.log_pose(init_x)),
                           se3_core.wrap_twist(se3_core.log_pose(init_y))])
    v = np.zeros(12)
    weights = None
    best_tau, best_zeta, last_improve = np.inf, zeta.copy(), 0
    checkpoints, escapes, trace = [], [], []
    escape_at = None
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        r, g = problem.linearize(zeta[:6], zeta[6:])
        tau = float(np.linalg.norm(r, axis=1).mean())
        if weights is None or (it - 1) % cfg.cov_refresh == 0:
            weights = error_weights(r, cfg.cov_eps)
            gain = 12.0 / (2.0 * np.einsum('nki,k,nki->', g, weights, g) + 1e-300)
        if it == 1 or it % cfg.trace_every == 0:
            trace.append((it, float(np.sum(r * r * error_weights(r, cfg.cov_eps))), tau))

        if tau < best_tau:
            best_tau, best_zeta, last_improve = tau, zeta.copy(), it
            checkpoints.append((it, tau))
            escape_at = None
        elif escape_at is not None and it - escape_at >= cfg.escape_stall_window:
            logger.debug('escape at iteration %d found nothing better; rolling back to %d',
                         escape_at, checkpoints[-1][0])
            zeta, v = best_zeta.copy(), np.zeros(12)
            escape_at, last_improve = None, it
            continue

        grad = 2.0 * np.einsum('nki,nk->i', g, weights * r)
        if (escape_at is None and len(escapes) < cfg.max_escapes
                and it - last_improve >= cfg.escape_stall_window):
            scale = cfg.escape_scale * np.linalg.norm(grad)
            grad = grad + rng.uniform(-scale, scale, 12)
            escapes.append(it)
            escape_at = it
            logger.info('%s stalled at iteration %d (tau %.3e); perturbing gradient',
                        method, it, tau)

        if cfg.precondition:
            hess = 2.0 * np.einsum('nki,k,nkj->ij', g, weights, g)
            hess += 1e-12 * (np.trace(hess) / 12.0 + 1e-300) * np.eye(12)
            try:
                direction = linalg.solve(hess, grad, assume_a='pos')
            except linalg.LinAlgError:
                raise RankDeficientMotion('Gauss-Newton curvature is singular')
        else:
            direction = gain * grad
        v = cfg.beta * v + (1.0 - cfg.beta) * direction
        step = -cfg.alpha * v
        zeta = zeta + step
        _wrap(zeta, v)
        if np.linalg.norm(step) < cfg.tol:
            converged = True
            break

    x, y = se3_core.exp_twist(zeta[:6]), se3_core.exp_twist(zeta[6:])
    r, _ = problem.residuals(x, y)
    final_objective = float(np.sum(r * r * error_weights(r, cfg.cov_eps)))
    final_tau = float(np.linalg.norm(r, axis=1).mean())
    if not trace or trace[-1][0] != it:
        trace.append((it, final_objective, final_tau))
    if not converged:
        logger.warning('%s stopped at max_iter=%d without reaching tol=%g',
                       method, cfg.max_iter, cfg.tol)
    logger.debug('%s finished after %d iterations, objective %.6g', method, it, final_objective)
    return CalibEstimate(x, y, method, iterations=it, objective=final_objective, trace=trace,
                         escapes=escapes, converged=converged, form=form, heuristic=final_tau,
                         extras={'checkpoints': checkpoints})


def ual_hed_solve(pairs, init_x, init_y, cfg=None, norm='det'):
    """L-HED with per-pair corrections taken from the SRM@SE(3) report."""
    cfg = cfg or SolverConfig()
    ensure_pairs(pairs, 6)
    report = srm_metric(pairs, norm, cfg.mean_tol, cfg.mean_max_iter)
    est = l_hed_solve(pairs, init_x, init_y, cfg, corrections=report.delta_e, method='UAL-HED')
    est.extras.update(scalar_metric=report.scalar_metric, lambda_factor=report.lambda_factor)
    return est


def _closed_form_estimate(pairs, x, y, method, cfg, extras=None):
    form = resolve_form(cfg.closed_form, x, y)
    problem = PairProblem(pairs, form, skip_limit=cfg.skip_limit)
    r, _ = problem.residuals(x, y)
    return CalibEstimate(x, y, method, iterations=0,
                         objective=float(np.sum(r * r * error_weights(r, cfg.cov_eps))),
                         form=form, heuristic=float(np.linalg.norm(r, axis=1).mean()),
                         extras=extras or {})


def _y_from_means(pairs, x, cfg):
    mean_a = se3_mean(pairs.a, cfg.mean_tol, cfg.mean_max_iter)
    mean_b = se3_mean(pairs.b, cfg.mean_tol, cfg.mean_max_iter)
    return mean_a @ x @ mean_b.inverse()


def _lm_cost(rx, tx, ua, ub, ra, ta, tb):
    e_rot = ub @ rx.T - ua
    e_tr = np.einsum('nij,j->ni', ra, tx) + ta - tb @ rx.T - tx
    return np.concatenate([e_rot, e_tr], axis=1)


def _lm_refine(rx, tx, ua, ub, ra, ta, tb, cfg):
    """Joint Levenberg-Marquardt on (R_X, t_X) with R_X <- R_X exp(dw)."""
    m = len(ua)
    eye = np.eye(3)
    lam = cfg.lm_lambda0
    e = _lm_cost(rx, tx, ua, ub, ra, ta, tb)
    cost = float(np.sum(e * e))
    history = [(0, cost)]
    k = 0
    for k in range(1, cfg.lm_max_iter + 1):
        jac = np.zeros((m, 6, 6))
        jac[:, :3, :3] = -rx @ se3_core.skew_batch(ub)
        jac[:, 3:, :3] = rx @ se3_core.skew_batch(tb)
        jac[:, 3:, 3:] = ra - eye
        jac = jac.reshape(-1, 6)
        hess = jac.T @ jac
        grad = jac.T @ e.ravel()
        while True:
            delta = -np.linalg.solve(hess + lam * np.eye(6), grad)
            rx_new = rx @ se3_core.exp_twist(np.concatenate([delta[:3], np.zeros(3)])).r
            tx_new = tx + delta[3:]
            e_new = _lm_cost(rx_new, tx_new, ua, ub, ra, ta, tb)
            cost_new = float(np.sum(e_new * e_new))
            if cost_new < cost:
                lam = max(lam / cfg.lm_mu, cfg.lm_lambda_min)
                break
            if lam >= cfg.lm_lambda_max:
                return rx, tx, history
            lam = min(lam * cfg.lm_mu, cfg.lm_lambda_max)
        change = cost - cost_new
        rx, tx, e, cost = rx_new, tx_new, e_new, cost_new
        history.append((k, cost))
        if change < cfg.lm_tol:
            break
    return rx, tx, history


def _stacked_translation(ra, ta, tb, rx):
    lhs = (ra - np.eye(3)).reshape(-1, 3)
    rhs = (tb @ rx.T - ta).ravel()
    tx, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < 3:
        raise RankDeficientMotion('relative motions do not constrain the translation of X')
    return tx


def _translation_from_means(kept, rx, cfg):
    """t_X from ``M_A X = X M_B`` at the SE(3) means of the relative motions.

    The component along the rotation axis of ``M_A`` is left at zero; the
    L-M refinement settles it. Returns ``None`` when the mean barely rotates
    or a motion sits a half turn away from it.
    """
    try:
        mean_a = se3_mean([p.a for p in kept], cfg.mean_tol, cfg.mean_max_iter)
        mean_b = se3_mean([p.b for p in kept], cfg.mean_tol, cfg.mean_max_iter)
    except DegenerateRotation:
        return None
    if se3_core.rotation_angle(mean_a.r) < MEAN_ANGLE_MIN:
        return None
    tx, _, _, _ = np.linalg.lstsq(mean_a.r - np.eye(3), rx @ mean_b.t - mean_a.t, rcond=None)
    return tx


def si_ah_solve(pairs, cfg=None):
    """Screw-axis initialiser: SVD rotation, translation from the motion means, L-M refinement.

    ``cfg.si_ah_translation = 'stacked'`` takes the translation from a
    least-squares solve over every relative motion instead.
    """
    cfg = cfg or SolverConfig()
    ensure_pairs(pairs, 3)
    rel = make_relative_pairs(pairs, 'consecutive')
    kept, report = correspondence_filter(rel, cfg.eps_theta, cfg.eps_h)
    if len(kept) < 2:
        raise RankDeficientMotion('at least two relative motions must survive the filter')
    screws_a = [se3_core.screw_decompose(p.a) for p in kept]
    screws_b = [se3_core.screw_decompose(p.b) for p in kept]
    ua = np.array([s.theta * s.k for s in screws_a])
    ub = np.array([s.theta * s.k for s in screws_b])
    ra, ta = se3_core.poses_to_arrays([p.a for p in kept])
    _, tb = se3_core.poses_to_arrays([p.b for p in kept])

    u, s, vt = np.linalg.svd(ua.T @ ub)
    if s[1] < RANK_TOL * s[0]:
        raise RankDeficientMotion('relative rotation axes are parallel')
    d = np.sign(np.linalg.det(u @ vt)) or 1.0
    rx = u @ np.diag([1.0, 1.0, d]) @ vt

    tx = None
    if cfg.si_ah_translation == 'means':
        tx = _translation_from_means(kept, rx, cfg)
        if tx is None:
            logger.info('motion means give no translation; solving t_X from every motion')
    if tx is None:
        tx = _stacked_translation(ra, ta, tb, rx)

    rx, tx, history = _lm_refine(rx, tx, ua, ub, ra, ta, tb, cfg)
    x = Pose(se3_core.project_to_so3(rx), tx)
    y = _y_from_means(pairs, x, cfg)
    est = _closed_form_estimate(pairs, x, y, 'SI-AH', cfg, extras={
        'lm_cost': history[-1][1],
        'translation': cfg.si_ah_translation,
        'rejected_pairs': report.rejected,
    })
    est.iterations = history[-1][0]
    est.trace = [(k, c, float('nan')) for k, c in history]
    return est


def _quaternions(r):
    q = Rotation.from_matrix(r).as_quat()[..., [3, 0, 1, 2]]
    return q * np.where(q[..., :1] < 0, -1.0, 1.0)


def _qmul(p, q):
    w1, v1 = p[..., :1], p[..., 1:]
    w2, v2 = q[..., :1], q[..., 1:]
    w = w1 * w2 - np.sum(v1 * v2, axis=-1, keepdims=True)
    v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
    return np.concatenate([w, v], axis=-1)


def dual_quaternions(r, t):
    """Unit dual quaternions (real, dual), scalar first, real part with w >= 0."""
    qr = _quaternions(r)
    pure = np.concatenate([np.zeros(t.shape[:-1] + (1,)), t], axis=-1)
    return qr, 0.5 * _qmul(pure, qr)


def dq_solve(pairs, cfg=None):
    """Dual-quaternion hand-eye solution for X; Y from the mean of A_i X B_i^-1."""
    cfg = cfg or SolverConfig()
    ensure_pairs(pairs, 2)
    rel = make_relative_pairs(pairs, 'consecutive')
    ra, ta = se3_core.poses_to_arrays([p.a for p in rel])
    rb, tb = se3_core.poses_to_arrays([p.b for p in rel])
    qa, qa_d = dual_quaternions(ra, ta)
    qb, qb_d = dual_quaternions(rb, tb)
    a, a_d, b, b_d = qa[:, 1:], qa_d[:, 1:], qb[:, 1:], qb_d[:, 1:]
    m = len(rel)
    system = np.zeros((m, 6, 8))
    system[:, :3, 0] = a - b
    system[:, :3, 1:4] = se3_core.skew_batch(a + b)
    system[:, 3:, 0] = a_d - b_d
    system[:, 3:, 1:4] = se3_core.skew_batch(a_d + b_d)
    system[:, 3:, 4] = a - b
    system[:, 3:, 5:8] = se3_core.skew_batch(a + b)
    _, s, vt = np.linalg.svd(system.reshape(-1, 8))
    if len(s) < 8 or s[5] < RANK_TOL * s[0]:
        raise RankDeficientMotion('dual-quaternion system needs two non-parallel motions')
    u1, v1 = vt[6, :4], vt[6, 4:]
    u2, v2 = vt[7, :4], vt[7, 4:]

    qa_, qb_, qc_ = u1 @ v1, u1 @ v2 + u2 @ v1, u2 @ v2
    if abs(qa_) < 1e-15:
        roots = [-qc_ / qb_]
    else:
        disc = max(qb_ * qb_ - 4.0 * qa_ * qc_, 0.0)
        roots = [(-qb_ + np.sqrt(disc)) / (2.0 * qa_), (-qb_ - np.sqrt(disc)) / (2.0 * qa_)]
    values = [r * r * (u1 @ u1) + 2.0 * r * (u1 @ u2) + u2 @ u2 for r in roots]
    k = int(np.argmax(values))
    lam2 = 1.0 / np.sqrt(values[k])
    lam1 = roots[k] * lam2
    q_real = lam1 * u1 + lam2 * u2
    q_dual = lam1 * v1 + lam2 * v2
    norm = np.linalg.norm(q_real)
    q_real, q_dual = q_real / norm, q_dual / norm
    conj = q_real * np.array([1.0, -1.0, -1.0, -1.0])
    tx = 2.0 * _qmul(q_dual, conj)[1:]
    rx = Rotation.from_quat(q_real[[1, 2, 3, 0]]).as_matrix()
    x = Pose(rx, tx)
    y = se3_mean([a_i @ x @ b_i.inverse() for a_i, b_i in pairs],
                 cfg.mean_tol, cfg.mean_max_iter)
    return _closed_form_estimate(pairs, x, y, 'DQ', cfg)


def _rotation_factor(m):
    u, _ = linalg.polar(m)
    if np.linalg.det(u) < 0:
        return se3_core.project_to_so3(m)
    return u


def kron_solve(pairs, cfg=None):
    """Kronecker-product null vector for (R_X, R_Y), then least squares for translations."""
    cfg = cfg or SolverConfig()
    ensure_pairs(pairs, 2)
    ra, ta, rb, tb = pairs.arrays()
    eye = np.eye(3)
    blocks = [np.hstack([np.kron(eye, r_a), -np.kron(r_b.T, eye)]) for r_a, r_b in zip(ra, rb)]
    _, s, vt = np.linalg.svd(np.vstack(blocks))
    if s[-2] < RANK_TOL * s[0]:
        raise RankDeficientMotion('Kronecker system has more than one null direction')
    v = vt[-1]
    mx = v[:9].reshape(3, 3, order='F')
    my = v[9:].reshape(3, 3, order='F')
    scale = np.cbrt(np.linalg.det(mx))
    if abs(scale) < 1e-12:
        raise RankDeficientMotion('Kronecker null vector has a singular X block')
    rx, ry = _rotation_factor(mx / scale), _rotation_factor(my / scale)

    lhs = np.concatenate([ra, -np.broadcast_to(eye, ra.shape)], axis=2).reshape(-1, 6)
    rhs = (tb @ ry.T - ta).ravel()
    sol, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if rank < 6:
        raise RankDeficientMotion('poses do not constrain the translations')
    return _closed_form_estimate(pairs, Pose(rx, sol[:3]), Pose(ry, sol[3:]), 'KP', cfg)


def solve(method, pairs, cfg=None, init=None):
    """Run one method by name; iterative methods start from ``init`` or SI-AH."""
    cfg = cfg or SolverConfig()
    method = canonical_method(method)
    if method == 'SI-AH':
        return si_ah_solve(pairs, cfg)
    if method == 'DQ':
        return dq_solve(pairs, cfg)
    if method == 'KP':
        return kron_solve(pairs, cfg)
    init_name = 'given'
    if init is None:
        seed_est = si_ah_solve(pairs, cfg)
        init, init_name = (seed_est.x, seed_est.y), 'SI-AH'
    if method == 'L-HED':
        est = l_hed_solve(pairs, init[0], init[1], cfg)
    else:
        est = ual_hed_solve(pairs, init[0], init[1], cfg)
    est.extras['init'] = init_name
    return est
