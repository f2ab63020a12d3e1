"""SRM@SE(3): relative uncertainty between the A and B data sources.

Both pose sets are whitened around their own SE(3) means. Where the two
sources are consistent, every pair has ``|psi_A| == |psi_B|`` and the
covariances share the same determinant. ``chi`` measures the departure
from that, per pair. It is turned into correction twists and then into
per-pair error corrections for the uncertainty-aware solver.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import se3_core
from .dataset import ensure_pairs, set_statistics, whiten
from .exceptions import DegenerateVariance, InvalidArgument, InvalidRange

logger = logging.getLogger(__name__)

MATRIX_NORMS = ('det', 'fro')


@dataclass(frozen=True)
class SelectionStrategy:
    """Ranks ``rank_lo..rank_hi`` (1-based, inclusive) of the descending metric order."""

    rank_lo: int
    rank_hi: int

    @classmethod
    def parse(cls, text):
        try:
            lo, hi = (int(part) for part in str(text).split(':'))
        except ValueError:
            raise InvalidArgument(f'strategy must look like lo:hi, got {text!r}')
        return cls(lo, hi)

    def __str__(self):
        return f'{self.rank_lo}:{self.rank_hi}'


@dataclass
class UncertaintyReport:
    chi: np.ndarray
    delta_zeta: np.ndarray
    delta_e: np.ndarray
    lambda_factor: float
    per_pair_metric: np.ndarray
    scalar_metric: float
    degenerate: list = field(default_factory=list)
    sigma_a: np.ndarray = None
    sigma_b: np.ndarray = None
    mean_psi_b: np.ndarray = None

    def as_dict(self):
        return {
            'scalar_metric': self.scalar_metric,
            'lambda_factor': self.lambda_factor,
            'per_pair_metric': self.per_pair_metric.tolist(),
            'chi': self.chi.tolist(),
            'delta_zeta': self.delta_zeta.tolist(),
            'delta_e': self.delta_e.tolist(),
            'degenerate_pairs': list(self.degenerate),
            'sigma_a': None if self.sigma_a is None else self.sigma_a.tolist(),
            'sigma_b': None if self.sigma_b is None else self.sigma_b.tolist(),
            'mean_psi_b': None if self.mean_psi_b is None else self.mean_psi_b.tolist(),
        }


def psi_covariance(psi):
    """Second moment of whitened vectors about the all-ones vector."""
    centred = np.asarray(psi, dtype=float) - 1.0
    return centred.T @ centred / len(centred)


def influence_factor(sigma_a, sigma_b, sigma_psi_a, sigma_psi_b):
    diags = [np.diag(np.asarray(m, dtype=float)) for m in
             (sigma_a, sigma_b, sigma_psi_a, sigma_psi_b)]
    if any(np.any(d <= 0) for d in diags):
        raise DegenerateVariance('influence factor needs strictly positive variances')
    d_a, d_b, d_psi_a, d_psi_b = diags
    components = np.log1p(d_a / d_b) / np.log1p(d_psi_a / d_psi_b)
    return float(np.clip(components.mean(), 0.0, 1.0))


def matrix_scale(m, norm='det'):
    """Scalar size of a covariance.

    ``det`` is ``det(m) ** (1/6)``, unchanged by congruence with an adjoint
    (unit determinant), so consistent sources compare equal. ``fro`` is the
    Frobenius norm.
    """
    m = np.asarray(m, dtype=float)
    if norm == 'det':
        sign, logdet = np.linalg.slogdet(m)
        if sign <= 0:
            raise DegenerateVariance('covariance is not positive definite')
        return float(np.exp(logdet / m.shape[0]))
    if norm == 'fro':
        return float(np.linalg.norm(m))
    raise InvalidArgument(f'unknown matrix norm {norm!r}; expected one of {MATRIX_NORMS}')


def chi_ratios(psi_a, psi_b, sigma_a, sigma_b, lam, norm='det', return_degenerate=False):
    psi_a = np.asarray(psi_a, dtype=float)
    psi_b = np.asarray(psi_b, dtype=float)
    if psi_a.shape != psi_b.shape:
        raise InvalidArgument('psi_A and psi_B must have equal length')
    scale_a = matrix_scale(sigma_a, norm)
    scale_b = matrix_scale(sigma_b, norm)
    spread = (scale_b / scale_a - 1.0) * np.diag(sigma_a) / scale_a
    norm_a = np.linalg.norm(psi_a, axis=1)
    norm_b = np.linalg.norm(psi_b, axis=1)
    degenerate = np.flatnonzero(norm_a <= 1e-15).tolist()
    safe = np.where(norm_a > 1e-15, norm_a, 1.0)
    ratio_term = ((norm_b / safe - 1.0) / safe)[:, None] * psi_a
    chi = (1.0 - lam) * ratio_term + lam * spread
    if degenerate:
        logger.warning('skipping %d pair(s) with zero whitened A residual', len(degenerate))
        chi[degenerate] = 0.0
    return (chi, degenerate) if return_degenerate else chi


def correction_twists(chi, sigma_a, mean_psi_b):
    chi = np.asarray(chi, dtype=float)
    omega = np.sqrt(np.diag(np.asarray(sigma_a, dtype=float)))
    return omega * np.asarray(mean_psi_b, dtype=float) * chi


def error_corrections(pairs, delta_zeta):
    delta_zeta = np.asarray(delta_zeta, dtype=float)
    if len(pairs) != len(delta_zeta):
        raise InvalidArgument('pairs and correction twists differ in length')
    ra, ta, _, _ = pairs.arrays()
    log_a = se3_core.log_arrays(ra, ta)
    return np.einsum('nij,nj->ni', se3_core.left_jacobians(log_a), delta_zeta)


def srm_metric(pairs, norm='det', mean_tol=1e-12, mean_max_iter=100):
    """Per-pair and scalar SRM@SE(3) with the derived corrections.

    Correction twists scale with the component-wise mean magnitude
    ``mean(|psi_B|)``; the signed mean of whitened B residuals is zero.
    """
    ensure_pairs(pairs, 6)
    stats_a = set_statistics(pairs.a, mean_tol, mean_max_iter)
    stats_b = set_statistics(pairs.b, mean_tol, mean_max_iter)
    psi_a = whiten(pairs.a, stats_a)
    psi_b = whiten(pairs.b, stats_b)
    lam = influence_factor(stats_a.cov, stats_b.cov, psi_covariance(psi_a), psi_covariance(psi_b))
    chi, degenerate = chi_ratios(psi_a, psi_b, stats_a.cov, stats_b.cov, lam, norm,
                                 return_degenerate=True)
    mean_psi_b = np.abs(psi_b).mean(axis=0)
    delta_zeta = correction_twists(chi, stats_a.cov, mean_psi_b)
    delta_e = error_corrections(pairs, delta_zeta)
    per_pair = np.linalg.norm(chi, axis=1)
    report = UncertaintyReport(chi, delta_zeta, delta_e, lam, per_pair, float(per_pair.mean()),
                               degenerate, stats_a.cov, stats_b.cov, mean_psi_b)
    logger.debug('SRM@SE(3) over %d pairs: %.6g (lambda %.4f)', len(pairs),
                 report.scalar_metric, lam)
    return report


def rank_order(per_pair_metric):
    """Indices sorted by metric descending, ties kept in input order."""
    return np.argsort(-np.asarray(per_pair_metric, dtype=float), kind='stable')


def select_pairs(pairs, per_pair_metric, strategy, keep_order=False):
    """Pairs ranked lo..hi by descending metric; ``keep_order`` returns them in input order."""
    if len(per_pair_metric) != len(pairs):
        raise InvalidArgument('metric length differs from the number of pairs')
    if not 1 <= strategy.rank_lo <= strategy.rank_hi <= len(pairs):
        raise InvalidRange(f'strategy {strategy} outside 1..{len(pairs)}')
    chosen = rank_order(per_pair_metric)[strategy.rank_lo - 1:strategy.rank_hi]
    if keep_order:
        chosen = np.sort(chosen)
    return pairs.subset(chosen.tolist())
