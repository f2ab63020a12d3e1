"""Seeded simulation campaigns and the studies layered on them.

Trial ``k`` of a campaign always uses seed ``seed0 + k``, so adding trials
never changes earlier ones. Work is split into independent tasks; with
``jobs > 1`` they run in a process pool and are gathered back in order.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import se3_core, synth
from .evaluation import (
    RESIDUAL_FORMS,
    ErrorTriple,
    closed_form_records,
    closed_form_study,
    error_summary,
    estimation_errors,
    ranking_fidelity,
    residual,
)
from .exceptions import CalibrationError, InvalidArgument
from .solvers import METHODS, SolverConfig, canonical_method, l_hed_solve, si_ah_solve, solve
from .uncertainty import SelectionStrategy, select_pairs, srm_metric

logger = logging.getLogger(__name__)

SELECTION_STRATEGIES = (
    SelectionStrategy(1, 10),
    SelectionStrategy(1, 20),
    SelectionStrategy(1, 50),
    SelectionStrategy(1, 100),
    SelectionStrategy(10, 20),
    SelectionStrategy(10, 50),
    SelectionStrategy(10, 100),
    SelectionStrategy(50, 100),
)
TABLE3_SCENARIOS = ('R-AU', 'C-AU', 'R-AU/C-AU', 'R-EU', 'R-EU/C-AU', 'R-AU-EU/C-AU')


@dataclass(frozen=True)
class CampaignSpec:
    scenarios: tuple = TABLE3_SCENARIOS
    methods: tuple = ('UAL-HED', 'L-HED', 'SI-AH', 'DQ', 'KP')
    trials: int = 30
    n_pairs: int = 100
    seed0: int = 0
    workspace: synth.Workspace = field(default_factory=synth.Workspace)
    degraded_threshold: float = 0.2

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgument('a campaign needs at least one trial')
        if not self.methods:
            raise InvalidArgument('a campaign needs at least one method')
        if not self.scenarios:
            raise InvalidArgument('a campaign needs at least one scenario')
        object.__setattr__(self, 'methods', tuple(canonical_method(m) for m in self.methods))
        object.__setattr__(self, 'scenarios', tuple(self.scenarios))
        for name in self.scenarios:
            if isinstance(name, str):
                synth.scenario_config(name)

    def as_dict(self):
        return {
            'scenarios': [s if isinstance(s, str) else s.as_dict() for s in self.scenarios],
            'methods': list(self.methods),
            'trials': self.trials,
            'n_pairs': self.n_pairs,
            'seed0': self.seed0,
            'degraded_threshold': self.degraded_threshold,
        }


@dataclass
class CampaignResult:
    records: list
    aggregates: list
    failures: int
    degraded: bool

    def as_dict(self):
        return {'degraded': self.degraded, 'failures': self.failures,
                'aggregates': self.aggregates, 'records': self.records}


def scenario_label(noise):
    return noise if isinstance(noise, str) else 'custom'


def _map(fn, tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, *zip(*tasks)))
    return [fn(*task) for task in tasks]


def _error_fields(est, truth):
    ex, ey = estimation_errors((est.x, est.y), truth)
    return {'x_err_r': ex.err_r, 'x_err_t': ex.err_t, 'x_err_total': ex.err_total,
            'y_err_r': ey.err_r, 'y_err_t': ey.err_t, 'y_err_total': ey.err_total}


def _failed(record, exc):
    logger.warning('%s trial %s %s failed: %s', record.get('scenario'), record.get('trial'),
                   record.get('method'), exc)
    record.update(status='failed', error=str(exc))
    return record


def run_trial(noise, trial, spec, cfg):
    """Solve one synthesized dataset with every method of the campaign."""
    seed = spec.seed0 + trial
    label = scenario_label(noise)
    pairs, gt = synth.synthesize(noise, spec.n_pairs, seed, spec.workspace)
    truth = (gt.x_opt, gt.y_opt)
    init, init_error = None, None
    if any(m in ('SI-AH', 'L-HED', 'UAL-HED') for m in spec.methods):
        try:
            init = si_ah_solve(pairs, cfg)
        except CalibrationError as exc:
            init_error = exc
    records = []
    for method in spec.methods:
        record = {'scenario': label, 'trial': trial, 'seed': seed, 'method': method}
        if method in ('SI-AH', 'L-HED', 'UAL-HED') and init is None:
            records.append(_failed(record, init_error))
            continue
        try:
            if method == 'SI-AH':
                est = init
            else:
                start = (init.x, init.y) if init is not None else None
                est = solve(method, pairs, cfg, init=start)
        except CalibrationError as exc:
            records.append(_failed(record, exc))
            continue
        record.update(status='ok', iterations=est.iterations, converged=est.converged,
                      objective=est.objective, **_error_fields(est, truth))
        records.append(record)
    return records


def _triples(records, side):
    return [ErrorTriple(r[f'{side}_err_r'], r[f'{side}_err_t'], r[f'{side}_err_total'])
            for r in records]


def aggregate(records, scenarios, methods):
    """Table rows of mean/max/min/variance per (scenario, method), from raw records."""
    rows = []
    for scenario in scenarios:
        for method in methods:
            group = [r for r in records if r['scenario'] == scenario and r['method'] == method]
            ok = [r for r in group if r['status'] == 'ok']
            row = {'scenario': scenario, 'method': method, 'trials': len(group),
                   'failures': len(group) - len(ok)}
            if ok:
                row['X'] = error_summary(_triples(ok, 'x'))
                row['Y'] = error_summary(_triples(ok, 'y'))
            rows.append(row)
    return rows


def run_campaign(spec, cfg=None, jobs=1):
    cfg = cfg or SolverConfig()
    tasks = [(noise, trial, spec, cfg) for noise in spec.scenarios for trial in range(spec.trials)]
    records = [r for batch in _map(run_trial, tasks, jobs) for r in batch]
    labels = list(dict.fromkeys(scenario_label(s) for s in spec.scenarios))
    failures = sum(1 for r in records if r['status'] != 'ok')
    degraded = failures > spec.degraded_threshold * len(records)
    if degraded:
        logger.warning('campaign degraded: %d of %d solves failed', failures, len(records))
    return CampaignResult(records, aggregate(records, labels, spec.methods), failures, degraded)


def flat_rows(result):
    """One CSV-ready row per (scenario, method, side) aggregate."""
    rows = []
    for agg in result.aggregates:
        for side in ('X', 'Y'):
            summary = agg.get(side)
            row = {'scenario': agg['scenario'], 'method': agg['method'], 'side': side,
                   'trials': agg['trials'], 'failures': agg['failures']}
            if summary:
                for comp, values in summary.items():
                    for stat, value in values.items():
                        row[f'{comp}_{stat}'] = value
            rows.append(row)
    return rows


def data_count_sweep(counts, scenario, trials, methods=METHODS, cfg=None, seed0=0, jobs=1):
    counts = list(counts)
    if counts != sorted(counts) or len(set(counts)) != len(counts):
        raise InvalidArgument('counts must be strictly ascending')
    rows = []
    for count in counts:
        spec = CampaignSpec(scenarios=(scenario,), methods=tuple(methods), trials=trials,
                            n_pairs=count, seed0=seed0)
        result = run_campaign(spec, cfg, jobs)
        for agg in result.aggregates:
            row = {'count': count, 'method': agg['method'], 'failures': agg['failures']}
            if 'X' in agg:
                row.update(x_err_t=agg['X']['err_t']['mean'], y_err_t=agg['Y']['err_t']['mean'],
                           x_err_total=agg['X']['err_total']['mean'],
                           y_err_total=agg['Y']['err_total']['mean'])
            rows.append(row)
    return rows


def _selection_trial(scenario, trial, strategies, methods, n_pairs, seed0, cfg):
    seed = seed0 + trial
    pairs, gt = synth.synthesize(scenario, n_pairs, seed)
    truth = (gt.x_opt, gt.y_opt)
    report = srm_metric(pairs, mean_tol=cfg.mean_tol, mean_max_iter=cfg.mean_max_iter)
    records = []
    choices = [('none', pairs)] + [
        (str(s), select_pairs(pairs, report.per_pair_metric, s, keep_order=True))
        for s in strategies]
    for label, subset in choices:
        for method in methods:
            record = {'trial': trial, 'seed': seed, 'strategy': label, 'method': method,
                      'pairs': len(subset)}
            try:
                est = solve(method, subset, cfg)
            except CalibrationError as exc:
                records.append(_failed(record, exc))
                continue
            record.update(status='ok', **_error_fields(est, truth))
            records.append(record)
    return records


def selection_study(strategies=SELECTION_STRATEGIES, methods=('DQ', 'KP'), scenario='S-HHHH',
                    trials=20, n_pairs=100, cfg=None, seed0=0, jobs=1):
    """Per-strategy errors of solving on metric-ranked subsets; ``none`` is the full set."""
    cfg = cfg or SolverConfig()
    methods = tuple(canonical_method(m) for m in methods)
    for s in strategies:
        if s.rank_hi > n_pairs:
            raise InvalidArgument(f'strategy {s} needs more than {n_pairs} pairs')
    tasks = [(scenario, trial, tuple(strategies), methods, n_pairs, seed0, cfg)
             for trial in range(trials)]
    records = [r for batch in _map(_selection_trial, tasks, jobs) for r in batch]
    rows = []
    for label in ['none'] + [str(s) for s in strategies]:
        for method in methods:
            group = [r for r in records if r['strategy'] == label and r['method'] == method]
            ok = [r for r in group if r['status'] == 'ok']
            row = {'strategy': label, 'method': method, 'trials': len(group),
                   'failures': len(group) - len(ok)}
            if ok:
                row.update(x_err_t=float(np.mean([r['x_err_t'] for r in ok])),
                           y_err_t=float(np.mean([r['y_err_t'] for r in ok])))
            rows.append(row)
    return rows, records


def _ladder_point(noise, n_pairs, seed, cfg):
    pairs, _ = synth.synthesize(noise, n_pairs, seed)
    return srm_metric(pairs, mean_tol=cfg.mean_tol, mean_max_iter=cfg.mean_max_iter).scalar_metric


def metric_ladder_study(steps=10, seeds=50, n_pairs=100, seed0=0, cfg=None, jobs=1):
    """Mean SRM@SE(3) along a uniformly scaled noise ladder, plus the component mix rows."""
    cfg = cfg or SolverConfig()
    tasks = [(synth.ladder_config(step, steps), n_pairs, seed0 + s, cfg)
             for step in range(1, steps + 1) for s in range(seeds)]
    values = np.array(_map(_ladder_point, tasks, jobs)).reshape(steps, seeds)
    ladder = [{'step': step, 'metric': float(values[step - 1].mean()),
               'std': float(values[step - 1].std())} for step in range(1, steps + 1)]
    rho = stats.spearmanr(np.arange(steps), values.mean(axis=1)).statistic if steps > 1 else 1.0
    mix_tasks = [(synth.component_mix(kind), n_pairs, seed0 + s, cfg)
                 for kind in ('rotation', 'translation') for s in range(seeds)]
    mix_values = np.array(_map(_ladder_point, mix_tasks, jobs)).reshape(2, seeds)
    mix = [{'kind': kind, 'metric': float(mix_values[k].mean())}
           for k, kind in enumerate(('rotation', 'translation'))]
    return {'ladder': ladder, 'component_mix': mix, 'spearman': float(rho)}


def _residual_trial(scenario, trial, methods, n_pairs, seed0, cfg):
    seed = seed0 + trial
    pairs, gt = synth.synthesize(scenario, n_pairs, seed)
    truth = (gt.x_opt, gt.y_opt)
    estimates = []
    init = None
    for method in methods:
        try:
            if method == 'SI-AH' or init is None and method in ('L-HED', 'UAL-HED'):
                init = init or si_ah_solve(pairs, cfg)
            est = init if method == 'SI-AH' else solve(
                method, pairs, cfg, init=(init.x, init.y) if init else None)
        except CalibrationError as exc:
            logger.warning('residual study trial %d: %s failed: %s', trial, method, exc)
            continue
        estimates.append((est.x, est.y))
    row = {'trial': trial, 'seed': seed, 'estimates': len(estimates)}
    for form in RESIDUAL_FORMS:
        row[form] = (ranking_fidelity(estimates, truth, pairs, form)
                     if len(estimates) >= 2 else float('nan'))
    return row


def residual_form_study(scenario='R-AU-EU/C-AU', trials=60, methods=METHODS, n_pairs=100,
                        cfg=None, seed0=0, jobs=1):
    """Ranking fidelity of each residual form against the true translation error."""
    cfg = cfg or SolverConfig()
    methods = tuple(canonical_method(m) for m in methods)
    tasks = [(scenario, trial, methods, n_pairs, seed0, cfg) for trial in range(trials)]
    rows = _map(_residual_trial, tasks, jobs)
    summary = [{'form': form, 'fidelity': float(np.nanmean([r[form] for r in rows]))}
               for form in RESIDUAL_FORMS]
    return summary, rows


def _closed_form_trial(scenario, seed, n_pairs, swap, cfg):
    x_opt, y_opt = synth.TRUE_X, synth.TRUE_Y
    if swap:
        x_opt, y_opt = synth.swap_translations(x_opt, y_opt)
    pairs, gt = synth.synthesize(scenario, n_pairs, seed, x_opt=x_opt, y_opt=y_opt)
    init = si_ah_solve(pairs, cfg)
    results = closed_form_study(pairs, (init.x, init.y), cfg)
    records = closed_form_records(results, pairs, (gt.x_opt, gt.y_opt))
    traces = [{'seed': seed, 'form': form, 'iteration': it, 'objective': obj, 'heuristic': tau}
              for form, est in results.items() for it, obj, tau in est.trace]
    for record in records:
        record.update(seed=seed, swapped=swap)
    return records, traces


def closed_form_campaign(scenario='R-AU/C-AU', seeds=3, n_pairs=100, swap=False, cfg=None,
                         seed0=0, jobs=1):
    cfg = cfg or SolverConfig()
    tasks = [(scenario, seed0 + s, n_pairs, swap, cfg) for s in range(seeds)]
    outcomes = _map(_closed_form_trial, tasks, jobs)
    records = [r for recs, _ in outcomes for r in recs]
    traces = [t for _, trs in outcomes for t in trs]
    return records, traces


def perturbed(pose, magnitude, rng):
    direction = rng.normal(size=6)
    return pose @ se3_core.exp_twist(magnitude * direction / np.linalg.norm(direction))


def init_distance_study(scenario='R-AU/C-AU', n_pairs=100, seed=0, cfg=None, magnitude=0.5):
    """L-HED on one dataset from the SI-AH estimate, a perturbed copy of it, and the identity."""
    cfg = cfg or SolverConfig()
    pairs, gt = synth.synthesize(scenario, n_pairs, seed)
    base = si_ah_solve(pairs, cfg)
    rng = np.random.default_rng([seed, 2])
    inits = {
        'SI-AH': (base.x, base.y),
        'perturbed': (perturbed(base.x, magnitude, rng), perturbed(base.y, magnitude, rng)),
        'identity': (se3_core.Pose.identity(), se3_core.Pose.identity()),
    }
    rows, traces = [], []
    for name, (x0, y0) in inits.items():
        est = l_hed_solve(pairs, x0, y0, cfg)
        distance = (np.linalg.norm(se3_core.log_pose(x0.inverse() @ est.x))
                    + np.linalg.norm(se3_core.log_pose(y0.inverse() @ est.y)))
        ex, ey = estimation_errors((est.x, est.y), (gt.x_opt, gt.y_opt))
        rows.append({'init': name, 'distance': float(distance), 'iterations': est.iterations,
                     'objective': est.objective, 'heuristic': est.heuristic,
                     'converged': est.converged, 'escapes': len(est.escapes),
                     'x_err_t': ex.err_t, 'y_err_t': ey.err_t})
        traces.extend({'init': name, 'iteration': it, 'objective': obj, 'heuristic': tau}
                      for it, obj, tau in est.trace)
    return rows, traces


def replay_study(pairs, cfg=None, methods=METHODS):
    """Solve a recorded dataset with every method and report all residual forms."""
    cfg = cfg or SolverConfig()
    rows = []
    init = None
    for method in (canonical_method(m) for m in methods):
        row = {'method': method}
        try:
            if method in ('SI-AH', 'L-HED', 'UAL-HED') and init is None:
                init = si_ah_solve(pairs, cfg)
            est = init if method == 'SI-AH' else solve(
                method, pairs, cfg, init=(init.x, init.y) if init else None)
        except CalibrationError as exc:
            rows.append(_failed(row, exc))
            continue
        row['status'] = 'ok'
        for form in RESIDUAL_FORMS:
            row[form] = residual(pairs, est.x, est.y, form)
        rows.append(row)
    report = srm_metric(pairs, mean_tol=cfg.mean_tol, mean_max_iter=cfg.mean_max_iter)
    return rows, report
