import logging
from pathlib import Path

from calibration import conf, reports, synth
from calibration.dataset import FORMATS, file_digest, save_pairs

from ._base import CalibrationCommand

logger = logging.getLogger(__name__)


class Command(CalibrationCommand):
    help = 'Synthesize a noisy pose-pair dataset and its ground truth'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--scenario', help='Scenario name, e.g. R-AU or S-HHLL (default: config noise table)')
        parser.add_argument('--n', type=int, default=100, help='Number of pose pairs')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('-o', '--output', required=True, help='Dataset file (.json or .csv)')
        parser.add_argument('--truth', help='Ground-truth file (default: <output>.truth.json)')
        parser.add_argument('--format', choices=FORMATS, help='Dataset format (default: from suffix)')
        parser.add_argument('--workspace', help='Workspace preset name (large, small)')
        parser.add_argument('--swap-translations', action='store_true',
                            help='Exchange the translations of X and Y in the ground truth')

    def run(self, **options):
        output = Path(options['output'])
        truth_path = Path(options['truth'] or output.with_suffix('.truth.json'))
        noise = conf.noise_config(self.config, options['scenario'], options['seed'])
        over = noise.above_limits()
        if over:
            logger.warning('noise beyond the documented injection ranges: %s', ', '.join(over))
        x_opt = y_opt = None
        if options['swap_translations']:
            x_opt, y_opt = synth.swap_translations(synth.TRUE_X, synth.TRUE_Y)
        pairs, gt = synth.synthesize(noise, options['n'], options['seed'],
                                     conf.workspace(self.config, options['workspace']),
                                     x_opt, y_opt)
        save_pairs(pairs, output, options['format'])
        parameters = {'scenario': options['scenario'], 'n': options['n'],
                      'seed': options['seed'], 'noise': noise.as_dict()}
        reports.write_json({**gt.as_dict(), 'provenance': reports.provenance('generate', {},
                                                                            parameters)},
                           truth_path)
        self.emit_json({
            'dataset': str(output),
            'truth': str(truth_path),
            'pairs': len(pairs),
            'dataset_digest': pairs.digest(),
            'file_digest': file_digest(output),
            'truth_digest': synth.truth_digest(gt),
            'provenance': reports.provenance('generate', {}, parameters),
        })
        self.summary(f'Wrote {len(pairs)} pose pairs to {output} and ground truth to {truth_path}')
