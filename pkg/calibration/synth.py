"""Synthetic ground truth and uncertainty injection.

Robot poses are sampled as a position (mm) and intrinsic Z-Y-X Euler angles
``[yaw, pitch, roll]`` (degrees) inside a workspace box. The reported robot
pose A is exact. The camera pose B is computed from a noisy copy of the robot
pose and then gets its own noise. Noise has two parts: Gaussian aleatoric
noise (AU), and a deterministic epistemic bias (EU) proportional to the
offset from the workspace origin.
"""
import hashlib
import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.spatial.transform import Rotation

from .dataset import PosePairSet
from .exceptions import InvalidArgument, InvalidWorkspace
from .se3_core import Pose

logger = logging.getLogger(__name__)

EULER_SEQ = 'ZYX'
GIMBAL_LIMIT = 89.9
MAX_RESAMPLES = 100

TRUE_X = Pose.from_matrix([
    [-0.795, -0.599, 0.087, 0.09],
    [0.604, -0.795, 0.052, -0.2],
    [0.038, 0.094, 0.995, 0.07],
    [0.0, 0.0, 0.0, 1.0],
], reorthonormalize=True)
TRUE_Y = Pose.from_matrix([
    [-0.965, -0.258, -0.035, 3.6],
    [0.259, -0.965, -0.035, -3.9],
    [-0.024, -0.043, 0.999, 0.3],
    [0.0, 0.0, 0.0, 1.0],
], reorthonormalize=True)

# Upper ends of the injection ranges: mm, degrees, dimensionless gain.
ROBOT_LIMITS = {'pos': 1.0, 'rot': 0.4, 'eu': 0.004}
CAMERA_LIMITS = {'pos': 0.5, 'rot': 0.2, 'eu': 0.004}
SOURCE_LEVELS = {
    'A': {'H': (1.0, 0.4), 'L': (0.2, 0.1)},
    'B': {'H': (0.5, 0.2), 'L': (0.1, 0.05)},
}
WORKSPACE_EDGES = {'large': 1500.0, 'small': 400.0}


def pose_from_position_euler(position_mm, euler_deg):
    r = Rotation.from_euler(EULER_SEQ, euler_deg, degrees=True).as_matrix()
    return Pose(r, np.asarray(position_mm, dtype=float) / 1000.0)


def position_euler(p):
    """Inverse of ``pose_from_position_euler``: (position mm, [yaw, pitch, roll] deg)."""
    euler = Rotation.from_matrix(p.r).as_euler(EULER_SEQ, degrees=True)
    return p.t * 1000.0, euler


@dataclass(frozen=True)
class Workspace:
    """Sampling box in mm and Euler-angle bounds in degrees, both centred."""

    center: tuple = (800.0, 0.0, 600.0)
    size: tuple = (1500.0, 1500.0, 1500.0)
    orientation_center: tuple = (0.0, 0.0, 0.0)
    orientation_half_range: tuple = (30.0, 30.0, 30.0)

    def __post_init__(self):
        for name in ('center', 'size', 'orientation_center', 'orientation_half_range'):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (3,) or not np.all(np.isfinite(value)):
                raise InvalidWorkspace(f'{name} must be three finite numbers')
            object.__setattr__(self, name, tuple(float(v) for v in value))
        if min(self.size) < 0 or min(self.orientation_half_range) < 0:
            raise InvalidWorkspace('workspace extents must be non-negative')
        pitch = abs(self.orientation_center[1]) + self.orientation_half_range[1]
        if pitch >= GIMBAL_LIMIT:
            raise InvalidWorkspace(f'pitch range reaches {pitch} degrees')
        if max(self.orientation_half_range) >= 180.0:
            raise InvalidWorkspace('orientation half-range must stay below 180 degrees')

    @classmethod
    def preset(cls, name):
        try:
            edge = WORKSPACE_EDGES[name]
        except KeyError:
            raise InvalidWorkspace(f'unknown workspace preset {name!r}; '
                                   f'expected one of {sorted(WORKSPACE_EDGES)}')
        return cls(size=(edge, edge, edge))

    @classmethod
    def from_mapping(cls, mapping):
        mapping = dict(mapping)
        preset = mapping.pop('preset', None)
        base = cls.preset(preset) if preset else cls()
        unknown = set(mapping) - {f.name for f in fields(cls)}
        if unknown:
            raise InvalidWorkspace(f'unknown workspace key(s): {", ".join(sorted(unknown))}')
        return replace(base, **{k: tuple(v) for k, v in mapping.items()})

    def origin(self):
        return pose_from_position_euler(self.center, self.orientation_center)


@dataclass(frozen=True)
class GroundTruth:
    x_opt: Pose
    y_opt: Pose
    positions: np.ndarray
    angles: np.ndarray
    workspace: Workspace = field(default_factory=Workspace)

    @property
    def robot_poses(self):
        return list(zip(self.positions, self.angles))

    def poses(self):
        return [pose_from_position_euler(p, w) for p, w in self.robot_poses]

    def as_dict(self):
        return {
            'X': {'R': self.x_opt.r.tolist(), 't': self.x_opt.t.tolist()},
            'Y': {'R': self.y_opt.r.tolist(), 't': self.y_opt.t.tolist()},
            'positions_mm': self.positions.tolist(),
            'euler_deg': self.angles.tolist(),
        }


def _triple(value, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (3,)).copy()
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidArgument(f'{name} must be non-negative')
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class NoiseConfig:
    """AU standard deviations (mm, deg) and EU gains for both channels.

    ``a_au_pos`` / ``a_au_rot`` add noise straight onto the reported robot
    pose A, for the source-data grid.
    """

    robot_au_pos: tuple = (0.0, 0.0, 0.0)
    robot_au_rot: tuple = (0.0, 0.0, 0.0)
    cam_au_pos: tuple = (0.0, 0.0, 0.0)
    cam_au_rot: tuple = (0.0, 0.0, 0.0)
    robot_eu_gain: float = 0.0
    cam_eu_gain: float = 0.0
    a_au_pos: tuple = (0.0, 0.0, 0.0)
    a_au_rot: tuple = (0.0, 0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        for name in ('robot_au_pos', 'robot_au_rot', 'cam_au_pos', 'cam_au_rot',
                     'a_au_pos', 'a_au_rot'):
            object.__setattr__(self, name, _triple(getattr(self, name), name))
        for name in ('robot_eu_gain', 'cam_eu_gain'):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise InvalidArgument(f'{name} must be non-negative')
            object.__setattr__(self, name, value)
        if int(self.seed) < 0:
            raise InvalidArgument('seed must be non-negative')
        object.__setattr__(self, 'seed', int(self.seed))

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise InvalidArgument(f'unknown noise setting(s): {", ".join(sorted(unknown))}')
        return cls(**mapping)

    def above_limits(self):
        """Names of the components configured beyond the documented injection ranges."""
        over = []
        checks = [
            ('robot_au_pos', max(self.robot_au_pos), ROBOT_LIMITS['pos']),
            ('robot_au_rot', max(self.robot_au_rot), ROBOT_LIMITS['rot']),
            ('robot_eu_gain', self.robot_eu_gain, ROBOT_LIMITS['eu']),
            ('cam_au_pos', max(self.cam_au_pos), CAMERA_LIMITS['pos']),
            ('cam_au_rot', max(self.cam_au_rot), CAMERA_LIMITS['rot']),
            ('cam_eu_gain', self.cam_eu_gain, CAMERA_LIMITS['eu']),
        ]
        for name, value, limit in checks:
            if value > limit:
                over.append(name)
        return over

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def generate_truth(n, workspace=None, seed=0, x_opt=None, y_opt=None):
    if n < 1:
        raise InvalidArgument('need at least one robot pose')
    if seed < 0:
        raise InvalidArgument('seed must be non-negative')
    workspace = workspace or Workspace()
    center = np.asarray(workspace.center)
    half = np.asarray(workspace.size) / 2.0
    o_center = np.asarray(workspace.orientation_center)
    o_half = np.asarray(workspace.orientation_half_range)
    positions = np.empty((n, 3))
    angles = np.empty((n, 3))
    for i in range(n):
        rng = np.random.default_rng([seed, i, 0])
        positions[i] = center + rng.uniform(-1.0, 1.0, 3) * half
        angles[i] = o_center + rng.uniform(-1.0, 1.0, 3) * o_half
    return GroundTruth(x_opt or TRUE_X, y_opt or TRUE_Y, positions, angles, workspace)


def wrap_degrees(angle):
    """Wrap angles in degrees to (-180, 180]."""
    return 180.0 - np.mod(180.0 - np.asarray(angle, dtype=float), 360.0)


def _perturb(rng, position, euler, pos_sigma, rot_sigma, gain, origin_pos, origin_euler, what, i):
    """AU draw plus EU bias; redraws when the result lands next to gimbal lock."""
    bias_pos = gain * (position - origin_pos)
    bias_rot = gain * wrap_degrees(euler - origin_euler)
    for _ in range(MAX_RESAMPLES):
        noisy_pos = position + rng.normal(0.0, pos_sigma) + bias_pos
        noisy_rot = euler + rng.normal(0.0, rot_sigma) + bias_rot
        if abs(noisy_rot[1]) <= GIMBAL_LIMIT:
            return noisy_pos, noisy_rot
        logger.warning('pose %d: %s pitch %.3f deg near gimbal lock, resampling',
                       i, what, noisy_rot[1])
    raise InvalidWorkspace(f'pose {i}: could not draw {what} noise away from gimbal lock')


def inject_uncertainty(gt, cfg):
    over = cfg.above_limits()
    if over:
        logger.warning('noise above the documented ranges: %s', ', '.join(over))
    x, y = gt.x_opt, gt.y_opt
    y_inv = y.inverse()
    ws_pos = np.asarray(gt.workspace.center)
    ws_rot = np.asarray(gt.workspace.orientation_center)
    cam_origin_pos, cam_origin_rot = position_euler(y_inv @ gt.workspace.origin() @ x)
    robot_sigma = (np.asarray(cfg.robot_au_pos), np.asarray(cfg.robot_au_rot))
    cam_sigma = (np.asarray(cfg.cam_au_pos), np.asarray(cfg.cam_au_rot))
    direct_sigma = (np.asarray(cfg.a_au_pos), np.asarray(cfg.a_au_rot))
    pairs = []
    for i, (p_opt, w_opt) in enumerate(gt.robot_poses):
        rng = np.random.default_rng([cfg.seed, i, 1])
        a = pose_from_position_euler(p_opt, w_opt)
        p_n, w_n = _perturb(rng, p_opt, w_opt, *robot_sigma, cfg.robot_eu_gain,
                            ws_pos, ws_rot, 'robot', i)
        b_true = y_inv @ pose_from_position_euler(p_n, w_n) @ x
        p_b, w_b = position_euler(b_true)
        p_c, w_c = _perturb(rng, p_b, w_b, *cam_sigma, cfg.cam_eu_gain,
                            cam_origin_pos, cam_origin_rot, 'camera', i)
        b = pose_from_position_euler(p_c, w_c)
        if any(direct_sigma[0]) or any(direct_sigma[1]):
            p_a, w_a = _perturb(rng, p_opt, w_opt, *direct_sigma, 0.0, ws_pos, ws_rot, 'A', i)
            a = pose_from_position_euler(p_a, w_a)
        pairs.append((a, b))
    return PosePairSet(tuple(pairs))


SCENARIOS = {
    'R-AU': dict(robot_au_pos=1.0, robot_au_rot=0.4),
    'C-AU': dict(cam_au_pos=0.5, cam_au_rot=0.2),
    'R-AU/C-AU': dict(robot_au_pos=1.0, robot_au_rot=0.4, cam_au_pos=0.5, cam_au_rot=0.2),
    'R-EU': dict(robot_eu_gain=0.004),
    'R-EU/C-AU': dict(robot_eu_gain=0.004, cam_au_pos=0.5, cam_au_rot=0.2),
    'R-AU-EU/C-AU': dict(robot_au_pos=1.0, robot_au_rot=0.4, robot_eu_gain=0.004,
                         cam_au_pos=0.5, cam_au_rot=0.2),
    'NONE': dict(),
}
SCENARIO_ALIASES = {'AU-HIGH': 'S-HHHH', 'AU-LOW': 'S-LLLL'}


def source_grid():
    """The sixteen source-data combinations keyed ``S-<A pos><A rot><B pos><B rot>``."""
    grid = {}
    for ap in 'HL':
        for ar in 'HL':
            for bp in 'HL':
                for br in 'HL':
                    grid[f'S-{ap}{ar}{bp}{br}'] = dict(
                        a_au_pos=SOURCE_LEVELS['A'][ap][0],
                        a_au_rot=SOURCE_LEVELS['A'][ar][1],
                        cam_au_pos=SOURCE_LEVELS['B'][bp][0],
                        cam_au_rot=SOURCE_LEVELS['B'][br][1],
                    )
    return grid


def scenario_names():
    return list(SCENARIOS) + list(source_grid()) + list(SCENARIO_ALIASES)


def scenario_config(name, seed=0):
    key = SCENARIO_ALIASES.get(name, name)
    settings = SCENARIOS.get(key)
    if settings is None:
        settings = source_grid().get(key)
    if settings is None:
        raise InvalidArgument(f'unknown scenario {name!r}')
    return NoiseConfig(seed=seed, **settings)


def ladder_config(step, steps=10, seed=0):
    """All six noise components scaled uniformly to ``step / steps`` of their maxima."""
    if not 0 <= step <= steps or steps < 1:
        raise InvalidArgument(f'ladder step {step} outside 0..{steps}')
    f = step / steps
    return NoiseConfig(
        robot_au_pos=f * ROBOT_LIMITS['pos'], robot_au_rot=f * ROBOT_LIMITS['rot'],
        robot_eu_gain=f * ROBOT_LIMITS['eu'],
        cam_au_pos=f * CAMERA_LIMITS['pos'], cam_au_rot=f * CAMERA_LIMITS['rot'],
        cam_eu_gain=f * CAMERA_LIMITS['eu'],
        seed=seed,
    )


def component_mix(kind, level=1.0, seed=0):
    """Robot AU with one component at ``level`` of its maximum and the other at a quarter of that."""
    major, minor = level, 0.25 * level
    if kind == 'rotation':
        pos, rot = minor, major
    elif kind == 'translation':
        pos, rot = major, minor
    else:
        raise InvalidArgument(f'component mix must be rotation or translation, got {kind!r}')
    return NoiseConfig(robot_au_pos=pos * ROBOT_LIMITS['pos'],
                       robot_au_rot=rot * ROBOT_LIMITS['rot'], seed=seed)


def synthesize(noise, n=100, seed=0, workspace=None, x_opt=None, y_opt=None):
    """Truth plus noisy pairs; ``noise`` is a scenario name or a NoiseConfig."""
    if isinstance(noise, str):
        cfg = scenario_config(noise, seed)
    else:
        cfg = replace(noise, seed=seed)
    gt = generate_truth(n, workspace, seed, x_opt, y_opt)
    return inject_uncertainty(gt, cfg), gt


def scenario(name, n=100, seed=0, workspace=None):
    pairs, _ = synthesize(name, n, seed, workspace)
    return pairs


def swap_translations(x, y):
    """Exchange the translations of X and Y, keeping their rotations."""
    return Pose(x.r, y.t), Pose(y.r, x.t)


def truth_digest(gt):
    h = hashlib.sha256()
    for arr in (gt.x_opt.r, gt.x_opt.t, gt.y_opt.r, gt.y_opt.t, gt.positions, gt.angles):
        h.update(np.ascontiguousarray(arr, dtype='<f8').tobytes())
    return h.hexdigest()
