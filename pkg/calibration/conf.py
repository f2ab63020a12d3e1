"""Configuration layering for the commands.

Lowest precedence first: ``settings.CALIBRATION``, a config file (``--config``
or the ``CALIBRATION_CONFIG`` environment variable), ``--set key=value``
overrides, then explicit command-line flags.
"""
import copy
import json
import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

from django.conf import settings

from . import synth
from .benchmark import CampaignSpec
from .exceptions import FormatError, InvalidArgument
from .solvers import SolverConfig

logger = logging.getLogger(__name__)


def load_config_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidArgument(f'cannot read config file {path}: {exc.strerror}')
    if path.suffix.lower() == '.toml':
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f'{path.name}: {exc}')
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f'{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}')
    if not isinstance(doc, dict):
        raise FormatError(f'{path.name}: top level must be an object')
    return doc


def merge(base, update):
    """Recursive dict merge; ``update`` wins, nested dicts are merged key by key."""
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _literal(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(mapping, overrides):
    """Apply ``key.sub=value`` strings; values are read as JSON literals when they parse."""
    out = copy.deepcopy(mapping)
    for item in overrides or ():
        key, sep, raw = item.partition('=')
        if not sep or not key.strip():
            raise InvalidArgument(f'override must look like key=value, got {item!r}')
        *parents, leaf = key.strip().split('.')
        node = out
        for part in parents:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise InvalidArgument(f'override {key!r} descends into a non-table value')
            node = child
        node[leaf] = _literal(raw.strip())
    return out


def resolve(config_path=None, overrides=()):
    config = copy.deepcopy(settings.CALIBRATION)
    path = config_path or settings.CALIBRATION_CONFIG
    if path:
        logger.info('reading config file %s', path)
        config = merge(config, load_config_file(path))
    return apply_overrides(config, overrides)


def _flags(flags):
    return {k: v for k, v in flags.items() if v is not None}


def solver_config(config=None, **flags):
    config = config if config is not None else resolve()
    return SolverConfig.from_mapping({**config.get('solver', {}), **_flags(flags)})


def workspace(config=None, name=None):
    """Named preset (edge lengths from the ``workspaces`` table) or the ``workspace`` table."""
    config = config if config is not None else resolve()
    if name:
        edges = config.get('workspaces', {})
        if name not in edges:
            raise InvalidArgument(f'unknown workspace preset {name!r}; expected one of '
                                  f'{sorted(edges)}')
        edge = float(edges[name])
        return synth.Workspace(size=(edge, edge, edge))
    table = config.get('workspace')
    return synth.Workspace.from_mapping(table) if table else synth.Workspace()


def noise_config(config=None, scenario=None, seed=0):
    """A named scenario when given, else the ``noise`` table, else noise-free."""
    config = config if config is not None else resolve()
    if scenario:
        return synth.scenario_config(scenario, seed)
    table = config.get('noise')
    if table:
        return synth.NoiseConfig.from_mapping({**table, 'seed': seed})
    return synth.NoiseConfig(seed=seed)


def _scenario_entry(entry):
    if isinstance(entry, str):
        return entry
    if isinstance(entry, dict):
        return synth.NoiseConfig.from_mapping(entry)
    raise FormatError(f'scenario entries must be names or noise tables, got {entry!r}')


def campaign_spec(config=None, spec_path=None, **flags):
    config = config if config is not None else resolve()
    values = dict(config.get('campaign', {}))
    if spec_path:
        values = merge(values, load_config_file(spec_path))
    values.update(_flags(flags))
    known = {'scenarios', 'methods', 'trials', 'n_pairs', 'seed0', 'workspace',
             'degraded_threshold'}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidArgument(f'unknown campaign setting(s): {", ".join(unknown)}')
    if 'scenarios' in values:
        values['scenarios'] = tuple(_scenario_entry(s) for s in values['scenarios'])
    if 'methods' in values:
        values['methods'] = tuple(values['methods'])
    ws = values.pop('workspace', None)
    if isinstance(ws, str):
        values['workspace'] = workspace(config, ws)
    elif isinstance(ws, dict):
        values['workspace'] = synth.Workspace.from_mapping(ws)
    for key, cast in (('trials', int), ('n_pairs', int), ('seed0', int),
                      ('degraded_threshold', float)):
        if key in values:
            try:
                values[key] = cast(values[key])
            except (TypeError, ValueError):
                raise InvalidArgument(f'campaign setting {key}={values[key]!r} is not a number')
    return CampaignSpec(**values)
