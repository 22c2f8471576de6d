#!/usr/bin/env python3
"""
Configuration settings for the reliable-slicing simulator.

Configurations are JSON files with the sections of DEFAULT_CONFIG; every
omitted key keeps its default.
"""

import json
import logging
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from ..core.agent import AgentParams
from ..core.environment import EnvironmentParams
from ..core.reputation import AttackProfile, ReputationParams
from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

PROFILE_NAME = re.compile(r'^[A-Za-z0-9_-]+$')
MAX_SEED = 2 ** 64 - 1

# Three malicious BSs; ids 0-2 start inside the tie-broken committee.
DEFAULT_ATTACKS: Tuple[AttackProfile, ...] = tuple(
    AttackProfile.constant(bs_id, 0.5) for bs_id in (0, 1, 2)
)

DEFAULT_REPUTATION_PROFILES: Tuple[AttackProfile, ...] = (
    AttackProfile.constant(0, 0.0, name='p000'),
    AttackProfile.constant(0, 0.25, name='p025'),
    AttackProfile.constant(0, 0.5, name='p050'),
    AttackProfile(0, ((0, 0.0), (250, 0.5), (500, 0.1), (750, 0.4)), name='dynamic'),
)


@dataclass(frozen=True)
class ExperimentParams:
    """Run-level settings."""

    seed: int = 0
    output_dir: str = 'out'
    eval_episodes: int = 5
    trace: bool = True                # record a JSONL trajectory during evaluation
    max_workers: int = 3              # threads for matched-seed runs
    matched_seeds: Tuple[int, ...] = (0, 1, 2)

    def validate(self) -> None:
        checks = [('seed', self.seed)] + [('matched_seeds', s) for s in self.matched_seeds]
        for name, value in checks:
            if not 0 <= value <= MAX_SEED:
                raise ConfigurationError(f'experiment.{name}', f'{value} is not an unsigned 64-bit integer')
        if not self.output_dir:
            raise ConfigurationError('experiment.output_dir', 'must not be empty')
        if self.eval_episodes < 0:
            raise ConfigurationError('experiment.eval_episodes', 'must be non-negative')
        if self.max_workers < 1:
            raise ConfigurationError('experiment.max_workers', 'must be at least 1')


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, typed view of a configuration file."""

    environment: EnvironmentParams = field(default_factory=EnvironmentParams)
    agent: AgentParams = field(default_factory=AgentParams)
    reputation: ReputationParams = field(default_factory=ReputationParams)
    attacks: Tuple[AttackProfile, ...] = DEFAULT_ATTACKS
    reputation_profiles: Tuple[AttackProfile, ...] = DEFAULT_REPUTATION_PROFILES
    experiment: ExperimentParams = field(default_factory=ExperimentParams)

    def validate(self) -> 'ExperimentConfig':
        self.environment.validate()
        self.agent.validate()
        self.reputation.validate()
        self.experiment.validate()
        for section in ('attacks', 'reputation_profiles'):
            for index, profile in enumerate(getattr(self, section)):
                key = f'{section}[{index}]'
                if not 0 <= profile.bs_id < self.reputation.num_bs:
                    raise ConfigurationError(f'{key}.bs_id',
                                             f'{profile.bs_id} outside [0, {self.reputation.num_bs})')
                profile.validate(key)
        names = [p.name for p in self.reputation_profiles]
        for index, name in enumerate(names):
            if not PROFILE_NAME.match(name):
                raise ConfigurationError(f'reputation_profiles[{index}].name',
                                         'needs letters, digits, "_" or "-" only')
        if len(set(names)) != len(names):
            raise ConfigurationError('reputation_profiles', 'profile names must be unique')
        return self

    def with_overrides(self, seed: Optional[int] = None,
                       output_dir: Optional[str] = None) -> 'ExperimentConfig':
        """Copy with the command-line seed and output directory applied."""
        experiment = self.experiment
        if seed is not None:
            experiment = replace(experiment, seed=int(seed))
        if output_dir is not None:
            experiment = replace(experiment, output_dir=str(output_dir))
        return replace(self, experiment=experiment).validate()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'environment': _section_to_dict(self.environment),
            'agent': _section_to_dict(self.agent),
            'reputation': _section_to_dict(self.reputation),
            'attacks': [p.to_dict() for p in self.attacks],
            'reputation_profiles': [p.to_dict() for p in self.reputation_profiles],
            'experiment': _section_to_dict(self.experiment),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Build and validate a config; omitted keys keep their defaults."""
        if not isinstance(data, dict):
            raise ConfigurationError('<root>', 'configuration must be a JSON object')
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(sorted(unknown)[0], 'unknown configuration section')
        config = cls(
            environment=_section_from_dict(EnvironmentParams, data.get('environment', {}), 'environment'),
            agent=_section_from_dict(AgentParams, data.get('agent', {}), 'agent'),
            reputation=_section_from_dict(ReputationParams, data.get('reputation', {}), 'reputation'),
            attacks=_profiles_from_list(data.get('attacks'), 'attacks', DEFAULT_ATTACKS),
            reputation_profiles=_profiles_from_list(data.get('reputation_profiles'), 'reputation_profiles',
                                                    DEFAULT_REPUTATION_PROFILES),
            experiment=_section_from_dict(ExperimentParams, data.get('experiment', {}), 'experiment'),
        )
        return config.validate()


Section = TypeVar('Section')


def _section_to_dict(section: Any) -> Dict[str, Any]:
    out = {}
    for f in fields(section):
        value = getattr(section, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def _coerce(value: Any, default: Any, key: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(key, f'expected true or false, got {value!r}')
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigurationError(key, f'expected an integer, got {value!r}')
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(key, f'expected a number, got {value!r}')
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(key, f'expected a string, got {value!r}')
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigurationError(key, f'expected a list, got {value!r}')
        return tuple(_coerce(item, 0, f'{key}[{i}]') for i, item in enumerate(value))
    return value


def _section_from_dict(cls: Type[Section], data: Any, section: str) -> Section:
    if not isinstance(data, dict):
        raise ConfigurationError(section, 'expected a JSON object')
    defaults = cls()
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigurationError(f'{section}.{key}', 'unknown key')
    values = {key: _coerce(value, getattr(defaults, key), f'{section}.{key}')
              for key, value in data.items()}
    return replace(defaults, **values)


def _profiles_from_list(data: Any, section: str,
                        default: Tuple[AttackProfile, ...]) -> Tuple[AttackProfile, ...]:
    if data is None:
        return default
    if not isinstance(data, list):
        raise ConfigurationError(section, 'expected a list of {bs_id, schedule} objects')
    profiles = []
    for index, entry in enumerate(data):
        key = f'{section}[{index}]'
        if not isinstance(entry, dict):
            raise ConfigurationError(key, 'expected a JSON object')
        unknown = set(entry) - {'bs_id', 'schedule', 'name'}
        if unknown:
            raise ConfigurationError(f'{key}.{sorted(unknown)[0]}', 'unknown key')
        if 'bs_id' not in entry or 'schedule' not in entry:
            raise ConfigurationError(key, 'needs bs_id and schedule')
        bs_id = _coerce(entry['bs_id'], 0, f'{key}.bs_id')
        if not isinstance(entry['schedule'], list):
            raise ConfigurationError(f'{key}.schedule', 'expected a list of {from_slot, prob} objects')
        schedule = []
        for j, point in enumerate(entry['schedule']):
            point_key = f'{key}.schedule[{j}]'
            if not isinstance(point, dict) or set(point) != {'from_slot', 'prob'}:
                raise ConfigurationError(point_key, 'expected {from_slot, prob}')
            schedule.append((_coerce(point['from_slot'], 0, f'{point_key}.from_slot'),
                             _coerce(point['prob'], 0.0, f'{point_key}.prob')))
        name = _coerce(entry.get('name', ''), '', f'{key}.name')
        profiles.append(AttackProfile(bs_id=bs_id, schedule=tuple(schedule), name=name))
    return tuple(profiles)


DEFAULT_CONFIG: Dict[str, Any] = ExperimentConfig().to_dict()


def load_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Load and validate a configuration file.

    Args:
        config_path: Path to a JSON configuration; None gives the defaults

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigurationError: missing file, malformed JSON, unknown key, wrong
            type or out-of-range value
    """
    if config_path is None:
        return ExperimentConfig().validate()

    config_file = Path(config_path)
    if not config_file.is_file():
        raise ConfigurationError('config', f'file {config_path} not found')

    text = config_file.read_text(encoding='utf-8')
    if not text.strip():
        logger.info("Config file %s is empty, using defaults", config_path)
        return ExperimentConfig().validate()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError('config', f'{config_path} is not valid JSON: {e}')
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, config_path: Union[str, Path]) -> Path:
    """Write a configuration as indented JSON."""
    config_file = Path(config_path)
    config_file.parent.mkdir(parents=True, exist_ok=True)
    with open(config_file, 'w', encoding='utf-8') as f:
        json.dump(config.to_dict(), f, indent=2, ensure_ascii=False)
    logger.info("Saved configuration to %s", config_file)
    return config_file
