"""
Config Module

This module handles the configuration settings of a command-line run.
It initializes default values, loads an optional parameter file (YAML or JSON) and lets explicit command-line flags
override both, in that order.

Classes:
    Config: Manages the run's configuration settings.

Usage Example:
    config = Config(options=args)
    cfg = config.registration_config()
"""

import yaml
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import argparse

from modules.CustomExceptions import ConfigError
from modules.core.HyperParams import HyperParams
from modules.pipeline.Registration import RegistrationConfig

LOG_FORMAT = '%(asctime)s level=%(levelname)s logger=%(name)s %(message)s'


def _scales(value: Any):
    if isinstance(value, str):
        value = [item for item in value.split(',') if item.strip()]
    return tuple(float(item) for item in value)


def _flag(value: Any) -> bool:
    if isinstance(value, str):
        if value.lower() in ('1', 'true', 'yes', 'on'):
            return True
        if value.lower() in ('0', 'false', 'no', 'off'):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return bool(value)


@dataclass(frozen=True)
class Setting:
    """One configurable value: where it goes, how it is parsed and what the flag help says."""
    target: str
    field: str
    cast: Callable[[Any], Any]
    help: str


# Keys are the flag names with '-' replaced by '_' (also the parameter file keys)
HYPER_PARAM_SETTINGS: Dict[str, Setting] = {
    'tau': Setting('hp', 'tau', float, 'entropic temperature'),
    'lambda': Setting('hp', 'lambda_', float, 'semantic prior weight'),
    'alpha_g': Setting('hp', 'alpha_g', float, 'geometric RBF scale (inverse squared normalized units)'),
    'alpha_f': Setting('hp', 'alpha_f', float, 'semantic RBF scale'),
    'eps_sem': Setting('hp', 'eps_sem', float, 'stability constant of the semantic logarithm'),
    'sinkhorn_iters': Setting('hp', 'sinkhorn_iters', int, 'Sinkhorn iterations'),
    'refine_iters': Setting('hp', 'refine_iters', int, 'outer refinement iterations'),
    'conf_iters': Setting('hp', 'conf_iters', int, 'confidence fixed-point iterations per phase'),
    'gamma_cycl': Setting('hp', 'gamma_cycl', float, 'cycle loss weight'),
    'gamma_pose': Setting('hp', 'gamma_pose', float, 'pose loss weight'),
    'gamma_sem': Setting('hp', 'gamma_sem', float, 'semantic loss weight'),
    'gamma_conf': Setting('hp', 'gamma_conf', float, 'confidence loss weight'),
    'z_floor': Setting('hp', 'z_floor', float, 'lower clamp of the pseudo-confidence labels'),
    'conf_floor': Setting('hp', 'conf_floor', float, 'mean confidence below which marginals become uniform'),
    'bce_clamp': Setting('hp', 'bce_clamp', float, 'clamp of the BCE arguments'),
    'position_weight': Setting('hp', 'position_weight', float, 'weight of the positional prior'),
}

REGISTRATION_SETTINGS: Dict[str, Setting] = {
    'n_fine': Setting('cfg', 'n_fine', int, 'points kept per cloud'),
    'n_coarse': Setting('cfg', 'n_coarse', int, 'farthest-point subset size of the coarse phase'),
    'mode': Setting('cfg', 'correspondence_mode', str, 'correspondence mode'),
    'seed': Setting('cfg', 'seed', int, 'subsampling seed'),
    'normalize_scale': Setting('cfg', 'normalize_scale', _flag, 'normalize the mean cloud radius to 1'),
    'conf_init': Setting('cfg', 'conf_init', float, 'initial uniform confidence'),
    'descriptor_k': Setting('cfg', 'descriptor_k', int, 'descriptor neighbourhood size'),
    'descriptor_scales': Setting('cfg', 'descriptor_scales', _scales, 'comma-separated descriptor scale multipliers'),
    'nn_method': Setting('cfg', 'nn_method', str, 'nearest neighbour search of the Chamfer kernel'),
    'warm_start': Setting('cfg', 'warm_start_refinement', _flag, 'start refinements from the previous confidences'),
    'rotation_search': Setting('cfg', 'rotation_search', str, 'rotation group searched around the descriptor pose'),
    'search_iters': Setting('cfg', 'search_iters', int, 'positional iterations tracking each rotation hypothesis'),
    'max_fine_iters': Setting('cfg', 'max_fine_iters', int, 'iteration cap of the fine phase and of each refinement'),
    'pose_tolerance': Setting('cfg', 'pose_tolerance', float, 'convergence threshold on the pose update'),
    'symmetric_transport': Setting('cfg', 'symmetric_transport', _flag, 'order-independent Sinkhorn scaling'),
}

SETTINGS: Dict[str, Setting] = {**HYPER_PARAM_SETTINGS, **REGISTRATION_SETTINGS}


class Config:
    """
    Manages a run's configuration settings.

    Attributes:
        parsed_params (Dict[str, Any]): The parsed parameter file.
        values (Dict[str, Any]): Resolved setting values keyed like :data:`SETTINGS`.
        log_level (int): Logging level.
        log_filename (Optional[str]): Log file, None for stderr.
        threads (int): Worker threads of the benchmark.
        record_timings (bool): Record wall-clock seconds in reports.
    """
    DEFAULT_LOG_LEVEL = logging.INFO
    DEFAULT_LOG_FILENAME: Optional[str] = None
    DEFAULT_THREADS: int = 1
    DEFAULT_HYPER_PARAMS = HyperParams()
    DEFAULT_REGISTRATION = RegistrationConfig()

    def __init__(self, *, options: argparse.Namespace):
        """
        Initializes the run configuration from defaults, the parameter file and the command-line flags.

        :param options: Parsed command-line options.
        :type options: argparse.Namespace
        :raises ConfigError: Unreadable parameter file, unknown key or invalid value.
        """
        self.set_defaults()

        if getattr(options, 'params', None):
            self.load_params(options.params)

        self.setup_logging(options)
        self.set_options(options)

    def set_defaults(self) -> None:
        """Sets default values for all attributes."""
        self.parsed_params: Dict[str, Any] = {}
        self.log_level: int = self.DEFAULT_LOG_LEVEL
        self.log_filename: Optional[str] = self.DEFAULT_LOG_FILENAME
        self.threads: int = self.DEFAULT_THREADS
        self.record_timings: bool = False

        self.values: Dict[str, Any] = {}
        for key, setting in SETTINGS.items():
            source = self.DEFAULT_HYPER_PARAMS if setting.target == 'hp' else self.DEFAULT_REGISTRATION
            self.values[key] = getattr(source, setting.field)

    def load_params(self, params_file_path: str) -> None:
        """
        Loads settings from a YAML or JSON file whose keys mirror the command-line flags.

        :param params_file_path: Parameter file path.
        :type params_file_path: str
        """
        try:
            with open(params_file_path, 'r', encoding='utf-8') as params_file:
                parsed = yaml.safe_load(params_file)
        except OSError as e:
            raise ConfigError(f"cannot read parameter file {params_file_path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"parameter file {params_file_path} is not valid YAML/JSON: {e}") from e

        if parsed is None:
            parsed = {}
        if not isinstance(parsed, dict):
            raise ConfigError(f"parameter file {params_file_path} must hold a mapping")
        self.parsed_params = parsed

        for key, value in parsed.items():
            if key in ('loglevel', 'logs', 'threads', 'timings'):
                continue
            self._set_value(str(key), value, f"parameter file {params_file_path}")

    def setup_logging(self, options: argparse.Namespace) -> None:
        """
        Initializes logging from the flags, falling back on the parameter file.

        :param options: Parsed command-line options.
        :type options: argparse.Namespace
        """
        loglevel = getattr(options, 'loglevel', None) or self.parsed_params.get('loglevel', 'info')
        match str(loglevel).lower():
            case 'error':
                self.log_level = logging.ERROR
            case 'warning':
                self.log_level = logging.WARNING
            case 'info':
                self.log_level = logging.INFO
            case 'debug':
                self.log_level = logging.DEBUG
            case _:
                self.log_level = logging.INFO

        self.log_filename = getattr(options, 'logs', None) or self.parsed_params.get('logs')

        if self.log_filename:
            try:
                os.makedirs(os.path.dirname(self.log_filename), exist_ok=True)
            except FileNotFoundError:
                if os.path.dirname(self.log_filename):
                    raise
            logging.basicConfig(filename=self.log_filename, encoding='utf-8', level=self.log_level,
                                format=LOG_FORMAT, force=True)
        else:
            logging.basicConfig(stream=sys.stderr, level=self.log_level, format=LOG_FORMAT, force=True)

    def _set_value(self, key: str, value: Any, origin: str) -> None:
        """
        Helper function to set one setting with its type conversion.

        :param key: Setting name, as in :data:`SETTINGS`.
        :param value: Raw value.
        :param origin: Where the value comes from, for error messages.
        """
        if key not in SETTINGS:
            raise ConfigError(f"unknown setting {key!r} in {origin}")
        try:
            self.values[key] = SETTINGS[key].cast(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value {value!r} for {key} in {origin}: {e}") from e

    def set_options(self, options: argparse.Namespace) -> None:
        """
        Sets options from explicit command-line flags (those not left at None).

        :param options: Parsed command-line options.
        :type options: argparse.Namespace
        """
        for key in SETTINGS:
            value = getattr(options, key, None)
            if value is not None:
                self._set_value(key, value, "command line")

        threads = getattr(options, 'threads', None)
        self.threads = int(threads if threads is not None else self.parsed_params.get('threads', self.threads))
        timings = getattr(options, 'timings', None)
        self.record_timings = bool(timings if timings is not None else self.parsed_params.get('timings', False))

    def hyper_params(self) -> HyperParams:
        values = {setting.field: self.values[key] for key, setting in HYPER_PARAM_SETTINGS.items()}
        try:
            return HyperParams(**values)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def registration_config(self) -> RegistrationConfig:
        values = {setting.field: self.values[key] for key, setting in REGISTRATION_SETTINGS.items()}
        try:
            return RegistrationConfig(hp=self.hyper_params(), **values)
        except ValueError as e:
            raise ConfigError(str(e)) from e
