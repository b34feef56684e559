import argparse
import logging

import pytest

from modules.Config import SETTINGS, Config
from modules.CustomExceptions import ConfigError


def _options(**values):
    defaults = {key: None for key in SETTINGS}
    defaults.update(params=None, loglevel=None, logs=None, threads=None, timings=None)
    defaults.update(values)
    return argparse.Namespace(**defaults)


def test_defaults():
    config = Config(options=_options())
    cfg = config.registration_config()
    assert cfg.correspondence_mode == 'confidence_ot'
    assert cfg.hp.tau == 0.01 and cfg.hp.lambda_ == 3.0
    assert config.threads == 1 and config.record_timings is False
    assert config.log_level == logging.INFO


def test_params_file_then_flags(tmp_path):
    params = tmp_path / "params.yaml"
    params.write_text("tau: 0.05\nlambda: 0\nmode: argmax\ndescriptor_scales: [1.0, 3.0]\nloglevel: debug\n"
                      "threads: 4\n")
    config = Config(options=_options(params=str(params), mode='softmax'))
    cfg = config.registration_config()
    assert cfg.hp.tau == 0.05
    assert cfg.hp.lambda_ == 0.0
    assert cfg.correspondence_mode == 'softmax'
    assert cfg.descriptor_scales == (1.0, 3.0)
    assert config.threads == 4
    assert config.log_level == logging.DEBUG


def test_flag_values_are_cast():
    config = Config(options=_options(descriptor_scales='1,2,4', normalize_scale=False, warm_start=False))
    cfg = config.registration_config()
    assert cfg.descriptor_scales == (1.0, 2.0, 4.0)
    assert cfg.normalize_scale is False and cfg.warm_start_refinement is False


def test_unknown_key(tmp_path):
    params = tmp_path / "params.json"
    params.write_text('{"temperature": 0.1}')
    with pytest.raises(ConfigError, match="temperature"):
        Config(options=_options(params=str(params)))


def test_unreadable_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        Config(options=_options(params=str(tmp_path / "absent.yaml")))
    params = tmp_path / "list.yaml"
    params.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        Config(options=_options(params=str(params)))


def test_invalid_values():
    with pytest.raises(ConfigError):
        Config(options=_options(tau=-1.0)).hyper_params()
    with pytest.raises(ConfigError):
        Config(options=_options(n_coarse=4096)).registration_config()
    with pytest.raises(ConfigError):
        Config(options=_options(sinkhorn_iters='two'))


def test_log_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    Config(options=_options(logs=str(log_file), loglevel='warning'))
    logging.getLogger("modules.tests").warning("written to file")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "written to file" in log_file.read_text()
