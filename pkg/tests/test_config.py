import json

import numpy as np
import pytest

from cointegra.config import build_levy, build_measure, load_config, measure_to_config, parse_config
from cointegra.errors import ConfigError
from cointegra.fixtures import NAMES, fixture_text
from cointegra.mcarma import msdde_from_mcarma
from cointegra.config import build_mcarma
from cointegra.measure import laplace


def test_every_fixture_parses():
    for name in NAMES:
        cfg = parse_config(fixture_text(name), name)
        assert cfg.task.seed == 0


def test_json_syntax_error_has_line_and_column():
    with pytest.raises(ConfigError, match=r"line 2, column"):
        parse_config('{"model":\n  {,}}')


def test_unknown_key_is_named():
    text = json.dumps({"model": {"measure": {"dim": 1, "colour": 3}}})
    with pytest.raises(ConfigError, match=r"model\.measure\.colour"):
        parse_config(text)


def test_model_needs_exactly_one_kind():
    both = {"measure": {"dim": 1}, "var": {"dim": 1, "p": 1, "Gamma": [[[0.5]]]}}
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(json.dumps({"model": both}))


def test_negative_step_rejected():
    with pytest.raises(ConfigError, match=r"task\.step"):
        parse_config(json.dumps({"model": {"measure": {"dim": 1}}, "task": {"step": -1}}))


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.json")


def test_shape_mismatch_reported():
    cfg = parse_config(json.dumps({"model": {"measure": {"dim": 2, "atoms": [{"t": 0, "A": [[1.0]]}]}}}))
    with pytest.raises(ConfigError, match=r"atoms\[0\]"):
        build_measure(cfg.model.measure)


def test_measure_round_trip_through_config():
    cfg = parse_config(fixture_text("mcarma"))
    m = msdde_from_mcarma(build_mcarma(cfg.model.mcarma))
    back = build_measure(parse_config(json.dumps({"model": {"measure": measure_to_config(m)}})).model.measure)
    for z in (0.5, 1 + 2j):
        np.testing.assert_allclose(laplace(back, z), laplace(m, z), atol=1e-14)


def test_levy_config_with_jumps():
    cfg = parse_config(
        json.dumps(
            {
                "model": {"measure": {"dim": 1}},
                "task": {"levy": {"jump_rate": 1.5, "jumps": {"kind": "gaussian", "mean": [0.0], "cov": [[4.0]]}}},
            }
        )
    )
    model = build_levy(cfg.task.levy, 1)
    assert model.sigma[0, 0] == pytest.approx(1.0 + 1.5 * 4.0)
