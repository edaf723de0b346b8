import json

import pytest

from seqsemi.config import (
    CHECK_NAMES,
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    load_config,
    parse_config,
    reference_config_path,
)


def _base_dict(**overrides):
    doc = {
        "grid": {"horizon": 1.0, "base_steps": 16},
        "noise": [{"kind": "brownian", "vol": 0.5}],
        "ensemble": {"scenarios": 4, "master_seed": 7},
        "checks": ["linearity"],
    }
    doc.update(overrides)
    return doc


class TestParsing:
    def test_minimal_config_fills_defaults(self):
        cfg = parse_config(json.dumps(_base_dict()))
        assert cfg.integrand.family == "constant"
        assert cfg.partitions.kind == "dyadic"
        assert cfg.thresholds.ucp_threshold == 0.02
        assert cfg.thresholds.slack == 1.25
        assert cfg.thresholds.node_tol == 1e-10

    def test_unknown_top_level_field_rejected(self):
        with pytest.raises(ConfigError, match="extra_field"):
            parse_config(json.dumps(_base_dict(extra_field=1)))

    def test_unknown_nested_field_rejected(self):
        doc = _base_dict()
        doc["grid"]["typo_steps"] = 3
        with pytest.raises(ConfigError):
            parse_config(json.dumps(doc))

    def test_negative_horizon_rejected(self):
        doc = _base_dict()
        doc["grid"]["horizon"] = -1.0
        with pytest.raises(ConfigError, match="horizon"):
            parse_config(json.dumps(doc))

    def test_unknown_check_rejected(self):
        with pytest.raises(ConfigError, match="unknown checks"):
            parse_config(json.dumps(_base_dict(checks=["nonsense"])))

    def test_duplicate_checks_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(json.dumps(_base_dict(checks=["fubini", "fubini"])))

    def test_integrand_coordinate_must_hit_a_noise_coord(self):
        doc = _base_dict(integrand={"family": "constant", "coordinate": 3})
        with pytest.raises(ConfigError, match="coordinate"):
            parse_config(json.dumps(doc))

    def test_drift_requires_rate_function(self):
        with pytest.raises(ConfigError, match="rate_function"):
            parse_config(json.dumps(_base_dict(noise=[{"kind": "drift"}])))

    def test_rate_function_shape_validated(self):
        bad = {"kind": "drift", "rate_function": {"times": [0.5], "values": [1.0]}}
        with pytest.raises(ConfigError, match="start at time 0"):
            parse_config(json.dumps(_base_dict(noise=[bad])))

    def test_malformed_json_reports_position(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("{not json")

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.json")


class TestOverridesAndBundles:
    def test_apply_overrides_replaces_ensemble_fields(self):
        cfg = parse_config(json.dumps(_base_dict()))
        out = apply_overrides(cfg, seed=99, scenarios=12)
        assert out.ensemble.master_seed == 99
        assert out.ensemble.scenarios == 12
        assert cfg.ensemble.master_seed == 7

    def test_apply_overrides_noop(self):
        cfg = parse_config(json.dumps(_base_dict()))
        assert apply_overrides(cfg) is cfg

    def test_reference_configs_are_valid(self):
        for name in ("ito_bracket", "riemann", "identities", "see_heat"):
            path = reference_config_path(name)
            cfg = parse_config(path.read_text(encoding="utf-8"))
            assert isinstance(cfg, ExperimentConfig)

    def test_unknown_reference_config(self):
        with pytest.raises(ConfigError, match="no bundled config"):
            reference_config_path("nope")

    def test_registry_is_stable(self):
        assert len(CHECK_NAMES) == 15
        assert "riemann_convergence" in CHECK_NAMES
        assert "fubini" in CHECK_NAMES
