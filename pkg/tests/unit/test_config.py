import json

import pytest

from wavekac.config import EXPERIMENTS, ConfigError, ExperimentConfig


class TestPresets(object):
    @pytest.mark.parametrize("experiment", EXPERIMENTS)
    def test_valid(self, experiment):
        for n in (2, 3):
            config = ExperimentConfig.preset(experiment, n)
            assert config.experiment == experiment
            assert config.validate() is config

    def test_local_zeros(self):
        config = ExperimentConfig.preset("local-zeros")
        assert config.schedule == [256]
        assert config.radii == [1.0, 10.0, 15.0, 40.0]
        assert config.h == 0.02
        assert config.replicas == 200
        assert config.tolerances["mean_rel"] == 0.02

    def test_local_crits_filters(self):
        config = ExperimentConfig.preset("local-crits")
        assert config.filters == ["value >= 0.5 and q is 2", "{0 2} contains q"]
        assert config.tolerances["three_way_rel"] == 0.03

    def test_three_dimensional(self):
        assert ExperimentConfig.preset("local-zeros", 3).n == 3
        assert ExperimentConfig.preset("torus-global-zeros", 3).n == 3

    def test_unknown(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.preset("nodal-bands")
        with pytest.raises(ConfigError):
            ExperimentConfig.preset("local-zeros", 4)


class TestValidate(object):
    @pytest.mark.parametrize("field,value", [
        ("kind", "disk"),
        ("n", 4),
        ("direction_mode", "random"),
        ("schedule", [0]),
        ("radii", [10.0, 5.0]),
        ("h", 0.0),
        ("replicas", 0),
        ("seed", -1),
        ("mc_samples", 0),
        ("workers", 0),
        ("tolerances", {"mean_rel": -1}),
        ("filters", [42]),
    ])
    def test_invalid(self, field, value):
        config = ExperimentConfig.preset("local-zeros")
        setattr(config, field, value)
        with pytest.raises(ConfigError):
            config.validate()


class TestSerialization(object):
    def test_round_trip(self, tmpdir):
        config = ExperimentConfig.preset("local-crits")
        path = str(tmpdir.join("config.json"))
        config.dump(path)
        assert ExperimentConfig.load(path) == config

    def test_load_merges_preset(self, tmpdir):
        path = tmpdir.join("config.json")
        path.write(json.dumps({"experiment": "l2-identity", "schedule": [50.0], "seed": 9}))
        config = ExperimentConfig.load(str(path))
        assert config.schedule == [50.0]
        assert config.seed == 9
        assert config.tolerances == {"parseval": 1e-12, "quadrature": 1e-10}

    def test_load_errors(self, tmpdir):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(str(tmpdir.join("missing.json")))
        bad = tmpdir.join("bad.json")
        bad.write("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(str(bad))
        no_id = tmpdir.join("no_id.json")
        no_id.write(json.dumps({"seed": 1}))
        with pytest.raises(ConfigError):
            ExperimentConfig.load(str(no_id))
        extra = tmpdir.join("extra.json")
        extra.write(json.dumps({"experiment": "l2-identity", "colour": "red"}))
        with pytest.raises(ConfigError):
            ExperimentConfig.load(str(extra))

    def test_from_dict(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict([1, 2])
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"seed": 1})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "l2-identity", "schedule": 5})

    def test_override(self):
        config = ExperimentConfig.preset("local-zeros")
        other = config.override(seed=3, workers=None, replicas=10)
        assert other.seed == 3
        assert other.replicas == 10
        assert other.workers == config.workers
        assert config.seed == 0
        with pytest.raises(ConfigError):
            config.override(replicas=0)

    def test_to_dict_is_a_copy(self):
        config = ExperimentConfig.preset("local-zeros")
        d = config.to_dict()
        d["options"]["mean_radius"] = 1.0
        assert config.options["mean_radius"] == 15.0

    def test_equality(self):
        assert ExperimentConfig.preset("gram-suite") == ExperimentConfig.preset("gram-suite")
        assert ExperimentConfig.preset("gram-suite") != ExperimentConfig.preset("kernel-suite")
        assert ExperimentConfig.preset("gram-suite") != "gram-suite"

    def test_numeric_dict(self):
        config = ExperimentConfig.preset("gram-suite").override(workers=4, out="elsewhere")
        d = config.numeric_dict()
        assert "workers" not in d
        assert "out" not in d
        assert d["seed"] == config.seed
        assert d == ExperimentConfig.preset("gram-suite").numeric_dict()
