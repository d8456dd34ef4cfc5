from fractions import Fraction
from pathlib import Path

import pytest

from unitrootmdp.config import (
    SEED_ENV_VAR,
    ExperimentConfig,
    configure,
    get_global_config,
    load_config,
)
from unitrootmdp.exceptions import ConfigurationError, ScheduleInvalidError
from unitrootmdp.models import ENUMERATION_GUARD, InitPolicy, NoiseKind, StatisticKind


def test_defaults_are_valid():
    """Test that the built-in configuration validates and builds a schedule."""
    config = ExperimentConfig(workers=1)
    assert config.master_seed == 0
    assert config.m_max is None
    assert config.lag_bound() == 1
    assert config.noise_model().kind == NoiseKind.NORMAL
    schedule = config.build_schedule()
    assert len(schedule.points) == 3
    assert [point.m for point in schedule.points] == [6, 8, 9]
    assert all(point.m > 2 * config.lag_bound() for point in schedule.points)


def test_with_options_ignores_none():
    """Test that None overrides keep the current values."""
    config = ExperimentConfig(workers=1, master_seed=3)
    updated = config.with_options(master_seed=None, replicates=50)
    assert updated.master_seed == 3
    assert updated.replicates == 50
    assert config.replicates == 1000


def test_with_options_validates():
    with pytest.raises(ValueError):
        ExperimentConfig(workers=1).with_options(replicates=0)


def test_run_id_tracks_computed_fields():
    """Test that the run id changes with the seed but not with execution settings."""
    base = ExperimentConfig(workers=1)
    assert base.run_id() == ExperimentConfig(workers=1).run_id()
    assert len(base.run_id()) == 12
    assert base.run_id() == base.with_options(workers=8, output_dir=Path('elsewhere')).run_id()
    assert base.run_id() != base.with_options(master_seed=1).run_id()


def test_reference_validation():
    """Test cross-field checks of the configuration."""
    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, m_max=5, lags=[0, 6])

    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, kind=StatisticKind.LINEAR)

    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, m_max=5, coefficients=[1.0, 0.0])

    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, r_grid=[1.0, 1.0])

    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, r_grid=[0.0])

    with pytest.raises(ValueError):
        ExperimentConfig(
            workers=1,
            noise={'kind': 'rademacher'},
            init_policy=InitPolicy.EXACT_GAUSSIAN,
        )

    with pytest.raises(ValueError):
        ExperimentConfig(workers=1, unknown_field=1)


def test_lag_bound_follows_the_statistic():
    """Test that M defaults to the largest lag the run uses and can be pinned."""
    assert ExperimentConfig(workers=1, lags=[0, 3]).lag_bound() == 3
    assert ExperimentConfig(workers=1, lags=[0]).lag_bound() == 1
    linear = ExperimentConfig(workers=1, kind=StatisticKind.LINEAR, coefficients=[0.5, 0.5])
    assert linear.lag_bound() == 1
    assert ExperimentConfig(workers=1, m_max=4).lag_bound() == 4


def test_wide_lags_reject_the_default_schedule():
    """Test that M = 5 cannot run on a schedule whose first point has m = 6."""
    config = ExperimentConfig(workers=1, m_max=5)
    with pytest.raises(ScheduleInvalidError):
        config.build_schedule()


def test_default_block_guard_covers_the_enumeration_guard():
    config = ExperimentConfig(workers=1)
    assert config.verify.block_guard == ENUMERATION_GUARD


def test_invalid_schedule_is_reported_on_build():
    config = ExperimentConfig(workers=1, schedule={'beta': 0.2, 'gamma_b': 0.2})
    with pytest.raises(ScheduleInvalidError):
        config.build_schedule()


def test_explicit_schedule_points():
    config = ExperimentConfig(
        workers=1,
        schedule={
            'points': [
                {'n': 100, 'theta': 0.8, 'b': 1.5, 'm': 11},
                {'n': 200, 'theta': 0.85, 'b': 1.6, 'm': 12},
            ]
        },
    )
    schedule = config.build_schedule()
    assert [point.n for point in schedule.points] == [100, 200]


class TestGlobalConfig:
    def test_configure_sets_global_defaults(self):
        """Test that configure changes what load_config starts from."""
        configure(master_seed=11, replicates=5000)
        assert get_global_config().master_seed == 11
        config = load_config(environ={})
        assert config.master_seed == 11
        assert config.replicates == 5000

    def test_file_overrides_global_defaults(self, tmp_path):
        """Test that file keys win over configure() while other globals survive."""
        configure(master_seed=11, replicates=5000)
        path = tmp_path / 'run.yaml'
        path.write_text('replicates: 20\n')
        config = load_config(path, environ={})
        assert config.replicates == 20
        assert config.master_seed == 11

    def test_configure_rejects_invalid_values(self):
        with pytest.raises(ConfigurationError):
            configure(replicates=-1)
        assert get_global_config().replicates == 1000


def test_load_config_merges_nested_sections(tmp_path):
    """Test that a YAML file overrides individual nested keys."""
    path = tmp_path / 'run.yaml'
    path.write_text(
        'noise:\n'
        '  kind: discrete\n'
        '  support: [-1, 0, 1]\n'
        "  probabilities: ['1/4', '1/2', '1/4']\n"
        'schedule:\n'
        '  beta: 0.1\n'
        'master_seed: 4\n'
    )
    config = load_config(path, environ={})
    assert config.master_seed == 4
    assert config.schedule.beta == 0.1
    assert config.schedule.gamma_b == 0.05
    model = config.noise_model()
    assert model.probabilities == (Fraction(1, 4), Fraction(1, 2), Fraction(1, 4))


def test_environment_seed_overrides_file(tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text('master_seed: 4\n')
    config = load_config(path, environ={SEED_ENV_VAR: '21'})
    assert config.master_seed == 21


def test_environment_seed_from_os_environ(monkeypatch):
    monkeypatch.setenv(SEED_ENV_VAR, '33')
    assert load_config().master_seed == 33


def test_environment_seed_must_be_integer():
    with pytest.raises(ConfigurationError):
        load_config(environ={SEED_ENV_VAR: 'seven'})


@pytest.mark.parametrize(
    'content',
    [
        'replicates: [unclosed\n',
        '- just\n- a list\n',
        'replicates: -5\n',
        'noise:\n  kind: cauchy\n',
        'no_such_key: 1\n',
    ],
)
def test_malformed_config_files(tmp_path, content):
    """Test that unreadable, non-mapping and invalid files raise ConfigurationError."""
    path = tmp_path / 'bad.yaml'
    path.write_text(content)
    with pytest.raises(ConfigurationError):
        load_config(path, environ={})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / 'missing.yaml', environ={})


def test_empty_config_file(tmp_path):
    path = tmp_path / 'empty.yaml'
    path.write_text('')
    assert load_config(path, environ={}).replicates == 1000
